"""Second-order representations of rational S-cones and their duals."""
