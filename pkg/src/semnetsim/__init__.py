"""Recovery simulations for individual semantic networks."""
