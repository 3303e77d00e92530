"""abnn-lab: Bayesian normalization layers retrofitted onto pretrained networks."""
