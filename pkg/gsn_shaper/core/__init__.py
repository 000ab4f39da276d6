"""Differentiable substrate: tensors, networks and distributions."""
