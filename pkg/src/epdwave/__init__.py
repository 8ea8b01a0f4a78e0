"""Spectral simulation of the 2-D wave equation with scale-invariant damping."""
