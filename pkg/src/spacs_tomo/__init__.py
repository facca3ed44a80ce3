"""Classical model of photon-added coherent light: heralded Monte Carlo, homodyne tomography, Wigner functions."""
__version__ = "0.1.0"
