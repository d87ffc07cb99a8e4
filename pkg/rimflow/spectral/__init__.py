from rimflow.spectral.models import GridField, Lattice, Params, SpectralField, get_lattice

__all__ = ["GridField", "Lattice", "Params", "SpectralField", "get_lattice"]
