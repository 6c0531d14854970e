"""Double dark resonances in four-level tripod atoms (metastable helium)."""

__version__ = "0.1.0"
