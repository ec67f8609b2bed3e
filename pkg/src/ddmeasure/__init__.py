"""Decision diagrams for sampling shallow Pauli measurement bases."""

__version__ = "0.1.0"
