"""Gas transportation and storage optimization via MISOCP relaxations."""

__version__ = "0.1.0"
