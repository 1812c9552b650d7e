"""Virtual quantum subspace expansion and orbital relaxation for small molecules."""

__version__ = "0.1.0"

ANGSTROM_PER_BOHR = 0.52917721092
