"""Permutation-equivariant learned precoders for multi-user MISO downlink."""
from ._accel import backend

__version__ = "0.1.0"
