"""Complex matrices carried as a (real, imaginary) pair.

The parts may be plain ``ndarray`` or differentiable ``Tensor``; arithmetic
only uses ``+``, ``-``, ``*`` and ``@`` so both work. Leading axes are batch
axes, the last two are (rows, cols).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DimensionError, Tensor, swapaxes


def _swap(x):
    if isinstance(x, Tensor):
        return swapaxes(x, -1, -2)
    return np.swapaxes(x, -1, -2)


@dataclass(frozen=True)
class ComplexMatrix:
    re: object
    im: object

    def __post_init__(self):
        if tuple(self.re.shape) != tuple(self.im.shape):
            raise DimensionError(
                f"real and imaginary parts differ in shape: {self.re.shape} vs {self.im.shape}"
            )

    @classmethod
    def from_complex(cls, z) -> "ComplexMatrix":
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real, dtype=np.float64),
                   np.ascontiguousarray(z.imag, dtype=np.float64))

    def to_complex(self) -> np.ndarray:
        re = self.re.data if isinstance(self.re, Tensor) else self.re
        im = self.im.data if isinstance(self.im, Tensor) else self.im
        return re + 1j * im

    @property
    def shape(self):
        return tuple(self.re.shape)

    @property
    def rows(self) -> int:
        return self.shape[-2]

    @property
    def cols(self) -> int:
        return self.shape[-1]

    @property
    def H(self) -> "ComplexMatrix":
        return ComplexMatrix(_swap(self.re), -_swap(self.im))

    @property
    def T(self) -> "ComplexMatrix":
        return ComplexMatrix(_swap(self.re), _swap(self.im))

    def conj(self) -> "ComplexMatrix":
        return ComplexMatrix(self.re, -self.im)

    def __add__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        return ComplexMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        return ComplexMatrix(self.re - other.re, self.im - other.im)

    def __matmul__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        if self.shape[-1] != other.shape[-2]:
            raise DimensionError(f"complex matmul inner extents disagree: {self.shape} @ {other.shape}")
        a, b, c, d = self.re, self.im, other.re, other.im
        return ComplexMatrix(a @ c - b @ d, a @ d + b @ c)

    def scale(self, s) -> "ComplexMatrix":
        """Multiply by a real scalar or broadcastable real array/Tensor."""
        return ComplexMatrix(self.re * s, self.im * s)

    def abs2(self):
        return self.re * self.re + self.im * self.im

    def real_embedding(self) -> np.ndarray:
        """The 2x2 block matrix [[Re, -Im], [Im, Re]] representing the same linear map."""
        re = self.re.data if isinstance(self.re, Tensor) else self.re
        im = self.im.data if isinstance(self.im, Tensor) else self.im
        top = np.concatenate([re, -im], axis=-1)
        bot = np.concatenate([im, re], axis=-1)
        return np.concatenate([top, bot], axis=-2)
