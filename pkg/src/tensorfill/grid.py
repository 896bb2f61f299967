"""Stacks, patches and the index maps that move between them.

Layout conventions used throughout the package:

* A stack holds ``values`` and ``reliability`` as ``(H, W, T)`` arrays.
* Mode-n unfolding follows Kolda & Bader: the mode-n fibres become columns and
  the remaining indices are enumerated with the lowest-numbered one varying
  fastest (for mode 1 the column of ``(i2, i3)`` is ``i2 + I2 * i3``).
* Rearrangement flattens space row-major (``p = i * w + j``) and splits time
  year-major (``t = y * nd + d``), giving an ``(h*w, nd, ny)`` tensor.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .exceptions import ReliabilityCodeError, ShapeError


class RI(IntEnum):
    """Pixel reliability codes (no-data is stored as 255 instead of -1)."""

    GOOD = 0
    MARGINAL = 1
    CLOUDY = 3
    NODATA = 255


VALID_CODES = (RI.GOOD, RI.MARGINAL)
ALL_CODES = np.array([int(c) for c in RI], dtype=np.int64)

DEFAULT_ND = 23


def check_codes(codes: np.ndarray) -> None:
    """Raise :class:`ReliabilityCodeError` on the first undefined code."""
    codes = np.asarray(codes)
    bad = ~np.isin(codes, ALL_CODES)
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ReliabilityCodeError(
            f"undefined reliability code {codes[loc]!r} at index {loc}"
        )


def omega_from_reliability(codes: np.ndarray) -> np.ndarray:
    """Boolean observation mask: True where the code is GOOD or MARGINAL."""
    codes = np.asarray(codes)
    check_codes(codes)
    return (codes == RI.GOOD) | (codes == RI.MARGINAL)


@dataclass
class Stack:
    """An ``(H, W, T)`` grid of index values with a parallel reliability grid.

    ``pad`` counts trailing NODATA steps added so that ``T == nd * ny``; they
    are stripped again when the stack is written.
    """

    values: np.ndarray
    reliability: np.ndarray
    nd: int = DEFAULT_ND
    fill_value: float = -1.0
    pad: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.reliability = np.asarray(self.reliability, dtype=np.uint8)
        if self.values.ndim != 3:
            raise ShapeError(f"stack values must be 3-D, got shape {self.values.shape}")
        if self.values.shape != self.reliability.shape:
            raise ShapeError(
                f"values {self.values.shape} and reliability "
                f"{self.reliability.shape} differ"
            )
        if self.nd < 1:
            raise ShapeError(f"nd must be positive, got {self.nd}")
        if self.T % self.nd:
            raise ShapeError(
                f"T={self.T} is not a multiple of nd={self.nd}; use pad_stack()"
            )
        if not 0 <= self.pad < max(self.T, 1):
            raise ShapeError(f"pad={self.pad} out of range for T={self.T}")
        check_codes(self.reliability)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> int:
        return self.values.shape[2]

    @property
    def ny(self) -> int:
        return self.T // self.nd

    @property
    def omega(self) -> np.ndarray:
        return omega_from_reliability(self.reliability)

    @property
    def n_real(self) -> int:
        """Number of time steps that are not padding."""
        return self.T - self.pad

    def missing_rate(self) -> float:
        """Fraction of non-padding samples that are invalid."""
        om = self.omega[:, :, : self.n_real]
        return 1.0 - om.mean()

    def copy(self, **changes) -> "Stack":
        kw = dict(values=self.values.copy(), reliability=self.reliability.copy())
        kw.update(changes)
        return replace(self, **kw)


def pad_stack(values, reliability, nd=DEFAULT_ND, fill_value=-1.0) -> Stack:
    """Build a :class:`Stack`, padding the tail with NODATA to complete a year."""
    values = np.asarray(values, dtype=np.float64)
    reliability = np.asarray(reliability, dtype=np.uint8)
    if values.ndim != 3 or values.shape != reliability.shape:
        raise ShapeError(
            f"values {values.shape} and reliability {reliability.shape} must be "
            "matching 3-D arrays"
        )
    T = values.shape[2]
    pad = (-T) % nd
    if pad:
        h, w, _ = values.shape
        values = np.concatenate([values, np.full((h, w, pad), fill_value)], axis=2)
        reliability = np.concatenate(
            [reliability, np.full((h, w, pad), RI.NODATA, dtype=np.uint8)], axis=2
        )
    return Stack(values, reliability, nd=nd, fill_value=fill_value, pad=pad)


@dataclass
class Patch:
    """A spatial block of a stack with its observation mask.

    Edge tiles may be rectangular; ``m`` is the nominal side length.
    """

    data: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.omega = np.asarray(self.omega, dtype=bool)
        if self.data.ndim != 3 or self.data.shape != self.omega.shape:
            raise ShapeError(
                f"patch data {self.data.shape} and omega {self.omega.shape} must "
                "be matching 3-D arrays"
            )

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_stack(cls, stack: Stack, rows: slice, cols: slice) -> "Patch":
        return cls(stack.values[rows, cols], stack.omega[rows, cols])


@dataclass
class RearrangedTensor:
    """An ``(h*w, nd, ny)`` tensor: pixel x day-of-year x year."""

    data: np.ndarray
    omega: np.ndarray = field(default=None)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.omega is None:
            self.omega = np.ones(self.data.shape, dtype=bool)
        self.omega = np.asarray(self.omega, dtype=bool)
        if self.data.ndim != 3 or self.data.shape != self.omega.shape:
            raise ShapeError(
                f"tensor data {self.data.shape} and omega {self.omega.shape} "
                "must be matching 3-D arrays"
            )

    @property
    def shape(self):
        return self.data.shape


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (modes are 1-based) of a 3-tensor."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3 or mode not in (1, 2, 3):
        raise ShapeError(f"cannot unfold shape {tensor.shape} along mode {mode}")
    n = mode - 1
    return np.reshape(np.moveaxis(tensor, n, 0), (tensor.shape[n], -1), order="F")


def fold(matrix: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    matrix = np.asarray(matrix)
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or mode not in (1, 2, 3):
        raise ShapeError(f"cannot fold into shape {shape} along mode {mode}")
    n = mode - 1
    rest = [s for i, s in enumerate(shape) if i != n]
    if matrix.shape != (shape[n], rest[0] * rest[1]):
        raise ShapeError(
            f"matrix {matrix.shape} does not unfold shape {shape} along mode {mode}"
        )
    full = np.reshape(matrix, [shape[n]] + rest, order="F")
    return np.moveaxis(full, 0, n)


def _to_rearranged(a: np.ndarray, nd: int) -> np.ndarray:
    h, w, T = a.shape
    return a.reshape(h * w, T // nd, nd).transpose(0, 2, 1)


def rearrange(patch: Patch, nd: int = DEFAULT_ND) -> RearrangedTensor:
    """Reshape an ``(h, w, T)`` patch into ``(h*w, nd, ny)``."""
    if nd < 1 or patch.T % nd:
        raise ShapeError(f"T={patch.T} is not a multiple of nd={nd}")
    return RearrangedTensor(
        _to_rearranged(patch.data, nd).copy(), _to_rearranged(patch.omega, nd).copy()
    )


def inverse_rearrange(rt: RearrangedTensor, m) -> Patch:
    """Undo :func:`rearrange`. ``m`` is the side length or an ``(h, w)`` pair."""
    h, w = (m, m) if np.isscalar(m) else tuple(m)
    P, nd, ny = rt.shape
    if P != h * w:
        raise ShapeError(f"first dimension {P} does not match {h}x{w} pixels")

    def back(a):
        return a.transpose(0, 2, 1).reshape(h, w, nd * ny).copy()

    return Patch(back(rt.data), back(rt.omega))
