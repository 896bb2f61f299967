"""On-disk formats.

A stack is a directory with ``header.json``, ``values.bin`` (float32
little-endian, physical = stored * scale) and ``mask.bin`` (one reliability
byte per sample). Both binaries are laid out ``(t, row, col)`` with t slowest.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CorruptStackError, ReliabilityCodeError, SeriesParseError
from .grid import ALL_CODES, DEFAULT_ND, RI, Stack, pad_stack
from .trend import Flag, Series

VALUE_DTYPE = "f32le"
MASK_DTYPE = "u8"
HEADER_KEYS = ("width", "height", "T", "nd", "ny", "scale", "fill_value",
               "value_dtype", "mask_dtype", "pad")


@dataclass(frozen=True)
class StackHeader:
    width: int
    height: int
    T: int
    nd: int = DEFAULT_ND
    ny: int = 0
    scale: float = 1.0
    fill_value: float = -1.0
    value_dtype: str = VALUE_DTYPE
    mask_dtype: str = MASK_DTYPE
    pad: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in HEADER_KEYS}

    @classmethod
    def from_dict(cls, d: dict) -> "StackHeader":
        missing = [k for k in HEADER_KEYS if k not in d and k != "pad"]
        if missing:
            raise CorruptStackError(f"header.json lacks keys {missing}")
        h = cls(**{k: d[k] for k in HEADER_KEYS if k in d})
        if h.value_dtype != VALUE_DTYPE or h.mask_dtype != MASK_DTYPE:
            raise CorruptStackError(
                f"unsupported dtypes {h.value_dtype!r}/{h.mask_dtype!r}"
            )
        if min(h.width, h.height, h.T, h.nd) < 1 or h.scale == 0:
            raise CorruptStackError(f"invalid header dimensions {h.to_dict()}")
        return h


def write_stack(stack: Stack, path, scale: float = 1.0) -> None:
    """Write ``stack`` to directory ``path``; trailing padding is stripped."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = stack.n_real
    header = StackHeader(
        width=stack.width, height=stack.height, T=n, nd=stack.nd,
        ny=math.ceil(n / stack.nd), scale=float(scale),
        fill_value=float(stack.fill_value), pad=stack.pad,
    )
    stored = (stack.values[:, :, :n] / scale).astype("<f4")
    np.ascontiguousarray(stored.transpose(2, 0, 1)).tofile(path / "values.bin")
    np.ascontiguousarray(stack.reliability[:, :, :n].transpose(2, 0, 1)).astype(np.uint8).tofile(
        path / "mask.bin"
    )
    (path / "header.json").write_text(json.dumps(header.to_dict(), indent=2) + "\n")


def read_header(path) -> StackHeader:
    try:
        return StackHeader.from_dict(json.loads((Path(path) / "header.json").read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise CorruptStackError(f"cannot read header in {path}: {exc}") from exc


def read_stack(path) -> Stack:
    """Load a stack directory, padding the tail with NODATA to whole years."""
    path = Path(path)
    h = read_header(path)
    n = h.width * h.height * h.T
    for name, itemsize in (("values.bin", 4), ("mask.bin", 1)):
        f = path / name
        actual = f.stat().st_size if f.exists() else 0
        if actual != n * itemsize:
            raise CorruptStackError(
                f"{name}: expected {n * itemsize} bytes, found {actual}"
            )
    stored = np.fromfile(path / "values.bin", dtype="<f4")
    mask = np.fromfile(path / "mask.bin", dtype=np.uint8)
    bad = ~np.isin(mask, ALL_CODES)
    if bad.any():
        off = int(np.flatnonzero(bad)[0])
        raise ReliabilityCodeError(f"mask.bin: undefined code {mask[off]} at byte offset {off}")
    values = stored.astype(np.float64) * h.scale
    shape = (h.T, h.height, h.width)
    values = values.reshape(shape).transpose(1, 2, 0)
    mask = mask.reshape(shape).transpose(1, 2, 0)
    return pad_stack(values, mask, nd=h.nd, fill_value=h.fill_value)


def read_series_csv(path) -> Series:
    """Read a ``t,value,ri`` CSV. Empty values are allowed on invalid rows."""
    values, codes = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "value", "ri"]:
            raise SeriesParseError(f"line 1: expected header 't,value,ri', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise SeriesParseError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                int(row[0])
                ri = int(row[2])
                value = float(row[1]) if row[1].strip() else math.nan
            except ValueError as exc:
                raise SeriesParseError(f"line {lineno}: {exc}") from exc
            if ri == -1:
                ri = int(RI.NODATA)
            if ri not in ALL_CODES:
                raise ReliabilityCodeError(f"line {lineno}: undefined reliability code {ri}")
            if ri in (RI.GOOD, RI.MARGINAL) and math.isnan(value):
                raise SeriesParseError(f"line {lineno}: valid sample without a value")
            values.append(value)
            codes.append(ri)
    codes = np.array(codes, dtype=np.int64)
    valid = (codes == RI.GOOD) | (codes == RI.MARGINAL)
    flags = np.where(codes == RI.GOOD, Flag.GOOD, Flag.NOISY).astype(np.uint8)
    values = np.array(values, dtype=np.float64)
    values[~valid] = math.nan
    return Series(values, flags, valid)


def write_series_csv(path, values, codes) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value", "ri"])
        for t, (v, c) in enumerate(zip(values, codes)):
            w.writerow([t, "" if not np.isfinite(v) else repr(float(v)), int(c)])
