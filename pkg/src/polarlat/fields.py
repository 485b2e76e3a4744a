"""Discretized real scalar fields on rectilinear grids, with versioned
binary/text file formats.

A field is defined by its sample values on an (nx, ny, nz) grid with
uniform per-axis spacing and an origin; trilinear interpolation applies
inside the bounding box and the field is zero outside.  Files store the
payload x-fastest (index x varies quickest), matching common FDTD export
layouts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FieldFormatError

BINARY_MAGIC = b"F3DB"
TEXT_MAGIC = "F3DT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHH3I3d3d")  # magic, version, pad, dims, spacing, origin


@dataclass(frozen=True)
class ScalarField3D:
    """Real scalar samples on a regular 3-D grid."""

    values: np.ndarray = field(repr=False)
    spacing: tuple
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-D, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("field contains non-finite values")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")
        origin = tuple(float(o) for o in self.origin)
        if len(origin) != 3:
            raise ValueError(f"origin must have three components, got {self.origin}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def shape(self):
        return self.values.shape

    def axis(self, dim):
        n = self.values.shape[dim]
        return self.origin[dim] + self.spacing[dim] * np.arange(n)

    def congruent(self, other):
        return (self.values.shape == other.values.shape
                and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0.0)
                and np.allclose(self.origin, other.origin, rtol=1e-12,
                                atol=1e-12 * max(self.spacing)))

    def scaled(self, factor):
        return ScalarField3D(values=self.values * factor, spacing=self.spacing,
                             origin=self.origin)

    def shifted_values(self, displacement):
        """Samples of this field at (grid point - displacement).

        Constant displacement on a regular grid reduces trilinear
        interpolation to one linear blend per axis with a fixed fractional
        offset; points outside the bounding box contribute zero.
        """
        out = self.values
        for dim in range(3):
            t = float(displacement[dim]) / self.spacing[dim]
            out = _shift_axis(out, t, dim)
        return out

    def integral(self):
        """Trapezoidal integral of the field over its bounding box."""
        return trapezoid3(self.values, self.spacing)


def _shift_axis(values, t, axis):
    """Linear interpolation of ``values`` at (index - t) along one axis."""
    n = values.shape[axis]
    base = np.floor(-t)
    frac = (-t) - base
    k0 = int(base)
    lo = _integer_shift(values, k0, axis, n)
    if frac == 0.0:
        return lo
    hi = _integer_shift(values, k0 + 1, axis, n)
    return (1.0 - frac) * lo + frac * hi


def _integer_shift(values, k, axis, n):
    if k == 0:
        return values
    out = np.zeros_like(values)
    if abs(k) >= n:
        return out
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    if k > 0:
        src[axis] = slice(k, n)
        dst[axis] = slice(0, n - k)
    else:
        src[axis] = slice(0, n + k)
        dst[axis] = slice(-k, n)
    out[tuple(dst)] = values[tuple(src)]
    return out


def trapezoid3(values, spacing):
    """Trapezoidal quadrature on the full grid, deterministic summation."""
    wx, wy, wz = (_trapezoid_weights(n) for n in values.shape)
    total = np.einsum("i,j,k,ijk->", wx, wy, wz, values)
    return float(total) * spacing[0] * spacing[1] * spacing[2]


def _trapezoid_weights(n):
    w = np.ones(n)
    if n > 1:
        w[0] = w[-1] = 0.5
    return w


def write_field(field3d, path, fmt="binary"):
    """Serialize the field; fmt is "binary" or "text"."""
    payload = np.ascontiguousarray(field3d.values, dtype="<f8")
    nx, ny, nz = field3d.shape
    if fmt == "binary":
        header = _HEADER.pack(BINARY_MAGIC, FORMAT_VERSION, 0, nx, ny, nz,
                              *field3d.spacing, *field3d.origin)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.ravel(order="F").tobytes())
    elif fmt == "text":
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{TEXT_MAGIC} {FORMAT_VERSION}\n")
            fh.write(f"{nx} {ny} {nz}\n")
            fh.write(" ".join(repr(s) for s in field3d.spacing) + "\n")
            fh.write(" ".join(repr(o) for o in field3d.origin) + "\n")
            for v in payload.ravel(order="F"):
                fh.write(repr(float(v)) + "\n")
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def read_field(path):
    """Load a field file, sniffing binary vs text by its magic."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return _read_binary(path)
    if head[:len(TEXT_MAGIC)] == TEXT_MAGIC.encode("ascii"):
        return _read_text(path)
    raise FieldFormatError(
        f"{path}: unrecognized magic {head!r} (expected {BINARY_MAGIC!r} or "
        f"{TEXT_MAGIC!r})", offset=0)


def _read_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise FieldFormatError(
                f"{path}: truncated header ({len(raw)} of {_HEADER.size} bytes)",
                offset=len(raw))
        magic, version, _pad, nx, ny, nz, dx, dy, dz, ox, oy, oz = _HEADER.unpack(raw)
        if version != FORMAT_VERSION:
            raise FieldFormatError(
                f"{path}: unsupported format version {version}", offset=4)
        if min(nx, ny, nz) < 1:
            raise FieldFormatError(
                f"{path}: invalid dimensions {(nx, ny, nz)}", offset=8)
        expect = nx * ny * nz * 8
        payload = fh.read(expect + 1)
    if len(payload) < expect:
        raise FieldFormatError(
            f"{path}: truncated payload ({len(payload)} of {expect} bytes)",
            offset=_HEADER.size + len(payload))
    if len(payload) > expect:
        raise FieldFormatError(
            f"{path}: trailing bytes after payload", offset=_HEADER.size + expect)
    values = np.frombuffer(payload, dtype="<f8").reshape((nx, ny, nz), order="F")
    try:
        return ScalarField3D(values=values.copy(), spacing=(dx, dy, dz),
                             origin=(ox, oy, oz))
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}", offset=8) from exc


def _read_text(path):
    offset = 0
    with open(path, "rb") as fh:
        def next_line():
            nonlocal offset
            line_start = offset
            line = fh.readline()
            if not line:
                raise FieldFormatError(f"{path}: unexpected end of file",
                                       offset=line_start)
            offset += len(line)
            return line.decode("ascii", errors="replace").strip(), line_start

        line, at = next_line()
        parts = line.split()
        if len(parts) != 2 or parts[0] != TEXT_MAGIC:
            raise FieldFormatError(f"{path}: bad text header {line!r}", offset=at)
        if parts[1] != str(FORMAT_VERSION):
            raise FieldFormatError(
                f"{path}: unsupported format version {parts[1]}", offset=at)

        def parse(kind, count, conv):
            line, at = next_line()
            items = line.split()
            if len(items) != count:
                raise FieldFormatError(
                    f"{path}: expected {count} {kind} entries, got {line!r}",
                    offset=at)
            try:
                return [conv(x) for x in items]
            except ValueError as exc:
                raise FieldFormatError(f"{path}: bad {kind} line {line!r}",
                                       offset=at) from exc

        nx, ny, nz = parse("dimension", 3, int)
        if min(nx, ny, nz) < 1:
            raise FieldFormatError(f"{path}: invalid dimensions {(nx, ny, nz)}",
                                   offset=offset)
        spacing = parse("spacing", 3, float)
        origin = parse("origin", 3, float)
        expect = nx * ny * nz
        values = np.empty(expect)
        got = 0
        while got < expect:
            line, at = next_line()
            for tok in line.split():
                if got >= expect:
                    raise FieldFormatError(f"{path}: more than {expect} values",
                                           offset=at)
                try:
                    values[got] = float(tok)
                except ValueError as exc:
                    raise FieldFormatError(
                        f"{path}: bad value {tok!r} at index {got}",
                        offset=at) from exc
                got += 1
    try:
        return ScalarField3D(values=values.reshape((nx, ny, nz), order="F"),
                             spacing=tuple(spacing), origin=tuple(origin))
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}", offset=offset) from exc
