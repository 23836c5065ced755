"""Pixel grids, image and complex-field containers, and the on-disk formats.

Pixel ``(row i, col j)`` has its center at the complex coordinate

    x = (j + 0.5 - center_x) / pixels_per_unit
    y = (center_y - (i + 0.5)) / pixels_per_unit

so the y axis points up and the default center sits on the grid's
geometric middle.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, GeometryMismatch

HBS_MAGIC = b"HBS1"
_HEADER = struct.Struct("<4sIIddd")


@dataclass(frozen=True)
class GridGeometry:
    width: int
    height: int
    pixels_per_unit: float = 50.0
    center_x: float | None = None
    center_y: float | None = None

    def __post_init__(self):
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError(f"grid must be non-empty, got {self.width}x{self.height}")
        if not self.pixels_per_unit > 0:
            raise ValueError("pixels_per_unit must be positive")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "pixels_per_unit", float(self.pixels_per_unit))
        if self.center_x is None:
            object.__setattr__(self, "center_x", self.width / 2.0)
        if self.center_y is None:
            object.__setattr__(self, "center_y", self.height / 2.0)
        object.__setattr__(self, "center_x", float(self.center_x))
        object.__setattr__(self, "center_y", float(self.center_y))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def pixel_size(self) -> float:
        return 1.0 / self.pixels_per_unit

    @property
    def pixel_area(self) -> float:
        return self.pixel_size**2

    def coordinates(self) -> np.ndarray:
        """Complex coordinates of every pixel center, shape ``(height, width)``."""
        x = (np.arange(self.width) + 0.5 - self.center_x) / self.pixels_per_unit
        y = (self.center_y - (np.arange(self.height) + 0.5)) / self.pixels_per_unit
        return x[None, :] + 1j * y[:, None]

    def to_pixel_float(self, z):
        """Fractional (row, col) of complex points; pixel centers land on integers."""
        z = np.asarray(z)
        col = z.real * self.pixels_per_unit + self.center_x - 0.5
        row = self.center_y - z.imag * self.pixels_per_unit - 0.5
        return row, col


def pixel_to_complex(geometry: GridGeometry, row: int, col: int) -> complex:
    if not (0 <= row < geometry.height and 0 <= col < geometry.width):
        raise IndexError(f"pixel ({row}, {col}) outside {geometry.height}x{geometry.width} grid")
    ppu = geometry.pixels_per_unit
    return complex((col + 0.5 - geometry.center_x) / ppu, (geometry.center_y - (row + 0.5)) / ppu)


def complex_to_pixel(geometry: GridGeometry, z: complex) -> tuple[int, int]:
    """Nearest pixel whose center is closest to ``z``."""
    row, col = geometry.to_pixel_float(z)
    row, col = int(np.floor(row + 0.5)), int(np.floor(col + 0.5))
    if not (0 <= row < geometry.height and 0 <= col < geometry.width):
        raise IndexError(f"{z} falls outside the grid")
    return row, col


def image_geometry(size: int = 256, pixels_per_unit: float = 50.0) -> GridGeometry:
    return GridGeometry(size, size, pixels_per_unit)


def hbs_geometry(size: int = 128, pixels_per_unit: float = 50.0) -> GridGeometry:
    return GridGeometry(size, size, pixels_per_unit)


@dataclass(frozen=True)
class DiskMask:
    geometry: GridGeometry
    mask: np.ndarray = field(repr=False)

    @property
    def inside_count(self) -> int:
        return int(self.mask.sum())


def make_disk_mask(geometry: GridGeometry) -> DiskMask:
    z = geometry.coordinates()
    mask = (z.real**2 + z.imag**2) < 1.0
    mask.setflags(write=False)
    return DiskMask(geometry, mask)


@dataclass(frozen=True)
class GrayImage:
    geometry: GridGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.geometry.shape:
            raise GeometryMismatch(f"values {v.shape} do not match geometry {self.geometry.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image contains non-finite values")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("image values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_mask(cls, mask, geometry: GridGeometry | None = None) -> "GrayImage":
        mask = np.asarray(mask, dtype=bool)
        if geometry is None:
            geometry = GridGeometry(mask.shape[1], mask.shape[0])
        return cls(geometry, mask.astype(np.float64))

    @property
    def foreground(self) -> np.ndarray:
        return self.values >= 0.5


@dataclass(frozen=True)
class ComplexField:
    geometry: GridGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.shape != self.geometry.shape:
            raise GeometryMismatch(f"values {v.shape} do not match geometry {self.geometry.shape}")
        v[~self.disk_mask] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def disk_mask(self) -> np.ndarray:
        return _cached_mask(self.geometry)

    @classmethod
    def zeros(cls, geometry: GridGeometry | None = None) -> "ComplexField":
        geometry = geometry or hbs_geometry()
        return cls(geometry, np.zeros(geometry.shape, dtype=np.complex128))

    def masked(self) -> np.ndarray:
        return self.values[self.disk_mask]

    def sup_norm(self) -> float:
        inside = self.masked()
        return float(np.abs(inside).max()) if inside.size else 0.0


_MASKS: dict[GridGeometry, np.ndarray] = {}


def _cached_mask(geometry: GridGeometry) -> np.ndarray:
    mask = _MASKS.get(geometry)
    if mask is None:
        mask = make_disk_mask(geometry).mask
        _MASKS[geometry] = mask
    return mask


def check_same_geometry(a, b) -> None:
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"{a.geometry} != {b.geometry}")


# ---------------------------------------------------------------------------
# images: binary PGM (P5) and grayscale PNG


def read_image(path) -> GrayImage:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"P5"):
        values = _read_pgm(path)
    elif head.startswith(b"\x89PNG"):
        values = _read_png(path)
    else:
        raise FormatError(f"{path}: unsupported image format")
    return GrayImage(GridGeometry(values.shape[1], values.shape[0]), values)


def write_image(image: GrayImage, path) -> None:
    path = Path(path)
    q = np.rint(image.values * 65535.0).astype(np.uint16)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".pnm"):
        h, w = q.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
            fh.write(q.astype(">u2").tobytes())
    elif suffix == ".png":
        from PIL import Image

        Image.fromarray(q).save(path)
    else:
        raise FormatError(f"cannot write images with suffix {suffix!r}")


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    try:
        (w, h, maxval), offset = _pgm_tokens(data, 3)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if not (0 < maxval < 65536) or w <= 0 or h <= 0:
        raise FormatError(f"{path}: bad PGM header")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * dtype.itemsize
    raw = data[offset : offset + n]
    if len(raw) != n:
        raise FormatError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw, dtype=dtype).reshape(h, w).astype(np.float64)
    return np.clip(pixels / maxval, 0.0, 1.0)


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                scale = 65535.0 if im.mode != "I" or arr.max() > 255 else 255.0
            elif im.mode in ("L", "1", "P", "RGB", "RGBA", "LA"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                scale = 255.0
            else:
                raise FormatError(f"{path}: unsupported PNG mode {im.mode}")
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return np.clip(arr / scale, 0.0, 1.0)


# ---------------------------------------------------------------------------
# .hbs complex fields


def write_field(fld: ComplexField, path) -> None:
    values = fld.values
    if not np.all(np.isfinite(values[fld.disk_mask])):
        raise ValueError("refusing to write a field with non-finite values inside the disk")
    g = fld.geometry
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(HBS_MAGIC, g.width, g.height, g.pixels_per_unit, g.center_x, g.center_y))
        fh.write(np.ascontiguousarray(values.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(values.imag, dtype="<f8").tobytes())


def read_field(path) -> ComplexField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file too short for an .hbs header")
    magic, w, h, ppu, cx, cy = _HEADER.unpack_from(data)
    if magic != HBS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    n = w * h
    if len(data) != _HEADER.size + 16 * n:
        raise FormatError(f"{path}: payload size does not match {w}x{h}")
    try:
        geometry = GridGeometry(w, h, ppu, cx, cy)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    planes = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(2, h, w)
    values = planes[0] + 1j * planes[1]
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite payload")
    outside = ~_cached_mask(geometry)
    if np.any(values[outside] != 0):
        raise FormatError(f"{path}: nonzero values outside the unit disk")
    return ComplexField(geometry, values)
