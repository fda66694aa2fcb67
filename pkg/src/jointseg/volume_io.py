"""Volume containers and an uncompressed MetaImage (.mhd + .raw) reader/writer.

Arrays are held indexed ``[x, y, z]``; on disk the payload is row-major with
x varying fastest, so voxel ``i`` sits at
``(i % nx, (i // nx) % ny, i // (nx * ny))``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError, UnsupportedTypeError, ShapeError

NUM_CLASSES = 8


class ElementType(enum.Enum):
    FLOAT32 = "MET_FLOAT"
    INT16 = "MET_SHORT"
    UINT8 = "MET_UCHAR"

    @property
    def dtype(self) -> np.dtype:
        return _DTYPES[self]


_DTYPES = {
    ElementType.FLOAT32: np.dtype("<f4"),
    ElementType.INT16: np.dtype("<i2"),
    ElementType.UINT8: np.dtype("u1"),
}

HEADER_KEYS = ("ObjectType", "NDims", "DimSize", "ElementSpacing", "ElementType", "ElementDataFile")


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    element_type: ElementType
    data_path: str

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ShapeError(f"dims must be 3 positive integers, got {self.dims}")
        if len(self.spacing) != 3 or any(not float(s) > 0 for s in self.spacing):
            raise ShapeError(f"spacing must be 3 positive reals, got {self.spacing}")

    @property
    def payload_bytes(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz * self.element_type.dtype.itemsize


def _spacing3(spacing) -> tuple[float, float, float]:
    if np.isscalar(spacing):
        spacing = (spacing,) * 3
    return tuple(float(s) for s in spacing)


@dataclass
class Volume3:
    """Scalar image; values held as float32 whatever the on-disk type."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    element_type: ElementType = ElementType.FLOAT32

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.spacing = _spacing3(self.spacing)
        if self.data.ndim != 3:
            raise ShapeError(f"volume must be 3D, got shape {self.data.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    def header(self, data_path: str = "") -> VolumeHeader:
        return VolumeHeader(self.dims, self.spacing, self.element_type, data_path)

    def with_data(self, data, spacing=None) -> "Volume3":
        return Volume3(data, self.spacing if spacing is None else spacing, ElementType.FLOAT32)


@dataclass
class LabelMap:
    """Class-ID grid with values in ``0..7``."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(f"label map must be 3D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
            raise ValueError(f"label values must lie in 0..{NUM_CLASSES - 1}")
        self.data = np.ascontiguousarray(arr, dtype=np.uint8)
        self.spacing = _spacing3(self.spacing)

    element_type = ElementType.UINT8

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    def header(self, data_path: str = "") -> VolumeHeader:
        return VolumeHeader(self.dims, self.spacing, ElementType.UINT8, data_path)

    def with_data(self, data, spacing=None) -> "LabelMap":
        return LabelMap(data, self.spacing if spacing is None else spacing)


def _fmt(x) -> str:
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


def format_header(header: VolumeHeader) -> str:
    values = {
        "ObjectType": "Image",
        "NDims": "3",
        "DimSize": " ".join(str(int(d)) for d in header.dims),
        "ElementSpacing": " ".join(_fmt(float(s)) for s in header.spacing),
        "ElementType": header.element_type.value,
        "ElementDataFile": header.data_path,
    }
    return "".join(f"{k} = {values[k]}\n" for k in HEADER_KEYS)


def parse_header(text: str) -> VolumeHeader:
    fields = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(line.strip(), "expected 'Key = Value'")
        fields[key.strip()] = value.strip()

    for key in HEADER_KEYS:
        if key not in fields or fields[key] == "":
            raise FormatError(key)
    if fields.get("BinaryDataByteOrderMSB", "False").lower() == "true":
        raise FormatError("BinaryDataByteOrderMSB", "big-endian payloads are not supported")
    if fields["NDims"] != "3":
        raise FormatError("NDims", f"expected 3, got {fields['NDims']!r}")
    try:
        dims = tuple(int(v) for v in fields["DimSize"].split())
        if len(dims) != 3:
            raise ValueError
    except ValueError:
        raise FormatError("DimSize", f"expected 3 integers, got {fields['DimSize']!r}") from None
    try:
        spacing = tuple(float(v) for v in fields["ElementSpacing"].split())
        if len(spacing) != 3:
            raise ValueError
    except ValueError:
        raise FormatError("ElementSpacing", f"expected 3 reals, got {fields['ElementSpacing']!r}") from None
    try:
        etype = ElementType(fields["ElementType"])
    except ValueError:
        raise UnsupportedTypeError(f"unsupported element type {fields['ElementType']!r}") from None
    if fields["ElementDataFile"].upper() == "LOCAL":
        raise FormatError("ElementDataFile", "embedded payloads are not supported")
    try:
        return VolumeHeader(dims, spacing, etype, fields["ElementDataFile"])
    except ShapeError as exc:
        raise FormatError("DimSize/ElementSpacing", str(exc)) from None


def read_volume(path) -> Volume3 | LabelMap:
    """Read a header file and its sibling raw payload.

    ``MET_UCHAR`` payloads come back as :class:`LabelMap`; ``MET_FLOAT`` and
    ``MET_SHORT`` as :class:`Volume3` (Int16 values are converted to floats
    without any rescaling).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError:
        raise FormatError("ObjectType", "header is not ASCII text") from None
    header = parse_header(text)
    raw = (path.parent / header.data_path).read_bytes()
    if len(raw) != header.payload_bytes:
        raise TruncationError(
            f"{header.data_path}: expected {header.payload_bytes} bytes, found {len(raw)}"
        )
    nx, ny, nz = header.dims
    flat = np.frombuffer(raw, dtype=header.element_type.dtype)
    arr = flat.reshape((nz, ny, nx)).transpose(2, 1, 0)
    if header.element_type is ElementType.UINT8:
        return LabelMap(arr, header.spacing)
    return Volume3(arr.astype(np.float32), header.spacing, header.element_type)


def write_volume(path, vol: Volume3 | LabelMap) -> None:
    """Write ``vol`` as ``path`` (header) plus ``<stem>.raw`` next to it."""
    path = Path(path)
    data_name = path.with_suffix(".raw").name
    header = vol.header(data_name)
    dtype = header.element_type.dtype
    if header.element_type is ElementType.INT16:
        payload = np.rint(vol.data).astype(dtype)
    else:
        payload = vol.data.astype(dtype, copy=False)
    # [x, y, z] array written in Fortran order == x fastest on disk
    blob = payload.tobytes(order="F")
    with open(path.parent / data_name, "wb") as f:
        f.write(blob)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(format_header(header))


def linear_to_coords(i: int, dims) -> tuple[int, int, int]:
    nx, ny, _ = dims
    return (i % nx, (i // nx) % ny, i // (nx * ny))


__all__ = [
    "ElementType",
    "VolumeHeader",
    "Volume3",
    "LabelMap",
    "NUM_CLASSES",
    "read_volume",
    "write_volume",
    "parse_header",
    "format_header",
    "linear_to_coords",
]
