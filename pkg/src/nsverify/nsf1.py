"""Binary field snapshots, format "NSF1".

Layout: magic bytes ``NSF1``, little-endian u32 dimension count, u32
per-axis cell counts, u8 layout tag, u8 domain tag, f64 per-axis lengths,
then f64 values row-major per component.  Readers reject wrong magic,
unknown tags and truncated or oversized payloads.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import FormatError
from .fields import COLLOCATED, STAGGERED, ScalarField, VectorField
from .grid import BOUNDED, PERIODIC, GridSpec

MAGIC = b"NSF1"

LAYOUT_SCALAR = 0
LAYOUT_VECTOR = 1
LAYOUT_VECTOR_MAC = 2
LAYOUT_SCALAR_CELL = 3

_DOMAIN_TAGS = {PERIODIC: 0, BOUNDED: 1}
_DOMAIN_KINDS = {0: PERIODIC, 1: BOUNDED}

_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def _layout_tag(field) -> int:
    if isinstance(field, ScalarField):
        if field.location == "cell" and not field.grid.periodic_domain:
            return LAYOUT_SCALAR_CELL
        if field.location != field.grid.default_location:
            raise FormatError(f"cannot serialise scalar at location {field.location!r}")
        return LAYOUT_SCALAR
    if isinstance(field, VectorField):
        return LAYOUT_VECTOR_MAC if field.layout == STAGGERED else LAYOUT_VECTOR
    raise FormatError(f"cannot serialise {type(field).__name__}")


def _component_shapes(grid: GridSpec, tag: int) -> list[tuple[int, ...]]:
    if tag == LAYOUT_SCALAR:
        return [grid.shape(None)]
    if tag == LAYOUT_SCALAR_CELL:
        return [grid.shape("cell")]
    if tag == LAYOUT_VECTOR:
        return [grid.shape(None)] * grid.dims
    if tag == LAYOUT_VECTOR_MAC:
        return [grid.shape(f"face{a}") for a in range(grid.dims)]
    raise FormatError(f"unknown layout tag {tag}")


def dump_bytes(field) -> bytes:
    grid = field.grid
    tag = _layout_tag(field)
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(np.asarray([grid.dims], dtype=_U32).tobytes())
    out.write(np.asarray(grid.cells, dtype=_U32).tobytes())
    out.write(bytes([tag, _DOMAIN_TAGS[grid.domain_kind]]))
    out.write(np.asarray(grid.lengths, dtype=_F64).tobytes())
    comps = field.components if isinstance(field, VectorField) else (field,)
    for comp in comps:
        out.write(np.ascontiguousarray(comp.values, dtype=_F64).tobytes())
    return out.getvalue()


def write_field(path, field) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_bytes(field))


def _take(buf: bytes, offset: int, count: int) -> tuple[bytes, int]:
    if offset + count > len(buf):
        raise FormatError("truncated payload")
    return buf[offset : offset + count], offset + count


def load_bytes(buf: bytes):
    chunk, off = _take(buf, 0, 4)
    if chunk != MAGIC:
        raise FormatError(f"bad magic {chunk!r}, expected {MAGIC!r}")
    chunk, off = _take(buf, off, 4)
    dims = int(np.frombuffer(chunk, dtype=_U32)[0])
    if dims not in (2, 3):
        raise FormatError(f"unsupported dimension count {dims}")
    chunk, off = _take(buf, off, 4 * dims)
    cells = tuple(int(c) for c in np.frombuffer(chunk, dtype=_U32))
    chunk, off = _take(buf, off, 2)
    tag, domain_tag = chunk[0], chunk[1]
    if domain_tag not in _DOMAIN_KINDS:
        raise FormatError(f"unknown domain tag {domain_tag}")
    chunk, off = _take(buf, off, 8 * dims)
    lengths = tuple(float(l) for l in np.frombuffer(chunk, dtype=_F64))
    try:
        grid = GridSpec(dims, cells, lengths, _DOMAIN_KINDS[domain_tag])
    except ValueError as err:
        raise FormatError(f"invalid grid header: {err}") from err
    shapes = _component_shapes(grid, tag)
    comps = []
    for shape in shapes:
        count = int(np.prod(shape))
        chunk, off = _take(buf, off, 8 * count)
        comps.append(np.frombuffer(chunk, dtype=_F64).reshape(shape))
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after payload")
    if tag == LAYOUT_SCALAR:
        return ScalarField(grid, comps[0])
    if tag == LAYOUT_SCALAR_CELL:
        return ScalarField(grid, comps[0], "cell")
    if tag == LAYOUT_VECTOR:
        fields = tuple(ScalarField(grid, c) for c in comps)
        return VectorField(grid, fields, COLLOCATED)
    fields = tuple(ScalarField(grid, c, f"face{a}") for a, c in enumerate(comps))
    return VectorField(grid, fields, STAGGERED)


def read_field(path):
    with open(path, "rb") as fh:
        return load_bytes(fh.read())
