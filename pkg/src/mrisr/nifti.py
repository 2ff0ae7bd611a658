"""Minimal NIfTI-1 volume I/O (.nii and .nii.gz).

Covers what the slice pipeline needs: single-file NIfTI-1 with scalar
voxels in the common integer/float datatypes, Fortran element order, and
``scl_slope``/``scl_inter`` rescaling. Orientation metadata is ignored;
volumes are treated as raw index grids.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

HEADER_SIZE = 348

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
    1024: np.int64,
}


class NiftiError(ValueError):
    """Raised when a file is not a readable NIfTI-1 volume."""


def _open(path: Path, mode: str):
    if path.name.endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_nifti(path) -> np.ndarray:
    """Read a NIfTI-1 file and return its voxel array (float64, F-ordered data)."""
    path = Path(path)
    try:
        with _open(path, "rb") as fh:
            raw = fh.read()
    except (OSError, EOFError) as exc:
        raise NiftiError(f"cannot read NIfTI file {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise NiftiError(f"{path}: file shorter than the {HEADER_SIZE}-byte NIfTI-1 header")

    for endian in ("<", ">"):
        if struct.unpack_from(endian + "i", raw, 0)[0] == HEADER_SIZE:
            break
    else:
        raise NiftiError(f"{path}: bad sizeof_hdr, not a NIfTI-1 file")

    magic = raw[344:348]
    if magic[:3] not in (b"n+1", b"ni1"):
        raise NiftiError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(endian + "8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiError(f"{path}: invalid dim[0]={ndim}")
    shape = tuple(dim[1 : 1 + ndim])
    # trailing singleton dims are a common NIfTI quirk; drop them
    while len(shape) > 1 and shape[-1] == 1:
        shape = shape[:-1]

    datatype = struct.unpack_from(endian + "h", raw, 70)[0]
    if datatype not in _DTYPES:
        raise NiftiError(f"{path}: unsupported datatype code {datatype}")
    vox_offset = int(struct.unpack_from(endian + "f", raw, 108)[0])
    scl_slope = struct.unpack_from(endian + "f", raw, 112)[0]
    scl_inter = struct.unpack_from(endian + "f", raw, 116)[0]
    if magic[:3] == b"ni1":
        raise NiftiError(f"{path}: two-file (.hdr/.img) NIfTI is not supported")
    vox_offset = max(vox_offset, HEADER_SIZE + 4)

    count = int(np.prod(shape))
    dt = np.dtype(_DTYPES[datatype]).newbyteorder(endian)
    end = vox_offset + count * dt.itemsize
    if len(raw) < end:
        raise NiftiError(f"{path}: truncated voxel data")
    data = np.frombuffer(raw[vox_offset:end], dtype=dt).reshape(shape, order="F")
    out = data.astype(np.float64)
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        out = out * slope + scl_inter
    return out


def write_nifti(path, volume: np.ndarray) -> None:
    """Write an array as a single-file float32 NIfTI-1 volume."""
    path = Path(path)
    vol = np.asarray(volume)
    if not 1 <= vol.ndim <= 7:
        raise NiftiError(f"cannot write array of ndim {vol.ndim} as NIfTI")

    header = bytearray(HEADER_SIZE + 4)  # header + empty extension flag
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    dim = [vol.ndim] + list(vol.shape) + [1] * (7 - vol.ndim)
    struct.pack_into("<8h", header, 40, *dim)
    struct.pack_into("<h", header, 70, 16)  # float32
    struct.pack_into("<h", header, 72, 32)  # bitpix
    struct.pack_into("<8f", header, 76, 0.0, *([1.0] * 7))
    struct.pack_into("<f", header, 108, float(HEADER_SIZE + 4))
    struct.pack_into("<f", header, 112, 1.0)  # scl_slope
    struct.pack_into("<f", header, 116, 0.0)  # scl_inter
    header[344:348] = b"n+1\x00"

    payload = np.asfortranarray(vol.astype(np.float32)).tobytes(order="F")
    with _open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(payload)
