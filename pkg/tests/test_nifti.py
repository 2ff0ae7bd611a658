"""NIfTI-1 reader/writer: round-trips, datatype handling, malformed files."""

import gzip
import struct

import numpy as np
import pytest

from mrisr.nifti import HEADER_SIZE, NiftiError, read_nifti, write_nifti


def _make_header(endian="<", dim=(3, 4, 5, 2), datatype=16, bitpix=32,
                 vox_offset=352.0, scl_slope=1.0, scl_inter=0.0, magic=b"n+1\x00"):
    header = bytearray(HEADER_SIZE + 4)
    struct.pack_into(endian + "i", header, 0, HEADER_SIZE)
    dims = [dim[0]] + list(dim[1:]) + [1] * (7 - len(dim[1:]))
    struct.pack_into(endian + "8h", header, 40, *dims)
    struct.pack_into(endian + "h", header, 70, datatype)
    struct.pack_into(endian + "h", header, 72, bitpix)
    struct.pack_into(endian + "f", header, 108, vox_offset)
    struct.pack_into(endian + "f", header, 112, scl_slope)
    struct.pack_into(endian + "f", header, 116, scl_inter)
    header[344:348] = magic
    return header


def test_round_trip_plain_and_gz(tmp_path):
    rng = np.random.default_rng(0)
    vol = rng.random((7, 9, 4)).astype(np.float32) * 100
    for name in ("vol.nii", "vol.nii.gz"):
        path = tmp_path / name
        write_nifti(path, vol)
        back = read_nifti(path)
        assert back.shape == vol.shape
        assert back.dtype == np.float64
        assert np.allclose(back, vol, atol=1e-4)


def test_gz_file_is_actually_gzipped(tmp_path):
    path = tmp_path / "v.nii.gz"
    write_nifti(path, np.zeros((2, 2, 2), dtype=np.float32))
    with open(path, "rb") as fh:
        assert fh.read(2) == b"\x1f\x8b"


def test_fortran_order_round_trip(tmp_path):
    vol = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "order.nii"
    write_nifti(path, vol)
    assert np.array_equal(read_nifti(path), vol)


def test_int16_with_scaling(tmp_path):
    data = np.array([[[10, -3], [7, 0]]], dtype=np.int16)  # (1,2,2)
    header = _make_header(dim=(3, 1, 2, 2), datatype=4, bitpix=16,
                          scl_slope=2.5, scl_inter=-1.0)
    path = tmp_path / "scaled.nii"
    path.write_bytes(bytes(header) + np.asfortranarray(data).tobytes(order="F"))
    out = read_nifti(path)
    assert np.allclose(out, data.astype(np.float64) * 2.5 - 1.0)


def test_big_endian_volume(tmp_path):
    data = np.arange(8, dtype=">f4").reshape(2, 2, 2)
    header = _make_header(endian=">", dim=(3, 2, 2, 2))
    path = tmp_path / "be.nii"
    path.write_bytes(bytes(header) + np.asfortranarray(data).tobytes(order="F"))
    out = read_nifti(path)
    assert np.allclose(out, data.astype(np.float64))


def test_trailing_singleton_dims_dropped(tmp_path):
    vol = np.ones((4, 5, 6), dtype=np.float32)
    header = _make_header(dim=(5, 4, 5, 6, 1, 1))
    path = tmp_path / "singleton.nii"
    path.write_bytes(bytes(header) + np.asfortranarray(vol).tobytes(order="F"))
    assert read_nifti(path).shape == (4, 5, 6)


def test_rejects_bad_magic(tmp_path):
    header = _make_header(magic=b"xxx\x00")
    path = tmp_path / "bad.nii"
    path.write_bytes(bytes(header) + b"\x00" * 400)
    with pytest.raises(NiftiError, match="magic"):
        read_nifti(path)


def test_rejects_two_file_nifti(tmp_path):
    header = _make_header(magic=b"ni1\x00")
    path = tmp_path / "pair.nii"
    path.write_bytes(bytes(header) + b"\x00" * 400)
    with pytest.raises(NiftiError, match="two-file"):
        read_nifti(path)


def test_rejects_bad_sizeof_hdr(tmp_path):
    path = tmp_path / "junk.nii"
    path.write_bytes(b"\x00" * 500)
    with pytest.raises(NiftiError, match="sizeof_hdr"):
        read_nifti(path)


def test_rejects_truncated_data(tmp_path):
    header = _make_header(dim=(3, 10, 10, 10))
    path = tmp_path / "short.nii"
    path.write_bytes(bytes(header) + b"\x00" * 16)
    with pytest.raises(NiftiError, match="truncated"):
        read_nifti(path)


def test_rejects_unknown_datatype(tmp_path):
    header = _make_header(datatype=1234)
    path = tmp_path / "odd.nii"
    path.write_bytes(bytes(header) + b"\x00" * 400)
    with pytest.raises(NiftiError, match="datatype"):
        read_nifti(path)


def test_rejects_short_file(tmp_path):
    path = tmp_path / "tiny.nii"
    path.write_bytes(b"abc")
    with pytest.raises(NiftiError, match="shorter"):
        read_nifti(path)


def test_missing_file(tmp_path):
    with pytest.raises(NiftiError, match="cannot read"):
        read_nifti(tmp_path / "nope.nii.gz")
