"""Minimal MRC2014 reader/writer for single 2D sections."""

import logging
import struct

import numpy as np

logger = logging.getLogger(__name__)

HEADER_BYTES = 1024

# MRC mode -> numpy dtype (byte order applied separately)
MODE_DTYPES = {
    0: np.int8,
    1: np.int16,
    2: np.float32,
    6: np.uint16,
}


class MRCError(ValueError):
    pass


def _byte_order(header):
    machst = header[212:214]
    if machst == b"\x11\x11":
        return ">"
    if machst in (b"\x44\x44", b"\x44\x41"):
        return "<"
    # No machine stamp: guess from a plausible mode word
    mode_le = struct.unpack("<i", header[12:16])[0]
    return "<" if mode_le in MODE_DTYPES else ">"


def read_header(header):
    if len(header) < HEADER_BYTES:
        raise MRCError("file shorter than the 1024-byte MRC header")
    bo = _byte_order(header)
    nx, ny, nz, mode = struct.unpack(bo + "4i", header[0:16])
    mx, my, mz = struct.unpack(bo + "3i", header[28:40])
    cella = struct.unpack(bo + "3f", header[40:52])
    nsymbt = struct.unpack(bo + "i", header[92:96])[0]
    return {
        "byte_order": bo,
        "nx": nx,
        "ny": ny,
        "nz": nz,
        "mode": mode,
        "mx": mx,
        "my": my,
        "mz": mz,
        "cella": cella,
        "nsymbt": nsymbt,
    }


def read_mrc(path):
    """Read the first 2D section of an MRC file.

    Returns ``(data, pixel_size)`` where ``data`` has shape ``(ny, nx)``
    (x fastest, as stored) and ``pixel_size`` is in angstrom or None.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    hdr = read_header(raw[:HEADER_BYTES])
    nx, ny, nz, mode = hdr["nx"], hdr["ny"], hdr["nz"], hdr["mode"]
    if nx <= 0 or ny <= 0 or nz <= 0:
        raise MRCError(f"nonpositive dimensions nx={nx} ny={ny} nz={nz}")
    if mode not in MODE_DTYPES:
        raise MRCError(f"unsupported MRC mode {mode}")
    if nz > 1:
        logger.warning("%s has %d sections; using the first", path, nz)
    dtype = np.dtype(MODE_DTYPES[mode]).newbyteorder(hdr["byte_order"])
    offset = HEADER_BYTES + max(hdr["nsymbt"], 0)
    count = nx * ny
    if len(raw) < offset + count * dtype.itemsize:
        raise MRCError(f"{path}: data block truncated")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = data.reshape(ny, nx).astype(dtype.newbyteorder("="))

    pixel_size = None
    if hdr["mx"] > 0 and hdr["cella"][0] > 0:
        pixel_size = float(hdr["cella"][0]) / hdr["mx"]
    return data, pixel_size


def write_mrc(path, data, mode=2, pixel_size=None):
    """Write a 2D array as a single-section little-endian MRC2014 file."""
    if mode not in MODE_DTYPES:
        raise MRCError(f"unsupported MRC mode {mode}")
    data = np.asarray(data)
    if data.ndim != 2:
        raise MRCError("only 2D data can be written")
    arr = np.ascontiguousarray(data.astype(np.dtype(MODE_DTYPES[mode]).newbyteorder("<")))
    ny, nx = arr.shape
    psize = 1.0 if pixel_size is None else float(pixel_size)

    header = bytearray(HEADER_BYTES)
    struct.pack_into("<4i", header, 0, nx, ny, 1, mode)
    struct.pack_into("<3i", header, 16, 0, 0, 0)
    struct.pack_into("<3i", header, 28, nx, ny, 1)
    struct.pack_into("<3f", header, 40, nx * psize, ny * psize, psize)
    struct.pack_into("<3f", header, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", header, 64, 1, 2, 3)
    if arr.size:
        struct.pack_into(
            "<3f", header, 76, float(arr.min()), float(arr.max()), float(arr.mean())
        )
    struct.pack_into("<2i", header, 88, 0, 0)  # ispg, nsymbt
    header[104:108] = b"MRCO"
    struct.pack_into("<i", header, 108, 20140)
    header[208:212] = b"MAP "
    header[212:216] = b"\x44\x44\x00\x00"
    struct.pack_into("<f", header, 216, float(arr.std()) if arr.size else 0.0)

    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(arr.tobytes())
