"""Binary tensor files and PGM images.

Tensor layout (little-endian throughout):

    offset 0   magic   4 bytes  b"PBFT"
    offset 4   version u32      always 1
    offset 8   ndim    u32      >= 1
    offset 12  dims    ndim * u32
    then       payload ndim-product * f32, row-major

A 3-d H x W x C map therefore carries a 24-byte header. Round-trips are
bit-exact for any finite float32 payload.

Masks are 8-bit binary PGM (P5, maxval 255, nonzero = anomalous); score
heatmaps are 16-bit PGM (P5, maxval 65535, big-endian sample order per the
netpbm convention).
"""

import struct

import numpy as np

from .errors import DataError, FormatError

MAGIC = b"PBFT"
VERSION = 1


def write_tensor(path, data):
    """Write ``data`` as a float32 tensor file. Dims must be non-empty."""
    if np.asarray(data).ndim == 0:
        raise DataError("tensor must have at least one dimension")
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if any(d <= 0 for d in arr.shape):
        raise DataError(f"tensor dims must be positive, got {arr.shape}")
    header = MAGIC + struct.pack(
        f"<II{arr.ndim}I", VERSION, arr.ndim, *arr.shape
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes())
    except OSError as exc:
        raise DataError(f"cannot write tensor file {path}: {exc}") from exc


def read_tensor(path):
    """Read a tensor file back as a float32 ndarray."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read tensor file {path}: {exc}") from exc
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes) at offset 0")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at offset 0")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if ndim < 1:
        raise FormatError(f"{path}: ndim must be >= 1, got {ndim} at offset 8")
    header_len = 12 + 4 * ndim
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated dims at offset {len(raw)}")
    dims = struct.unpack_from(f"<{ndim}I", raw, 12)
    if any(d == 0 for d in dims):
        raise FormatError(f"{path}: zero dimension in {dims} at offset 12")
    count = int(np.prod(dims))
    expected = header_len + 4 * count
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length {len(raw) - header_len} does not match "
            f"dims {dims} (expected {4 * count} bytes) at offset {header_len}"
        )
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=header_len)
    return flat.reshape(dims).copy()


def write_pgm(path, image, maxval=255):
    """Write a 2-d uint image as raw (P5) PGM. maxval 255 or 65535."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise DataError(f"PGM image must be 2-d, got shape {arr.shape}")
    if maxval == 255:
        payload = arr.astype(np.uint8).tobytes()
    elif maxval == 65535:
        payload = arr.astype(">u2").tobytes()
    else:
        raise DataError(f"unsupported PGM maxval {maxval}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(payload)


def write_heatmap(path, scores):
    """Write a [0, 1] float score map as 16-bit PGM (values scaled by 65535)."""
    arr = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
    write_pgm(path, np.round(arr * 65535.0).astype(np.uint16), maxval=65535)


def _pgm_tokens(raw):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    i = 0
    n = len(raw)
    while i < n:
        c = raw[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and raw[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < n and not raw[j : j + 1].isspace():
                j += 1
            yield raw[i:j], j
            i = j


def read_pgm(path):
    """Read a raw (P5) PGM; returns (array, maxval). 8- or 16-bit."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = _pgm_tokens(raw)
    try:
        magic, _ = next(tokens)
        if magic != b"P5":
            raise FormatError(f"{path}: not a raw PGM (magic {magic!r})")
        (w, _), (h, _), (maxval, end) = (next(tokens) for _ in range(3))
        w, h, maxval = int(w), int(h), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    start = end + 1  # single whitespace byte after maxval
    if maxval == 255:
        dtype, itemsize = np.uint8, 1
    elif maxval == 65535:
        dtype, itemsize = ">u2", 2
    else:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    need = w * h * itemsize
    if len(raw) - start < need:
        raise FormatError(f"{path}: truncated PGM payload at offset {start}")
    img = np.frombuffer(raw, dtype=dtype, count=w * h, offset=start).reshape(h, w)
    return img.astype(np.uint16), maxval


def read_mask(path):
    """Read an 8-bit PGM mask as a boolean grid (nonzero = anomalous)."""
    img, maxval = read_pgm(path)
    if maxval != 255:
        raise FormatError(f"{path}: expected 8-bit mask, got maxval {maxval}")
    return img > 0
