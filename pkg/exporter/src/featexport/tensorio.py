"""Writers for the engine's file contracts.

The byte layouts (binary tensor files and raw PGM) are the interface
between this exporter and the detection engine; they are implemented here
against the documented formats so the two packages stay independent.
"""

import struct

import numpy as np

MAGIC = b"PBFT"
VERSION = 1


def write_tensor(path, data):
    """Float32 little-endian tensor: PBFT magic, version, ndim, dims, payload."""
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim < 1 or any(d <= 0 for d in arr.shape):
        raise ValueError(f"bad tensor shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<II{arr.ndim}I", VERSION, arr.ndim, *arr.shape))
        fh.write(arr.tobytes())


def write_mask_pgm(path, mask):
    """8-bit raw PGM; nonzero pixels mark anomalous ground truth."""
    arr = np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())
