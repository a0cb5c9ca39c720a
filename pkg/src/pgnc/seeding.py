"""Deterministic random streams keyed by (master seed, purpose tag, indices)."""

import zlib

import numpy as np


def derive_rng(master_seed, tag, *indices):
    """Independent ``numpy.random.Generator`` for one purpose.

    Streams never share state; the same arguments always give the same stream.
    """
    key = [int(master_seed) & 0xFFFFFFFF, zlib.crc32(tag.encode("utf-8"))]
    key += [int(i) & 0xFFFFFFFF for i in indices]
    return np.random.default_rng(np.random.SeedSequence(key))


def cell_index(*coords, decimals=9):
    """Stable integer key for a grid cell from its rounded coordinates.

    Keying on values rather than positions keeps shared points identical when a
    grid is refined.
    """
    text = ",".join(f"{round(float(x), decimals) + 0.0:.{decimals}f}" for x in coords)
    return zlib.crc32(text.encode("ascii"))
