"""Contiguous time-block fold layout shared by all cross-validation code."""

from __future__ import annotations

import numpy as np


def contiguous_blocks(n_rows: int, n_blocks: int) -> list[tuple[int, int]]:
    """Split row indices 0..n_rows into n_blocks contiguous [start, stop) ranges.

    The blocks partition the rows: disjoint, in time order, covering
    everything; sizes differ by at most one row.
    """
    if n_blocks < 1 or n_blocks > n_rows:
        raise ValueError(f"cannot split {n_rows} rows into {n_blocks} blocks")
    bounds = np.linspace(0, n_rows, n_blocks + 1).astype(int)
    return [(int(bounds[g]), int(bounds[g + 1])) for g in range(n_blocks)]
