"""Internal array helpers shared by the samplers."""

from __future__ import annotations

import numpy as np


def segment_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Sum ``values`` into ``len(counts)`` consecutive groups of the given sizes.

    Empty groups contribute 0.  ``values.size`` must equal ``counts.sum()``.
    """
    offsets = np.concatenate(([0], np.cumsum(counts)))
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    return prefix[offsets[1:]] - prefix[offsets[:-1]]


def round_sig(x: float, digits: int = 12) -> float:
    """Round to a number of significant digits (cache-key normalisation)."""
    return float(f"{x:.{digits}g}")
