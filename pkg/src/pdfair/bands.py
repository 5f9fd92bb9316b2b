"""Numeric banding for fairness slices (age bands and the like)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBins

UNKNOWN = "unknown"


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float | None = None  # None means open-ended ("61+")

    @property
    def label(self) -> str:
        if self.hi is None:
            return f"{self.lo:g}+"
        return f"{self.lo:g}-{self.hi:g}"


def parse_bins(text: str) -> tuple[Band, ...]:
    """Parse ``"18-30,31-40,61+"`` into bands.

    Bands must be listed in increasing order and must not overlap. Only the
    last band may be open-ended.
    """
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise EmptyBins(f"no bands in {text!r}")
    bands = []
    for part in parts:
        try:
            if part.endswith("+"):
                bands.append(Band(float(part[:-1])))
            else:
                lo, hi = part.split("-", 1)
                bands.append(Band(float(lo), float(hi)))
        except ValueError:
            raise EmptyBins(f"cannot parse band {part!r}; expected 'lo-hi' or 'lo+'") from None
    for i, b in enumerate(bands):
        if b.hi is not None and b.hi < b.lo:
            raise EmptyBins(f"band {b.label} has hi < lo")
        if b.hi is None and i != len(bands) - 1:
            raise EmptyBins(f"open-ended band {b.label} must be last")
        if i and bands[i - 1].hi is not None and b.lo <= bands[i - 1].hi:
            raise EmptyBins(f"band {b.label} overlaps {bands[i - 1].label}")
    return tuple(bands)


DECADE_BANDS = parse_bins("18-30,31-40,41-50,51-60,61+")


def format_bins(bands) -> str:
    return ",".join(b.label for b in bands)


def assign_bands(values, bands) -> list[str]:
    """Label each value with its band.

    Band ``i`` owns ``[lo_i, lo_{i+1})`` so non-integer values falling between
    two inclusive integer bands go to the lower one. Values outside every band
    get ``"<lo"`` or ``">hi"`` labels, NaN gets ``"unknown"``; the result is
    therefore always a partition.
    """
    if not bands:
        raise EmptyBins("empty band list")
    values = np.asarray(values, dtype=float)
    lows = np.array([b.lo for b in bands])
    labels = np.array([b.label for b in bands] + [UNKNOWN], dtype=object)
    idx = np.searchsorted(lows, values, side="right") - 1
    out = labels[np.clip(idx, 0, len(bands) - 1)].copy()
    out[idx < 0] = f"<{bands[0].lo:g}"
    last = bands[-1]
    if last.hi is not None:
        out[values > last.hi] = f">{last.hi:g}"
    out[np.isnan(values)] = UNKNOWN
    return out.tolist()
