"""Rule-based A100 MIG profile selection from a predicted memory bound.

The prediction is treated as an upper bound on what the model will allocate,
so each profile interval is closed on its upper end: a prediction of exactly
5120 MB still fits 1g.5gb. 1 GB = 1024 MB throughout.
"""

from __future__ import annotations

import enum
import math

from .errors import NonFinite


class MigProfile(enum.Enum):
    """A100 partition sizes, ordered by memory ceiling."""

    MIG_1G_5GB = ("1g.5gb", 5 * 1024)
    MIG_2G_10GB = ("2g.10gb", 10 * 1024)
    MIG_3G_20GB = ("3g.20gb", 20 * 1024)
    MIG_7G_40GB = ("7g.40gb", 40 * 1024)

    def __init__(self, label: str, max_memory_mb: int):
        self.label = label
        self.max_memory_mb = max_memory_mb

    def __str__(self) -> str:
        return self.label


def mig_profile(alpha_mb: float) -> MigProfile | None:
    """Smallest profile whose memory ceiling covers alpha_mb.

    Returns None for alpha_mb <= 0 or above the largest ceiling (40960 MB).
    Raises NonFinite for NaN or infinite input.
    """
    if not math.isfinite(alpha_mb):
        raise NonFinite(f"memory prediction is not finite: {alpha_mb}")
    if alpha_mb <= 0:
        return None
    for profile in MigProfile:
        if alpha_mb <= profile.max_memory_mb:
            return profile
    return None
