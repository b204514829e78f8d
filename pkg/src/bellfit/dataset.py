"""In-memory representation of counted data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, MissingDataError

COINCIDENCE_FIELDS = ("c_pp", "c_pm", "c_mp", "c_mm")
SINGLES_FIELDS = ("s_ap", "s_am", "s_bp", "s_bm")
COUNT_FIELDS = COINCIDENCE_FIELDS + SINGLES_FIELDS

# angles are matched modulo a half turn at this resolution (degrees)
ANGLE_DECIMALS = 6


def angle_key(deg):
    """Canonical lookup key of an analyzer angle, modulo 180 degrees."""
    return round(float(deg) % 180.0, ANGLE_DECIMALS) % 180.0


@dataclass(frozen=True)
class CountRecord:
    alpha_deg: float
    beta_deg: float
    c_pp: int
    c_pm: int
    c_mp: int
    c_mm: int
    s_ap: int
    s_am: int
    s_bp: int
    s_bm: int
    n_pairs: int | None = None

    @property
    def coincidences(self):
        return np.array([self.c_pp, self.c_pm, self.c_mp, self.c_mm], dtype=np.int64)

    @property
    def singles(self):
        return np.array([self.s_ap, self.s_am, self.s_bp, self.s_bm], dtype=np.int64)

    def scaled(self, k):
        """Copy with every count multiplied by the integer ``k``."""
        counts = {name: getattr(self, name) * k for name in COUNT_FIELDS}
        n = None if self.n_pairs is None else self.n_pairs * k
        return CountRecord(self.alpha_deg, self.beta_deg, n_pairs=n, **counts)


@dataclass
class Dataset:
    """A grid of :class:`CountRecord` plus free-form string metadata."""

    records: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {}
        for rec in self.records:
            key = (angle_key(rec.alpha_deg), angle_key(rec.beta_deg))
            if key in self._index:
                raise DegenerateDataError(
                    f"duplicate setting alpha={rec.alpha_deg}, beta={rec.beta_deg}")
            self._index[key] = rec

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.records == other.records
                and self.metadata == other.metadata)

    def get(self, alpha_deg, beta_deg):
        return self._index.get((angle_key(alpha_deg), angle_key(beta_deg)))

    def lookup(self, alpha_deg, beta_deg):
        rec = self.get(alpha_deg, beta_deg)
        if rec is None:
            raise MissingDataError(
                f"no record at alpha={angle_key(alpha_deg)} deg, "
                f"beta={angle_key(beta_deg)} deg")
        return rec

    def beta_values(self):
        return sorted({angle_key(r.beta_deg) for r in self.records})

    def alpha_values(self):
        return sorted({angle_key(r.alpha_deg) for r in self.records})

    def scan(self, beta_deg):
        """Records sharing one Bob angle, ordered by Alice angle."""
        key = angle_key(beta_deg)
        recs = [r for r in self.records if angle_key(r.beta_deg) == key]
        if not recs:
            raise MissingDataError(
                f"no scan at beta={key} deg; available: {self.beta_values()}")
        return AngleScan(key, sorted(recs, key=lambda r: angle_key(r.alpha_deg)))

    def scans(self):
        return [self.scan(b) for b in self.beta_values()]

    def scaled(self, k):
        return Dataset([r.scaled(k) for r in self.records], dict(self.metadata))


@dataclass
class AngleScan:
    """All records at one Bob analyzer position: the unit of a fit."""

    beta_deg: float
    records: list
    window: str | None = None

    def __post_init__(self):
        key = angle_key(self.beta_deg)
        if any(angle_key(r.beta_deg) != key for r in self.records):
            raise DegenerateDataError(f"scan at beta={key} mixes Bob angles")
        if len({angle_key(r.alpha_deg) for r in self.records}) < 3:
            raise DegenerateDataError(
                f"scan at beta={key} has fewer than 3 distinct Alice angles")
