"""Seeded synthetic evening load profiles with known behavioural archetypes.

Each household has a flat base load with one demand peak and one dip per
evening. The times of the peak and the dip move from day to day with
Gaussian jitter (clipped to the window and snapped to the 5-minute grid),
so an archetype's jitter directly controls how "flexible" its households
look. No measurement noise is added: with zero jitter every day of a
household is identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from .ingest import N_SLOTS, SLOT_SECONDS, MeterReading

SLOT_MINUTES = SLOT_SECONDS // 60
LAST_MINUTE = SLOT_MINUTES * (N_SLOTS - 1)  # 235
DEFAULT_START = date(2011, 3, 7)  # a Monday
_LABEL_STREAM = 2**32  # spawn key reserved for the archetype shuffle


@dataclass(frozen=True)
class Archetype:
    name: str
    base_load: float  # W
    peak_magnitude: float  # W above base
    peak_time_mean: float  # minutes after 16:00
    peak_time_jitter: float  # minutes, std of daily peak time
    trough_time_jitter: float  # minutes, std of daily dip time
    energy_scale: float = 1.0
    trough_time_mean: float = 20.0
    trough_depth: float = 0.6  # fraction of base load removed at the dip
    event_width: float = 10.0  # minutes, std of the Gaussian peak/dip shape
    household_spread: float = 0.15  # per-household scale drawn from 1 +/- spread

    def __post_init__(self):
        for name in ("base_load", "peak_magnitude", "peak_time_jitter", "trough_time_jitter", "energy_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("peak_time_mean", "trough_time_mean"):
            if not 0 <= getattr(self, name) <= LAST_MINUTE:
                raise ValueError(f"{name} must lie in [0, {LAST_MINUTE}]")
        if not 0 <= self.trough_depth < 1:
            raise ValueError("trough_depth must lie in [0, 1)")
        if self.event_width <= 0:
            raise ValueError("event_width must be > 0")
        if not 0 <= self.household_spread < 1:
            raise ValueError("household_spread must lie in [0, 1)")


@dataclass(frozen=True)
class SynthSpec:
    archetypes: tuple[tuple[Archetype, int], ...]
    days: int
    seed: int = 0
    start: date = DEFAULT_START
    id_prefix: str = "H"

    def __post_init__(self):
        object.__setattr__(self, "archetypes", tuple((a, int(n)) for a, n in self.archetypes))
        if not self.archetypes:
            raise ValueError("at least one archetype is required")
        if any(n < 1 for _, n in self.archetypes):
            raise ValueError("archetype household counts must be >= 1")
        if self.days < 2:
            raise ValueError("days must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit value")

    @property
    def households(self) -> int:
        return sum(n for _, n in self.archetypes)


def default_archetypes() -> tuple[Archetype, ...]:
    """Low/high usage crossed with low/high timing variability."""
    return (
        Archetype("low_usage_steady", 150.0, 800.0, 120.0, 10.0, 10.0),
        Archetype("low_usage_variable", 150.0, 800.0, 120.0, 45.0, 45.0),
        Archetype("high_usage_steady", 450.0, 2400.0, 120.0, 10.0, 10.0),
        Archetype("high_usage_variable", 450.0, 2400.0, 120.0, 45.0, 45.0),
    )


def default_spec(seed: int = 0, households: int = 180, days: int = 250) -> SynthSpec:
    arche = default_archetypes()
    base, extra = divmod(households, len(arche))
    counts = [base + (i < extra) for i in range(len(arche))]
    return SynthSpec(tuple(zip(arche, counts)), days, seed)


def jitter_pair_spec(seed: int = 0, per_archetype: int = 45, days: int = 100) -> SynthSpec:
    """Two archetypes identical except for peak-time jitter (5 vs 60 minutes)."""
    steady = Archetype("steady", 300.0, 1500.0, 120.0, 5.0, 5.0)
    variable = Archetype("variable", 300.0, 1500.0, 120.0, 60.0, 5.0)
    return SynthSpec(((steady, per_archetype), (variable, per_archetype)), days, seed)


def working_days(start: date, count: int) -> list[date]:
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def household_ids(spec: SynthSpec) -> list[str]:
    n = spec.households
    width = max(3, len(str(n)))
    return [f"{spec.id_prefix}{i:0{width}d}" for i in range(1, n + 1)]


def _archetype_order(spec: SynthSpec) -> list[Archetype]:
    flat = [a for a, n in spec.archetypes for _ in range(n)]
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _LABEL_STREAM]))
    return [flat[i] for i in rng.permutation(len(flat))]


def ground_truth_labels(spec: SynthSpec) -> dict[str, str]:
    """household_id -> archetype name; depends only on the counts and the seed."""
    return {hid: a.name for hid, a in zip(household_ids(spec), _archetype_order(spec))}


def _snap(minutes: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(minutes / SLOT_MINUTES) * SLOT_MINUTES, 0, LAST_MINUTE)


def household_profiles(a: Archetype, days: int, rng: np.random.Generator) -> np.ndarray:
    """``days`` x 48 array of watts for one household of archetype ``a``."""
    scale = a.energy_scale * rng.uniform(1 - a.household_spread, 1 + a.household_spread)
    peak_t = _snap(a.peak_time_mean + a.peak_time_jitter * rng.standard_normal(days))
    trough_t = _snap(a.trough_time_mean + a.trough_time_jitter * rng.standard_normal(days))
    t = np.arange(N_SLOTS) * SLOT_MINUTES
    two_w2 = 2 * a.event_width**2
    peak = np.exp(-((t[None, :] - peak_t[:, None]) ** 2) / two_w2)
    dip = np.exp(-((t[None, :] - trough_t[:, None]) ** 2) / two_w2)
    watts = scale * (a.base_load * (1 - a.trough_depth * dip) + a.peak_magnitude * peak)
    return np.round(watts, 1)


def generate(spec: SynthSpec, tz: timezone = timezone.utc) -> list[MeterReading]:
    """All in-window readings, household by household and day by day."""
    days = working_days(spec.start, spec.days)
    offsets = [timedelta(seconds=SLOT_SECONDS * i) for i in range(N_SLOTS)]
    stamps = [[datetime.combine(d, time(16, 0), tzinfo=tz) + off for off in offsets] for d in days]
    out: list[MeterReading] = []
    for idx, (hid, a) in enumerate(zip(household_ids(spec), _archetype_order(spec))):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, idx]))
        watts = household_profiles(a, spec.days, rng).tolist()
        for day_stamps, day_watts in zip(stamps, watts):
            out.extend(MeterReading(hid, ts, w) for ts, w in zip(day_stamps, day_watts))
    return out


def write_ground_truth(labels: dict[str, str], fh) -> None:
    fh.write("household_id,archetype\n")
    for hid, name in labels.items():
        fh.write(f"{hid},{name}\n")


def read_ground_truth(fh) -> dict[str, str]:
    out = {}
    for i, line in enumerate(fh):
        line = line.strip()
        if not line or (i == 0 and line == "household_id,archetype"):
            continue
        hid, name = line.split(",", 1)
        out[hid] = name
    return out
