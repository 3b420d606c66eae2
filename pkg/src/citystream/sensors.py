"""Synthetic multi-sensor dataset generation.

Fifteen sensor categories across five families (environmental, traffic,
cctv, infrastructure, emergency) are simulated with per-category
probabilistic models: Gaussian noise around a diurnal or stationary mean,
Poisson counts with a diurnal or constant intensity, and Bernoulli event
flags. All values are clamped to per-category physical ranges. Generation
is fully deterministic: each (location, category) pair draws from its own
named substream of the master seed, so streams are independent and
individually reproducible.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import substream

FAMILIES = ("environmental", "traffic", "cctv", "infrastructure", "emergency")

GAUSSIAN_DIURNAL = "gaussian_diurnal"
POISSON_DIURNAL = "poisson_diurnal"
POISSON_CONST = "poisson_const"
GAUSSIAN_STATIONARY = "gaussian_stationary"
BERNOULLI = "bernoulli"

MODELS = (GAUSSIAN_DIURNAL, POISSON_DIURNAL, POISSON_CONST, GAUSSIAN_STATIONARY, BERNOULLI)

POISSON_FLOOR = 0.01  # intensity floor after diurnal modulation


@dataclass(frozen=True)
class SensorKind:
    """One of the fifteen sensor categories."""

    category: str
    family: str
    unit: str
    model: str
    nominal_bytes: int


# Registry of the fifteen categories. Nominal serialized sizes are the
# per-family transport accounting defaults (cctv metadata records are
# larger, emergency flags smaller).
KINDS: tuple[SensorKind, ...] = (
    SensorKind("temperature", "environmental", "degC", GAUSSIAN_DIURNAL, 64),
    SensorKind("humidity", "environmental", "pct", GAUSSIAN_DIURNAL, 64),
    SensorKind("air_quality", "environmental", "aqi", GAUSSIAN_DIURNAL, 64),
    SensorKind("noise_level", "environmental", "dB", GAUSSIAN_DIURNAL, 64),
    SensorKind("vehicle_count", "traffic", "veh/interval", POISSON_DIURNAL, 64),
    SensorKind("pedestrian_count", "traffic", "ped/interval", POISSON_DIURNAL, 64),
    SensorKind("transit_boardings", "traffic", "pax/interval", POISSON_DIURNAL, 64),
    SensorKind("cctv_object_count", "cctv", "objects/frame", POISSON_DIURNAL, 512),
    SensorKind("cctv_motion_events", "cctv", "events/interval", POISSON_CONST, 512),
    SensorKind("cctv_activity_level", "cctv", "ratio", GAUSSIAN_STATIONARY, 512),
    SensorKind("vibration", "infrastructure", "mm/s", GAUSSIAN_STATIONARY, 64),
    SensorKind("power_voltage", "infrastructure", "V", GAUSSIAN_STATIONARY, 64),
    SensorKind("water_pressure", "infrastructure", "kPa", GAUSSIAN_STATIONARY, 64),
    SensorKind("valve_state", "infrastructure", "open", BERNOULLI, 64),
    SensorKind("emergency_alert", "emergency", "alert", BERNOULLI, 32),
)

KIND_BY_CATEGORY: Mapping[str, SensorKind] = {k.category: k for k in KINDS}
CATEGORY_ORDER: tuple[str, ...] = tuple(k.category for k in KINDS)


@dataclass(frozen=True)
class GeneratorConfig:
    """Per-category generative model parameters.

    ``mu_base`` is the family baseline mean (the Poisson base intensity for
    count models, P(1) lives in ``bernoulli_p`` for Bernoulli models).
    ``profile`` selects the time-of-day modulation: "flat", "sinusoid"
    (single harmonic with ``amplitude``/``phase_hours``) or "two_peak"
    (two cosine lobes centered on ``peak_hours``, each ``peak_width_hours``
    half-width, for rush-hour shapes).
    """

    category: str
    mu_base: float = 0.0
    sigma: float = 1.0
    bernoulli_p: float = 0.5
    profile: str = "flat"
    amplitude: float = 0.0
    phase_hours: float = 0.0
    peak_hours: tuple[float, float] = (8.0, 18.0)
    peak_width_hours: float = 3.0
    clamp: tuple[float, float] = (-math.inf, math.inf)
    seed: int = 42

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"{self.category}: sigma must be positive")
        if not 0.0 <= self.bernoulli_p <= 1.0:
            raise ValueError(f"{self.category}: bernoulli_p must lie in [0, 1]")
        lo, hi = self.clamp
        if not lo < hi:
            raise ValueError(f"{self.category}: clamp range must satisfy min < max")
        if self.profile not in ("flat", "sinusoid", "two_peak"):
            raise ValueError(f"{self.category}: unknown profile {self.profile!r}")

    @property
    def kind(self) -> SensorKind:
        return KIND_BY_CATEGORY[self.category]

    def mean_at(self, hour: float) -> float:
        """Expected value of the underlying process at a time of day."""
        if self.profile == "sinusoid":
            return self.mu_base + self.amplitude * math.sin(
                2.0 * math.pi * (hour - self.phase_hours) / 24.0
            )
        if self.profile == "two_peak":
            total = self.mu_base
            for center in self.peak_hours:
                dist = abs((hour - center + 12.0) % 24.0 - 12.0)
                if dist < self.peak_width_hours:
                    total += self.amplitude * math.cos(
                        math.pi * dist / (2.0 * self.peak_width_hours)
                    )
            return total
        return self.mu_base


def hour_of_step(t: int, interval_minutes: int) -> float:
    """Time of day in hours for a simulation step."""
    return (t * interval_minutes / 60.0) % 24.0


def diurnal_mean(config: GeneratorConfig, t: int, interval_minutes: int = 5) -> float:
    """Expected mean at step ``t``; the Poisson intensity is floored so the
    count model stays well defined."""
    if t < 0:
        raise ValueError("step must be nonnegative")
    mean = config.mean_at(hour_of_step(t, interval_minutes))
    if config.kind.model in (POISSON_DIURNAL, POISSON_CONST):
        return max(mean, POISSON_FLOOR)
    return mean


@dataclass
class SensorReading:
    """One timestamped, located measurement. ``value`` is None inside a
    missing-data gap; ``agg_count`` > 1 marks an edge-side aggregate of
    that many source readings."""

    __slots__ = ("t", "location", "category", "value", "label", "group", "agg_count")

    t: int
    location: str
    category: str
    value: float | None
    label: str | None
    group: int | None
    agg_count: int

    def __init__(
        self,
        t: int,
        location: str,
        category: str,
        value: float | None,
        label: str | None = None,
        group: int | None = None,
        agg_count: int = 1,
    ) -> None:
        self.t = t
        self.location = location
        self.category = category
        self.value = value
        self.label = label
        self.group = group
        self.agg_count = agg_count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SensorReading):
            return NotImplemented
        return (
            self.t == other.t
            and self.location == other.location
            and self.category == other.category
            and self.value == other.value
            and self.label == other.label
            and self.group == other.group
            and self.agg_count == other.agg_count
        )

    def __repr__(self) -> str:
        return (
            f"SensorReading(t={self.t}, location={self.location!r}, "
            f"category={self.category!r}, value={self.value!r}, "
            f"label={self.label!r}, group={self.group!r})"
        )


def reading_id(r: SensorReading) -> str:
    rid = f"{r.t}:{r.location}:{r.category}"
    if r.agg_count > 1:
        rid += ":agg"
    return rid


def nominal_bytes(r: SensorReading) -> int:
    return KIND_BY_CATEGORY[r.category].nominal_bytes


@dataclass(frozen=True)
class DatasetConfig:
    """Scenario-level dataset parameters."""

    count: int = 5000
    locations: int = 100
    horizon_days: int = 30
    interval_minutes: int = 5
    seed: int = 42
    generators: Mapping[str, GeneratorConfig] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.horizon_days * 24 * 60 // self.interval_minutes

    def location_ids(self) -> list[str]:
        return [f"loc-{i:03d}" for i in range(self.locations)]


def default_generators(seed: int = 42) -> dict[str, GeneratorConfig]:
    """Declared default model parameters for all fifteen categories."""
    g = GeneratorConfig
    configs = [
        g("temperature", mu_base=20.0, sigma=1.5, profile="sinusoid",
          amplitude=6.0, phase_hours=8.0, clamp=(-10.0, 40.0), seed=seed),
        g("humidity", mu_base=60.0, sigma=5.0, profile="sinusoid",
          amplitude=15.0, phase_hours=20.0, clamp=(0.0, 100.0), seed=seed),
        g("air_quality", mu_base=80.0, sigma=10.0, profile="sinusoid",
          amplitude=30.0, phase_hours=2.0, clamp=(0.0, 500.0), seed=seed),
        g("noise_level", mu_base=58.0, sigma=3.0, profile="sinusoid",
          amplitude=9.0, phase_hours=6.0, clamp=(30.0, 120.0), seed=seed),
        g("vehicle_count", mu_base=18.0, profile="two_peak",
          amplitude=30.0, clamp=(0.0, 400.0), seed=seed),
        g("pedestrian_count", mu_base=12.0, profile="two_peak",
          amplitude=20.0, clamp=(0.0, 300.0), seed=seed),
        g("transit_boardings", mu_base=8.0, profile="two_peak",
          amplitude=14.0, clamp=(0.0, 200.0), seed=seed),
        g("cctv_object_count", mu_base=10.0, profile="sinusoid",
          amplitude=6.0, phase_hours=6.0, clamp=(0.0, 120.0), seed=seed),
        g("cctv_motion_events", mu_base=8.0, clamp=(0.0, 100.0), seed=seed),
        g("cctv_activity_level", mu_base=0.45, sigma=0.08, clamp=(0.0, 1.0), seed=seed),
        g("vibration", mu_base=5.0, sigma=0.8, clamp=(0.0, 50.0), seed=seed),
        g("power_voltage", mu_base=230.0, sigma=2.5, clamp=(180.0, 260.0), seed=seed),
        g("water_pressure", mu_base=420.0, sigma=12.0, clamp=(0.0, 900.0), seed=seed),
        g("valve_state", bernoulli_p=0.97, clamp=(0.0, 1.0), seed=seed),
        g("emergency_alert", bernoulli_p=0.001, clamp=(0.0, 1.0), seed=seed),
    ]
    return {c.category: c for c in configs}


def default_dataset_config(seed: int = 42) -> DatasetConfig:
    return DatasetConfig(seed=seed, generators=default_generators(seed))


def sample_values(
    config: GeneratorConfig,
    steps: Sequence[int],
    rng: np.random.Generator,
    interval_minutes: int = 5,
    clamp: bool = True,
) -> np.ndarray:
    """Draw one value per step from the category's model.

    Separated out so distribution tests can exercise a model at scale with
    ``clamp=False``; ``generate_dataset`` feeds it each pair's step list.
    """
    steps = np.asarray(steps, dtype=np.int64)
    hours = (steps * interval_minutes / 60.0) % 24.0
    model = config.kind.model
    if model in (GAUSSIAN_DIURNAL, GAUSSIAN_STATIONARY):
        if config.profile == "flat":
            mu = np.full(len(steps), config.mu_base)
        else:
            mu = np.array([config.mean_at(h) for h in hours])
        values = mu + rng.normal(0.0, config.sigma, len(steps))
    elif model in (POISSON_DIURNAL, POISSON_CONST):
        if config.profile == "flat":
            lam = np.full(len(steps), max(config.mu_base, POISSON_FLOOR))
        else:
            lam = np.maximum([config.mean_at(h) for h in hours], POISSON_FLOOR)
        values = rng.poisson(lam).astype(np.float64)
    elif model == BERNOULLI:
        values = (rng.random(len(steps)) < config.bernoulli_p).astype(np.float64)
    else:  # pragma: no cover - registry guards the model names
        raise ValueError(f"unknown model {model!r}")
    if clamp:
        lo, hi = config.clamp
        np.clip(values, lo, hi, out=values)
    return values


def _choose_cells(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    """``count`` distinct cell indices out of ``total``, sorted ascending."""
    if count > total:
        raise ValueError(f"count {count} exceeds available cells {total}")
    if count * 2 >= total:
        return np.sort(rng.permutation(total)[:count])
    chosen: np.ndarray = np.empty(0, dtype=np.int64)
    while len(chosen) < count:
        need = count - len(chosen)
        draw = rng.integers(0, total, size=int(need * 1.3) + 8)
        chosen = np.unique(np.concatenate([chosen, draw]))
        # np.unique sorts; over-collection is trimmed to a random subset so
        # the kept cells stay uniform and a pure function of the draw
        # sequence.
        if len(chosen) > count:
            keep = np.sort(rng.permutation(len(chosen))[:count])
            chosen = chosen[keep]
    return np.sort(chosen)


def generate_dataset(config: DatasetConfig, threads: int = 1) -> list[SensorReading]:
    """Generate the seeded dataset, ordered by (t, location, category).

    Exactly ``config.count`` readings are placed uniformly at random over
    the (location, category, step) cell grid; each (location, category)
    pair's values come from its own substream, so pair streams are
    independent of generation order.
    """
    if config.count <= 0:
        raise ValueError("count must be positive")
    if not config.generators:
        raise ValueError("at least one category generator is required")
    for gen in config.generators.values():
        lo, hi = gen.clamp
        if gen.kind.model != BERNOULLI and not lo <= gen.mu_base <= hi:
            raise ValueError(
                f"{gen.category}: clamp range [{lo}, {hi}] excludes mu_base {gen.mu_base}"
            )

    categories = sorted(config.generators)
    ncat = len(categories)
    steps = config.steps
    locations = config.location_ids()
    total = steps * config.locations * ncat

    placement = substream(config.seed, "placement")
    cells = _choose_cells(placement, total, config.count)

    # Cell id layout: ((step * locations) + loc) * ncat + cat, so ascending
    # cell ids are already in (t, location, category) order.
    cat_idx = cells % ncat
    rest = cells // ncat
    loc_idx = rest % config.locations
    step_idx = rest // config.locations

    pair_positions: dict[tuple[int, int], list[int]] = {}
    for pos in range(len(cells)):
        pair_positions.setdefault((int(loc_idx[pos]), int(cat_idx[pos])), []).append(pos)

    values = np.empty(len(cells), dtype=np.float64)

    def fill_pair(item: tuple[tuple[int, int], list[int]]) -> None:
        (li, ci), positions = item
        pair_steps = step_idx[positions]
        gen = config.generators[categories[ci]]
        rng = substream(config.seed, "values", locations[li], categories[ci])
        values[positions] = sample_values(gen, pair_steps, rng, config.interval_minutes)

    items = sorted(pair_positions.items())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_pair, items))
    else:
        for item in items:
            fill_pair(item)

    return [
        SensorReading(
            t=int(step_idx[pos]),
            location=locations[int(loc_idx[pos])],
            category=categories[int(cat_idx[pos])],
            value=float(values[pos]),
        )
        for pos in range(len(cells))
    ]


# CSV schema: t,location,category,value,label,group with the empty string
# for null values / absent labels. "cross" abbreviates cross_sensor.
_CSV_HEADER = ["t", "location", "category", "value", "label", "group"]
_LABEL_TO_CSV = {"cross_sensor": "cross"}
_CSV_TO_LABEL = {"cross": "cross_sensor"}


def write_csv(readings: Iterable[SensorReading], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in readings:
            label = _LABEL_TO_CSV.get(r.label, r.label) if r.label else ""
            writer.writerow(
                [
                    r.t,
                    r.location,
                    r.category,
                    "" if r.value is None else repr(r.value),
                    label,
                    "" if r.group is None else r.group,
                ]
            )


def read_csv(path: str) -> list[SensorReading]:
    readings = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected dataset header: {header}")
        for row in reader:
            t, location, category, value, label, group = row
            readings.append(
                SensorReading(
                    t=int(t),
                    location=location,
                    category=category,
                    value=None if value == "" else float(value),
                    label=_CSV_TO_LABEL.get(label, label) or None,
                    group=None if group == "" else int(group),
                )
            )
    return readings
