"""Labeled anomaly and missing-data injection.

Four anomaly kinds are injected into generated streams: point spikes of
``k * sigma`` (k drawn from ``k_range``), contextual values drawn from the
same model at an incompatible time of day, collective runs (flatline or
an alternating burst), and cross-sensor events that perturb co-located
categories at the same step. Missing-data gaps null out contiguous runs.
Spans never overlap within a (location, category) stream, and the whole
process is a deterministic function of the injection seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .rng import substream
from .sensors import (
    BERNOULLI,
    POISSON_CONST,
    POISSON_DIURNAL,
    POISSON_FLOOR,
    GeneratorConfig,
    SensorReading,
    diurnal_mean,
    hour_of_step,
)

ANOMALY_KINDS = ("point", "contextual", "collective", "cross_sensor")
MISSING = "missing"


def _uniform_mix() -> dict[str, float]:
    return {kind: 0.25 for kind in ANOMALY_KINDS}


@dataclass(frozen=True)
class InjectionConfig:
    rate: float = 0.02
    missing_rate: float = 0.005
    k_range: tuple[float, float] = (5.0, 10.0)
    gap_range: tuple[int, int] = (1, 10)
    mix: Mapping[str, float] = field(default_factory=_uniform_mix)
    seed: int = 42

    def __post_init__(self) -> None:
        if not 0.0 < self.rate < 1.0:
            raise ValueError("rate must lie in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.k_range[0] < 5.0 or self.k_range[1] > 10.0 or self.k_range[0] > self.k_range[1]:
            raise ValueError("k_range must be a subinterval of [5, 10]")
        if self.gap_range[0] < 1 or self.gap_range[0] > self.gap_range[1]:
            raise ValueError("gap_range must satisfy 1 <= lo <= hi")
        total = sum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError("mix proportions must sum to 1")
        if any(k not in ANOMALY_KINDS for k in self.mix):
            raise ValueError(f"mix keys must be among {ANOMALY_KINDS}")


@dataclass
class InjectionResult:
    readings: list[SensorReading]
    injected_points: int
    missing_points: int
    counts_by_kind: dict[str, int]
    gap_lengths: list[int]
    groups: int


def effective_sigma(gen: GeneratorConfig, t: int, interval_minutes: int) -> float:
    """Model noise scale at a step: sigma for Gaussian families, sqrt(lam)
    for Poisson families."""
    model = gen.kind.model
    if model in (POISSON_DIURNAL, POISSON_CONST):
        return math.sqrt(max(diurnal_mean(gen, t, interval_minutes), POISSON_FLOOR))
    return gen.sigma


def _clamp(gen: GeneratorConfig, v: float) -> float:
    lo, hi = gen.clamp
    return min(max(v, lo), hi)


def _incompatible_hour(gen: GeneratorConfig, hour: float) -> float | None:
    """Hour whose expected value differs most from the local one, provided
    the gap is at least two sigma; None when the profile is too flat."""
    mu_here = gen.mean_at(hour)
    best_hour, best_gap = None, 0.0
    for i in range(96):
        h = i * 0.25
        gap = abs(gen.mean_at(h) - mu_here)
        if gap > best_gap:
            best_hour, best_gap = h, gap
    if best_hour is None or best_gap < 2.0 * gen.sigma:
        return None
    return best_hour


class _StreamState:
    """Occupancy bookkeeping for one (location, category) stream."""

    __slots__ = ("indices", "taken")

    def __init__(self, indices: list[int]) -> None:
        self.indices = indices  # positions into the readings list, time order
        self.taken = np.zeros(len(indices), dtype=bool)

    def free_singles(self) -> list[int]:
        return [i for i in range(len(self.indices)) if not self.taken[i]]

    def free_runs(self, length: int) -> list[int]:
        """Start offsets of free runs of at least ``length`` samples."""
        starts = []
        run = 0
        for i in range(len(self.indices)):
            run = 0 if self.taken[i] else run + 1
            if run >= length:
                starts.append(i - length + 1)
        return starts

    def max_free_run(self) -> int:
        best = run = 0
        for i in range(len(self.indices)):
            run = 0 if self.taken[i] else run + 1
            best = max(best, run)
        return best

    def take(self, start: int, length: int) -> list[int]:
        span = list(range(start, start + length))
        if any(self.taken[i] for i in span):
            raise RuntimeError("overlapping span")
        for i in span:
            self.taken[i] = True
        return [self.indices[i] for i in span]


def _kind_targets(n_anom: int, mix: Mapping[str, float]) -> dict[str, int]:
    """Split the anomaly budget by largest remainder."""
    raw = {k: n_anom * mix.get(k, 0.0) for k in ANOMALY_KINDS}
    targets = {k: int(raw[k]) for k in ANOMALY_KINDS}
    short = n_anom - sum(targets.values())
    for k in sorted(ANOMALY_KINDS, key=lambda k: (raw[k] - targets[k], k), reverse=True):
        if short <= 0:
            break
        targets[k] += 1
        short -= 1
    return targets


def inject(
    stream: Sequence[SensorReading],
    cfg: InjectionConfig,
    gens: Mapping[str, GeneratorConfig],
    interval_minutes: int = 5,
) -> InjectionResult:
    """Label a copy of the stream with anomalies and missing gaps.

    Kind budgets that cannot be placed (a category set with no diurnal
    swing for contextual anomalies, too few co-located cells for
    cross-sensor events, streams too short for a collective run) fall back
    to point anomalies so the overall rate target is still met.
    """
    readings = [
        SensorReading(r.t, r.location, r.category, r.value, r.label, r.group)
        for r in stream
    ]
    n = len(readings)
    n_anom = round(cfg.rate * n)
    n_missing = round(cfg.missing_rate * n)
    rng = substream(cfg.seed, "inject")

    streams: dict[tuple[str, str], _StreamState] = {}
    order: dict[tuple[str, str], list[int]] = {}
    for idx, r in enumerate(readings):
        order.setdefault((r.location, r.category), []).append(idx)
    for key in sorted(order):
        streams[key] = _StreamState(order[key])

    eligible_keys = sorted(
        k for k in streams if gens[k[1]].kind.model != BERNOULLI
    )
    contextual_keys = [
        k
        for k in eligible_keys
        if _incompatible_hour(gens[k[1]], 0.0) is not None
        or _incompatible_hour(gens[k[1]], 12.0) is not None
    ]

    capacity = sum(len(streams[k].indices) for k in eligible_keys)
    if n_anom + n_missing > capacity:
        raise ValueError(
            f"anomaly + gap budget {n_anom + n_missing} exceeds "
            f"non-overlapping capacity {capacity}"
        )

    targets = _kind_targets(n_anom, cfg.mix)
    counts = {k: 0 for k in ANOMALY_KINDS}
    next_group = 0
    gap_lengths: list[int] = []

    def draw_k() -> float:
        return float(rng.uniform(cfg.k_range[0], cfg.k_range[1]))

    def spike(r: SensorReading, gen: GeneratorConfig, kind: str, group: int | None) -> None:
        """Displace a value by k*sigma, keeping the pre-clamp deviation from
        the local mean at five sigma or more and preferring the uniformly
        drawn sign unless clamping would erase the deviation."""
        k = draw_k()
        sig = effective_sigma(gen, r.t, interval_minutes)
        mu = diurnal_mean(gen, r.t, interval_minutes)
        base = r.value if r.value is not None else mu
        sign = 1.0 if rng.random() < 0.5 else -1.0
        candidates = [sign, -sign]
        viable = [s for s in candidates if abs(base + s * k * sig - mu) >= 5.0 * sig]
        if not viable:  # cannot happen for k >= 5, kept as a guard
            viable = candidates
        chosen = viable[0]
        for s in viable:
            clamped = _clamp(gen, base + s * k * sig)
            if abs(clamped - base) >= 0.5 * k * sig:
                chosen = s
                break
        r.value = _clamp(gen, base + chosen * k * sig)
        r.label = kind
        r.group = group

    def place_singles(kind: str, target: int) -> int:
        """Place ``target`` single-sample anomalies; returns the shortfall."""
        nonlocal next_group
        keys = contextual_keys if kind == "contextual" else eligible_keys
        placed = 0
        while placed < target:
            candidates = [k for k in keys if streams[k].free_singles()]
            if not candidates:
                break
            key = candidates[int(rng.integers(len(candidates)))]
            state = streams[key]
            free = state.free_singles()
            offset = free[int(rng.integers(len(free)))]
            (idx,) = state.take(offset, 1)
            r = readings[idx]
            gen = gens[r.category]
            if kind == "contextual":
                hour = hour_of_step(r.t, interval_minutes)
                target_hour = _incompatible_hour(gen, hour)
                if target_hour is None:
                    state.taken[offset] = False
                    continue
                mu_far = gen.mean_at(target_hour)
                if gen.kind.model in (POISSON_DIURNAL, POISSON_CONST):
                    v = float(rng.poisson(max(mu_far, POISSON_FLOOR)))
                else:
                    v = float(rng.normal(mu_far, gen.sigma))
                r.value = _clamp(gen, v)
                r.label = "contextual"
                r.group = next_group
            else:
                spike(r, gen, kind, next_group)
            next_group += 1
            placed += 1
        return target - placed

    # Collective runs first: they need contiguous room, which is scarcest.
    placed_coll = 0
    while placed_coll < targets["collective"]:
        lo, hi = cfg.gap_range
        length = int(rng.integers(lo, hi + 1))
        length = min(length, max(targets["collective"] - placed_coll, lo))
        candidates = [k for k in eligible_keys if streams[k].free_runs(length)]
        if not candidates:
            best = max((streams[k].max_free_run() for k in eligible_keys), default=0)
            if best < 1:
                break
            length = min(length, best)
            candidates = [k for k in eligible_keys if streams[k].free_runs(length)]
            if not candidates:
                break
        key = candidates[int(rng.integers(len(candidates)))]
        state = streams[key]
        starts = state.free_runs(length)
        start = starts[int(rng.integers(len(starts)))]
        span = state.take(start, length)
        gen = gens[key[1]]
        flatline = rng.random() < 0.5
        v0 = readings[span[0]].value
        for j, idx in enumerate(span):
            r = readings[idx]
            if flatline:
                r.value = v0
            else:
                mu = diurnal_mean(gen, r.t, interval_minutes)
                sig = effective_sigma(gen, r.t, interval_minutes)
                r.value = _clamp(gen, mu + (3.0 * sig if j % 2 == 0 else -3.0 * sig))
            r.label = "collective"
            r.group = next_group
        next_group += 1
        placed_coll += length
    counts["collective"] = placed_coll
    leftover = max(targets["collective"] - placed_coll, 0)

    # Cross-sensor events: at least two free co-located categories per step.
    cells: dict[tuple[str, int], list[tuple[tuple[str, str], int]]] = {}
    for key in eligible_keys:
        state = streams[key]
        for offset, idx in enumerate(state.indices):
            r = readings[idx]
            cells.setdefault((r.location, r.t), []).append((key, offset))
    cross_cells = sorted(
        (cell for cell, members in cells.items() if len(members) >= 2),
        key=lambda c: (c[1], c[0]),
    )
    rng.shuffle(cross_cells)
    placed_cross = 0
    for cell in cross_cells:
        if placed_cross >= targets["cross_sensor"]:
            break
        members = [
            (key, off) for key, off in cells[cell] if not streams[key].taken[off]
        ]
        if len(members) < 2:
            continue
        group = next_group
        next_group += 1
        for key, off in members:
            (idx,) = streams[key].take(off, 1)
            r = readings[idx]
            spike(r, gens[r.category], "cross_sensor", group)
            placed_cross += 1
    counts["cross_sensor"] = placed_cross
    leftover += max(targets["cross_sensor"] - placed_cross, 0)

    short = place_singles("contextual", targets["contextual"])
    counts["contextual"] = targets["contextual"] - short
    leftover += short

    short = place_singles("point", targets["point"] + leftover)
    counts["point"] = targets["point"] + leftover - short
    if short > 0:
        raise ValueError("anomaly budget exceeds non-overlapping capacity")

    # Missing-data gaps, budgeted separately from the anomaly rate.
    placed_missing = 0
    while placed_missing < n_missing:
        lo, hi = cfg.gap_range
        length = int(rng.integers(lo, hi + 1))
        candidates = [k for k in eligible_keys if streams[k].free_runs(length)]
        if not candidates:
            best = max((streams[k].max_free_run() for k in eligible_keys), default=0)
            if best < 1:
                raise ValueError("missing-gap budget exceeds capacity")
            length = best
            candidates = [k for k in eligible_keys if streams[k].free_runs(length)]
        key = candidates[int(rng.integers(len(candidates)))]
        state = streams[key]
        starts = state.free_runs(length)
        start = starts[int(rng.integers(len(starts)))]
        span = state.take(start, length)
        for idx in span:
            readings[idx].value = None
            readings[idx].label = MISSING
            readings[idx].group = next_group
        next_group += 1
        gap_lengths.append(length)
        placed_missing += length

    return InjectionResult(
        readings=readings,
        injected_points=sum(counts.values()),
        missing_points=placed_missing,
        counts_by_kind=counts,
        gap_lengths=gap_lengths,
        groups=next_group,
    )


def ground_truth(readings: Sequence[SensorReading]) -> list[bool]:
    """Per-point anomaly mask; missing points are excluded (False) and are
    reported separately by the benchmark."""
    return [r.label is not None and r.label != MISSING for r in readings]


def missing_mask(readings: Sequence[SensorReading]) -> list[bool]:
    return [r.label == MISSING for r in readings]
