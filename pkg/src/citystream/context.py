"""Weighted context vectors driving rule generation.

A context vector bundles four equal-length components: s (per-category
latest-value z-scores), e (environmental summary), h (per-family trend
summary over the last k steps), and p (policy indicators). The combined
vector is exactly the componentwise weighted sum, which the rule providers
read as anomaly pressure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .physics import PhysicsConstraints
from .sensors import CATEGORY_ORDER, FAMILIES, KIND_BY_CATEGORY, SensorReading

# One slot per category plus a trailing flag slot that marks a history
# window shorter than the requested depth.
DIMENSION = len(CATEGORY_ORDER) + 1
_FLAG_SLOT = DIMENSION - 1


@dataclass(frozen=True)
class ContextWeights:
    alpha: float = 0.4
    beta: float = 0.2
    gamma: float = 0.3
    delta: float = 0.1

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)


@dataclass(frozen=True)
class ContextVector:
    s: tuple[float, ...]
    e: tuple[float, ...]
    h: tuple[float, ...]
    p: tuple[float, ...]
    combined: tuple[float, ...]

    @property
    def pressure(self) -> float:
        """Infinity norm of the combined vector."""
        return max((abs(x) for x in self.combined), default=0.0)


def combine_components(
    s: Sequence[float],
    e: Sequence[float],
    h: Sequence[float],
    p: Sequence[float],
    w: ContextWeights,
) -> tuple[float, ...]:
    """Componentwise weighted sum; all components must share one length."""
    if not len(s) == len(e) == len(h) == len(p):
        raise ValueError("context components must share one dimensionality")
    return tuple(
        w.alpha * sv + w.beta * ev + w.gamma * hv + w.delta * pv
        for sv, ev, hv, pv in zip(s, e, h, p)
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def build_context(
    window: Sequence[SensorReading],
    policy: PhysicsConstraints,
    w: ContextWeights = ContextWeights(),
    k: int = 12,
) -> ContextVector:
    """Summarize a recent-readings window into a context vector.

    s holds the latest-value z-score per category (z against the window's
    own per-category statistics); e holds the environmental-family mean
    z-score and the window's missing fraction; h holds the least-squares
    slope and variance of each family's z-score series over the last k
    steps, with the final slot flagging a window shorter than k; p encodes
    the required-transmit policy per category.
    """
    if not window:
        raise ValueError("context window must be non-empty")
    if k < 1:
        raise ValueError("history depth k must be at least 1")

    by_cat: dict[str, list[SensorReading]] = {}
    for r in window:
        by_cat.setdefault(r.category, []).append(r)

    zscores: dict[str, float] = {}
    stats: dict[str, tuple[float, float]] = {}
    for cat, rs in by_cat.items():
        values = [r.value for r in rs if r.value is not None]
        if not values:
            continue
        mean, std = _mean_std(values)
        stats[cat] = (mean, std)
        latest = next((r.value for r in reversed(rs) if r.value is not None), None)
        if latest is None or std <= 1e-12:
            zscores[cat] = 0.0
        else:
            zscores[cat] = (latest - mean) / std

    s = [0.0] * DIMENSION
    for i, cat in enumerate(CATEGORY_ORDER):
        s[i] = zscores.get(cat, 0.0)

    env_z = [zscores[c] for c in zscores if KIND_BY_CATEGORY[c].family == "environmental"]
    missing = sum(1 for r in window if r.value is None) / len(window)
    e = [0.0] * DIMENSION
    e[0] = sum(env_z) / len(env_z) if env_z else 0.0
    e[1] = missing

    latest_t = max(r.t for r in window)
    earliest_t = min(r.t for r in window)
    cutoff = latest_t - k + 1
    truncated = earliest_t > cutoff

    h = [0.0] * DIMENSION
    for fi, family in enumerate(FAMILIES):
        points: list[tuple[int, float]] = []
        for cat, rs in by_cat.items():
            if KIND_BY_CATEGORY[cat].family != family or cat not in stats:
                continue
            mean, std = stats[cat]
            for r in rs:
                if r.t >= cutoff and r.value is not None:
                    z = 0.0 if std <= 1e-12 else (r.value - mean) / std
                    points.append((r.t, z))
        if len(points) >= 2:
            ts = [float(t) for t, _ in points]
            zs = [z for _, z in points]
            t_mean = sum(ts) / len(ts)
            z_mean = sum(zs) / len(zs)
            denom = sum((t - t_mean) ** 2 for t in ts)
            slope = (
                sum((t - t_mean) * (z - z_mean) for t, z in zip(ts, zs)) / denom
                if denom > 1e-12
                else 0.0
            )
            var = sum((z - z_mean) ** 2 for z in zs) / (len(zs) - 1)
            h[2 * fi] = slope
            h[2 * fi + 1] = var
    h[_FLAG_SLOT] = 1.0 if truncated else 0.0

    p = [0.0] * DIMENSION
    for i, cat in enumerate(CATEGORY_ORDER):
        if cat in policy.required_transmit:
            p[i] = 1.0

    combined = combine_components(s, e, h, p, w)
    return ContextVector(tuple(s), tuple(e), tuple(h), tuple(p), combined)
