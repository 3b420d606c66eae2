"""Physical plausibility constraints and rule validation.

Every candidate filtering rule passes through ``validate_rules`` before an
edge pipeline may evaluate it: numeric literals must lie inside the
category's physical bounds, rate-of-change thresholds may not exceed the
category maximum, and no rule may drop or fold a required-transmit
category. Rejections are data, not errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .ruledsl import Rule
from .sensors import FAMILIES, KIND_BY_CATEGORY, KINDS, GeneratorConfig


@dataclass(frozen=True)
class CategoryBounds:
    lo: float
    hi: float
    max_rate: float  # maximum plausible |value change| per step


@dataclass(frozen=True)
class PhysicsConstraints:
    bounds: Mapping[str, CategoryBounds]
    required_transmit: frozenset[str] = frozenset({"emergency_alert"})

    def categories(self) -> list[str]:
        return sorted(self.bounds)


# Plausible per-step rate caps for the default categories; wide enough that
# genuine sensor dynamics stay inside them.
_DEFAULT_MAX_RATE = {
    "temperature": 5.0,
    "humidity": 20.0,
    "air_quality": 80.0,
    "noise_level": 30.0,
    "vehicle_count": 120.0,
    "pedestrian_count": 90.0,
    "transit_boardings": 60.0,
    "cctv_object_count": 40.0,
    "cctv_motion_events": 30.0,
    "cctv_activity_level": 0.5,
    "vibration": 10.0,
    "power_voltage": 20.0,
    "water_pressure": 150.0,
    "valve_state": 1.0,
    "emergency_alert": 1.0,
}


def default_constraints(
    generators: Mapping[str, GeneratorConfig] | None = None,
) -> PhysicsConstraints:
    """Bounds mirroring the generator clamp ranges (or registry defaults)."""
    bounds = {}
    if generators:
        for cat, gen in generators.items():
            bounds[cat] = CategoryBounds(
                gen.clamp[0], gen.clamp[1], _DEFAULT_MAX_RATE.get(cat, gen.clamp[1] - gen.clamp[0])
            )
    else:
        from .sensors import default_generators

        for cat, gen in default_generators().items():
            bounds[cat] = CategoryBounds(gen.clamp[0], gen.clamp[1], _DEFAULT_MAX_RATE[cat])
    return PhysicsConstraints(bounds=bounds)


@dataclass(frozen=True)
class Rejection:
    rule: Rule
    reason: str


def _scope_categories(rule: Rule, constraints: PhysicsConstraints) -> tuple[list[str] | None, str | None]:
    """Resolve the rule's category scope.

    A ``category=`` condition may name a category or a whole family.
    Returns (categories, error): categories is None for an unscoped rule.
    """
    known = set(constraints.bounds)
    scopes: list[set[str]] = []
    for cond in rule.conditions:
        if cond.field != "category":
            continue
        name = cond.value
        if name in known:
            scopes.append({name})
        elif name in FAMILIES:
            scopes.append({k.category for k in KINDS if k.family == name and k.category in known})
        else:
            return None, f"unknown category {name!r}"
    if not scopes:
        return None, None
    resolved = set.intersection(*scopes)
    if not resolved:
        return None, "empty category scope"
    return sorted(resolved), None


def validate_rules(
    candidates: Sequence[Rule], constraints: PhysicsConstraints
) -> tuple[list[Rule], list[Rejection]]:
    """Filter candidates against physics bounds and transmit requirements.

    Accepted rules are ordered by descending specificity (condition count)
    then by id, which is also the evaluation order of the pipelines.
    Validation is idempotent: accepted rules pass unchanged a second time.
    """
    accepted: list[Rule] = []
    rejected: list[Rejection] = []
    for rule in candidates:
        scope, err = _scope_categories(rule, constraints)
        if err is not None:
            rejected.append(Rejection(rule, err))
            continue
        scoped = scope if scope is not None else constraints.categories()
        lo = min(constraints.bounds[c].lo for c in scoped)
        hi = max(constraints.bounds[c].hi for c in scoped)
        max_rate = max(constraints.bounds[c].max_rate for c in scoped)
        reason = None
        for cond in rule.conditions:
            if cond.field == "value" and not lo <= cond.value <= hi:
                reason = "literal outside physics bounds"
                break
            if cond.field == "rate" and cond.value > max_rate:
                reason = "rate threshold exceeds category max"
                break
            if cond.field == "zscore" and cond.value < 0:
                reason = "negative zscore literal"
                break
            if cond.field == "hour" and not 0.0 <= cond.value <= 24.0:
                reason = "hour literal outside [0, 24]"
                break
        if reason is None and rule.action in ("drop", "aggregate"):
            touched = set(scoped) & constraints.required_transmit
            if touched:
                reason = "required-transmit class"
        if reason is None and rule.action == "aggregate" and (rule.n is None or rule.n < 2):
            reason = "aggregate size must be at least 2"
        if reason is None:
            accepted.append(rule)
        else:
            rejected.append(Rejection(rule, reason))
    accepted.sort(key=lambda r: (-len(r.conditions), r.id))
    return accepted, rejected
