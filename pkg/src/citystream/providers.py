"""Rule providers and the adaptive rule-generation engine.

A provider maps (context, history, constraints) to candidate rule text in
the filtering DSL. The default provider is deterministic: it emits
per-category |z| threshold rules whose cutoff tightens or relaxes with
context anomaly pressure, aggregation rules for quiet categories, and an
unconditional transmit rule for every required-transmit category. External
providers are reached over a text request/response protocol (subprocess
stdin/stdout or an HTTP POST) and fall back to the deterministic provider
on timeouts or unparseable output.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .context import ContextVector
from .physics import PhysicsConstraints, Rejection, validate_rules
from .ruledsl import Rule, RuleParseError, parse_rules
from .sensors import CATEGORY_ORDER

Z_FLOOR = 2.5
Z_CEIL = 4.0
Z_SLOPE = 1.5
ESCALATE_MARGIN = 1.5
QUIET_Z = 1.0
DEFAULT_AGG_N = 12


def z_threshold(ctx: ContextVector) -> float:
    """Adaptive |z| cutoff: relaxed when the context is quiet, tightened
    toward the floor as anomaly pressure approaches one."""
    pressure = min(max(ctx.pressure, 0.0), 1.0)
    return max(Z_FLOOR, Z_CEIL - Z_SLOPE * pressure)


def context_digest(ctx: ContextVector) -> str:
    payload = repr(ctx.combined).encode()
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


@dataclass(frozen=True)
class CycleOutcome:
    """Per-regeneration-cycle tallies fed back to providers as history."""

    transmitted: int = 0
    dropped: int = 0
    aggregated: int = 0
    escalated: int = 0


class ProviderError(RuntimeError):
    pass


class RuleProvider(Protocol):
    name: str

    def generate(
        self,
        ctx: ContextVector,
        history: Sequence[CycleOutcome],
        constraints: PhysicsConstraints,
    ) -> str: ...


class DeterministicProvider:
    """Config-driven stand-in for a learned rule generator."""

    name = "deterministic"

    def __init__(self, aggregate_n: int = DEFAULT_AGG_N) -> None:
        self.aggregate_n = aggregate_n

    def generate(
        self,
        ctx: ContextVector,
        history: Sequence[CycleOutcome],
        constraints: PhysicsConstraints,
    ) -> str:
        z0 = z_threshold(ctx)
        z_esc = z0 + ESCALATE_MARGIN
        lines = []
        for cat in constraints.required_transmit & set(constraints.bounds):
            lines.append(f"WHEN category={cat} THEN transmit")
        ordinary = [
            c for c in CATEGORY_ORDER
            if c in constraints.bounds and c not in constraints.required_transmit
        ]
        for cat in ordinary:
            lines.append(f"WHEN category={cat} AND zscore>={z_esc:g} THEN escalate")
        for cat in ordinary:
            lines.append(f"WHEN category={cat} AND zscore>{z0:g} THEN transmit")
        slot = {c: i for i, c in enumerate(CATEGORY_ORDER)}
        for cat in ordinary:
            if abs(ctx.s[slot[cat]]) < QUIET_Z:
                lines.append(
                    f"WHEN category={cat} AND zscore<={QUIET_Z:g} "
                    f"THEN aggregate({self.aggregate_n})"
                )
        return "\n".join(lines) + "\n"


def build_request(ctx: ContextVector, constraints: PhysicsConstraints) -> str:
    """Serialize context and constraints into the provider request text."""
    lines = ["[context]"]
    lines.append("combined: " + json.dumps([round(x, 6) for x in ctx.combined]))
    lines.append("sensor_z: " + json.dumps([round(x, 6) for x in ctx.s]))
    lines.append("environment: " + json.dumps([round(x, 6) for x in ctx.e]))
    lines.append("history: " + json.dumps([round(x, 6) for x in ctx.h]))
    lines.append("")
    lines.append("[constraints]")
    for cat in constraints.categories():
        b = constraints.bounds[cat]
        required = " required-transmit" if cat in constraints.required_transmit else ""
        lines.append(f"{cat}: value in [{b.lo:g}, {b.hi:g}], max rate {b.max_rate:g}{required}")
    lines.append("")
    lines.append("[grammar]")
    lines.append("One rule per line: WHEN <field><op><literal> [AND ...] THEN <action>")
    lines.append("fields: category location value zscore rate hour; ops: = < > <= >=")
    lines.append("actions: transmit drop escalate aggregate(<n>)")
    return "\n".join(lines) + "\n"


class SubprocessProvider:
    """Runs a local command; request on stdin, rule lines on stdout."""

    def __init__(self, argv: Sequence[str], timeout: float = 10.0, name: str = "subprocess") -> None:
        self.argv = list(argv)
        self.timeout = timeout
        self.name = name

    def generate(self, ctx, history, constraints) -> str:
        request = build_request(ctx, constraints)
        try:
            proc = subprocess.run(
                self.argv,
                input=request.encode(),
                capture_output=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ProviderError(str(exc)) from exc
        if proc.returncode != 0:
            raise ProviderError(f"provider exited {proc.returncode}")
        return proc.stdout.decode()


class HttpProvider:
    """POSTs the request document to an HTTP endpoint."""

    def __init__(self, url: str, timeout: float = 10.0, name: str = "http") -> None:
        self.url = url
        self.timeout = timeout
        self.name = name

    def generate(self, ctx, history, constraints) -> str:
        request = urllib.request.Request(
            self.url,
            data=build_request(ctx, constraints).encode(),
            headers={"Content-Type": "text/plain"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                return resp.read().decode()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise ProviderError(str(exc)) from exc


@dataclass
class GenerationResult:
    candidates: list[Rule]
    provider: str
    fallback_used: bool
    raw_text: str


def _has_floor_rule(rules: Sequence[Rule], constraints: PhysicsConstraints) -> set[str]:
    """Required-transmit categories already covered by an unconditional
    single-condition transmit rule."""
    covered = set()
    for rule in rules:
        if rule.action != "transmit" or len(rule.conditions) != 1:
            continue
        cond = rule.conditions[0]
        if cond.field == "category" and cond.value in constraints.required_transmit:
            covered.add(cond.value)
    return covered


def generate_rules(
    ctx: ContextVector,
    history: Sequence[CycleOutcome],
    constraints: PhysicsConstraints,
    provider: RuleProvider,
    ttl: int = 288,
    fallback: RuleProvider | None = None,
) -> GenerationResult:
    """Produce candidate rules, falling back to the deterministic provider
    when the primary one fails; candidates are not yet validated."""
    fallback = fallback or DeterministicProvider()
    digest = context_digest(ctx)
    fallback_used = False
    try:
        text = provider.generate(ctx, history, constraints)
        provenance = f"{provider.name}:{digest}"
        candidates = parse_rules(text, ttl=ttl, provenance=provenance)
        name = provider.name
    except (ProviderError, RuleParseError):
        fallback_used = True
        text = fallback.generate(ctx, history, constraints)
        provenance = f"{fallback.name}(fallback):{digest}"
        candidates = parse_rules(text, ttl=ttl, provenance=provenance)
        name = fallback.name

    missing = constraints.required_transmit - _has_floor_rule(candidates, constraints)
    for cat in sorted(missing):
        candidates.append(
            Rule(
                id=f"floor{len(candidates):03d}",
                conditions=(parse_rules(f"WHEN category={cat} THEN transmit")[0].conditions),
                action="transmit",
                ttl=ttl,
                provenance=f"engine-floor:{digest}",
            )
        )
    return GenerationResult(candidates, name, fallback_used, text)


@dataclass
class RuleCycle:
    rules: list[Rule]
    rejections: list[Rejection]
    provider: str
    fallback_used: bool
    regenerated_at: int


class AdaptiveRuleEngine:
    """Coordinator that owns the current validated rule snapshot.

    The snapshot is regenerated every ``ttl`` steps from a context built
    over the recent window; pipelines read it without locking because each
    snapshot is an immutable list swap.
    """

    def __init__(
        self,
        provider: RuleProvider,
        constraints: PhysicsConstraints,
        weights=None,
        ttl: int = 288,
        history_depth: int = 12,
    ) -> None:
        from .context import ContextWeights

        self.provider = provider
        self.constraints = constraints
        self.weights = weights or ContextWeights()
        self.ttl = ttl
        self.history_depth = history_depth
        self.fallback_count = 0
        self.history: list[CycleOutcome] = []
        self.cycles: list[RuleCycle] = []
        self._snapshot: list[Rule] = []
        self._next_regen: int | None = None

    @property
    def snapshot(self) -> list[Rule]:
        return self._snapshot

    def due(self, t: int) -> bool:
        return self._next_regen is None or t >= self._next_regen

    def regenerate(self, t: int, window: Sequence) -> list[Rule]:
        from .context import build_context

        ctx = build_context(window, self.constraints, self.weights, self.history_depth)
        result = generate_rules(
            ctx, self.history[-self.history_depth :], self.constraints,
            self.provider, ttl=self.ttl,
        )
        if result.fallback_used:
            self.fallback_count += 1
        accepted, rejections = validate_rules(result.candidates, self.constraints)
        self._snapshot = accepted
        self._next_regen = t + self.ttl
        self.cycles.append(
            RuleCycle(accepted, rejections, result.provider, result.fallback_used, t)
        )
        return accepted

    def record_outcome(self, outcome: CycleOutcome) -> None:
        self.history.append(outcome)
