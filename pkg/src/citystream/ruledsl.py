"""Line-oriented filtering-rule grammar.

    WHEN <field> <op> <literal> [AND ...] THEN <action>

Fields: category, location, value, zscore, rate, hour.
Comparators: =, <, >, <=, >= (category and location accept only =).
Actions: transmit, drop, escalate, aggregate(<n>).

``category=`` literals may name a single category or a whole sensor
family. Lines starting with ``#`` are comments. Parse errors carry the
1-based line, the 0-based column, and the absolute character position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

FIELDS = ("category", "location", "value", "zscore", "rate", "hour")
NUMERIC_FIELDS = ("value", "zscore", "rate", "hour")
ACTIONS = ("transmit", "drop", "escalate", "aggregate")
COMPARATORS = ("<=", ">=", "=", "<", ">")


@dataclass(frozen=True)
class Condition:
    field: str
    op: str
    value: float | str

    def evaluate(self, ctx: Mapping[str, object]) -> bool:
        if self.field == "category":
            # A category condition matches the exact category or its family.
            return self.value in (ctx.get("category"), ctx.get("family"))
        if self.field == "location":
            return ctx.get("location") == self.value
        actual = ctx.get(self.field)
        if actual is None:
            return False
        if self.op == "=":
            return actual == self.value
        if self.op == "<":
            return actual < self.value
        if self.op == ">":
            return actual > self.value
        if self.op == "<=":
            return actual <= self.value
        return actual >= self.value


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: tuple[Condition, ...]
    action: str
    n: int | None = None  # aggregate batch size
    ttl: int = 288
    provenance: str = ""

    def matches(self, ctx: Mapping[str, object]) -> bool:
        return all(c.evaluate(ctx) for c in self.conditions)

    def text(self) -> str:
        conds = " AND ".join(f"{c.field}{c.op}{_fmt(c.value)}" for c in self.conditions)
        action = f"aggregate({self.n})" if self.action == "aggregate" else self.action
        return f"WHEN {conds} THEN {action}"


def _fmt(v: float | str) -> str:
    if isinstance(v, float) and v == int(v):
        return str(int(v))
    return str(v)


class RuleParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, position: int) -> None:
        super().__init__(f"line {line}, col {column}: {message}")
        self.reason = message
        self.line = line
        self.column = column
        self.position = position


_COMPARISON = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(<=|>=|=|<|>)\s*(\S+)\s*$")
_AGGREGATE = re.compile(r"^aggregate\((\d+)\)$")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z_0-9-]*$")


def parse_rules(
    text: str,
    id_prefix: str = "r",
    ttl: int = 288,
    provenance: str = "",
) -> list[Rule]:
    """Parse a rule document; raises ``RuleParseError`` on the first fault."""
    rules: list[Rule] = []
    offset = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line_start = offset
        offset += len(raw) + 1
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue

        def err(message: str, col: int = 0) -> RuleParseError:
            return RuleParseError(message, lineno, col, line_start + col)

        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        if not stripped.startswith("WHEN "):
            raise err("expected 'WHEN'", indent)
        body = stripped[len("WHEN ") :]
        if " THEN " not in body:
            raise err("expected 'THEN'", indent)
        cond_text, action_text = body.rsplit(" THEN ", 1)
        action_text = action_text.strip()

        conditions = []
        cursor = indent + len("WHEN ")
        for part in cond_text.split(" AND "):
            m = _COMPARISON.match(part)
            if m is None:
                raise err(f"malformed comparison {part.strip()!r}", cursor)
            fname, op, literal = m.group(1), m.group(2), m.group(3)
            if fname not in FIELDS:
                raise err(f"unknown identifier {fname!r}", cursor)
            if fname in NUMERIC_FIELDS:
                try:
                    value: float | str = float(literal)
                except ValueError:
                    raise err(f"{fname} expects a numeric literal, got {literal!r}", cursor)
            else:
                if op != "=":
                    raise err(f"{fname} supports only '='", cursor)
                if not _IDENT.match(literal):
                    raise err(f"{fname} expects an identifier, got {literal!r}", cursor)
                value = literal
            conditions.append(Condition(fname, op, value))
            cursor += len(part) + len(" AND ")

        n = None
        m = _AGGREGATE.match(action_text)
        if m:
            action = "aggregate"
            n = int(m.group(1))
        elif action_text in ("transmit", "drop", "escalate"):
            action = action_text
        else:
            raise err(f"unknown action {action_text!r}", indent + len("WHEN ") + len(cond_text) + len(" THEN "))

        rules.append(
            Rule(
                id=f"{id_prefix}{len(rules):03d}",
                conditions=tuple(conditions),
                action=action,
                n=n,
                ttl=ttl,
                provenance=provenance,
            )
        )
    if not rules:
        raise RuleParseError("empty rule document", 1, 0, 0)
    return rules
