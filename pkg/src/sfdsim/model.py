"""Model definitions and structural validation.

A model is a declarative bundle of stocks, flows, auxiliaries, parameters,
and scheduled events. `validate_model` checks it for duplicate names,
undefined references, dependency cycles, and unit mismatches, and returns a
`ValidatedModel` carrying the dependency-sorted evaluation order the engine
executes each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import expr as ex
from .errors import (
    CycleError,
    DuplicateNameError,
    ModelError,
    UnitError,
    UnknownSymbolError,
)

EVENT_OPS = ("add", "subtract", "set")


@dataclass(frozen=True, slots=True)
class StockDef:
    """A conserved accumulator integrated over time."""

    name: str
    initial: float
    unit: str = ""
    non_negative: bool = True


@dataclass(frozen=True, slots=True)
class FlowDef:
    """A rate moving material out of `source` and into `target`.

    Either endpoint may be None (material enters from or leaves to outside
    the model boundary). Units are per day: a flow attached to a stock
    measured in `m3` carries unit `m3/day`.
    """

    name: str
    expression: ex.Expr
    source: str | None = None
    target: str | None = None
    unit: str = ""


@dataclass(frozen=True, slots=True)
class AuxDef:
    """A named intermediate value recomputed at every evaluation."""

    name: str
    expression: ex.Expr
    unit: str = ""


@dataclass(frozen=True, slots=True)
class ParamDef:
    """A constant the scenario layer may override."""

    name: str
    value: float
    unit: str = ""


@dataclass(frozen=True, slots=True)
class EventAction:
    """One assignment applied to a stock when an event fires.

    `op` is one of "add", "subtract", "set". All action expressions of an
    event are evaluated against the pre-event state before any is applied,
    so later actions may reference the amounts earlier ones will move.
    """

    target: str
    op: str
    expression: ex.Expr


@dataclass(frozen=True, slots=True)
class EventDef:
    """A discrete intervention fired on a fixed schedule.

    Fires at t = start, start + interval, start + 2*interval, ... An
    interval of 0 means the event fires once, at `start`. Firings must land
    on the integration grid; the engine rejects schedules that do not.
    """

    name: str
    start: float
    interval: float
    actions: tuple[EventAction, ...]


@dataclass(frozen=True, slots=True)
class ModelSpec:
    """A complete model as authored, before validation."""

    name: str
    stocks: tuple[StockDef, ...] = ()
    flows: tuple[FlowDef, ...] = ()
    auxiliaries: tuple[AuxDef, ...] = ()
    parameters: tuple[ParamDef, ...] = ()
    events: tuple[EventDef, ...] = ()

    def param(self, name: str) -> float:
        for p in self.parameters:
            if p.name == name:
                return p.value
        raise UnknownSymbolError(f"no parameter named '{name}'")

    def with_params(self, overrides: dict[str, float]) -> ModelSpec:
        """Copy of the model with the given parameter values replaced."""
        known = {p.name for p in self.parameters}
        missing = sorted(set(overrides) - known)
        if missing:
            raise UnknownSymbolError(f"no parameter named '{missing[0]}'")
        params = tuple(
            replace(p, value=float(overrides[p.name])) if p.name in overrides else p
            for p in self.parameters
        )
        return replace(self, parameters=params)

    def with_initial(self, overrides: dict[str, float]) -> ModelSpec:
        """Copy of the model with the given stock initial values replaced."""
        known = {s.name for s in self.stocks}
        missing = sorted(set(overrides) - known)
        if missing:
            raise UnknownSymbolError(f"no stock named '{missing[0]}'")
        stocks = tuple(
            replace(s, initial=float(overrides[s.name])) if s.name in overrides else s
            for s in self.stocks
        )
        return replace(self, stocks=stocks)

    def with_event_schedule(self, name: str, start: float | None = None,
                            interval: float | None = None) -> ModelSpec:
        """Copy of the model with one event's schedule changed."""
        if all(e.name != name for e in self.events):
            raise UnknownSymbolError(f"no event named '{name}'")
        events = tuple(
            replace(
                e,
                start=float(start) if start is not None else e.start,
                interval=float(interval) if interval is not None else e.interval,
            )
            if e.name == name
            else e
            for e in self.events
        )
        return replace(self, events=events)


@dataclass(frozen=True)
class ValidatedModel:
    """A model whose structure has been checked, plus derived lookups."""

    spec: ModelSpec
    order: tuple[str, ...]  # aux and flow names in evaluation order
    expressions: dict[str, ex.Expr] = field(repr=False)
    stocks: dict[str, StockDef] = field(repr=False)
    params: dict[str, float] = field(repr=False)
    inflows: dict[str, tuple[str, ...]] = field(repr=False)
    outflows: dict[str, tuple[str, ...]] = field(repr=False)

    def compiled(self) -> dict[str, object]:
        """Per-variable compiled evaluators, built on first use."""
        cache = getattr(self, "_compiled_cache", None)
        if cache is None:
            cache = {
                name: ex.compile_function(self.expressions[name], name)
                for name in self.order
            }
            object.__setattr__(self, "_compiled_cache", cache)
        return cache


def validate_model(spec: ModelSpec) -> ValidatedModel:
    """Check `spec` and derive evaluation order and stock attachment maps.

    Raises DuplicateNameError, UnknownSymbolError, CycleError, UnitError, or
    ModelError. Event grid alignment is checked at simulation time because
    it depends on the step size.
    """
    seen: set[str] = set()
    for name in _all_names(spec):
        if name == "t":
            raise DuplicateNameError("'t' is reserved for simulation time")
        if name in seen:
            raise DuplicateNameError(f"'{name}' is defined more than once")
        seen.add(name)

    stocks = {s.name: s for s in spec.stocks}
    params = {p.name: p.value for p in spec.parameters}
    expressions: dict[str, ex.Expr] = {}
    for a in spec.auxiliaries:
        expressions[a.name] = a.expression
    for f in spec.flows:
        expressions[f.name] = f.expression

    for s in spec.stocks:
        if not math.isfinite(s.initial):
            raise ModelError(f"stock '{s.name}' has non-finite initial value")
    for p in spec.parameters:
        if not math.isfinite(p.value):
            raise ModelError(f"parameter '{p.name}' has non-finite value")

    known = seen | {"t"}
    for name, expression in expressions.items():
        try:
            ex.validate_expression(expression, known)
        except (UnknownSymbolError, ValueError) as err:
            raise type(err)(f"in '{name}': {err}") from None

    inflows: dict[str, list[str]] = {name: [] for name in stocks}
    outflows: dict[str, list[str]] = {name: [] for name in stocks}
    for f in spec.flows:
        if f.source is None and f.target is None:
            raise ModelError(f"flow '{f.name}' is attached to no stock")
        for endpoint, bucket in ((f.source, outflows), (f.target, inflows)):
            if endpoint is None:
                continue
            if endpoint not in stocks:
                raise UnknownSymbolError(
                    f"flow '{f.name}' references unknown stock '{endpoint}'"
                )
            bucket[endpoint].append(f.name)
            stock_unit = stocks[endpoint].unit
            if f.unit and stock_unit and f.unit != f"{stock_unit}/day":
                raise UnitError(
                    f"flow '{f.name}' has unit '{f.unit}' but stock "
                    f"'{endpoint}' needs '{stock_unit}/day'"
                )

    for e in spec.events:
        if not (math.isfinite(e.start) and math.isfinite(e.interval)):
            raise ModelError(f"event '{e.name}' has a non-finite schedule")
        if e.start < 0 or e.interval < 0:
            raise ModelError(f"event '{e.name}' has a negative schedule")
        if not e.actions:
            raise ModelError(f"event '{e.name}' has no actions")
        for act in e.actions:
            if act.op not in EVENT_OPS:
                raise ModelError(f"event '{e.name}': unknown action op '{act.op}'")
            if act.target not in stocks:
                raise UnknownSymbolError(
                    f"event '{e.name}' targets unknown stock '{act.target}'"
                )
            try:
                ex.validate_expression(act.expression, known)
            except (UnknownSymbolError, ValueError) as err:
                raise type(err)(f"in event '{e.name}': {err}") from None

    order = _evaluation_order(spec, expressions)

    return ValidatedModel(
        spec=spec,
        order=order,
        expressions=expressions,
        stocks=stocks,
        params=params,
        inflows={k: tuple(v) for k, v in inflows.items()},
        outflows={k: tuple(v) for k, v in outflows.items()},
    )


def _all_names(spec: ModelSpec):
    for s in spec.stocks:
        yield s.name
    for f in spec.flows:
        yield f.name
    for a in spec.auxiliaries:
        yield a.name
    for p in spec.parameters:
        yield p.name


def _evaluation_order(spec: ModelSpec, expressions: dict[str, ex.Expr]) -> tuple[str, ...]:
    """Dependency-sort auxiliaries and flows, preserving declaration order.

    Only references between computed variables form edges; stocks and
    parameters are plain state. Depth-first postorder gives a deterministic
    order; a back edge is reported as CycleError with the cycle path.
    """
    computed = set(expressions)
    deps = {
        name: [d for d in sorted(ex.variables(e)) if d in computed]
        for name, e in expressions.items()
    }

    order: list[str] = []
    state: dict[str, int] = {}  # 0 absent, 1 visiting, 2 done
    declared = [a.name for a in spec.auxiliaries] + [f.name for f in spec.flows]

    def visit(name: str, path: list[str]) -> None:
        mark = state.get(name, 0)
        if mark == 2:
            return
        if mark == 1:
            cycle = path[path.index(name):] + [name]
            raise CycleError(cycle)
        state[name] = 1
        path.append(name)
        for dep in deps[name]:
            visit(dep, path)
        path.pop()
        state[name] = 2
        order.append(name)

    for name in declared:
        visit(name, [])
    return tuple(order)
