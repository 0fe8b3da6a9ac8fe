"""Fixed-step simulation engine.

Integrates a validated model with Euler or classic Runge-Kutta steps on a
uniform time grid, applies scheduled events between steps, and records a
Trajectory. Determinism is a hard requirement: identical inputs produce
byte-identical CSV output, including under the stochastic `noise` builtin,
whose draws are keyed by (seed, day) rather than call order.

Negative stocks are prevented by a conserving clamp: when a step would push
a non-negative stock below zero, all outflows draining that stock are scaled
down by a common factor so the stock lands exactly on zero. Scaling an
outflow reduces the matching inflow of any downstream stock, so the clamp
iterates stock scale factors to a fixpoint instead of clamping each stock
independently; mass is conserved through flow chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import EventGridError, ModelError, NonFiniteError
from .model import ModelSpec, ValidatedModel, validate_model

_GRID_TOL = 1e-9
_CLAMP_TOL = 1e-12

METHODS = ("euler", "rk4")


@dataclass(frozen=True, slots=True)
class SimConfig:
    """Integration settings.

    `t_end == t_start` is allowed and yields a single recorded row of the
    initial state. `record_every` keeps one row per that many steps; the
    final time is always recorded. `compiled` switches per-variable
    evaluation from the tree interpreter to generated Python functions; the
    two produce bit-identical results and differ only in speed.
    """

    t_start: float = 0.0
    t_end: float = 365.0
    dt: float = 1.0
    method: str = "euler"
    seed: int = 0
    record_every: int = 1
    compiled: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError("time bounds must be finite")
        if self.t_end < self.t_start:
            raise ValueError("t_end must not precede t_start")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    def step_count(self) -> int:
        span = self.t_end - self.t_start
        steps = round(span / self.dt)
        if abs(self.t_start + steps * self.dt - self.t_end) > _GRID_TOL * max(
            1.0, abs(self.t_start), abs(self.t_end)
        ):
            raise ValueError("simulation horizon is not a whole number of steps")
        return steps


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One applied event action. `amount` is the removed quantity for
    subtract actions, the signed change for add, and the assigned value
    for set."""

    t: float
    event: str
    target: str
    amount: float


@dataclass(frozen=True)
class Trajectory:
    """Recorded simulation output.

    `values` has one row per recorded time and one column per variable in
    `columns` (stocks, then flows, then auxiliaries, in declaration order).
    Flow columns are instantaneous rates as evaluated; `flow_integrals`
    holds each flow's realized time integral after clamp scaling, and
    `event_deltas` the net change events applied per stock, so that
    final stock = initial + inflow integrals - outflow integrals + events.
    """

    times: np.ndarray
    columns: tuple[str, ...]
    values: np.ndarray
    events: tuple[EventRecord, ...]
    parameters: dict[str, float]
    flow_integrals: dict[str, float]
    event_deltas: dict[str, float]
    config: SimConfig
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.columns)})

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self._index[name]]
        except KeyError:
            raise KeyError(f"no recorded column '{name}'") from None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def final(self, name: str) -> float:
        return float(self.column(name)[-1])

    def peak(self, name: str) -> float:
        return float(self.column(name).max())

    def at(self, name: str, t: float) -> float:
        """Value at a recorded time; `t` must be on the recorded grid."""
        idx = np.searchsorted(self.times, t)
        for i in (idx, idx - 1, idx + 1):
            if 0 <= i < len(self.times) and abs(float(self.times[i]) - t) <= 1e-9:
                return float(self.column(name)[i])
        raise KeyError(f"t={t:g} is not a recorded time")

    def to_csv(self) -> str:
        lines = ["t," + ",".join(self.columns)]
        for i, t in enumerate(self.times):
            row = self.values[i]
            lines.append(f"{t:.6f}," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"

    def events_to_csv(self) -> str:
        lines = ["t,event,target,amount"]
        for rec in self.events:
            lines.append(f"{rec.t:.6f},{rec.event},{rec.target},{rec.amount:.6f}")
        return "\n".join(lines) + "\n"


def run_simulation(model: ModelSpec | ValidatedModel, config: SimConfig) -> Trajectory:
    """Integrate `model` over the configured horizon.

    Raises EventGridError if an event schedule misses the step grid and
    NonFiniteError if any rate or stock leaves the finite range.
    """
    vm = model if isinstance(model, ValidatedModel) else validate_model(model)
    spec = vm.spec
    steps = config.step_count()

    stock_names = [s.name for s in spec.stocks]
    flow_names = [f.name for f in spec.flows]
    aux_names = [a.name for a in spec.auxiliaries]
    columns = tuple(stock_names + flow_names + aux_names)

    event_steps = _event_schedule(spec, config, steps)
    uses_noise = _uses_noise(vm)
    evaluators = vm.compiled() if config.compiled else None

    params = dict(vm.params)
    state = {s.name: float(s.initial) for s in spec.stocks}
    flow_integrals = {name: 0.0 for name in flow_names}
    event_deltas = {name: 0.0 for name in stock_names}
    event_log: list[EventRecord] = []

    gauss_cache: dict[int, float] = {}

    def gauss(tv: float) -> float:
        if not uses_noise:
            return 0.0
        day = math.floor(tv)
        try:
            return gauss_cache[day]
        except KeyError:
            g = ex.daily_gauss(config.seed, day)
            gauss_cache[day] = g
            return g

    def evaluate(st: dict[str, float], tv: float) -> dict[str, float]:
        env = dict(params)
        env.update(st)
        g = gauss(tv)
        for name in vm.order:
            try:
                if evaluators is None:
                    v = ex.eval_expression(vm.expressions[name], env, tv, g)
                else:
                    v = evaluators[name](env, tv, g)
            except (ZeroDivisionError, OverflowError, ValueError):
                raise NonFiniteError(name, tv) from None
            if not math.isfinite(v):
                raise NonFiniteError(name, tv)
            env[name] = v
        return env

    times: list[float] = []
    rows: list[list[float]] = []

    def record(tv: float, env: dict[str, float]) -> None:
        times.append(tv)
        rows.append([env[c] for c in columns])

    for n in range(steps + 1):
        t_n = config.t_start + n * config.dt
        env = evaluate(state, t_n)
        if n % config.record_every == 0 or n == steps:
            record(t_n, env)
        if n == steps:
            break

        if config.method == "euler":
            raw = {name: env[name] for name in flow_names}
        else:
            raw = _rk4_combined(vm, state, t_n, config.dt, env, evaluate, flow_names)

        realized = _conserving_clamp(vm, state, raw, config.dt)
        t_next = config.t_start + (n + 1) * config.dt
        for s in spec.stocks:
            net = sum(realized[f] for f in vm.inflows[s.name]) - sum(
                realized[f] for f in vm.outflows[s.name]
            )
            v = state[s.name] + config.dt * net
            if s.non_negative and v < 0.0:
                v = 0.0  # clamp residue is dust-sized by construction
            if not math.isfinite(v):
                raise NonFiniteError(s.name, t_next)
            state[s.name] = v
        for f in flow_names:
            flow_integrals[f] += config.dt * realized[f]

        fired = event_steps.get(n + 1)
        if fired:
            _fire_events(vm, fired, state, t_next, evaluate, event_deltas, event_log)

    return Trajectory(
        times=np.array(times, dtype=float),
        columns=columns,
        values=np.array(rows, dtype=float) if rows else np.zeros((0, len(columns))),
        events=tuple(event_log),
        parameters=params,
        flow_integrals=flow_integrals,
        event_deltas=event_deltas,
        config=config,
    )


def _uses_noise(vm: ValidatedModel) -> bool:
    def has_noise(e: ex.Expr) -> bool:
        if isinstance(e, ex.Call):
            return e.fn == "noise" or any(has_noise(a) for a in e.args)
        if isinstance(e, ex.BinOp):
            return has_noise(e.left) or has_noise(e.right)
        return False

    return any(has_noise(e) for e in vm.expressions.values()) or any(
        has_noise(a.expression) for ev in vm.spec.events for a in ev.actions
    )


def _event_schedule(spec: ModelSpec, config: SimConfig, steps: int) -> dict[int, list]:
    """Map step index (1-based end of step) to the events firing there.

    Every firing must land on the grid. Firings at t_start are skipped: the
    first row is the initial condition by definition.
    """
    schedule: dict[int, list] = {}
    for event in spec.events:
        rel = (event.start - config.t_start) / config.dt
        n_start = round(rel)
        if abs(rel - n_start) > _GRID_TOL:
            raise EventGridError(
                f"event '{event.name}' start {event.start:g} is off the dt={config.dt:g} grid"
            )
        if event.interval > 0:
            ri = event.interval / config.dt
            n_int = round(ri)
            if n_int == 0 or abs(ri - n_int) > _GRID_TOL:
                raise EventGridError(
                    f"event '{event.name}' interval {event.interval:g} is off the "
                    f"dt={config.dt:g} grid"
                )
        else:
            n_int = 0

        n = n_start
        while n <= steps:
            if n >= 1:
                schedule.setdefault(n, []).append(event)
            if n_int == 0:
                break
            n += n_int
    return schedule


def _fire_events(vm, fired, state, t, evaluate, event_deltas, event_log) -> None:
    """Apply each fired event in declaration order.

    All of one event's action expressions are evaluated against a snapshot
    taken before that event changes anything, then applied sequentially.
    Non-negative stocks are floored at zero.
    """
    for event in fired:
        env = evaluate(state, t)
        planned = []
        for act in event.actions:
            # Interventions are exact amounts: noise reads as 0 in actions.
            try:
                v = ex.eval_expression(act.expression, env, t, 0.0)
            except (ZeroDivisionError, OverflowError, ValueError):
                raise NonFiniteError(f"event {event.name}", t) from None
            if not math.isfinite(v):
                raise NonFiniteError(f"event {event.name}", t)
            planned.append((act, v))
        for act, v in planned:
            old = state[act.target]
            if act.op == "add":
                new = old + v
            elif act.op == "subtract":
                new = old - v
            else:
                new = v
            if vm.stocks[act.target].non_negative and new < 0.0:
                new = 0.0
            state[act.target] = new
            event_deltas[act.target] += new - old
            amount = old - new if act.op == "subtract" else (new if act.op == "set" else new - old)
            event_log.append(EventRecord(t=t, event=event.name, target=act.target, amount=amount))


def _rk4_combined(vm, state, t_n, dt, env1, evaluate, flow_names):
    """Classic fourth-order combination of per-flow rates.

    Stage states are advanced without clamping; the conserving clamp is
    applied once to the combined rates by the caller.
    """
    def nets(env):
        return {name: env[name] for name in flow_names}

    def advance(base, rates, h):
        st = dict(base)
        for s in vm.spec.stocks:
            net = sum(rates[f] for f in vm.inflows[s.name]) - sum(
                rates[f] for f in vm.outflows[s.name]
            )
            st[s.name] = base[s.name] + h * net
        return st

    k1 = nets(env1)
    k2 = nets(evaluate(advance(state, k1, dt / 2), t_n + dt / 2))
    k3 = nets(evaluate(advance(state, k2, dt / 2), t_n + dt / 2))
    k4 = nets(evaluate(advance(state, k3, dt), t_n + dt))
    return {
        f: (k1[f] + 2 * k2[f] + 2 * k3[f] + k4[f]) / 6 for f in flow_names
    }


def _conserving_clamp(vm, state, raw, dt):
    """Scale outflows so no non-negative stock is driven below zero.

    Each stock gets a scale factor applied to all flows draining it. A
    reduced outflow also reduces the inflow it feeds downstream, so factors
    are iterated to a fixpoint; they only ever decrease, which guarantees
    convergence. Flows from outside the boundary are never scaled.
    """
    source_of = {f.name: f.source for f in vm.spec.flows}
    if not any(
        vm.stocks[s].non_negative and vm.outflows[s] for s in vm.stocks
    ):
        return dict(raw)

    scale = {name: 1.0 for name in vm.stocks}
    stocks = list(vm.stocks)
    for _ in range(4 * len(stocks) + 8):
        changed = False
        for name in stocks:
            sdef = vm.stocks[name]
            if not sdef.non_negative or not vm.outflows[name]:
                continue
            inflow = 0.0
            for f in vm.inflows[name]:
                src = source_of[f]
                inflow += raw[f] * (scale[src] if src is not None else 1.0)
            out_raw = sum(raw[f] for f in vm.outflows[name])
            if out_raw <= 0.0:
                continue
            candidate = state[name] + dt * (inflow - scale[name] * out_raw)
            if candidate < -_CLAMP_TOL * max(1.0, abs(state[name])):
                wanted = (state[name] + dt * inflow) / (dt * out_raw)
                wanted = max(0.0, wanted)
                if wanted < scale[name] - 1e-15:
                    scale[name] = wanted
                    changed = True
        if not changed:
            break

    return {
        f: raw[f] * (scale[source_of[f]] if source_of[f] is not None else 1.0)
        for f in raw
    }
