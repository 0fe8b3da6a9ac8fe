"""Integrator semantics: stepping, clamping, events, recording, output."""

from __future__ import annotations

import math

import numpy as np
import pytest

from sfdsim import (
    AuxDef,
    EventAction,
    EventDef,
    EventGridError,
    FlowDef,
    ModelSpec,
    NonFiniteError,
    ParamDef,
    SimConfig,
    StockDef,
    parse_expression,
    run_simulation,
    validate_model,
)

from modelgen import generate_model


def make_model(stocks, flows, auxes=(), params=(), events=()) -> ModelSpec:
    return ModelSpec(
        name="M",
        stocks=tuple(stocks),
        flows=tuple(flows),
        auxiliaries=tuple(auxes),
        parameters=tuple(params),
        events=tuple(events),
    )


def expr(text: str):
    return parse_expression(text)


class TestEulerStepping:
    def test_two_stock_chain_three_steps(self):
        # A drains 10% per day into B: 100 -> 90 -> 81 -> 72.9.
        spec = make_model(
            stocks=[StockDef("A", 100.0), StockDef("B", 0.0)],
            flows=[FlowDef("move", expr("0.1 * A"), "A", "B")],
        )
        traj = run_simulation(spec, SimConfig(t_end=3.0))
        assert traj.column("A").tolist() == [100.0, 90.0, 81.0, 72.9]
        assert traj.column("B").tolist() == [0.0, 10.0, 19.0, 27.1]
        assert traj.final("A") + traj.final("B") == 100.0

    def test_constant_inflow(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("2.5"), None, "S")],
        )
        traj = run_simulation(spec, SimConfig(t_end=4.0))
        assert traj.final("S") == 10.0
        assert traj.flow_integrals["feed"] == 10.0

    def test_dt_scaling(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("3"), None, "S")],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0, dt=0.25))
        assert len(traj.times) == 5
        assert traj.final("S") == 3.0


class TestConservingClamp:
    def test_outflow_scaled_to_available_mass(self):
        # Demand 5/day from a stock holding 1: only 1 leaves, stock hits 0.
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("out", expr("5"), "S", None)],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == 0.0
        assert traj.flow_integrals["out"] == 1.0

    def test_scaling_preserves_mass_downstream(self):
        spec = make_model(
            stocks=[StockDef("A", 1.0), StockDef("B", 0.0)],
            flows=[FlowDef("move", expr("5"), "A", "B")],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("A") == 0.0
        assert traj.final("B") == 1.0

    def test_chain_propagation(self):
        # A can only send 1 to B, so B's own outflow must scale to 1 too.
        spec = make_model(
            stocks=[StockDef("A", 1.0), StockDef("B", 0.0)],
            flows=[
                FlowDef("a2b", expr("5"), "A", "B"),
                FlowDef("bout", expr("4"), "B", None),
            ],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("A") == 0.0
        assert traj.final("B") == 0.0
        assert traj.flow_integrals["a2b"] == 1.0
        assert traj.flow_integrals["bout"] == 1.0

    def test_partial_scaling_splits_proportionally(self):
        # Two outflows demand 3 and 1 from a stock of 2: both scale by 1/2.
        spec = make_model(
            stocks=[StockDef("S", 2.0)],
            flows=[
                FlowDef("big", expr("3"), "S", None),
                FlowDef("small", expr("1"), "S", None),
            ],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == 0.0
        assert traj.flow_integrals["big"] == 1.5
        assert traj.flow_integrals["small"] == 0.5

    def test_allow_negative_stock_is_not_clamped(self):
        spec = make_model(
            stocks=[StockDef("S", 1.0, non_negative=False)],
            flows=[FlowDef("out", expr("5"), "S", None)],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == -4.0
        assert traj.flow_integrals["out"] == 5.0

    def test_recorded_rate_is_instantaneous_demand(self):
        # The column shows the evaluated rate; realized amounts live in
        # flow_integrals.
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("out", expr("5"), "S", None)],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.column("out").tolist() == [5.0, 5.0]
        assert traj.flow_integrals["out"] == 1.0


class TestRk4:
    def test_single_decay_step_matches_hand_value(self):
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("decay", expr("S"), "S", None)],
        )
        traj = run_simulation(spec, SimConfig(t_end=0.1, dt=0.1, method="rk4"))
        assert traj.final("S") == pytest.approx(0.9048375, rel=1e-12)
        assert abs(traj.final("S") - math.exp(-0.1)) < 1e-7

    def test_more_accurate_than_euler(self):
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("decay", expr("S"), "S", None)],
        )
        cfg = dict(t_end=1.0, dt=0.1)
        euler = run_simulation(spec, SimConfig(**cfg, method="euler"))
        rk4 = run_simulation(spec, SimConfig(**cfg, method="rk4"))
        exact = math.exp(-1.0)
        assert abs(rk4.final("S") - exact) < abs(euler.final("S") - exact) / 100

    def test_clamp_applies_to_combined_rates(self):
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("out", expr("5"), "S", None)],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0, method="rk4"))
        assert traj.final("S") == 0.0
        assert traj.flow_integrals["out"] == 1.0


def scheduled(stock="S", op="subtract", action_text="min(S, 3000)",
              start=30.0, interval=30.0, name="haul"):
    return EventDef(
        name, start=start, interval=interval,
        actions=(EventAction(stock, op, expr(action_text)),),
    )


class TestEvents:
    def test_sawtooth(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("100"), None, "S")],
            events=[scheduled()],
        )
        traj = run_simulation(spec, SimConfig(t_end=65.0))
        s = traj.column("S")
        assert s[29] == 2900.0
        assert s[30] == 0.0  # rows show post-event state
        assert s[31] == 100.0
        assert s[60] == 0.0
        assert len(traj.events) == 2
        assert traj.events[0].amount == 3000.0
        assert traj.event_deltas["S"] == -6000.0

    def test_event_not_fired_at_t_start(self):
        spec = make_model(
            stocks=[StockDef("S", 50.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
            events=[scheduled(action_text="min(S, 10)", start=0.0, interval=10.0)],
        )
        traj = run_simulation(spec, SimConfig(t_end=25.0))
        assert traj.column("S")[0] == 50.0  # initial row untouched
        assert [e.t for e in traj.events] == [10.0, 20.0]

    def test_one_shot_event(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
            events=[scheduled(op="add", action_text="100", start=5.0, interval=0.0)],
        )
        traj = run_simulation(spec, SimConfig(t_end=20.0))
        assert [e.t for e in traj.events] == [5.0]
        assert traj.final("S") == 120.0

    def test_off_grid_start_rejected(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
            events=[scheduled(start=2.5, interval=10.0)],
        )
        with pytest.raises(EventGridError):
            run_simulation(spec, SimConfig(t_end=20.0))
        # The same schedule is fine on a finer grid.
        run_simulation(spec, SimConfig(t_end=20.0, dt=0.5))

    def test_off_grid_interval_rejected(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
            events=[scheduled(start=1.0, interval=0.5)],
        )
        with pytest.raises(EventGridError):
            run_simulation(spec, SimConfig(t_end=20.0))

    def test_actions_snapshot_pre_event_state(self):
        # Both actions see S = 5 even though the first removes 3 of it.
        spec = make_model(
            stocks=[StockDef("S", 5.0), StockDef("Moved", 0.0)],
            flows=[FlowDef("feed", expr("0"), None, "S")],
            events=[EventDef("shift", 1.0, 0.0, (
                EventAction("S", "subtract", expr("min(S, 3)")),
                EventAction("Moved", "add", expr("min(S, 3)")),
            ))],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == 2.0
        assert traj.final("Moved") == 3.0

    def test_events_fire_in_declaration_order(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("0"), None, "S")],
            events=[
                EventDef("first", 1.0, 0.0,
                         (EventAction("S", "add", expr("10")),)),
                EventDef("second", 1.0, 0.0,
                         (EventAction("S", "subtract", expr("min(S, 4)")),)),
            ],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == 6.0
        assert [e.event for e in traj.events] == ["first", "second"]
        assert [e.amount for e in traj.events] == [10.0, 4.0]

    def test_subtract_floors_at_zero(self):
        spec = make_model(
            stocks=[StockDef("S", 5.0)],
            flows=[FlowDef("feed", expr("0"), None, "S")],
            events=[scheduled(action_text="100", start=1.0, interval=0.0)],
        )
        traj = run_simulation(spec, SimConfig(t_end=1.0))
        assert traj.final("S") == 0.0
        assert traj.events[0].amount == 5.0  # only what was there

    def test_set_action(self):
        spec = make_model(
            stocks=[StockDef("S", 5.0)],
            flows=[FlowDef("feed", expr("0"), None, "S")],
            events=[scheduled(op="set", action_text="42", start=1.0, interval=0.0)],
        )
        traj = run_simulation(spec, SimConfig(t_end=2.0))
        assert traj.final("S") == 42.0
        assert traj.events[0].amount == 42.0


class TestConfig:
    def test_zero_length_horizon_records_initial_row(self):
        spec = make_model(
            stocks=[StockDef("S", 7.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
        )
        traj = run_simulation(spec, SimConfig(t_end=0.0))
        assert traj.times.tolist() == [0.0]
        assert traj.final("S") == 7.0

    def test_fractional_step_count_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(t_end=10.3, dt=1.0).step_count()

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(t_end=-1.0)
        with pytest.raises(ValueError):
            SimConfig(dt=0.0)
        with pytest.raises(ValueError):
            SimConfig(method="heun")
        with pytest.raises(ValueError):
            SimConfig(record_every=0)

    def test_record_every_keeps_final_row(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
        )
        traj = run_simulation(spec, SimConfig(t_end=30.0, record_every=7))
        assert traj.times.tolist() == [0.0, 7.0, 14.0, 21.0, 28.0, 30.0]

    def test_nonzero_t_start(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("t"), None, "S")],
            events=[scheduled(op="add", action_text="5", start=12.0, interval=0.0)],
        )
        traj = run_simulation(spec, SimConfig(t_start=10.0, t_end=14.0))
        assert traj.times.tolist() == [10.0, 11.0, 12.0, 13.0, 14.0]
        # Euler integral of t over [10, 14) plus the one-shot event.
        assert traj.final("S") == 10.0 + 11.0 + 12.0 + 13.0 + 5.0


class TestFailureModes:
    def test_division_by_zero_reports_variable_and_time(self):
        spec = make_model(
            stocks=[StockDef("S", 2.0)],
            flows=[FlowDef("out", expr("1 / (S - 1)"), "S", None)],
        )
        with pytest.raises(NonFiniteError) as err:
            run_simulation(spec, SimConfig(t_end=10.0))
        assert err.value.name == "out"

    def test_overflow_detected(self):
        spec = make_model(
            stocks=[StockDef("S", 1.0)],
            flows=[FlowDef("grow", expr("exp(t * 10)"), None, "S")],
        )
        with pytest.raises(NonFiniteError):
            run_simulation(spec, SimConfig(t_end=200.0))


class TestTrajectoryApi:
    def make(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("1"), None, "S")],
            auxes=[AuxDef("doubled", expr("S * 2"))],
            params=[ParamDef("K", 3.0)],
        )
        return run_simulation(spec, SimConfig(t_end=5.0))

    def test_columns_are_stocks_flows_auxes(self):
        traj = self.make()
        assert traj.columns == ("S", "feed", "doubled")

    def test_at_exact_grid_time(self):
        traj = self.make()
        assert traj.at("S", 3.0) == 3.0
        with pytest.raises(KeyError):
            traj.at("S", 2.5)

    def test_unknown_column(self):
        traj = self.make()
        with pytest.raises(KeyError):
            traj.column("missing")

    def test_parameters_snapshot(self):
        traj = self.make()
        assert traj.parameters == {"K": 3.0}

    def test_csv_shape(self):
        traj = self.make()
        lines = traj.to_csv().splitlines()
        assert lines[0] == "t,S,feed,doubled"
        assert lines[1] == "0.000000,0.000000,1.000000,0.000000"
        assert len(lines) == 7
        assert traj.to_csv().endswith("\n")

    def test_events_csv_header(self):
        spec = make_model(
            stocks=[StockDef("S", 0.0)],
            flows=[FlowDef("feed", expr("100"), None, "S")],
            events=[scheduled()],
        )
        traj = run_simulation(spec, SimConfig(t_end=35.0))
        lines = traj.events_to_csv().splitlines()
        assert lines[0] == "t,event,target,amount"
        assert lines[1] == "30.000000,haul,S,3000.000000"


class TestMassBalance:
    @pytest.mark.parametrize("seed", range(8))
    def test_balance_identity_random_models(self, seed):
        spec = generate_model(seed)
        vm = validate_model(spec)
        method = "rk4" if seed % 2 else "euler"
        traj = run_simulation(vm, SimConfig(t_end=365.0, method=method))
        for stock in spec.stocks:
            inflow = sum(traj.flow_integrals[f] for f in vm.inflows[stock.name])
            outflow = sum(traj.flow_integrals[f] for f in vm.outflows[stock.name])
            expected = stock.initial + inflow - outflow + traj.event_deltas[stock.name]
            scale = max(1.0, abs(expected), abs(traj.final(stock.name)))
            assert abs(traj.final(stock.name) - expected) / scale < 1e-9
            assert traj.column(stock.name).min() >= 0.0


class TestDeterminism:
    def test_repeat_runs_identical(self):
        spec = generate_model(3)
        a = run_simulation(spec, SimConfig(t_end=200.0, seed=5))
        b = run_simulation(spec, SimConfig(t_end=200.0, seed=5))
        assert np.array_equal(a.values, b.values)
        assert a.to_csv() == b.to_csv()

    def test_noise_keyed_by_day_not_call_order(self, baseline_spec):
        noisy = baseline_spec.with_params({"NoiseStdDev": 2.0})
        dense = run_simulation(noisy, SimConfig(t_end=50.0, seed=9))
        sparse = run_simulation(noisy, SimConfig(t_end=50.0, seed=9, record_every=5))
        for t in range(0, 51, 5):
            assert sparse.at("temperature", float(t)) == dense.at("temperature", float(t))

    def test_seed_changes_noisy_output(self, baseline_spec):
        noisy = baseline_spec.with_params({"NoiseStdDev": 2.0})
        a = run_simulation(noisy, SimConfig(t_end=50.0, seed=1))
        b = run_simulation(noisy, SimConfig(t_end=50.0, seed=2))
        assert not np.array_equal(a.values, b.values)
