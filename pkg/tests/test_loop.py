"""Closed-loop behavior: tracking, rejection, logging, metrics."""

import logging
import math

import numpy as np
import pytest

from tankmpc import (
    DEFAULT_PARAMS,
    DisturbanceProfile,
    MpcConfig,
    Scenario,
    SetpointPulse,
    SimulationError,
    default_run_config,
    run_closed_loop,
    summarize,
)
from tankmpc.plant import NO_DISTURBANCE


def make_scenario(**overrides):
    base = default_run_config().scenario
    fields = {name: getattr(base, name) for name in (
        "params", "op_levels", "mpc", "ts", "t_end", "setpoints",
        "disturbance", "substeps", "clamp_flows", "linear_plant")}
    fields.update(overrides)
    return Scenario(**fields)


def constant_setpoints(r1, r2):
    return (SetpointPulse(r1, 0.0, math.inf), SetpointPulse(r2, 0.0, math.inf))


DEFAULT_SCENARIO = make_scenario()


class TestRunClosedLoop:
    def test_undisturbed_equilibrium_stays_silent(self):
        sc = make_scenario(setpoints=(SetpointPulse(), SetpointPulse()),
                           disturbance=NO_DISTURBANCE, t_end=3.0)
        log = run_closed_loop(sc)
        for col in ("h1", "h2", "u1", "u2", "u3"):
            assert np.max(np.abs(getattr(log, col))) < 1e-9

    def test_row_count_and_time_grid(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        assert len(log) == math.floor(15.0 / 0.05) + 1 == 301
        assert np.allclose(np.diff(log.t), 0.05, atol=1e-12)
        assert np.all(np.diff(log.t) > 0)

        tiny = run_closed_loop(make_scenario(t_end=0.05))
        assert len(tiny) == 2 and tiny.t[0] == 0.0 and tiny.t[1] == 0.05

    def test_bundled_scenario_tracks_both_pulses(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        m = summarize(log, DEFAULT_SCENARIO)
        for name, amp in (("h1", 0.5), ("h2", 0.3)):
            rising = [s for s in m.outputs[name] if s.target == amp]
            assert len(rising) == 1 and rising[0].settled
            assert rising[0].steady_state_error < 1e-3
        assert abs(log.h1[-1]) < 1e-3 and abs(log.h2[-1]) < 1e-3

    def test_first_control_move_is_direct_acting(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        nz = np.nonzero(log.u1)[0]
        assert nz.size and log.u1[nz[0]] > 0
        assert log.r1[nz[0]] > 0  # the move happens at the setpoint edge
        nz2 = np.nonzero(log.u2)[0]
        assert nz2.size and log.u2[nz2[0]] > 0

    @pytest.mark.parametrize("r, rw", [
        ((0.4, 0.2), 0.01),
        ((-0.3, -0.45), 10.0),
        ((0.5, -0.5), 1.0),
    ])
    def test_offset_free_tracking(self, r, rw):
        """Constant setpoints anywhere in the band settle with no offset."""
        sc = make_scenario(mpc=MpcConfig(10, 3, rw), t_end=8.0,
                           setpoints=constant_setpoints(*r),
                           disturbance=NO_DISTURBANCE)
        log = run_closed_loop(sc)
        assert abs(log.h1[-1] - r[0]) < 1e-3
        assert abs(log.h2[-1] - r[1]) < 1e-3

    def test_disturbance_rejected_by_integral_action(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        pulse = (log.t >= 8.0) & (log.t < 10.0)
        assert 1e-4 < np.max(np.abs(log.h1[pulse])) < 0.2  # visible but bounded
        after = log.t >= 13.0  # pulse end + 3 s
        assert np.max(np.abs(log.h1[after])) < 1e-3
        assert np.max(np.abs(log.h2[after])) < 1e-3
        # the held control ends up cancelling the injected flow
        during = (log.t >= 9.5) & (log.t < 10.0)
        assert np.allclose(log.u1[during], -log.u3[during], atol=1e-3)

    def test_u3_column_logs_the_pulse(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        expected = 0.1 * 1.5556349186104046
        inside = (log.t >= 8.0) & (log.t < 10.0)
        assert np.allclose(log.u3[inside], expected, rtol=1e-12)
        assert np.all(log.u3[~inside] == 0.0)
        # absolute flow reconstruction on the disturbed channel
        assert np.allclose(log.fi1_abs, 1.5556349186104046 + log.u1 + log.u3, atol=1e-12)
        assert np.allclose(log.fi2_abs, 1.9989395988248397 + log.u2, atol=1e-12)

    def test_determinism_bit_identical(self):
        a = run_closed_loop(DEFAULT_SCENARIO).to_csv_text()
        b = run_closed_loop(DEFAULT_SCENARIO).to_csv_text()
        assert a == b

    def test_longer_horizon_keeps_zero_offset(self):
        sc = make_scenario(mpc=MpcConfig(15, 3, 1.0))
        log = run_closed_loop(sc)
        assert abs(log.h1[-1]) < 1e-3 and abs(log.h2[-1]) < 1e-3
        m = summarize(log, sc)
        assert all(s.settled for s in m.outputs["h1"])

    def test_linear_plant_diagnostic_mode(self):
        sc = make_scenario(linear_plant=True, t_end=6.0,
                           setpoints=constant_setpoints(0.3, 0.2),
                           disturbance=NO_DISTURBANCE)
        log = run_closed_loop(sc)
        assert abs(log.h1[-1] - 0.3) < 1e-6
        assert abs(log.h2[-1] - 0.2) < 1e-6

    def test_flow_clamp_floors_feeds(self, caplog):
        # a -200% feed pulse drives the absolute tank-1 feed negative
        dist = DisturbanceProfile(start=1.0, duration=1.0, magnitude=-200.0, target="tank1")
        free = make_scenario(disturbance=dist, t_end=4.0,
                             setpoints=(SetpointPulse(), SetpointPulse()))
        assert np.min(run_closed_loop(free).fi1_abs) < 0

        clamped = make_scenario(disturbance=dist, t_end=4.0,
                                setpoints=(SetpointPulse(), SetpointPulse()),
                                clamp_flows=True)
        with caplog.at_level(logging.WARNING, logger="tankmpc.loop"):
            log = run_closed_loop(clamped)
        assert np.min(log.fi1_abs) >= 0.0
        assert any("clamp" in rec.message for rec in caplog.records)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_failure_carries_sample_index(self):
        sc = make_scenario(setpoints=(SetpointPulse(1e308, 0.0, math.inf), SetpointPulse()),
                           t_end=1.0)
        with pytest.raises(SimulationError) as exc_info:
            run_closed_loop(sc)
        assert exc_info.value.sample_index >= 0
        assert "sample" in str(exc_info.value)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            make_scenario(ts=0.0)
        with pytest.raises(ValueError):
            make_scenario(t_end=-1.0)
        with pytest.raises(ValueError):
            make_scenario(substeps=0)


class TestCsvContract:
    def test_header_and_shape(self):
        text = run_closed_loop(make_scenario(t_end=0.25)).to_csv_text()
        lines = text.split("\n")
        assert lines[0] == "t,r1,r2,h1,h2,u1,u2,u3,fi1_abs,fi2_abs"
        assert lines[-1] == ""  # single trailing newline
        assert len(lines) == 1 + 6 + 1  # header + rows + trailing

    def test_nine_significant_digits(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        row = log.to_csv_text().split("\n")[162]  # inside the disturbance pulse
        fields = row.split(",")
        assert fields[7] == format(0.1 * 1.5556349186104048, ".9g")
        assert all(len(f.replace("-", "").replace(".", "").replace("e", "").lstrip("0")) <= 10
                   for f in fields)


class TestSummarize:
    def test_already_at_setpoint(self):
        sc = make_scenario(setpoints=(SetpointPulse(), SetpointPulse()),
                           disturbance=NO_DISTURBANCE, t_end=2.0)
        m = summarize(run_closed_loop(sc), sc)
        for name in ("h1", "h2"):
            (seg,) = m.outputs[name]
            assert seg.settled and seg.settling_time == 0.0
            assert seg.overshoot_pct == 0.0 and seg.steady_state_error == 0.0

    def test_bundled_scenario_metrics_finite(self):
        log = run_closed_loop(DEFAULT_SCENARIO)
        m = summarize(log, DEFAULT_SCENARIO)
        for name in ("h1", "h2"):
            segs = m.outputs[name]
            assert len(segs) == 3  # initial hold, pulse up, pulse down
            assert all(s.settled for s in segs)
            rising = segs[1]
            assert rising.rise_time is not None and 0 < rising.rise_time < 1.0
            assert 0 < rising.settling_time < 2.0
        assert m.max_control_step["u1"] > 0

    def test_unsettled_run_is_marked_not_crashed(self):
        sc = make_scenario(t_end=0.7, setpoints=(
            SetpointPulse(0.5, 0.5, 10.0), SetpointPulse(0.3, 0.5, 10.0)))
        m = summarize(run_closed_loop(sc), sc)
        rising = m.outputs["h1"][-1]
        assert not rising.settled
        assert rising.settling_time is None
