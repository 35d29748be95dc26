"""Closed-loop receding-horizon simulation over a configured scenario.

Per sample: read the plant levels, form the setpoint, solve for the
control move, hold the absolute flows over the interval, and advance
the nonlinear plant with Runge-Kutta substeps.  The controller always
runs on the linearized model while the plant stays nonlinear, exactly
the mismatch the scheme is meant to tolerate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import zoh_discretize
from .mpc import ControllerState, MpcConfig, augment, build_prediction, receding_step
from .plant import (
    NO_DISTURBANCE,
    DisturbanceProfile,
    PlantState,
    disturbance_flow,
    disturbance_inflows,
    rk4_step,
)
from .tank import DeviationState, TankParams, linearize, make_operating_point

logger = logging.getLogger(__name__)

#: Samples a signal must stay inside the settling band to count as settled.
SETTLE_DWELL = 10


@dataclass(frozen=True)
class SetpointPulse:
    """Rectangular setpoint pulse for one output (m)."""

    amplitude: float = 0.0
    start: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"pulse duration must be >= 0, got {self.duration}")
        if not math.isfinite(self.amplitude):
            raise ValueError("pulse amplitude must be finite")

    def value(self, t: float) -> float:
        if self.start <= t < self.start + self.duration:
            return self.amplitude
        return 0.0


@dataclass(frozen=True)
class Scenario:
    """Everything a closed-loop run needs, in plain numbers."""

    params: TankParams
    op_levels: tuple[float, float]
    mpc: MpcConfig
    ts: float
    t_end: float
    setpoints: tuple[SetpointPulse, SetpointPulse]
    disturbance: DisturbanceProfile = NO_DISTURBANCE
    substeps: int = 4  # RK4 substeps per controller sample
    clamp_flows: bool = False  # floor absolute feed flows at zero
    linear_plant: bool = False  # diagnostic: drive the discrete linear model instead

    def __post_init__(self):
        if self.ts <= 0:
            raise ValueError(f"sampling period must be positive, got {self.ts}")
        if self.t_end <= 0:
            raise ValueError(f"simulation horizon must be positive, got {self.t_end}")
        if self.substeps < 1:
            raise ValueError(f"need at least one integrator substep, got {self.substeps}")

    def n_samples(self) -> int:
        # guard against 15/0.05 landing just below an integer
        return int(math.floor(self.t_end / self.ts + 1e-9)) + 1


@dataclass
class SimulationLog:
    """Per-sample record of the closed-loop run (column arrays)."""

    t: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    fi1_abs: np.ndarray
    fi2_abs: np.ndarray

    COLUMNS = ("t", "r1", "r2", "h1", "h2", "u1", "u2", "u3", "fi1_abs", "fi2_abs")

    def __len__(self) -> int:
        return self.t.size

    def to_csv_text(self) -> str:
        """CSV with the fixed column contract, 9 significant digits."""
        lines = [",".join(self.COLUMNS)]
        cols = [getattr(self, name) for name in self.COLUMNS]
        for k in range(len(self)):
            lines.append(",".join(format(col[k], ".9g") for col in cols))
        return "\n".join(lines) + "\n"


class SimulationError(RuntimeError):
    """A sub-module failure, annotated with the sample it happened at."""

    def __init__(self, sample_index: int, t: float, cause: Exception):
        super().__init__(f"simulation failed at sample {sample_index} (t={t:.6g} s): {cause}")
        self.sample_index = sample_index


def run_closed_loop(scenario: Scenario) -> SimulationLog:
    """Run the full sample-control-hold-integrate loop for a scenario."""
    op = make_operating_point(scenario.params, *scenario.op_levels)
    lin = linearize(scenario.params, op)
    disc = zoh_discretize(lin, scenario.ts)
    aug = augment(disc)
    pred = build_prediction(aug, scenario.mpc)

    n = scenario.n_samples()
    cols = {name: np.zeros(n) for name in SimulationLog.COLUMNS}
    ts = scenario.ts
    dt = ts / scenario.substeps
    sp1, sp2 = scenario.setpoints
    dist = scenario.disturbance
    fi_bar = np.array([op.fi1_bar, op.fi2_bar])

    plant = PlantState(t=0.0, dev=DeviationState(0.0, 0.0))
    lin_state = np.zeros(2)  # diagnostic linear-plant state
    ctrl = ControllerState.initial(np.zeros(2), n_inputs=2)
    clamped_at: int | None = None

    def absolute_flows(u_dev, t: float) -> tuple[float, float]:
        """Feed flows actually entering the plant at time t."""
        d1, d2 = disturbance_inflows(dist, op, t)
        f1 = fi_bar[0] + u_dev[0] + d1
        f2 = fi_bar[1] + u_dev[1] + d2
        if scenario.clamp_flows:
            f1, f2 = max(f1, 0.0), max(f2, 0.0)
        return f1, f2

    for k in range(n):
        t_k = k * ts
        if scenario.linear_plant:
            y = lin_state.copy()
        else:
            y = np.array([plant.dev.h1, plant.dev.h2])
        r = np.array([sp1.value(t_k), sp2.value(t_k)])

        try:
            ctrl, u = receding_step(ctrl, pred, scenario.mpc, aug, y, r)
        except Exception as exc:
            raise SimulationError(k, t_k, exc) from exc

        fi1_abs, fi2_abs = absolute_flows(u, t_k)
        d1_k, d2_k = disturbance_inflows(dist, op, t_k)
        if scenario.clamp_flows and clamped_at is None:
            if fi_bar[0] + u[0] + d1_k < 0 or fi_bar[1] + u[1] + d2_k < 0:
                clamped_at = k
                logger.warning("feed-flow clamp active from sample %d (t=%.4g s)", k, t_k)

        row = (t_k, r[0], r[1], y[0], y[1], u[0], u[1],
               disturbance_flow(dist, op, t_k), fi1_abs, fi2_abs)
        for name, val in zip(SimulationLog.COLUMNS, row):
            cols[name][k] = val

        if k == n - 1:
            break

        if scenario.linear_plant:
            # ZOH linear plant: disturbance sampled at t_k and held
            v = u + np.array([d1_k, d2_k])
            lin_state = disc.ad @ lin_state + disc.bd @ v
        else:
            def extra_inflow(t, u=u):
                # whatever enters beyond the held control: disturbance and,
                # if enabled, the nonnegative-flow clamp correction
                f1, f2 = absolute_flows(u, t)
                return f1 - fi_bar[0] - u[0], f2 - fi_bar[1] - u[1]

            try:
                for _ in range(scenario.substeps):
                    plant = rk4_step(
                        scenario.params, op, plant, (u[0], u[1]), extra_inflow, dt
                    )
            except Exception as exc:
                raise SimulationError(k, t_k, exc) from exc

    return SimulationLog(**cols)


@dataclass
class StepMetrics:
    """Step-response numbers for one setpoint edge of one output."""

    output: str
    t_edge: float
    target: float
    step: float
    rise_time: float | None
    settling_time: float | None
    overshoot_pct: float
    steady_state_error: float
    settled: bool


@dataclass
class SummaryMetrics:
    outputs: dict[str, list[StepMetrics]] = field(default_factory=dict)
    max_control_step: dict[str, float] = field(default_factory=dict)


def _segment_metrics(name, t, y, target, step, i0, i1) -> StepMetrics:
    seg_t, seg_y = t[i0:i1], y[i0:i1]
    band = 0.02 * max(abs(target), abs(step))

    rise_time = None
    overshoot = 0.0
    if step != 0.0:
        base = target - step
        sgn = 1.0 if step > 0 else -1.0
        lo, hi = base + 0.1 * step, base + 0.9 * step
        idx10 = np.nonzero(sgn * (seg_y - lo) >= 0)[0]
        idx90 = np.nonzero(sgn * (seg_y - hi) >= 0)[0]
        if idx10.size and idx90.size:
            rise_time = float(seg_t[idx90[0]] - seg_t[idx10[0]])
        overshoot = max(0.0, float(np.max(sgn * (seg_y - target))) / abs(step) * 100.0)

    # settled once the signal stays in the band through the segment end,
    # and only if it dwells there long enough to mean it
    in_band = np.abs(seg_y - target) <= band if band > 0 else seg_y == target
    trailing = 0
    for ok in in_band[::-1]:
        if not ok:
            break
        trailing += 1
    settled = trailing >= SETTLE_DWELL
    settling_time = float(seg_t[len(seg_y) - trailing] - seg_t[0]) if settled else None

    return StepMetrics(
        output=name,
        t_edge=float(seg_t[0]),
        target=float(target),
        step=float(step),
        rise_time=rise_time,
        settling_time=settling_time,
        overshoot_pct=overshoot,
        steady_state_error=float(abs(seg_y[-1] - target)),
        settled=settled,
    )


def summarize(log: SimulationLog, scenario: Scenario) -> SummaryMetrics:
    """Step-response metrics per setpoint edge plus control activity.

    For each output, every change of the setpoint opens a segment that
    runs to the next change (or to the end of the log); rise time is
    10-90% of the step, the settling band is +/-2% of the setpoint (of
    the step size for return-to-zero edges), and a segment only counts
    as settled after a dwell of SETTLE_DWELL samples inside the band.
    """
    if len(log) == 0:
        raise ValueError("empty simulation log")
    out = SummaryMetrics()
    for name, r, y in (("h1", log.r1, log.h1), ("h2", log.r2, log.h2)):
        edges = [0] + [k for k in range(1, len(log)) if r[k] != r[k - 1]]
        bounds = edges + [len(log)]
        metrics = []
        for e, (i0, i1) in enumerate(zip(bounds[:-1], bounds[1:])):
            if i1 - i0 < 1:
                continue
            target = r[i0]
            prev = y[0] if e == 0 else r[i0 - 1]
            metrics.append(_segment_metrics(name, log.t, y, target, target - prev, i0, i1))
        out.outputs[name] = metrics
    for name, u in (("u1", log.u1), ("u2", log.u2)):
        du = np.diff(u)
        out.max_control_step[name] = float(np.max(np.abs(du))) if du.size else 0.0
    return out
