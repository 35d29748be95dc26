"""Receding-horizon predictive control in velocity form.

The sampled plant model is rewritten in control increments and stacked
with the measured output, which embeds an integrator in the controller
and gives offset-free tracking of constant setpoints.  Over a
prediction horizon the future outputs are an affine map of the current
augmented state and the stacked control increments,

    Y = psi @ x + phi @ dU,

and minimizing ||Rs - Y||^2 + rw*||dU||^2 has the closed-form solution

    dU = (phi.T phi + rw I)^-1 phi.T (Rs - psi @ x).

Only the first control increment is applied; the problem is re-solved
at every sample with a fresh measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .discretize import DiscreteModel


@dataclass(frozen=True)
class MpcConfig:
    """Horizon lengths and the control-move weight.

    rw scales the identity penalty on the stacked control increments;
    rw > 0 guarantees a positive-definite Hessian.
    """

    np_horizon: int  # prediction horizon (samples)
    nc_horizon: int  # control horizon (samples)
    rw: float = 1.0  # control-move weight

    def __post_init__(self):
        if not 1 <= self.nc_horizon <= self.np_horizon:
            raise ValueError(
                f"need 1 <= nc <= np, got nc={self.nc_horizon}, np={self.np_horizon}"
            )
        if self.rw < 0:
            raise ValueError(f"control-move weight must be >= 0, got {self.rw}")


@dataclass(frozen=True)
class AugmentedModel:
    """Velocity-form model: state is [delta x_m; y], input is delta u.

    a = [[Ad,    0 ],     b = [[Bd   ],     c = [0  I]
         [Cd Ad, I ]],         [Cd Bd]],
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    n: int  # plant states
    m: int  # plant inputs
    q: int  # plant outputs

    def __post_init__(self):
        for name in ("a", "b", "c"):
            mat = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        nq = self.n + self.q
        if self.a.shape != (nq, nq) or self.b.shape != (nq, self.m) or self.c.shape != (self.q, nq):
            raise ValueError(
                f"inconsistent augmented dimensions: a {self.a.shape}, b {self.b.shape}, "
                f"c {self.c.shape} for (n={self.n}, m={self.m}, q={self.q})"
            )


def augment(model: DiscreteModel) -> AugmentedModel:
    """Stack the state-increment dynamics with the output recursion.

    The construction satisfies the one-step identity
    y(k+1) = y(k) + Cd Ad dx_m(k) + Cd Bd du(k).
    """
    n, m, q = model.n_states, model.n_inputs, model.n_outputs
    if model.cd.shape != (q, n) or model.bd.shape != (n, m):
        raise ValueError("inconsistent plant dimensions")

    a = np.zeros((n + q, n + q))
    a[:n, :n] = model.ad
    a[n:, :n] = model.cd @ model.ad
    a[n:, n:] = np.eye(q)

    b = np.zeros((n + q, m))
    b[:n] = model.bd
    b[n:] = model.cd @ model.bd

    c = np.zeros((q, n + q))
    c[:, n:] = np.eye(q)
    return AugmentedModel(a=a, b=b, c=c, n=n, m=m, q=q)


@dataclass(frozen=True)
class PredictionMatrices:
    """Horizon maps and the pre-factored cost Hessian.

    psi : (Np*q, n+q)   block row k is C A^(k+1)
    phi : (Np*q, Nc*m)  block (i, j) is C A^(i-j) B for i >= j, else 0
    hessian : phi.T phi + rw I, symmetrized
    """

    psi: np.ndarray
    phi: np.ndarray
    hessian: np.ndarray
    cho: tuple  # scipy cho_factor of hessian
    q: int
    m: int

    def __post_init__(self):
        for mat in (self.psi, self.phi, self.hessian):
            mat.setflags(write=False)

    @property
    def np_horizon(self) -> int:
        return self.psi.shape[0] // self.q

    @property
    def nc_horizon(self) -> int:
        return self.phi.shape[1] // self.m

    def stack_setpoint(self, r) -> np.ndarray:
        """Repeat the q-entry setpoint down the prediction horizon."""
        r = np.asarray(r, dtype=float).reshape(-1)
        if r.size != self.q:
            raise ValueError(f"setpoint has {r.size} entries, expected {self.q}")
        if not np.all(np.isfinite(r)):
            raise ValueError("setpoint entries must be finite")
        return np.tile(r, self.np_horizon)


def build_prediction(aug: AugmentedModel, cfg: MpcConfig) -> PredictionMatrices:
    """Assemble psi, phi and factor the Hessian for the horizon pair.

    Raises numpy.linalg.LinAlgError if rw = 0 and phi.T phi is
    singular; the closed-form law assumes the Hessian is invertible.
    """
    nq = aug.n + aug.q
    q, m = aug.q, aug.m
    npred, nctl = cfg.np_horizon, cfg.nc_horizon

    psi = np.zeros((npred * q, nq))
    impulse = np.zeros((npred * q, m))  # block k is C A^k B
    row = aug.c
    for k in range(npred):
        impulse[k * q : (k + 1) * q] = row @ aug.b
        row = row @ aug.a
        psi[k * q : (k + 1) * q] = row

    phi = np.zeros((npred * q, nctl * m))
    for j in range(nctl):
        phi[j * q :, j * m : (j + 1) * m] = impulse[: (npred - j) * q]

    h = phi.T @ phi
    h = (h + h.T) * 0.5 + cfg.rw * np.eye(nctl * m)
    cho = cho_factor(h)
    return PredictionMatrices(psi=psi, phi=phi, hessian=h, cho=cho, q=q, m=m)


def cost(pred: PredictionMatrices, cfg: MpcConfig, x, r, du) -> float:
    """Quadratic tracking cost of a candidate increment sequence du."""
    x = np.asarray(x, dtype=float).reshape(-1)
    du = np.asarray(du, dtype=float).reshape(-1)
    if du.size != pred.phi.shape[1]:
        raise ValueError(f"du has {du.size} entries, expected {pred.phi.shape[1]}")
    err = pred.stack_setpoint(r) - (pred.psi @ x + pred.phi @ du)
    return float(err @ err + cfg.rw * (du @ du))


def cost_gradient(pred: PredictionMatrices, cfg: MpcConfig, x, r, du) -> np.ndarray:
    """Gradient of the cost with respect to du; zero at the optimum."""
    x = np.asarray(x, dtype=float).reshape(-1)
    du = np.asarray(du, dtype=float).reshape(-1)
    if du.size != pred.phi.shape[1]:
        raise ValueError(f"du has {du.size} entries, expected {pred.phi.shape[1]}")
    free_err = pred.stack_setpoint(r) - pred.psi @ x
    return -2.0 * (pred.phi.T @ free_err) + 2.0 * (pred.hessian @ du)


def solve_optimal(pred: PredictionMatrices, x, r) -> np.ndarray:
    """Minimizer of the tracking cost: two triangular solves per call."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != pred.psi.shape[1]:
        raise ValueError(f"state has {x.size} entries, expected {pred.psi.shape[1]}")
    rhs = pred.phi.T @ (pred.stack_setpoint(r) - pred.psi @ x)
    return cho_solve(pred.cho, rhs)


@dataclass(frozen=True)
class ControllerState:
    """History the receding-horizon controller carries between samples."""

    prev_plant_state: np.ndarray  # last measured plant state (= output here)
    prev_control: np.ndarray  # last applied control, deviation flows
    augmented_x: np.ndarray  # [delta x_m; y] formed at the last sample

    def __post_init__(self):
        for name in ("prev_plant_state", "prev_control", "augmented_x"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.flags.writeable:
                v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def initial(cls, measurement, n_inputs: int) -> "ControllerState":
        """Start-up state: zero increment, zero deviation control.

        Seeding the history with the first measurement makes the first
        state increment zero, so there is no derivative kick at start.
        """
        y = np.asarray(measurement, dtype=float).reshape(-1).copy()
        return cls(
            prev_plant_state=y,
            prev_control=np.zeros(n_inputs),
            augmented_x=np.concatenate([np.zeros(y.size), y]),
        )


def receding_step(
    ctrl: ControllerState,
    pred: PredictionMatrices,
    cfg: MpcConfig,
    aug: AugmentedModel,
    measurement,
    r,
) -> tuple[ControllerState, np.ndarray]:
    """One controller sample: measure, solve, apply the first increment.

    The output matrix is the identity for the tank plant, so the
    measured output *is* the plant state and the state increment is the
    difference of consecutive measurements; no observer is needed.
    Returns the updated controller state and the absolute control u(k)
    (still in deviation flows relative to the operating point).
    """
    y = np.asarray(measurement, dtype=float).reshape(-1)
    if y.size != aug.q:
        raise ValueError(f"measurement has {y.size} entries, expected {aug.q}")
    dx = y - ctrl.prev_plant_state
    x = np.concatenate([dx, y])
    du_seq = solve_optimal(pred, x, r)
    u = ctrl.prev_control + du_seq[: aug.m]
    return ControllerState(prev_plant_state=y.copy(), prev_control=u, augmented_x=x), u
