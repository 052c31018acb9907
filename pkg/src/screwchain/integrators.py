"""Time integration: classical RK4 in joint space, the Munthe-Kaas
Lie-group RK4 on SE(3) for absolute rigid-body motion, and the
spatial-momentum formulation with conservation diagnostics.

Joint space is a plain vector space for the supported joints, so chain
trajectories use ordinary RK4 on (q, qd) or on (q, spatial momenta); the
Lie-group machinery is exercised by the absolute-motion integrators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import BodyModel, ChainModel, spatial_inertia_body
from .se3 import Pose, adjoint, dexp_inv, exp_se3, lie_bracket
from . import dynamics as dyn
from .kinematics import fk

__all__ = [
    "RigidBodyState",
    "StepReport",
    "FreeBodyTrajectory",
    "ChainTrajectory",
    "mk_step",
    "free_body_simulate",
    "chain_simulate",
]

# Polar re-projection cadence for long pose integrations.
REORTHONORMALIZE_EVERY = 1000


@dataclass(frozen=True)
class RigidBodyState:
    """Absolute pose plus twist, tagged body or spatial."""

    pose: Pose
    twist: np.ndarray
    rep: str = "body"

    def __post_init__(self):
        if self.rep not in ("body", "spatial"):
            raise ValueError("RigidBodyState.rep must be 'body' or 'spatial'")
        t = np.asarray(self.twist, dtype=float).reshape(6)
        t.setflags(write=False)
        object.__setattr__(self, "twist", t)

    def spatial_twist(self) -> np.ndarray:
        if self.rep == "spatial":
            return self.twist.copy()
        return adjoint(self.pose) @ self.twist

    def body_twist(self) -> np.ndarray:
        if self.rep == "body":
            return self.twist.copy()
        return np.linalg.solve(adjoint(self.pose), self.twist)


@dataclass
class StepReport:
    t: float
    energy: float
    momentum_spatial: np.ndarray
    constraint_drift: float


def mk_step(state: RigidBodyState, twist_field, h: float, t: float = 0.0) -> RigidBodyState:
    """One Munthe-Kaas RK4 step of the pose under a twist field.

    ``twist_field(t, pose)`` returns the twist in the state's
    representation.  The step integrates the algebra-coordinate ODE
    Xdot = dexpinv(-/+X) V with X reset to zero each step (which keeps X
    small and dexpinv well conditioned), then updates the pose by
    C exp(X) (body) or exp(X) C (spatial).  Constant twist fields are
    reproduced exactly for any step size.
    """
    pose0 = state.pose
    body = state.rep == "body"

    def xdot(tau, x):
        step = exp_se3(x)
        pose = pose0 @ step if body else step @ pose0
        v = np.asarray(twist_field(tau, pose), dtype=float)
        return dexp_inv(x, "left" if body else "right") @ v

    k1 = xdot(t, np.zeros(6))
    k2 = xdot(t + 0.5 * h, 0.5 * h * k1)
    k3 = xdot(t + 0.5 * h, 0.5 * h * k2)
    k4 = xdot(t + h, h * k3)
    x = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    step = exp_se3(x)
    pose1 = pose0 @ step if body else step @ pose0
    return RigidBodyState(pose1, twist_field(t + h, pose1), state.rep)


@dataclass
class FreeBodyTrajectory:
    times: np.ndarray
    poses: list[Pose]
    twists_spatial: np.ndarray
    reports: list[StepReport]


def free_body_simulate(body: BodyModel, initial: RigidBodyState, T: float,
                       h: float) -> FreeBodyTrajectory:
    """Torque-free rigid body by the momentum formulation.

    The spatial momentum is constant by construction; the twist is
    recovered pointwise from it and the pose advanced by Munthe-Kaas RK4.
    """
    mb = spatial_inertia_body(body).matrix
    state = RigidBodyState(initial.pose, initial.spatial_twist(), "spatial")

    def spatial_inertia_at(pose: Pose) -> np.ndarray:
        ad_inv = adjoint(pose.inverse())
        return ad_inv.T @ mb @ ad_inv

    ms0 = spatial_inertia_at(state.pose)
    try:
        cho_factor(ms0)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"degenerate spatial inertia: {err}") from None
    pi = ms0 @ state.twist  # held constant: momentum balance with zero wrench

    def twist_field(_t, pose):
        return cho_solve(cho_factor(spatial_inertia_at(pose)), pi)

    steps = int(round(T / h))
    times = np.linspace(0.0, steps * h, steps + 1)
    poses = [state.pose]
    twists = [state.twist]
    reports = []

    def report(t, pose, v_s):
        ms = spatial_inertia_at(pose)
        energy = 0.5 * float(v_s @ ms @ v_s)
        drift = float(np.linalg.norm(pose.rot.T @ pose.rot - np.eye(3)))
        return StepReport(t, energy, pi.copy(), drift)

    reports.append(report(0.0, state.pose, state.twist))
    for k in range(steps):
        state = mk_step(state, twist_field, h, t=times[k])
        if (k + 1) % REORTHONORMALIZE_EVERY == 0:
            state = RigidBodyState(state.pose.orthonormalized(), state.twist, "spatial")
        poses.append(state.pose)
        twists.append(state.twist)
        reports.append(report(times[k + 1], state.pose, state.twist))
    return FreeBodyTrajectory(times, poses, np.array(twists), reports)


@dataclass
class ChainTrajectory:
    times: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    reports: list[StepReport]
    form: str


def _rk4(f, t, y, h, k1=None):
    if k1 is None:
        k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def chain_simulate(model: ChainModel, q0, qd0, torque=None, T: float = 1.0,
                   h: float = 1e-3, form: str = "state", gravity: bool = True,
                   applied=None) -> ChainTrajectory:
    """Integrate a chain trajectory with fixed-step RK4.

    ``form="state"`` advances (q, qd) with the mass-matrix forward
    dynamics; ``form="momentum"`` advances (q, stacked spatial momenta)
    with the phase-space right-hand side.  ``torque`` is an optional
    callable (t, q, qd) -> generalized forces.  A non-finite state aborts
    with the last valid samples kept.
    """
    if form not in ("state", "momentum"):
        raise ValueError("form must be 'state' or 'momentum'")
    n = model.n
    q0 = np.asarray(q0, dtype=float).reshape(n)
    qd0 = np.asarray(qd0, dtype=float).reshape(n)

    def tau_at(t, q, qd):
        if torque is None:
            return np.zeros(n)
        return np.asarray(torque(t, q, qd), dtype=float).reshape(n)

    steps = int(round(T / h))
    times = np.linspace(0.0, steps * h, steps + 1)
    qs = np.zeros((steps + 1, n))
    qds = np.zeros((steps + 1, n))
    qdds = np.zeros((steps + 1, n))
    reports: list[StepReport] = []

    def make_report(t, q, qd):
        energy = dyn.kinetic_energy(model, q, qd)
        if gravity:
            energy += dyn.gravity_potential(model, q)
        pis = dyn.spatial_momenta(model, q, qd)
        poses = fk(model, q)
        drift = max(float(np.linalg.norm(p.rot.T @ p.rot - np.eye(3))) for p in poses)
        return StepReport(t, energy, pis.sum(axis=0), drift)

    if form == "state":
        def f(t, y):
            q, qd = y[:n], y[n:]
            qdd = dyn.fdyn(model, q, qd, tau_at(t, q, qd), applied=applied,
                           gravity=gravity)
            return np.concatenate([qd, qdd])

        y = np.concatenate([q0, qd0])
        qs[0], qds[0] = q0, qd0
        reports.append(make_report(0.0, q0, qd0))
        for k in range(steps):
            try:
                f1 = f(times[k], y)
                qdds[k] = f1[n:]
                y = _rk4(f, times[k], y, h, k1=f1)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError):
                return _truncate(times, qs, qds, qdds, reports, k, form)
            if not np.all(np.isfinite(y)):
                return _truncate(times, qs, qds, qdds, reports, k, form)
            qs[k + 1], qds[k + 1] = y[:n], y[n:]
            reports.append(make_report(times[k + 1], y[:n], y[n:]))
        qdds[steps] = f(times[steps], y)[n:]
    else:
        def f(t, y):
            q, pis = y[:n], y[n:]
            pidot, qd = dyn.momentum_rhs(
                model, q, pis, tau=lambda qd_: tau_at(t, q, qd_),
                applied=applied, gravity=gravity)
            return np.concatenate([qd, pidot.reshape(-1)])

        pis0 = dyn.spatial_momenta(model, q0, qd0).reshape(-1)
        y = np.concatenate([q0, pis0])
        qs[0], qds[0] = q0, qd0
        qdds[0] = dyn.fdyn(model, q0, qd0, tau_at(0.0, q0, qd0), applied=applied,
                           gravity=gravity)
        reports.append(make_report(0.0, q0, qd0))
        for k in range(steps):
            try:
                y = _rk4(f, times[k], y, h)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError):
                return _truncate(times, qs, qds, qdds, reports, k, form)
            if not np.all(np.isfinite(y)):
                return _truncate(times, qs, qds, qdds, reports, k, form)
            q, pis = y[:n], y[n:]
            _, qd = dyn.momentum_rhs(model, q, pis, gravity=gravity, applied=applied)
            qs[k + 1], qds[k + 1] = q, qd
            qdds[k + 1] = dyn.fdyn(model, q, qd, tau_at(times[k + 1], q, qd),
                                   applied=applied, gravity=gravity)
            reports.append(make_report(times[k + 1], q, qd))
    return ChainTrajectory(times, qs, qds, qdds, reports, form)


def _truncate(times, qs, qds, qdds, reports, k, form):
    return ChainTrajectory(times[:k + 1], qs[:k + 1], qds[:k + 1], qdds[:k + 1],
                           reports, form)
