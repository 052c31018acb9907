import numpy as np
import pytest
from scipy.special import ellipk

from screwchain import se3
from screwchain.integrators import (
    RigidBodyState, chain_simulate, free_body_simulate, mk_step,
)
from screwchain.model import BodyModel, ChainModel, JointModel
from screwchain.se3 import Pose, adjoint, exp_se3, log_se3, screw

from conftest import random_chain


def pendulum_model(mass=1.3, length=0.8, izz=0.02, g=9.80665):
    bodies = [BodyModel(mass, [length, 0, 0],
                        np.diag([0.7 * izz + 1e-4, 0.7 * izz + 1e-4, izz]))]
    joints = [JointModel("revolute", axis=[0, 0, 1], point=[0, 0, 0])]
    return ChainModel(bodies, joints, [-1], gravity=(0.0, -g, 0.0)), \
        dict(mass=mass, length=length, izz=izz, g=g)


# ------------------------------------------------------------------ mk_step

def test_mk_step_exact_on_constant_twists(rng):
    worst = 0.0
    for _ in range(20):
        v = rng.normal(size=6)
        pose = Pose(se3.exp_so3(rng.normal(size=3) * 0.6), rng.normal(size=3))
        for h in (0.1, 0.05, 0.02, 0.003):
            out = mk_step(RigidBodyState(pose, v, "body"), lambda t, p: v, h)
            exact = pose @ exp_se3(h * v)
            worst = max(worst, np.abs(out.pose.matrix() - exact.matrix()).max())
            out = mk_step(RigidBodyState(pose, v, "spatial"), lambda t, p: v, h)
            exact = exp_se3(h * v) @ pose
            worst = max(worst, np.abs(out.pose.matrix() - exact.matrix()).max())
    assert worst < 1e-13


def test_mk_step_zero_field_is_identity(rng):
    pose = Pose(se3.exp_so3(rng.normal(size=3)), rng.normal(size=3))
    out = mk_step(RigidBodyState(pose, np.zeros(6), "body"),
                  lambda t, p: np.zeros(6), 0.05)
    assert np.array_equal(out.pose.matrix(), pose.matrix())


def _integrate_field(h, T, rep):
    def field(t, pose):
        return np.array([0.8 * np.sin(2.1 * t), 1.1 * np.cos(1.3 * t), 0.5,
                         0.9 * np.sin(t), -0.6, 0.7 * np.cos(3.0 * t)])

    state = RigidBodyState(Pose.identity(), field(0.0, None), rep)
    steps = int(round(T / h))
    for k in range(steps):
        state = mk_step(state, field, h, t=k * h)
    return state.pose


@pytest.mark.parametrize("rep", ["body", "spatial"])
def test_mk_step_fourth_order_convergence(rep):
    ref = _integrate_field(1.0 / 2048, 1.0, rep)
    errs = []
    for h in (1.0 / 8, 1.0 / 16, 1.0 / 32):
        pose = _integrate_field(h, 1.0, rep)
        errs.append(np.linalg.norm(log_se3(ref.inverse() @ pose)))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    for order in orders:
        assert abs(order - 4.0) < 0.1


def test_mk_step_pose_stays_orthonormal(rng):
    def field(t, pose):
        return np.array([0.9, -0.4, 0.7, 0.2, 0.1, -0.3])

    state = RigidBodyState(Pose.identity(), field(0, None), "body")
    for k in range(2000):
        state = mk_step(state, field, 5e-3, t=k * 5e-3)
    drift = np.linalg.norm(state.pose.rot.T @ state.pose.rot - np.eye(3))
    assert drift < 1e-10


# ---------------------------------------------------------------- free body

def test_free_body_principal_spin_is_uniform(rng):
    body = BodyModel(1.0, [0, 0, 0], np.diag([0.2, 0.3, 0.5]))
    w = np.array([0.0, 0.0, 1.4])
    init = RigidBodyState(Pose.identity(), screw(w, np.zeros(3)), "body")
    traj = free_body_simulate(body, init, T=2.0, h=1e-3)
    for idx in (500, 1500, 2000):
        vb = np.linalg.solve(adjoint(traj.poses[idx]), traj.twists_spatial[idx])
        assert np.allclose(vb[:3], w, atol=1e-12)


def test_free_body_symmetric_top_matches_analytic():
    theta_t, theta_a = 0.4, 0.7
    body = BodyModel(1.5, [0, 0, 0], np.diag([theta_t, theta_t, theta_a]))
    w0 = np.array([0.6, 0.0, 1.2])
    init = RigidBodyState(Pose.identity(), screw(w0, np.zeros(3)), "body")
    traj = free_body_simulate(body, init, T=10.0, h=1e-3)
    lam = (theta_a / theta_t - 1.0) * w0[2]
    worst = 0.0
    for idx in range(0, len(traj.times), 250):
        t = traj.times[idx]
        vb = np.linalg.solve(adjoint(traj.poses[idx]), traj.twists_spatial[idx])
        expect = np.array([w0[0] * np.cos(lam * t) - w0[1] * np.sin(lam * t),
                           w0[0] * np.sin(lam * t) + w0[1] * np.cos(lam * t),
                           w0[2]])
        worst = max(worst, np.abs(vb[:3] - expect).max())
    assert worst < 1e-6


def test_free_body_conserves_spatial_momentum_and_energy(rng):
    body = BodyModel(2.0, [0.1, -0.05, 0.2], np.diag([0.4, 0.5, 0.3]))
    init = RigidBodyState(Pose(se3.exp_so3([0.3, 0.1, -0.2]), [1.0, 0.5, -0.3]),
                          rng.normal(size=6), "spatial")
    traj = free_body_simulate(body, init, T=3.0, h=1e-3)
    pi0 = traj.reports[0].momentum_spatial
    e0 = traj.reports[0].energy
    for rep in traj.reports:
        assert np.linalg.norm(rep.momentum_spatial - pi0) <= 1e-12
        assert abs(rep.energy - e0) < 1e-9
        assert rep.constraint_drift < 1e-10


# -------------------------------------------------------------------- chain

def test_chain_equilibrium_is_stationary():
    model, _ = pendulum_model()
    traj = chain_simulate(model, [-np.pi / 2], [0.0], T=0.5, h=1e-3)
    assert np.abs(traj.q + np.pi / 2).max() < 1e-12
    assert np.abs(traj.qd).max() < 1e-12


def test_chain_energy_drift_unforced(rng):
    model = random_chain(rng, 3, gravity=(0, 0, 0))
    q0, qd0 = rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.5
    traj = chain_simulate(model, q0, qd0, T=1.0, h=1e-3, gravity=False)
    e0 = traj.reports[0].energy
    assert max(abs(r.energy - e0) for r in traj.reports) <= 1e-8


def test_chain_fourth_order_convergence(rng):
    model = random_chain(rng, 2, kinds=("revolute",))
    q0, qd0 = np.array([0.4, -0.3]), np.array([2.0, -1.5])

    def endpoint(h):
        return chain_simulate(model, q0, qd0, T=1.0, h=h).q[-1]

    ref = endpoint(1.0 / 2048)
    errs = [np.linalg.norm(endpoint(h) - ref) for h in (1 / 16, 1 / 32, 1 / 64)]
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    for order in orders:
        assert abs(order - 4.0) < 0.1


def test_pendulum_period_matches_elliptic_integral():
    model, p = pendulum_model()
    amplitude = 0.8
    i_tot = p["izz"] + p["mass"] * p["length"] ** 2
    w0sq = p["mass"] * p["g"] * p["length"] / i_tot
    period = 4.0 / np.sqrt(w0sq) * ellipk(np.sin(amplitude / 2) ** 2)
    traj = chain_simulate(model, [-np.pi / 2 + amplitude], [0.0],
                          T=1.15 * period, h=1e-3)
    crossings = _qd_zero_crossings(traj)
    measured = 2.0 * (crossings[1] - crossings[0])
    assert abs(measured - period) / period < 1e-5


def _qd_zero_crossings(traj):
    """Zero crossings of the first joint rate, cubic-Hermite refined."""
    t, qd, qdd = traj.times, traj.qd[:, 0], traj.qdd[:, 0]
    out = []
    for k in range(1, len(t)):
        if qd[k - 1] == 0.0 or qd[k - 1] * qd[k] > 0.0:
            continue
        h = t[k] - t[k - 1]
        s = qd[k - 1] / (qd[k - 1] - qd[k])
        for _ in range(30):
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            val = (h00 * qd[k - 1] + h10 * h * qdd[k - 1]
                   + h01 * qd[k] + h11 * h * qdd[k])
            dval = ((6 * s**2 - 6 * s) * qd[k - 1]
                    + (3 * s**2 - 4 * s + 1) * h * qdd[k - 1]
                    + (-6 * s**2 + 6 * s) * qd[k]
                    + (3 * s**2 - 2 * s) * h * qdd[k])
            step = val / dval
            s -= step
            if abs(step) < 1e-15:
                break
        out.append(t[k - 1] + s * h)
    return out


def test_state_and_momentum_forms_agree(rng):
    model = random_chain(rng, 3)
    q0, qd0 = rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.5
    a = chain_simulate(model, q0, qd0, T=1.0, h=1e-3)
    b = chain_simulate(model, q0, qd0, T=1.0, h=1e-3, form="momentum")
    assert np.abs(a.q - b.q).max() < 1e-6
    assert np.abs(a.qd - b.qd).max() < 1e-6


def test_momentum_form_reports_consistent_momenta(rng):
    # the reported total spatial momentum matches the one recomputed from
    # the stored (q, qd) samples (the chain trades momentum with the
    # ground through the base joint, so it need not be constant)
    from screwchain.dynamics import spatial_momenta

    model = random_chain(rng, 2, gravity=(0, 0, 0))
    q0, qd0 = rng.normal(size=2) * 0.4, rng.normal(size=2) * 0.4
    traj = chain_simulate(model, q0, qd0, T=0.2, h=1e-3, gravity=False,
                          form="momentum")
    for k in range(0, len(traj.times), 50):
        expect = spatial_momenta(model, traj.q[k], traj.qd[k]).sum(axis=0)
        assert np.allclose(traj.reports[k].momentum_spatial, expect, atol=1e-9)


@pytest.mark.filterwarnings("ignore:overflow|invalid value:RuntimeWarning")
def test_chain_simulate_aborts_on_blow_up(rng):
    model, _ = pendulum_model()

    def exploding_torque(t, q, qd):
        return np.array([1e308])

    traj = chain_simulate(model, [0.1], [0.0], torque=exploding_torque,
                          T=0.5, h=1e-3)
    assert traj.times[-1] < 0.5  # truncated at the last valid step
    assert np.all(np.isfinite(traj.q))


def test_chain_simulate_rejects_bad_form():
    model, _ = pendulum_model()
    with pytest.raises(ValueError):
        chain_simulate(model, [0.0], [0.0], form="verlet")
