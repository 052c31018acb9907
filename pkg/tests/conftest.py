"""Shared builders for randomized chains and reference models."""

import numpy as np
import pytest

from screwchain import se3
from screwchain.model import BodyModel, ChainModel, JointModel, Pose


def rand_rotation(rng, max_angle=2.5):
    w = rng.normal(size=3)
    w *= rng.uniform(0.0, max_angle) / np.linalg.norm(w)
    return se3.exp_so3(w)


def rand_inertia(rng):
    # principal moments (a+b, b+c, c+a) always satisfy the triangle
    # inequality; rotate into a random frame
    a, b, c = rng.uniform(0.05, 1.0, size=3)
    r = rand_rotation(rng)
    return r @ np.diag([a + b, b + c, c + a]) @ r.T


def random_chain(rng, n, tree=False, kinds=("revolute", "prismatic", "helical"),
                 identity_ref=False, gravity=(0.0, 0.0, -9.80665)):
    bodies, joints, parents = [], [], []
    for i in range(n):
        parent = i - 1 if (not tree or i == 0) else int(rng.integers(-1, i))
        if identity_ref:
            ref = Pose.identity()
        else:
            ref = Pose(rand_rotation(rng), rng.normal(size=3) * 0.5)
        bodies.append(BodyModel(rng.uniform(0.5, 3.0), rng.normal(size=3) * 0.3,
                                rand_inertia(rng), ref))
        kind = kinds[int(rng.integers(0, len(kinds)))]
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        joints.append(JointModel(
            kind, axis=axis, point=rng.normal(size=3),
            pitch=float(rng.uniform(0.05, 0.4)) if kind == "helical" else 0.0,
            frame="spatial" if rng.random() < 0.5 else "body"))
        parents.append(parent)
    return ChainModel(bodies, joints, parents, gravity=gravity)


PLANAR_2R = dict(m1=1.1, m2=0.9, l1=1.0, lc1=0.55, lc2=0.45, I1=0.055, I2=0.031,
                 g=9.80665)


def planar_2r_model(g=PLANAR_2R["g"]):
    """The bundled planar 2R geometry built programmatically (joint-local
    authoring; the JSON sample uses the frames-on-IFR style — same physics)."""
    p = PLANAR_2R
    eps = 1e-3
    bodies = [
        BodyModel(p["m1"], [p["lc1"], 0, 0],
                  np.diag([0.6 * p["I1"] + eps, 0.6 * p["I1"] + eps, p["I1"]]),
                  Pose(np.eye(3), [0, 0, 0])),
        BodyModel(p["m2"], [p["lc2"], 0, 0],
                  np.diag([0.6 * p["I2"] + eps, 0.6 * p["I2"] + eps, p["I2"]]),
                  Pose(np.eye(3), [p["l1"], 0, 0])),
    ]
    joints = [
        JointModel("revolute", axis=[0, 0, 1], point=[0, 0, 0], frame="spatial"),
        JointModel("revolute", axis=[0, 0, 1], point=[p["l1"], 0, 0], frame="spatial"),
    ]
    return ChainModel(bodies, joints, [-1, 0], gravity=(0.0, -g, 0.0))


def planar_2r_lagrangian_torque(q, qd, qdd, g=PLANAR_2R["g"]):
    """Independent textbook closed form for the planar 2R arm, derived from
    the Lagrangian with absolute link angles q1, q1+q2 measured from +x and
    gravity along -y."""
    p = PLANAR_2R
    m1, m2, l1, lc1, lc2, i1, i2 = (p[k] for k in
                                    ("m1", "m2", "l1", "lc1", "lc2", "I1", "I2"))
    q1, q2 = q
    qd1, qd2 = qd
    qdd1, qdd2 = qdd
    c2, s2 = np.cos(q2), np.sin(q2)
    a11 = i1 + i2 + m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2)
    a12 = i2 + m2 * (lc2**2 + l1 * lc2 * c2)
    a22 = i2 + m2 * lc2**2
    hh = m2 * l1 * lc2 * s2
    g1 = (m1 * lc1 + m2 * l1) * g * np.cos(q1) + m2 * lc2 * g * np.cos(q1 + q2)
    g2 = m2 * lc2 * g * np.cos(q1 + q2)
    return np.array([
        a11 * qdd1 + a12 * qdd2 - hh * (2 * qd1 * qd2 + qd2**2) + g1,
        a12 * qdd1 + a22 * qdd2 + hh * qd1**2 + g2,
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
