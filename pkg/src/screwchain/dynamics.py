"""Newton-Euler dynamics: per-body wrench balances in every representation,
recursive inverse dynamics with operation counting, closed-form equations of
motion (mass matrix, Coriolis matrix, Christoffel symbols), forward dynamics,
and the spatial-momentum phase-space form.

Sign conventions: ``idyn`` returns the generalized joint forces required to
realize the given motion, with gravity and user wrenches entering as external
loads (so a static chain under gravity needs positive holding torques equal
to the potential-energy gradient).  ``fdyn`` inverts that relation, so
``idyn(q, qd, fdyn(q, qd, tau)) == tau``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import ChainModel, SpatialInertia
from .kinematics import JointState, Twist, _check_rep, fk_body_form, jacobian
from .se3 import (
    Pose,
    ad_matrix,
    adjoint,
    adjoint_rot,
    adjoint_trans,
    lie_bracket,
    screw,
)

__all__ = [
    "OpCountReport",
    "IdynResult",
    "ne_wrench",
    "ne_wrench_arbitrary",
    "convert_wrench",
    "gravity_wrenches",
    "spatial_inertia_of",
    "idyn",
    "mass_matrix",
    "coriolis_matrix",
    "christoffel",
    "projection_eom",
    "fdyn",
    "momentum_rhs",
    "predict_op_counts",
    "kinetic_energy",
    "gravity_potential",
    "spatial_momenta",
]


@dataclass
class OpCountReport:
    """Structural operation counts of one inverse-dynamics evaluation."""

    rep: str = ""
    n: int = 0
    frame_transforms_screw: int = 0
    frame_transforms_tensor: int = 0
    lie_brackets: int = 0
    rotations_screw: int = 0
    translations_screw: int = 0


class _Counter:
    """Per-invocation counter wrapped around the algebra kernels.

    A fresh instance lives inside each idyn call (no shared state); the
    counted quantities are screw frame transformations (with the
    rotation/translation split the hybrid recursion cares about), inertia
    tensor congruences, and Lie brackets including their duals.
    """

    __slots__ = ("report",)

    def __init__(self, rep, n):
        self.report = OpCountReport(rep=rep, n=n)

    def xform(self, mat, s, kind="screw"):
        self.report.frame_transforms_screw += 1
        if kind == "rot":
            self.report.rotations_screw += 1
        elif kind == "trans":
            self.report.translations_screw += 1
        return mat @ s

    def tensor(self, a_inv, m):
        self.report.frame_transforms_tensor += 1
        return a_inv.T @ m @ a_inv

    def bracket(self, x, y):
        self.report.lie_brackets += 1
        return lie_bracket(x, y)

    def cobracket(self, x, p):
        self.report.lie_brackets += 1
        return ad_matrix(x).T @ p


def predict_op_counts(rep: str, n: int) -> OpCountReport:
    """Structural operation counts of the serial-chain inverse dynamics
    sweep: body 3(n-1) screw transforms and 2n-1 brackets; spatial n screw
    plus n tensor transforms and 2n-1 brackets; hybrid 3n-3 translational
    plus n rotational screw transforms, n tensor rotations, 3n-1 brackets.
    """
    _check_rep(rep, ("body", "spatial", "hybrid"))
    r = OpCountReport(rep=rep, n=n)
    if rep == "body":
        r.frame_transforms_screw = 3 * (n - 1)
        r.lie_brackets = 2 * n - 1
    elif rep == "spatial":
        r.frame_transforms_screw = n
        r.frame_transforms_tensor = n
        r.lie_brackets = 2 * n - 1
    else:
        r.translations_screw = 3 * n - 3
        r.rotations_screw = n
        r.frame_transforms_screw = 4 * n - 3
        r.frame_transforms_tensor = n
        r.lie_brackets = 3 * n - 1
    return r


# --------------------------------------------------------------------------
# Per-body Newton-Euler wrench
# --------------------------------------------------------------------------

def _inertia_matrix(inertia, rep):
    if isinstance(inertia, SpatialInertia):
        if inertia.rep != rep:
            raise ValueError(
                f"inertia is tagged {inertia.rep!r} but the call uses {rep!r}")
        return inertia.matrix
    return np.asarray(inertia, dtype=float)


def _twist_vec(v, rep):
    if isinstance(v, Twist):
        if v.rep != rep:
            raise ValueError(f"twist is tagged {v.rep!r} but the call uses {rep!r}")
        return v.s
    return np.asarray(v, dtype=float)


def ne_wrench(v, vdot, inertia, rep: str = "body", com_frame: bool = False) -> np.ndarray:
    """Resultant wrench on one rigid body from its twist and acceleration.

    Body and spatial share the momentum-balance form M Vdot - ad^T_V M V;
    the hybrid form is M Vdot + ad_omega M (omega, 0).  ``com_frame``
    selects the decoupled component equations valid when the frame sits
    at the COM (identical results, fewer operations).
    """
    _check_rep(rep, ("body", "spatial", "hybrid"))
    m = _inertia_matrix(inertia, rep)
    v = _twist_vec(v, rep)
    vdot = np.asarray(vdot, dtype=float)
    if rep in ("body", "spatial"):
        if com_frame and rep == "body":
            theta = m[:3, :3]
            mass = m[5, 5]
            om, vel = v[:3], v[3:]
            return screw(theta @ vdot[:3] + np.cross(om, theta @ om),
                         mass * (vdot[3:] + np.cross(om, vel)))
        return m @ vdot - ad_matrix(v).T @ (m @ v)
    if com_frame:
        theta = m[:3, :3]
        mass = m[5, 5]
        om = v[:3]
        return screw(theta @ vdot[:3] + np.cross(om, theta @ om),
                     mass * vdot[3:])
    om = v[:3]
    p = m @ screw(om, np.zeros(3))
    return m @ vdot + screw(np.cross(om, p[:3]), np.cross(om, p[3:]))


def convert_wrench(w, from_rep: str, to_rep: str, pose: Pose) -> np.ndarray:
    """Exact change of wrench representation for a body at the given pose."""
    _check_rep(from_rep, ("body", "spatial", "hybrid"))
    _check_rep(to_rep, ("body", "spatial", "hybrid"))
    w = np.asarray(w, dtype=float)
    if from_rep == to_rep:
        return w.copy()
    if from_rep == "body":
        wh = adjoint_rot(pose.rot) @ w
    elif from_rep == "spatial":
        wh = adjoint_trans(pose.trans).T @ w
    else:
        wh = w
    if to_rep == "hybrid":
        return wh
    if to_rep == "body":
        return adjoint_rot(pose.rot.T) @ wh
    return adjoint_trans(-pose.trans).T @ wh  # to spatial


def gravity_wrenches(model: ChainModel, poses, rep: str) -> np.ndarray:
    """Per-body gravity wrench in the requested representation.

    Authored in hybrid form (force m g at the COM, moved to the body
    origin) and converted, which keeps the recursions representation-
    agnostic instead of using a fictitious base acceleration.
    """
    _check_rep(rep, ("body", "spatial", "hybrid"))
    g = model.gravity
    out = np.zeros((model.n, 6))
    for i in range(model.n):
        f = model.bodies[i].mass * g
        d_world = poses[i].rot @ model.bodies[i].com_offset
        wh = screw(np.cross(d_world, f), f)
        out[i] = wh if rep == "hybrid" else convert_wrench(wh, "hybrid", rep, poses[i])
    return out


def spatial_inertia_of(model: ChainModel, poses, i: int) -> np.ndarray:
    """Inertial-frame 6x6 inertia of body i at the given pose."""
    ad_inv = adjoint(poses[i].inverse())
    return ad_inv.T @ model.inertia_body(i) @ ad_inv


def ne_wrench_arbitrary(model: ChainModel, state: JointState, i: int,
                        j: int | None = None, k: int | None = None) -> np.ndarray:
    """NE wrench of body i measured at the origin of frame j and resolved
    in frame k (``None`` selects the inertial frame).

    ``i == j == k`` reproduces the body-fixed wrench, ``j == i`` with
    ``k = None`` the hybrid one, ``j = k = None`` the spatial one.
    """
    from .kinematics import accelerations

    cache = accelerations(model, state, "spatial")
    poses = cache.poses
    vs, vsd = cache.twists, cache.accels

    def pose_of(m):
        return Pose.identity() if m is None else poses[m]

    def spatial_twist_of(m):
        return np.zeros(6) if m is None else vs[m]

    cj = pose_of(j)
    adj_inv = adjoint(cj.inverse())
    vj_i = adj_inv @ vs[i]
    vjd_i = adj_inv @ (vsd[i] - lie_bracket(spatial_twist_of(j), vs[i]))
    vj_j = adj_inv @ spatial_twist_of(j)
    vj_k = adj_inv @ spatial_twist_of(k)
    mj_i = adjoint(cj).T @ spatial_inertia_of(model, poses, i) @ adjoint(cj)

    r_kj = pose_of(k).rot.T @ cj.rot
    ad_r = adjoint_rot(r_kj)
    vk_i = ad_r @ vj_i
    vk_j = ad_r @ vj_j
    vkd_i = ad_r @ (vjd_i - lie_bracket(screw(vj_k[:3], np.zeros(3)), vj_i))
    omega_k = ad_r @ screw(vj_k[:3], np.zeros(3))
    mk_i = ad_r @ mj_i @ ad_r.T  # congruence with the inverse coordinate map

    w = mk_i @ (vkd_i + (ad_matrix(vk_j) + ad_matrix(omega_k)) @ vk_i)
    return w - ad_matrix(vk_i).T @ (mk_i @ vk_i)


def wrench_to_spatial(w, j: int | None, k: int | None, poses) -> np.ndarray:
    """Map a wrench measured at frame j, resolved in frame k, back to the
    spatial representation (inverse transport of ne_wrench_arbitrary)."""
    cj = Pose.identity() if j is None else poses[j]
    ck = Pose.identity() if k is None else poses[k]
    r_kj = ck.rot.T @ cj.rot
    wj = adjoint_rot(r_kj).T @ np.asarray(w, dtype=float)
    return np.linalg.solve(adjoint(cj).T, wj)


# --------------------------------------------------------------------------
# Recursive inverse dynamics in three representations
# --------------------------------------------------------------------------

@dataclass
class IdynResult:
    Q: np.ndarray
    wrenches: np.ndarray
    report: OpCountReport
    rep: str


def idyn(model: ChainModel, q, qd, qdd, rep: str = "body", applied=None,
         gravity: bool = True, full: bool = False):
    """Inverse dynamics: generalized forces realizing the given motion.

    ``applied`` is an optional (n, 6) array of external wrenches per body
    in the same representation as ``rep``; gravity enters as a per-body
    wrench unless disabled.  ``rep == "mixed"`` routes the evaluation
    through the hybrid recursion (a mixed wrench pairs a body-fixed
    torque with an inertial force, which has no native recursion).

    With ``full=True`` an :class:`IdynResult` carrying the transmitted
    joint wrenches and the operation-count report is returned instead.
    """
    _check_rep(rep)
    work_rep = "hybrid" if rep == "mixed" else rep
    n = model.n
    q = np.asarray(q, dtype=float).reshape(n)
    qd = np.asarray(qd, dtype=float).reshape(n)
    qdd = np.asarray(qdd, dtype=float).reshape(n)
    cnt = _Counter(work_rep, n)

    poses, rels = fk_body_form(model, q)
    V = np.zeros((n, 6))
    Vd = np.zeros((n, 6))
    W = np.zeros((n, 6))
    Q = np.zeros(n)

    ext = np.zeros((n, 6))
    if gravity:
        ext += gravity_wrenches(model, poses, work_rep)
    if applied is not None:
        applied = np.asarray(applied, dtype=float).reshape(n, 6)
        if rep == "mixed":
            for i in range(n):
                wa = applied[i].copy()
                wa[:3] = poses[i].rot @ wa[:3]  # mixed torque part is body-fixed
                ext[i] += wa
        else:
            ext += applied

    if work_rep == "body":
        ad_rel_inv = [adjoint(rels[i].inverse()) for i in range(n)]
        for i in range(n):
            p = model.parent[i]
            x = model.joints[i].screw_body
            if p < 0:
                V[i] = x * qd[i]
                Vd[i] = x * qdd[i]
            else:
                V[i] = cnt.xform(ad_rel_inv[i], V[p]) + x * qd[i]
                Vd[i] = (cnt.xform(ad_rel_inv[i], Vd[p])
                         - qd[i] * cnt.bracket(x, V[i]) + x * qdd[i])
        for i in range(n - 1, -1, -1):
            mb = model.inertia_body(i)
            W[i] += mb @ Vd[i] - cnt.cobracket(V[i], mb @ V[i]) - ext[i]
            Q[i] = model.joints[i].screw_body @ W[i]
            p = model.parent[i]
            if p >= 0:
                W[p] += cnt.xform(ad_rel_inv[i].T, W[i])
    elif work_rep == "spatial":
        js = np.zeros((n, 6))
        ms = [None] * n
        for i in range(n):
            p = model.parent[i]
            js[i] = cnt.xform(adjoint(poses[i]), model.joints[i].screw_body)
            if p < 0:
                V[i] = js[i] * qd[i]
                Vd[i] = js[i] * qdd[i]
            else:
                V[i] = V[p] + js[i] * qd[i]
                Vd[i] = Vd[p] + js[i] * qdd[i] + cnt.bracket(V[p], V[i])
        for i in range(n - 1, -1, -1):
            m_s = cnt.tensor(adjoint(poses[i].inverse()), model.inertia_body(i))
            W[i] += m_s @ Vd[i] - cnt.cobracket(V[i], m_s @ V[i]) - ext[i]
            Q[i] = js[i] @ W[i]
            p = model.parent[i]
            if p >= 0:
                W[p] += W[i]
    else:  # hybrid
        x0 = np.zeros((n, 6))
        for i in range(n):
            p = model.parent[i]
            x0[i] = cnt.xform(adjoint_rot(poses[i].rot),
                              model.joints[i].screw_body, kind="rot")
            if p < 0:
                V[i] = x0[i] * qd[i]
                om_i = screw(V[i][:3], np.zeros(3))
                Vd[i] = x0[i] * qdd[i] + cnt.bracket(om_i, x0[i]) * qd[i]
            else:
                ad_t = adjoint_trans(poses[p].trans - poses[i].trans)
                V[i] = cnt.xform(ad_t, V[p], kind="trans") + x0[i] * qd[i]
                om_i = screw(V[i][:3], np.zeros(3))
                rdot_rel = screw(np.zeros(3), V[p][3:] - V[i][3:])
                Vd[i] = (cnt.xform(ad_t, Vd[p], kind="trans")
                         + cnt.bracket(rdot_rel, V[p])
                         + cnt.bracket(om_i, x0[i]) * qd[i] + x0[i] * qdd[i])
        for i in range(n - 1, -1, -1):
            mh = cnt.tensor(adjoint_rot(poses[i].rot.T), model.inertia_body(i))
            om_i = screw(V[i][:3], np.zeros(3))
            W[i] += mh @ Vd[i] + cnt.bracket(om_i, mh @ om_i) - ext[i]
            Q[i] = x0[i] @ W[i]
            p = model.parent[i]
            if p >= 0:
                ad_t = adjoint_trans(poses[p].trans - poses[i].trans)
                W[p] += cnt.xform(ad_t.T, W[i], kind="trans")
    if full:
        return IdynResult(Q, W, cnt.report, work_rep)
    return Q


# --------------------------------------------------------------------------
# Closed-form equations of motion
# --------------------------------------------------------------------------

def _blockdiag_inertia(model: ChainModel) -> np.ndarray:
    n = model.n
    mb = np.zeros((6 * n, 6 * n))
    for i in range(n):
        mb[6 * i:6 * i + 6, 6 * i:6 * i + 6] = model.inertia_body(i)
    return mb


def mass_matrix(model: ChainModel, q) -> np.ndarray:
    """Generalized mass matrix (J^b)^T blockdiag(M^b) J^b (symmetrized
    against roundoff)."""
    sj = jacobian(model, q, "body")
    m = sj.J.T @ _blockdiag_inertia(model) @ sj.J
    return 0.5 * (m + m.T)


def coriolis_matrix(model: ChainModel, q, qd) -> np.ndarray:
    """Coriolis/centrifugal matrix -(J^b)^T (M A a + b^T M) J^b with
    a = blockdiag(qd_i ad_{X_i}) and b = blockdiag(ad_{V_i})."""
    n = model.n
    qd = np.asarray(qd, dtype=float).reshape(n)
    sj = jacobian(model, q, "body")
    from .kinematics import twists as _twists
    vb = _twists(model, q, qd, "body").twists
    mb = _blockdiag_inertia(model)
    a = np.zeros((6 * n, 6 * n))
    b = np.zeros((6 * n, 6 * n))
    for i in range(n):
        a[6 * i:6 * i + 6, 6 * i:6 * i + 6] = qd[i] * ad_matrix(model.joints[i].screw_body)
        b[6 * i:6 * i + 6, 6 * i:6 * i + 6] = ad_matrix(vb[i])
    return -sj.J.T @ (mb @ sj.A @ a + b.T @ mb) @ sj.J


def christoffel(model: ChainModel, q, variant: str = "standard") -> np.ndarray:
    """Christoffel symbols of the first kind, Gamma[i, j, k], symmetric in
    the last two indices.

    ``standard`` sums the three bracket quadratic forms of the body-fixed
    Jacobian columns against the body inertia matrices.  ``binet`` is an
    independent route: pulling the columns back to the COM collapses the
    rotational part to a single cross-product form against Binet's tensor
    (half trace minus the COM inertia tensor), leaving one pure-mass
    term.  Both agree with the half-sum of mass-matrix partials.
    """
    if variant not in ("standard", "binet"):
        raise ValueError("variant must be 'standard' or 'binet'")
    from .model import binet_inertia

    n = model.n
    sj = jacobian(model, q, "body")
    gamma = np.zeros((n, n, n))
    cols = [[sj.column(l, m) for m in range(n)] for l in range(n)]
    for l in range(n):
        path = model.path(l)
        if variant == "standard":
            m_l = model.inertia_body(l)
        else:
            body = model.bodies[l]
            binet_c = binet_inertia(body.inertia_com)
            mass = body.mass
            d = body.com_offset
        for i in path:
            ji = cols[l][i]
            if variant == "binet":
                ai, li = ji[:3], ji[3:] - np.cross(d, ji[:3])
            for a_idx, a in enumerate(path):
                ja = cols[l][a]
                for b in path[a_idx:]:
                    jb = cols[l][b]
                    if variant == "standard":
                        val = 0.5 * (jb @ m_l @ lie_bracket(ji, ja)
                                     + ja @ m_l @ lie_bracket(ji, jb)
                                     + ji @ m_l @ lie_bracket(ja, jb))
                    else:
                        aa = ja[:3]
                        ab = jb[:3]
                        lb = jb[3:] - np.cross(d, ab)
                        val = (aa @ binet_c @ np.cross(ab, ai)
                               + mass * (li @ np.cross(aa, lb)))
                    gamma[i, a, b] += val
                    if a != b:
                        gamma[i, b, a] += val
    return gamma


def projection_eom(model: ChainModel, q, qd, qdd, applied=None,
                   gravity: bool = True) -> np.ndarray:
    """Virtual-power projection residual (J^b)^T of the stacked per-body
    NE balances; zero at states consistent with the applied loads."""
    from .kinematics import accelerations

    n = model.n
    cache = accelerations(model, JointState(q, qd, qdd), "body")
    sj = jacobian(model, q, "body")
    ext = np.zeros((n, 6))
    if gravity:
        ext += gravity_wrenches(model, cache.poses, "body")
    if applied is not None:
        ext += np.asarray(applied, dtype=float).reshape(n, 6)
    stacked = np.zeros(6 * n)
    for i in range(n):
        mb = model.inertia_body(i)
        wi = (mb @ cache.accels[i]
              - ad_matrix(cache.twists[i]).T @ (mb @ cache.twists[i]) - ext[i])
        stacked[6 * i:6 * i + 6] = wi
    return sj.J.T @ stacked


def fdyn(model: ChainModel, q, qd, tau=None, applied=None,
         gravity: bool = True) -> np.ndarray:
    """Forward dynamics by the symmetric positive-definite mass-matrix
    solve; raises on factorization failure (invalid inertia data).

    ``applied`` takes per-body external wrenches in body representation.
    Everything is evaluated in one body-fixed sweep: Jacobian columns for
    the mass matrix, then the zero-acceleration bias recursion.
    """
    n = model.n
    tau = np.zeros(n) if tau is None else np.asarray(tau, dtype=float).reshape(n)
    qd = np.asarray(qd, dtype=float).reshape(n)
    poses, rels = fk_body_form(model, q)
    ad_rel_inv = [adjoint(rels[i].inverse()) for i in range(n)]

    m = np.zeros((n, n))
    cols = np.zeros((n, 6, n))
    for i in range(n):
        path = model.path(i)
        ci_inv = poses[i].inverse()
        for j in path:
            cols[i, :, j] = adjoint(ci_inv @ poses[j]) @ model.joints[j].screw_body
        mb = model.inertia_body(i)
        block = cols[i][:, path]
        m[np.ix_(path, path)] += block.T @ mb @ block
    m = 0.5 * (m + m.T)
    try:
        factor = cho_factor(m)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"mass matrix is not positive definite: {err}") from None

    ext = np.zeros((n, 6))
    if gravity:
        ext += gravity_wrenches(model, poses, "body")
    if applied is not None:
        ext += np.asarray(applied, dtype=float).reshape(n, 6)

    V = np.zeros((n, 6))
    Vd0 = np.zeros((n, 6))
    W = np.zeros((n, 6))
    bias = np.zeros(n)
    for i in range(n):
        p = model.parent[i]
        x = model.joints[i].screw_body
        if p < 0:
            V[i] = x * qd[i]
        else:
            V[i] = ad_rel_inv[i] @ V[p] + x * qd[i]
            Vd0[i] = ad_rel_inv[i] @ Vd0[p] - qd[i] * lie_bracket(x, V[i])
    for i in range(n - 1, -1, -1):
        mb = model.inertia_body(i)
        W[i] += mb @ Vd0[i] - ad_matrix(V[i]).T @ (mb @ V[i]) - ext[i]
        bias[i] = model.joints[i].screw_body @ W[i]
        p = model.parent[i]
        if p >= 0:
            W[p] += ad_rel_inv[i].T @ W[i]
    return cho_solve(factor, tau - bias)


def spatial_momenta(model: ChainModel, q, qd) -> np.ndarray:
    """Stacked per-body spatial momentum co-screws Pi_i = M^s_i V^s_i."""
    from .kinematics import twists as _twists

    cache = _twists(model, q, qd, "spatial")
    out = np.zeros((model.n, 6))
    for i in range(model.n):
        out[i] = spatial_inertia_of(model, cache.poses, i) @ cache.twists[i]
    return out


def momentum_rhs(model: ChainModel, q, pi_stack, tau=None, applied=None,
                 gravity: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Phase-space right-hand side: rates of the spatial momenta and the
    joint velocities recovered from them.

    The stacked relation M^s_i J^s_i qd = Pi_i is contracted with the
    spatial Jacobian into the SPD system M(q) qd = (J^s)^T Pi; each
    momentum rate is then the total spatial wrench on its body.  The
    whole evaluation runs in one spatial sweep (applied wrenches are
    taken in body representation, as in :func:`fdyn`).
    """
    n = model.n
    pi_stack = np.asarray(pi_stack, dtype=float).reshape(n, 6)
    poses, _ = fk_body_form(model, q)
    js = np.zeros((n, 6))
    ms = []
    for i in range(n):
        js[i] = adjoint(poses[i]) @ model.joints[i].screw_body
        ms.append(spatial_inertia_of(model, poses, i))

    # generalized mass from the spatial factors: M = sum_l J_l^T M_l J_l
    jstack = np.zeros((6 * n, n))
    for i in range(n):
        for j in model.path(i):
            jstack[6 * i:6 * i + 6, j] = js[j]
    m = np.zeros((n, n))
    for i in range(n):
        block = jstack[6 * i:6 * i + 6]
        m += block.T @ ms[i] @ block
    m = 0.5 * (m + m.T)
    try:
        factor = cho_factor(m)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"singular momentum solve: {err}") from None
    qd = cho_solve(factor, jstack.T @ pi_stack.reshape(-1))
    if tau is None:
        tau = np.zeros(n)
    elif callable(tau):
        tau = np.asarray(tau(qd), dtype=float).reshape(n)
    else:
        tau = np.asarray(tau, dtype=float).reshape(n)

    ext = np.zeros((n, 6))
    if gravity:
        ext += gravity_wrenches(model, poses, "spatial")
    if applied is not None:
        applied = np.asarray(applied, dtype=float).reshape(n, 6)
        for i in range(n):
            ext[i] += convert_wrench(applied[i], "body", "spatial", poses[i])

    # twists, zero-qdd bias sweep, then the actual accelerations
    V = np.zeros((n, 6))
    Vd0 = np.zeros((n, 6))
    for i in range(n):
        p = model.parent[i]
        if p < 0:
            V[i] = js[i] * qd[i]
        else:
            V[i] = V[p] + js[i] * qd[i]
            Vd0[i] = Vd0[p] + lie_bracket(V[p], V[i])
    bias = np.zeros(n)
    wacc = np.zeros((n, 6))
    for i in range(n - 1, -1, -1):
        wacc[i] += ms[i] @ Vd0[i] - ad_matrix(V[i]).T @ (ms[i] @ V[i]) - ext[i]
        bias[i] = js[i] @ wacc[i]
        p = model.parent[i]
        if p >= 0:
            wacc[p] += wacc[i]
    qdd = cho_solve(factor, tau - bias)

    pidot = np.zeros((n, 6))
    Vd = np.zeros((n, 6))
    for i in range(n):
        p = model.parent[i]
        Vd[i] = Vd0[i] + js[i] * qdd[i] + (Vd[p] - Vd0[p] if p >= 0 else 0.0)
        pidot[i] = ms[i] @ Vd[i] - ad_matrix(V[i]).T @ (ms[i] @ V[i])
    return pidot, qd


def kinetic_energy(model: ChainModel, q, qd) -> float:
    m = mass_matrix(model, q)
    qd = np.asarray(qd, dtype=float)
    return 0.5 * float(qd @ m @ qd)


def gravity_potential(model: ChainModel, q) -> float:
    """Potential energy -sum m_i g . r_com_i of the configuration."""
    from .kinematics import fk as _fk

    poses = _fk(model, q)
    u = 0.0
    for i in range(model.n):
        r_com = poses[i].apply(model.bodies[i].com_offset)
        u -= model.bodies[i].mass * float(model.gravity @ r_com)
    return u
