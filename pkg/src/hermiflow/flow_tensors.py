"""Quadratic flow tensors, the evolution right-hand side, and the
verification operations for the variation, reduction and gauge identities.

All order-2 outputs are fully lowered bilinear forms on the frame; frame
sums over a repeated index are orthonormal-frame traces, realised by pairing
coordinate slots with the inverse metric.  ``TJ`` always means precomposition
of the first argument: (TJ)(X, Y) = T(JX, Y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame_tensor import (
    LOWER,
    UPPER,
    Tensor,
    frame_norm,
    lower_endo,
    raise_form,
)
from .lie_geometry import (
    AlmostHermitianPair,
    GeometryData,
    LieAlgebraSpec,
    compute_geometry,
    lie_derivative,
)

__all__ = [
    "FlowTensorSet",
    "VariationPair",
    "ReductionReport",
    "assemble",
    "flow_rhs",
    "check_variation",
    "check_reduction",
    "check_gauge",
    "rhs_matrices",
]


def _p11(h: np.ndarray, j: np.ndarray) -> np.ndarray:
    return 0.5 * (h + j.T @ h @ j)


def _p02(h: np.ndarray, j: np.ndarray) -> np.ndarray:
    return 0.5 * (h - j.T @ h @ j)


def _sym(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + h.T)


@dataclass(frozen=True)
class FlowTensorSet:
    """Every quadratic and curvature tensor entering the flow, evaluated at
    one almost Hermitian state.  Order-2 fields are lowered bilinear forms;
    ``theta_sharp`` is the vector dual of the Lee form."""

    b1: Tensor
    b2: Tensor
    b3: Tensor
    b4: Tensor
    b1_bar: Tensor
    b2_bar: Tensor
    q1: Tensor
    q2: Tensor
    n_script: Tensor
    r_script: Tensor
    q_script: Tensor
    b_script: Tensor
    theta_sharp: Tensor
    n_bar: Tensor
    k_script: Tensor
    torsion_h: Tensor
    d_omega_plus: Tensor
    delta_j_form: Tensor


@dataclass(frozen=True)
class VariationPair:
    """Candidate time derivatives (dg/dt, dJ/dt): a bilinear form and an
    endomorphism."""

    h: Tensor
    k: Tensor


def _quadratic_arrays(geo: GeometryData) -> dict[str, np.ndarray]:
    """The six Gram-type contractions of DJ against itself, plus the pieces
    of the right-hand side that derive from them."""
    pair = geo.pair
    g, gi, j = pair.g, pair.g_inv, pair.j
    dj_endo = geo.dj.dj.entries
    p = np.einsum("iay,az->iyz", dj_endo, g)  # <(D_i J) e_y, e_z>

    b1 = np.einsum("xum,yvn,uv,mn->xy", p, p, gi, gi)
    b2 = np.einsum("ixm,jyn,ij,mn->xy", p, p, gi, gi)
    b3 = np.einsum("ixm,pqy,iq,mp->xy", p, p, gi, gi)
    b4 = np.einsum("xim,jyn,ij,mn->xy", p, p, gi, gi)
    b1_bar = np.einsum("xum,ypn,pv,uv,mn->xy", p, p, j, gi, gi)
    b2_bar = np.einsum("ixm,pyn,pq,iq,mn->xy", p, p, j, gi, gi)

    q1 = (
        -0.5 * _p11(b1, j)
        - _p02(b3, j)
        + 4.0 * _sym(_p11(b4, j))
        - _p11(j.T @ b1_bar, j)
        - j.T @ b2_bar
    )
    q2 = j.T @ _p02(b3, j)
    n_script = j.T @ b2
    ric = geo.curv.ric.entries
    r_script = j.T @ ric + ric @ j
    delta_j_form = lower_endo(geo.dj.delta_j.entries, g)
    return {
        "b1": b1,
        "b2": b2,
        "b3": b3,
        "b4": b4,
        "b1_bar": b1_bar,
        "b2_bar": b2_bar,
        "q1": q1,
        "q2": q2,
        "n_script": n_script,
        "r_script": r_script,
        "q_script": j.T @ (b2 + b3),
        "delta_j_form": delta_j_form,
        "dj_low": p,
        "dj_endo": dj_endo,
    }


def _rhs_from_quadratics(geo: GeometryData, quad: dict[str, np.ndarray]):
    h = -2.0 * geo.curv.ric.entries + quad["q1"]
    k_form = quad["delta_j_form"] + quad["n_script"] + quad["r_script"] + quad["q2"]
    k_endo = raise_form(k_form, geo.pair.g_inv)
    return h, k_endo


def assemble(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    geo: GeometryData | None = None,
) -> FlowTensorSet:
    """Evaluate every flow tensor from its defining frame formula.  When a
    precomputed ``geo`` is supplied it must come from the same state."""
    if geo is None:
        geo = compute_geometry(pair, algebra)
    elif not geo.matches(pair, algebra):
        raise ValueError("geometry data was computed from a different state")
    g, gi, j = pair.g, pair.g_inv, pair.j
    quad = _quadratic_arrays(geo)
    p = quad["dj_low"]
    dj_endo = quad["dj_endo"]
    n_endo = geo.nijenhuis_endo.entries
    n_low = geo.nijenhuis_low.entries

    h3 = geo.omega.torsion_h.entries
    b_script = np.einsum("xij,yuv,iu,jv->xy", h3, h3, gi, gi)

    # Lee dual theta = -J (D_i J) e_i over an orthonormal frame
    w = np.einsum("iq,imq->m", gi, dj_endo)
    theta = -j @ w

    # three-slot bilinears of N against DJ
    t1a = np.einsum("iq,ipx,pqy->xy", gi, dj_endo, n_low)
    t1b = np.einsum("iq,ipx,ypq->xy", gi, dj_endo, n_low)
    t1c = np.einsum("iq,ipx,qyp->xy", gi, dj_endo, n_low)
    t2a = np.einsum("iq,xpi,qpy->xy", gi, dj_endo, n_low)
    t2b = np.einsum("iq,xpi,yqp->xy", gi, dj_endo, n_low)
    t2c = np.einsum("iq,xpi,pyq->xy", gi, dj_endo, n_low)
    t3 = np.einsum("iq,pxq,ipy->xy", gi, n_endo, p)
    n_bar = 0.5 * (t1a + t1b - t1c) - 0.5 * (t2a + t2b - t2c) - t3

    # K(X) = (D_i N)(J e_i, X) with N lowered before differentiation
    dn = _cov_arr_lll(n_low, geo.conn.gamma)
    k_script_form = np.einsum("iw,pw,ipxy->xy", gi, j, dn)

    dim = pair.dim
    ll = (LOWER, LOWER)

    def t2l(arr):
        return Tensor(dim, ll, arr)

    return FlowTensorSet(
        b1=t2l(quad["b1"]),
        b2=t2l(quad["b2"]),
        b3=t2l(quad["b3"]),
        b4=t2l(quad["b4"]),
        b1_bar=t2l(quad["b1_bar"]),
        b2_bar=t2l(quad["b2_bar"]),
        q1=t2l(quad["q1"]),
        q2=t2l(quad["q2"]),
        n_script=t2l(quad["n_script"]),
        r_script=t2l(quad["r_script"]),
        q_script=t2l(quad["q_script"]),
        b_script=t2l(b_script),
        theta_sharp=Tensor(dim, (UPPER,), theta),
        n_bar=t2l(n_bar),
        k_script=t2l(k_script_form),
        torsion_h=geo.omega.torsion_h,
        d_omega_plus=geo.omega.d_omega_plus,
        delta_j_form=t2l(quad["delta_j_form"]),
    )


def _cov_arr_lll(arr: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Covariant derivative of a fully lowered order-3 tensor."""
    out = -np.einsum("miu,mvz->iuvz", gamma, arr)
    out -= np.einsum("miv,umz->iuvz", gamma, arr)
    out -= np.einsum("miz,uvm->iuvz", gamma, arr)
    return out


def flow_rhs(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    geo: GeometryData | None = None,
) -> VariationPair:
    """The evolution right-hand side: dg/dt = -2 Ric + Q1 and
    dJ/dt = Laplacian(J) + quadratic and curvature corrections."""
    if geo is None:
        geo = compute_geometry(pair, algebra)
    elif not geo.matches(pair, algebra):
        raise ValueError("geometry data was computed from a different state")
    quad = _quadratic_arrays(geo)
    h, k_endo = _rhs_from_quadratics(geo, quad)
    dim = pair.dim
    return VariationPair(
        h=Tensor(dim, (LOWER, LOWER), h),
        k=Tensor(dim, (UPPER, LOWER), k_endo),
    )


def rhs_matrices(c: np.ndarray, g: np.ndarray, j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Array-level right-hand side used by the integrator backends: returns
    (dg/dt, dJ/dt) as plain matrices for raw (c, g, J) input.

    Runs no construction-time invariant gates, so it stays evaluable on
    states with integration drift or decaying metrics; validation is the
    caller's job.
    """
    g = 0.5 * (g + g.T)
    gi = np.linalg.inv(g)
    gamma_low = 0.5 * (
        np.einsum("mij,ml->ijl", c, g)
        - np.einsum("mjl,mi->ijl", c, g)
        + np.einsum("mli,mj->ijl", c, g)
    )
    gamma = np.einsum("ijl,lk->kij", gamma_low, gi)

    rm_up = (
        np.einsum("lim,mjk->lijk", gamma, gamma)
        - np.einsum("ljm,mik->lijk", gamma, gamma)
        - np.einsum("mij,lmk->lijk", c, gamma)
    )
    ric = np.einsum("iiab->ab", rm_up)

    dj = np.einsum("aim,mb->iab", gamma, j) - np.einsum("am,mib->iab", j, gamma)
    d2j = (
        -np.einsum("mxy,mab->xyab", gamma, dj)
        + np.einsum("axm,ymb->xyab", gamma, dj)
        - np.einsum("mxb,yam->xyab", gamma, dj)
    )
    delta_j = np.einsum("ij,ijab->ab", gi, d2j)
    p = np.einsum("iay,az->iyz", dj, g)

    b1 = np.einsum("xum,yvn,uv,mn->xy", p, p, gi, gi)
    b2 = np.einsum("ixm,jyn,ij,mn->xy", p, p, gi, gi)
    b3 = np.einsum("ixm,pqy,iq,mp->xy", p, p, gi, gi)
    b4 = np.einsum("xim,jyn,ij,mn->xy", p, p, gi, gi)
    b1_bar = np.einsum("xum,ypn,pv,uv,mn->xy", p, p, j, gi, gi)
    b2_bar = np.einsum("ixm,pyn,pq,iq,mn->xy", p, p, j, gi, gi)

    q1 = (
        -0.5 * _p11(b1, j)
        - _p02(b3, j)
        + 4.0 * _sym(_p11(b4, j))
        - _p11(j.T @ b1_bar, j)
        - j.T @ b2_bar
    )
    q2 = j.T @ _p02(b3, j)
    n_script = j.T @ b2
    r_script = j.T @ ric + ric @ j

    h = -2.0 * ric + q1
    k_form = lower_endo(delta_j, g) + n_script + r_script + q2
    return h, raise_form(k_form, gi)


def check_variation(pair: AlmostHermitianPair, v: VariationPair) -> tuple[float, float, float]:
    """Residuals of the three necessary conditions a variation of an almost
    Hermitian pair must satisfy: h symmetric, K anti-invariant under J, and
    the symmetric part of K tied to the anti-invariant part of h."""
    g, gi, j = pair.g, pair.g_inv, pair.j
    metric = pair.metric
    h = v.h.entries
    k_form = lower_endo(v.k.entries, g)
    dim = pair.dim
    ll = (LOWER, LOWER)
    r1 = frame_norm(Tensor(dim, ll, h - h.T), metric)
    r2 = frame_norm(Tensor(dim, ll, _p11(k_form, j)), metric)
    r3 = frame_norm(Tensor(dim, ll, j.T @ _sym(k_form) - _p02(h, j)), metric)
    return r1, r2, r3


@dataclass(frozen=True)
class ReductionReport:
    """Which special-geometry branch applies at tolerance, with the branch
    residuals.  A state satisfying neither hypothesis is a valid outcome."""

    norm_d_omega: float
    norm_nijenhuis: float
    tol: float
    closed: dict[str, float] | None
    integrable: dict[str, float] | None

    @property
    def any_applies(self) -> bool:
        return self.closed is not None or self.integrable is not None

    def worst(self) -> float:
        residuals = []
        for branch in (self.closed, self.integrable):
            if branch:
                residuals.extend(branch.values())
        return max(residuals) if residuals else 0.0


def _seven_term_q(geo: GeometryData) -> np.ndarray:
    """Alternative seven-term contraction formula for the gauge correction;
    agrees with Q = B2 J + B3 J exactly when J is integrable."""
    pair = geo.pair
    g, gi, j = pair.g, pair.g_inv, pair.j
    d = geo.dj.dj.entries  # d[i, a, b] = component a of (D_i J) e_b
    w = np.einsum("iq,imq->m", gi, d)  # (D_i J) e_i over the frame
    v = j @ w
    t1 = -np.einsum("iq,iap,kx,kpq->ax", gi, d, j, d)
    t2 = -np.einsum("iq,ipx,ab,pbq->ax", gi, d, j, d)
    t3 = np.einsum("iq,iap,kq,kpx->ax", gi, d, j, d)
    t4 = -np.einsum("p,pax->ax", v, d)
    t5 = np.einsum("ab,m,mbx->ax", j, w, d)
    t6 = np.einsum("qx,qam,m->ax", j, d, w)
    t7 = -np.einsum("ab,xbm,m->ax", j, d, w)
    return lower_endo(t1 + t2 + t3 + t4 + t5 + t6 + t7, g)


def check_reduction(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    tol: float = 1e-10,
    geo: GeometryData | None = None,
) -> ReductionReport:
    """Evaluate the special-case simplifications of the flow tensors under a
    closed fundamental form or an integrable J, whichever hypothesis holds at
    tolerance."""
    if geo is None:
        geo = compute_geometry(pair, algebra)
    metric = pair.metric
    tensors = assemble(pair, algebra, geo)
    norm_dw = frame_norm(geo.omega.d_omega, metric)
    norm_n = frame_norm(geo.nijenhuis_low, metric)

    def nrm(t: Tensor) -> float:
        return frame_norm(t, metric)

    closed = None
    if norm_dw <= tol:
        closed = {
            "q1_matches_half_b1_minus_b2": nrm(
                tensors.q1 - (0.5 * tensors.b1 - tensors.b2)
            ),
            "q2_vanishes": nrm(tensors.q2),
            "b4_matches_half_b1": nrm(tensors.b4 - 0.5 * tensors.b1),
            "b1_is_j_invariant": float(
                np.max(np.abs(_p02(tensors.b1.entries, pair.j)))
            ),
            "b3_is_j_invariant": float(
                np.max(np.abs(_p02(tensors.b3.entries, pair.j)))
            ),
        }

    integrable = None
    if norm_n <= tol:
        half_b = 0.5 * tensors.b1 + tensors.b2 - tensors.b3
        q7 = _seven_term_q(geo)
        integrable = {
            "q1_matches_half_b_script": nrm(tensors.q1 - 0.5 * tensors.b_script),
            "q2_matches_q_script_minus_n_script": nrm(
                tensors.q2 - (tensors.q_script - tensors.n_script)
            ),
            "b4_vanishes": nrm(tensors.b4),
            "half_b_script_decomposition": nrm(0.5 * tensors.b_script - half_b),
            "q_script_matches_seven_term_form": nrm(
                tensors.q_script - Tensor(pair.dim, (LOWER, LOWER), q7)
            ),
        }

    return ReductionReport(
        norm_d_omega=norm_dw,
        norm_nijenhuis=norm_n,
        tol=tol,
        closed=closed,
        integrable=integrable,
    )


def check_gauge(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    geo: GeometryData | None = None,
) -> float:
    """Residual of the gauge identity tying the Lie derivative of J along the
    Lee dual to the Laplacian, curvature and torsion correction terms.

    The right-hand side carries one quadratic term beyond Q = B2 J + B3 J:
    the frame sum of (D_{J e_i} J)(D_X J) e_i.  It vanishes whenever J is
    integrable but not in general (on the nilpotent almost Kaehler catalog
    state it equals B4-type data of size 1/2), and the identity is exact only
    with it included.
    """
    if geo is None:
        geo = compute_geometry(pair, algebra)
    tensors = assemble(pair, algebra, geo)
    g, gi, j = pair.g, pair.g_inv, pair.j
    d = geo.dj.dj.entries
    _, lie_j = lie_derivative(tensors.theta_sharp.entries, pair, algebra)
    lhs = lower_endo(lie_j.entries, g)
    gauge_corr = np.einsum("iw,qw,qap,xpi,az->xz", gi, j, d, d, g)
    rhs = (
        tensors.delta_j_form.entries
        + tensors.q_script.entries
        + tensors.r_script.entries
        + tensors.k_script.entries
        + tensors.n_bar.entries
        + gauge_corr
    )
    diff = Tensor(pair.dim, (LOWER, LOWER), lhs - rhs)
    return frame_norm(diff, pair.metric)
