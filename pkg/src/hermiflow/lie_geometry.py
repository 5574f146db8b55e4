"""Left-invariant differential geometry from structure constants.

Everything lives on a single frame e_1..e_n of a real Lie algebra with
brackets [e_i, e_j] = c^k_ij e_k.  All tensors are left-invariant, so their
frame components are constant and covariant differentiation is pure
connection algebra; this is what turns the flow PDE into an ODE.

Index conventions used throughout:
  * structure constants    c[k, i, j]        = c^k_ij
  * connection             gamma[k, i, j]    = coefficient of e_k in D_{e_i} e_j
  * endomorphism-valued    dj[i, a, b]       = component a of (D_{e_i} J) e_b
  * fully lowered          dj_low[i, y, z]   = <(D_{e_i} J) e_y, e_z>
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame_tensor import (
    LOWER,
    UPPER,
    Metric,
    Tensor,
    lower_endo,
)

__all__ = [
    "LieAlgebraSpec",
    "AlmostHermitianPair",
    "Connection",
    "CurvatureData",
    "DJBundle",
    "OmegaData",
    "GeometryData",
    "levi_civita",
    "curvature",
    "cov_derivative",
    "dj_bundle",
    "nijenhuis",
    "omega_derivatives",
    "lie_derivative",
    "higher_rm",
    "compute_geometry",
    "standard_j",
    "random_compatible_pair",
]

JACOBI_TOL = 1e-12
PAIR_TOL = 1e-12


def jacobi_residual(c: np.ndarray) -> float:
    """Max-entry residual of the Jacobi identity for structure constants."""
    cyc = (
        np.einsum("mij,lmk->lijk", c, c)
        + np.einsum("mjk,lmi->lijk", c, c)
        + np.einsum("mki,lmj->lijk", c, c)
    )
    return float(np.max(np.abs(cyc)))


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants c[k, i, j] of a real Lie algebra, meaning
    [e_i, e_j] = sum_k c[k, i, j] e_k."""

    dim: int
    c: np.ndarray
    name: str = "algebra"

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError(f"dimension must be even and >= 2, got {self.dim}")
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dim,) * 3:
            raise ValueError(f"structure constants shape {c.shape} != dim^3")
        anti = 0.5 * (c - c.swapaxes(1, 2))
        if np.max(np.abs(c - anti)) > 1e-12:
            raise ValueError("structure constants are not antisymmetric in the lower pair")
        resid = jacobi_residual(anti)
        if resid > JACOBI_TOL:
            raise ValueError(f"Jacobi residual {resid:.3e} exceeds {JACOBI_TOL:.1e}")
        anti.setflags(write=False)
        object.__setattr__(self, "c", anti)

    def bracket(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, x, y)


@dataclass(frozen=True)
class AlmostHermitianPair:
    """Metric and almost complex structure on the frame.

    ``tol`` gates the construction-time invariants J^2 = -1 and
    J^T g J = g; integration code passes ``tol=inf`` and monitors the same
    residuals as drift diagnostics instead.
    """

    metric: Metric
    j: np.ndarray
    tol: float = PAIR_TOL

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float).copy()
        if j.shape != (self.metric.dim, self.metric.dim):
            raise ValueError(f"J shape {j.shape} does not match metric dim {self.metric.dim}")
        j.setflags(write=False)
        object.__setattr__(self, "j", j)
        if self.j_squared_residual > self.tol:
            raise ValueError(
                f"J^2 = -1 residual {self.j_squared_residual:.3e} exceeds {self.tol:.1e}"
            )
        if self.compatibility_residual > self.tol:
            raise ValueError(
                f"compatibility residual {self.compatibility_residual:.3e} "
                f"exceeds {self.tol:.1e}"
            )

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def g(self) -> np.ndarray:
        return self.metric.g

    @property
    def g_inv(self) -> np.ndarray:
        return self.metric.g_inv

    @property
    def omega(self) -> np.ndarray:
        """Fundamental two-form w(X, Y) = g(JX, Y)."""
        return lower_endo(self.j, self.g)

    @property
    def j_squared_residual(self) -> float:
        return float(np.max(np.abs(self.j @ self.j + np.eye(self.dim))))

    @property
    def compatibility_residual(self) -> float:
        return float(np.max(np.abs(self.j.T @ self.g @ self.j - self.g)))


@dataclass(frozen=True)
class Connection:
    """Levi-Civita coefficients: D_{e_i} e_j = gamma[k, i, j] e_k."""

    gamma: np.ndarray
    gamma_low: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.gamma, self.gamma_low):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def torsion_residual(self, algebra: LieAlgebraSpec) -> float:
        t = self.gamma - self.gamma.swapaxes(1, 2) - algebra.c
        return float(np.max(np.abs(t)))

    def metric_residual(self) -> float:
        s = self.gamma_low + self.gamma_low.swapaxes(1, 2)
        return float(np.max(np.abs(s)))


def levi_civita(algebra: LieAlgebraSpec, pair: AlmostHermitianPair) -> Connection:
    """Koszul formula for left-invariant fields:
    2 <D_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y>."""
    c, g = algebra.c, pair.g
    gamma_low = 0.5 * (
        np.einsum("mij,ml->ijl", c, g)
        - np.einsum("mjl,mi->ijl", c, g)
        + np.einsum("mli,mj->ijl", c, g)
    )
    gamma = np.einsum("ijl,lk->kij", gamma_low, pair.g_inv)
    return Connection(gamma=gamma, gamma_low=gamma_low)


@dataclass(frozen=True)
class CurvatureData:
    """Rm(X,Y,Z,W) = <Rm(X,Y)Z, W> with Rm(X,Y) = D_X D_Y - D_Y D_X - D_[X,Y],
    and Ric(X,Y) the orthonormal-frame trace <Rm(e_i, X)Y, e_i>."""

    rm: Tensor
    ric: Tensor

    def symmetry_residuals(self) -> dict[str, float]:
        r = self.rm.entries
        return {
            "rm_antisym_12": float(np.max(np.abs(r + np.einsum("jikw->ijkw", r)))),
            "rm_antisym_34": float(np.max(np.abs(r + np.einsum("ijwk->ijkw", r)))),
            "rm_pair_symmetry": float(np.max(np.abs(r - np.einsum("kwij->ijkw", r)))),
            "rm_first_bianchi": float(
                np.max(
                    np.abs(
                        r
                        + np.einsum("jkiw->ijkw", r)
                        + np.einsum("kijw->ijkw", r)
                    )
                )
            ),
            "ric_symmetric": float(np.max(np.abs(self.ric.entries - self.ric.entries.T))),
        }


def _rm_low(c: np.ndarray, gamma: np.ndarray, g: np.ndarray) -> np.ndarray:
    rm_up = (
        np.einsum("lim,mjk->lijk", gamma, gamma)
        - np.einsum("ljm,mik->lijk", gamma, gamma)
        - np.einsum("mij,lmk->lijk", c, gamma)
    )
    return np.einsum("lijk,lw->ijkw", rm_up, g)


def curvature(conn: Connection, algebra: LieAlgebraSpec, pair: AlmostHermitianPair) -> CurvatureData:
    rm_low = _rm_low(algebra.c, conn.gamma, pair.g)
    ric = np.einsum("iabj,ij->ab", rm_low, pair.g_inv)
    n = pair.dim
    return CurvatureData(
        rm=Tensor(n, (LOWER,) * 4, rm_low),
        ric=Tensor(n, (LOWER, LOWER), ric),
    )


def _cov_arr(arr: np.ndarray, variance: tuple[str, ...], gamma: np.ndarray) -> np.ndarray:
    """One covariant derivative of a constant-component tensor; the new
    derivative slot is prepended."""
    n = gamma.shape[0]
    out = np.zeros((n,) + arr.shape)
    for s, flag in enumerate(variance):
        if flag == LOWER:
            term = np.tensordot(gamma, arr, axes=(0, s))  # axes (i, a_s, rest)
            out -= np.moveaxis(term, 1, 1 + s)
        else:
            term = np.tensordot(gamma, arr, axes=(2, s))  # axes (a_s, i, rest)
            out += np.moveaxis(np.moveaxis(term, 0, 1), 1, 1 + s)
    return out


def cov_derivative(t: Tensor, conn: Connection) -> Tensor:
    """Covariant derivative of a left-invariant tensor; adds one lowered slot
    in position one.  Only connection terms contribute since components are
    constant on the frame."""
    if conn.dim != t.dim:
        raise ValueError(f"connection dim {conn.dim} does not match tensor dim {t.dim}")
    out = _cov_arr(t.entries, t.variance, conn.gamma)
    return Tensor(t.dim, (LOWER,) + t.variance, out)


def _dj_endo(gamma: np.ndarray, j: np.ndarray) -> np.ndarray:
    return np.einsum("aim,mb->iab", gamma, j) - np.einsum("am,mib->iab", j, gamma)


@dataclass(frozen=True)
class DJBundle:
    """Iterated covariant derivatives of J plus its rough Laplacian."""

    derivatives: list[Tensor]
    delta_j: Tensor

    @property
    def dj(self) -> Tensor:
        return self.derivatives[0]


def dj_bundle(
    pair: AlmostHermitianPair,
    conn: Connection,
    algebra: LieAlgebraSpec,
    k_max: int = 2,
) -> DJBundle:
    """[DJ, D^2 J, ..., D^k J] and the Laplacian trace of D^2 J over its two
    derivative slots in a g-orthonormal frame."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    n = pair.dim
    first = Tensor(n, (LOWER, UPPER, LOWER), _dj_endo(conn.gamma, pair.j))
    derivs = [first]
    for _ in range(max(k_max, 2) - 1):
        derivs.append(cov_derivative(derivs[-1], conn))
    d2j = derivs[1]
    delta = np.einsum("ij,ijab->ab", pair.g_inv, d2j.entries)
    return DJBundle(
        derivatives=derivs[:k_max],
        delta_j=Tensor(n, (UPPER, LOWER), delta),
    )


def nijenhuis(pair: AlmostHermitianPair, algebra: LieAlgebraSpec) -> tuple[Tensor, Tensor]:
    """Integrability obstruction N(X,Y) = [JX,JY] - [X,Y] - J[JX,Y] - J[X,JY],
    returned endomorphism-valued and fully lowered (<N(X,Y), Z>)."""
    c, j, g = algebra.c, pair.j, pair.g
    n_endo = (
        np.einsum("apq,pi,qj->aij", c, j, j)
        - c
        - np.einsum("am,mpj,pi->aij", j, c, j)
        - np.einsum("am,miq,qj->aij", j, c, j)
    )
    n_low = np.einsum("aij,az->ijz", n_endo, g)
    dim = pair.dim
    return (
        Tensor(dim, (UPPER, LOWER, LOWER), n_endo),
        Tensor(dim, (LOWER,) * 3, n_low),
    )


@dataclass(frozen=True)
class OmegaData:
    """Exterior derivative of the fundamental form and derived three-tensors."""

    d_omega: Tensor
    d_omega_plus: Tensor
    torsion_h: Tensor
    cross_residual: float


def omega_derivatives(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    conn: Connection,
) -> OmegaData:
    """d(omega) evaluated two ways -- from DJ (covariant cyclic sum) and from
    the brackets (Chevalley-Eilenberg) -- plus the J-positive part and the
    torsion three-form H(X,Y,Z) = -d(omega)(JX,JY,JZ)."""
    c, j, g = algebra.c, pair.j, pair.g
    dj_low = np.einsum("iay,az->iyz", _dj_endo(conn.gamma, j), g)
    d_cov = dj_low + np.einsum("yzx->xyz", dj_low) + np.einsum("zxy->xyz", dj_low)
    omega = pair.omega
    d_ce = -(
        np.einsum("mxy,mz->xyz", c, omega)
        + np.einsum("myz,mx->xyz", c, omega)
        + np.einsum("mzx,my->xyz", c, omega)
    )
    cross = float(np.max(np.abs(d_cov - d_ce)))
    torsion_h = -np.einsum("pqr,px,qy,rz->xyz", d_cov, j, j, j)
    d_plus = 0.25 * (
        3.0 * d_cov
        + np.einsum("pqz,px,qy->xyz", d_cov, j, j)
        + np.einsum("pyr,px,rz->xyz", d_cov, j, j)
        + np.einsum("xqr,qy,rz->xyz", d_cov, j, j)
    )
    dim = pair.dim
    lll = (LOWER,) * 3
    return OmegaData(
        d_omega=Tensor(dim, lll, d_cov),
        d_omega_plus=Tensor(dim, lll, d_plus),
        torsion_h=Tensor(dim, lll, torsion_h),
        cross_residual=cross,
    )


def lie_derivative(
    x: np.ndarray,
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
) -> tuple[Tensor, Tensor]:
    """(L_X g, L_X J) along a left-invariant vector, via algebra brackets."""
    x = np.asarray(x, dtype=float)
    c, j, g = algebra.c, pair.j, pair.g
    lie_g = -(
        np.einsum("mpy,p,mz->yz", c, x, g)
        + np.einsum("mpz,p,ym->yz", c, x, g)
    )
    lie_j = np.einsum("apq,p,qy->ay", c, x, j) - np.einsum("am,mpy,p->ay", j, c, x)
    dim = pair.dim
    return (
        Tensor(dim, (LOWER, LOWER), lie_g),
        Tensor(dim, (UPPER, LOWER), lie_j),
    )


def higher_rm(
    conn: Connection,
    algebra: LieAlgebraSpec,
    pair: AlmostHermitianPair,
    k_max: int,
) -> list[Tensor]:
    """[D Rm, ..., D^k Rm] by iterating the covariant derivative on the
    fully lowered curvature tensor."""
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    rm = curvature(conn, algebra, pair).rm
    out = []
    current = rm
    for _ in range(k_max):
        current = cov_derivative(current, conn)
        out.append(current)
    return out


@dataclass(frozen=True)
class GeometryData:
    """All derived geometry of one (algebra, pair) state, computed once."""

    algebra: LieAlgebraSpec
    pair: AlmostHermitianPair
    conn: Connection
    curv: CurvatureData
    dj: DJBundle
    nijenhuis_endo: Tensor
    nijenhuis_low: Tensor
    omega: OmegaData

    def matches(self, pair: AlmostHermitianPair, algebra: LieAlgebraSpec) -> bool:
        return (
            np.array_equal(self.pair.g, pair.g)
            and np.array_equal(self.pair.j, pair.j)
            and np.array_equal(self.algebra.c, algebra.c)
        )


def compute_geometry(
    pair: AlmostHermitianPair,
    algebra: LieAlgebraSpec,
    k_max: int = 2,
) -> GeometryData:
    if algebra.dim != pair.dim:
        raise ValueError(f"algebra dim {algebra.dim} does not match pair dim {pair.dim}")
    conn = levi_civita(algebra, pair)
    curv = curvature(conn, algebra, pair)
    djs = dj_bundle(pair, conn, algebra, k_max=k_max)
    n_endo, n_low = nijenhuis(pair, algebra)
    om = omega_derivatives(pair, algebra, conn)
    return GeometryData(
        algebra=algebra,
        pair=pair,
        conn=conn,
        curv=curv,
        dj=djs,
        nijenhuis_endo=n_endo,
        nijenhuis_low=n_low,
        omega=om,
    )


def standard_j(dim: int) -> np.ndarray:
    """Block-rotation J_0: e_1 -> e_2, e_2 -> -e_1, e_3 -> e_4, ..."""
    if dim % 2 != 0:
        raise ValueError("dimension must be even")
    return np.kron(np.eye(dim // 2), np.array([[0.0, -1.0], [1.0, 0.0]]))


def random_compatible_pair(dim: int, rng: np.random.Generator) -> AlmostHermitianPair:
    """Random compatible pair: g = A A^T + 0.1 I and J the standard block
    rotation conjugated by the g-orthonormalizing frame, which guarantees
    J^2 = -1 and J^T g J = g by construction."""
    a = rng.standard_normal((dim, dim))
    metric = Metric(a @ a.T + 0.1 * np.eye(dim))
    f = metric.frame
    j = f @ standard_j(dim) @ np.linalg.inv(f)
    return AlmostHermitianPair(metric, j)
