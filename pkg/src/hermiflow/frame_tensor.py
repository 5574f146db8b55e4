"""Dense multilinear algebra over a fixed real frame of even dimension.

Tensors are stored as dense numpy arrays, one axis per slot, together with a
per-slot variance flag ('u' for a vector slot, 'l' for a covector slot).
Frame sums ("contract two slots over an orthonormal basis") are realised by
pairing the slots with g or its inverse as dictated by the variance; the
unoptimised :func:`oracle_contract` performs the same sum as explicit loops
over a Gram-Schmidt orthonormal frame and serves as the differential-testing
reference for the einsum-based fast path.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UPPER",
    "LOWER",
    "Tensor",
    "Metric",
    "contract",
    "oracle_contract",
    "project_sym_skew",
    "project_j",
    "compose_j",
    "frame_norm",
    "lower_endo",
    "raise_form",
    "check_almost_complex",
]

UPPER = "u"
LOWER = "l"

_LETTERS = string.ascii_lowercase


def _as_variance(variance) -> tuple[str, ...]:
    flags = tuple(variance)
    if any(f not in (UPPER, LOWER) for f in flags):
        raise ValueError(f"variance flags must be 'u' or 'l', got {variance!r}")
    return flags


@dataclass(frozen=True)
class Tensor:
    """Immutable dense tensor on the frame with per-slot variance."""

    dim: int
    variance: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_variance(self.variance))
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError(f"frame dimension must be even and >= 2, got {self.dim}")
        arr = np.asarray(self.entries, dtype=float)
        if arr.shape != (self.dim,) * len(self.variance):
            raise ValueError(
                f"entries shape {arr.shape} does not match dim {self.dim} "
                f"and order {len(self.variance)}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def order(self) -> int:
        return len(self.variance)

    @classmethod
    def of(cls, entries, variance) -> "Tensor":
        arr = np.asarray(entries, dtype=float)
        return cls(dim=arr.shape[0] if arr.ndim else 0, variance=variance, entries=arr)

    def _check_same_shape(self, other: "Tensor"):
        if not isinstance(other, Tensor):
            raise TypeError(f"expected Tensor, got {type(other).__name__}")
        if (self.dim, self.variance) != (other.dim, other.variance):
            raise ValueError(
                f"tensor mismatch: dim/variance ({self.dim}, {self.variance}) "
                f"vs ({other.dim}, {other.variance})"
            )

    def __add__(self, other: "Tensor") -> "Tensor":
        self._check_same_shape(other)
        return Tensor(self.dim, self.variance, self.entries + other.entries)

    def __sub__(self, other: "Tensor") -> "Tensor":
        self._check_same_shape(other)
        return Tensor(self.dim, self.variance, self.entries - other.entries)

    def __neg__(self) -> "Tensor":
        return Tensor(self.dim, self.variance, -self.entries)

    def __mul__(self, scalar: float) -> "Tensor":
        return Tensor(self.dim, self.variance, self.entries * float(scalar))

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0


def _gram_schmidt_frame(g: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal basis; deterministic, no pivoting."""
    n = g.shape[0]
    frame = np.zeros_like(g)
    for k in range(n):
        v = np.zeros(n)
        v[k] = 1.0
        for a in range(k):
            v = v - (frame[:, a] @ g @ v) * frame[:, a]
        v = v / np.sqrt(v @ g @ v)
        frame[:, k] = v
    return frame


@dataclass(frozen=True)
class Metric:
    """Symmetric positive-definite frame metric with cached inverse and
    g-orthonormalizer (columns span a g-orthonormal basis)."""

    g: np.ndarray
    g_inv: np.ndarray = field(default=None, repr=False)
    frame: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"metric must be a square matrix, got shape {g.shape}")
        n = g.shape[0]
        if n < 2 or n % 2 != 0:
            raise ValueError(f"frame dimension must be even and >= 2, got {n}")
        g = 0.5 * (g + g.T)
        eigs = np.linalg.eigvalsh(g)
        if eigs[0] <= 0.0:
            raise ValueError(f"metric is not positive definite (min eig {eigs[0]:.3e})")
        g_inv = np.linalg.inv(g)
        resid = np.max(np.abs(g @ g_inv - np.eye(n)))
        if resid > 1e-13:
            raise ValueError(f"metric inversion residual {resid:.3e} exceeds 1e-13")
        frame = _gram_schmidt_frame(g)
        for arr in (g, g_inv, frame):
            arr.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_inv", g_inv)
        object.__setattr__(self, "frame", frame)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Metric":
        return cls(np.eye(dim))


def _pairing(variance_a: str, variance_b: str, m: Metric) -> np.ndarray:
    """Matrix realising the orthonormal-frame sum over one slot pair."""
    if variance_a == LOWER and variance_b == LOWER:
        return m.g_inv
    if variance_a == UPPER and variance_b == UPPER:
        return m.g
    return np.eye(m.dim)


def _check_slots(t: Tensor, slot_a: int, slot_b: int, m: Metric):
    if not 0 <= slot_a < t.order or not 0 <= slot_b < t.order:
        raise ValueError(f"slots ({slot_a}, {slot_b}) out of range for order {t.order}")
    if slot_a == slot_b:
        raise ValueError("cannot contract a slot with itself")
    if m.dim != t.dim:
        raise ValueError(f"metric dim {m.dim} does not match tensor dim {t.dim}")


def contract(t: Tensor, slot_a: int, slot_b: int, m: Metric) -> Tensor:
    """Trace of ``t`` over two slots with respect to a g-orthonormal frame."""
    _check_slots(t, slot_a, slot_b, m)
    pairing = _pairing(t.variance[slot_a], t.variance[slot_b], m)
    out = np.tensordot(t.entries, pairing, axes=([slot_a, slot_b], [0, 1]))
    variance = tuple(f for s, f in enumerate(t.variance) if s not in (slot_a, slot_b))
    if not variance:
        return Tensor(t.dim, (), np.asarray(out))
    return Tensor(t.dim, variance, out)


def oracle_contract(t: Tensor, slot_a: int, slot_b: int, m: Metric) -> Tensor:
    """Same contract as :func:`contract`, as explicit nested loops over an
    explicitly constructed orthonormal frame.  Deliberately unoptimised."""
    _check_slots(t, slot_a, slot_b, m)
    n = t.dim
    # weight vectors per slot: frame vectors for a covector slot, their
    # g-duals for a vector slot
    frame = m.frame
    dual = m.g @ m.frame
    w_a = frame if t.variance[slot_a] == LOWER else dual
    w_b = frame if t.variance[slot_b] == LOWER else dual
    keep = [s for s in range(t.order) if s not in (slot_a, slot_b)]
    out_shape = (n,) * len(keep)
    out = np.zeros(out_shape)
    for idx in np.ndindex(out_shape) if keep else [()]:
        total = 0.0
        for alpha in range(n):
            for i in range(n):
                for j in range(n):
                    full = [0] * t.order
                    for pos, s in enumerate(keep):
                        full[s] = idx[pos]
                    full[slot_a] = i
                    full[slot_b] = j
                    total += w_a[i, alpha] * w_b[j, alpha] * t.entries[tuple(full)]
        if keep:
            out[idx] = total
        else:
            out = np.asarray(total)
    variance = tuple(t.variance[s] for s in keep)
    return Tensor(t.dim, variance, out)


def _check_order2_lower(h: Tensor):
    if h.order != 2 or h.variance != (LOWER, LOWER):
        raise ValueError(
            f"expected an order-2 fully lowered tensor, got order {h.order} "
            f"variance {h.variance}"
        )


def project_sym_skew(h: Tensor) -> tuple[Tensor, Tensor]:
    """Split a bilinear form into symmetric and antisymmetric parts."""
    _check_order2_lower(h)
    sym = 0.5 * (h.entries + h.entries.T)
    skew = 0.5 * (h.entries - h.entries.T)
    return Tensor(h.dim, h.variance, sym), Tensor(h.dim, h.variance, skew)


def check_almost_complex(j: np.ndarray, tol: float = 1e-12) -> float:
    """Residual of J^2 = -1; raises if it exceeds ``tol``."""
    j = np.asarray(j, dtype=float)
    resid = float(np.max(np.abs(j @ j + np.eye(j.shape[0]))))
    if resid > tol:
        raise ValueError(f"J^2 = -1 fails: residual {resid:.3e} exceeds {tol:.1e}")
    return resid


def project_j(h: Tensor, j: np.ndarray) -> tuple[Tensor, Tensor]:
    """Split a bilinear form into its J-invariant part and its
    J-anti-invariant part (the two eigenspaces of h -> h(J., J.))."""
    _check_order2_lower(h)
    check_almost_complex(j)
    hjj = j.T @ h.entries @ j
    h_11 = 0.5 * (h.entries + hjj)
    h_02 = 0.5 * (h.entries - hjj)
    return Tensor(h.dim, h.variance, h_11), Tensor(h.dim, h.variance, h_02)


def compose_j(t: Tensor, j: np.ndarray) -> Tensor:
    """Right-composition with J: returns (TJ)(X, Y) = T(JX, Y), the bilinear
    form of the endomorphism composition T o J."""
    if t.order != 2:
        raise ValueError(f"expected an order-2 tensor, got order {t.order}")
    return Tensor(t.dim, t.variance, np.asarray(j).T @ t.entries)


def frame_norm(t: Tensor, m: Metric) -> float:
    """Norm |T| with |T|^2 the full self-contraction of T in a g-orthonormal
    frame, every slot treated alike."""
    if m.dim != t.dim:
        raise ValueError(f"metric dim {m.dim} does not match tensor dim {t.dim}")
    p = t.order
    if p == 0:
        return abs(float(t.entries))
    if 2 * p + p > len(_LETTERS):
        raise ValueError(f"order {p} too large for norm computation")
    a = _LETTERS[:p]
    b = _LETTERS[p : 2 * p]
    pairings = [_pairing(f, f, m) for f in t.variance]
    spec = (
        a
        + ","
        + b
        + ","
        + ",".join(a[s] + b[s] for s in range(p))
        + "->"
    )
    sq = np.einsum(spec, t.entries, t.entries, *pairings, optimize=True)
    return float(np.sqrt(max(sq, 0.0)))


def lower_endo(m_endo: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Bilinear form T(X, Y) = g(T(X), Y) of an endomorphism matrix."""
    return np.asarray(m_endo).T @ g


def raise_form(b: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """Endomorphism matrix of a bilinear form, inverse of :func:`lower_endo`."""
    return g_inv @ np.asarray(b).T
