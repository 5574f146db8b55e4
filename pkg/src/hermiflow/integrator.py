"""Time stepping of the (g, J) evolution with structure-preservation
diagnostics and blow-up detection.

The flow is integrated as a matrix ODE on the frame: classical fixed-step
RK4 or a step-halving adaptive variant.  J is deliberately never projected
back onto J^2 = -1 or onto compatibility with g -- the measured drift of
those residuals is the evidence that the continuous flow preserves the
structures.  Only g is re-symmetrised after each step, which removes pure
floating-point noise (the right-hand side is symmetric term by term).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import core
from .frame_tensor import Metric, frame_norm
from .lie_geometry import (
    AlmostHermitianPair,
    LieAlgebraSpec,
    compute_geometry,
    higher_rm,
)

if TYPE_CHECKING:  # pragma: no cover
    from .catalog_io import Scenario

__all__ = [
    "FlowState",
    "TrajectorySample",
    "IntegratorConfig",
    "Trajectory",
    "BlowupSignal",
    "BlowupVerdict",
    "step",
    "integrate",
    "diagnostics",
    "detect_blowup",
]

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup"
STATUS_INDEFINITE = "indefinite_metric"
STATUS_DRIFT = "structure_drift"

MIN_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class FlowState:
    """One point (t, g(t), J(t)) along the flow."""

    t: float
    pair: AlmostHermitianPair


@dataclass(frozen=True)
class TrajectorySample:
    """Recorded state plus diagnostics.  ``scaled_higher`` carries the
    time-weighted derivative norms beyond second order when requested."""

    t: float
    g: np.ndarray
    j: np.ndarray
    norm_rm: float
    norm_dj: float
    norm_d2j: float
    norm_n: float
    norm_domega: float
    compat_residual: float
    jsq_residual: float
    min_eig_g: float
    t_half_dj: float
    t_rm: float
    t_d2j: float
    scaled_higher: dict[str, float] = field(default_factory=dict)

    def is_finite(self) -> bool:
        values = [
            self.norm_rm,
            self.norm_dj,
            self.norm_d2j,
            self.norm_n,
            self.norm_domega,
            self.compat_residual,
            self.jsq_residual,
            self.min_eig_g,
        ]
        return bool(
            np.all(np.isfinite(self.g))
            and np.all(np.isfinite(self.j))
            and np.all(np.isfinite(values))
        )


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = "rk4"  # "rk4" or "rk4_adaptive"
    blowup_threshold: float = 1e6
    drift_tolerance: float = 1e-8
    sample_stride: int = 10
    adaptive_tol: float = 1e-9
    k_max: int = 2

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.blowup_threshold <= 0 or self.drift_tolerance <= 0:
            raise ValueError("thresholds must be positive")
        if self.scheme not in ("rk4", "rk4_adaptive"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    label: str
    status: str
    reason: str
    samples: list[TrajectorySample]
    config: IntegratorConfig
    backend: str

    @property
    def final(self) -> TrajectorySample:
        return self.samples[-1]


class BlowupSignal(Exception):
    """Raised when a stage evaluation stops being finite; carries the last
    valid state."""

    def __init__(self, last_valid: FlowState, detail: str):
        super().__init__(detail)
        self.last_valid = last_valid
        self.detail = detail


def _rk4_matrices(
    g: np.ndarray,
    j: np.ndarray,
    dt: float,
    c: np.ndarray,
    rhs: Callable,
) -> tuple[np.ndarray, np.ndarray]:
    hg1, hj1 = rhs(c, g, j)
    hg2, hj2 = rhs(c, g + 0.5 * dt * hg1, j + 0.5 * dt * hj1)
    hg3, hj3 = rhs(c, g + 0.5 * dt * hg2, j + 0.5 * dt * hj2)
    hg4, hj4 = rhs(c, g + dt * hg3, j + dt * hj3)
    g_new = g + (dt / 6.0) * (hg1 + 2.0 * hg2 + 2.0 * hg3 + hg4)
    j_new = j + (dt / 6.0) * (hj1 + 2.0 * hj2 + 2.0 * hj3 + hj4)
    return 0.5 * (g_new + g_new.T), j_new


def step(state: FlowState, dt: float, algebra: LieAlgebraSpec) -> FlowState:
    """One classical RK4 step of the flow; g is re-symmetrised, J is not
    projected."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    rhs = core.active_rhs()
    g, j = _rk4_matrices(state.pair.g, state.pair.j, dt, algebra.c, rhs)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(j))):
        raise BlowupSignal(state, f"non-finite stage value at t={state.t:.6g}")
    pair = AlmostHermitianPair(Metric(g), j, tol=np.inf)
    return FlowState(t=state.t + dt, pair=pair)


def diagnostics(state: FlowState, algebra: LieAlgebraSpec, k_max: int = 2) -> TrajectorySample:
    """All monitored quantities at one state, including the time-scaled
    derivative norms t^{(k+2)/2} |D^k Rm| and t^{k/2} |D^k J| up to
    ``k_max``."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    pair = state.pair
    metric = pair.metric
    geo = compute_geometry(pair, algebra, k_max=max(k_max, 2))
    t = state.t

    norm_rm = frame_norm(geo.curv.rm, metric)
    dj_norms = [frame_norm(d, metric) for d in geo.dj.derivatives]
    norm_n = frame_norm(geo.nijenhuis_low, metric)
    norm_domega = frame_norm(geo.omega.d_omega, metric)
    min_eig = float(np.linalg.eigvalsh(pair.g)[0])

    scaled_higher: dict[str, float] = {}
    for k in range(3, k_max + 1):
        scaled_higher[f"t{k}halves_d{k}j"] = t ** (k / 2.0) * dj_norms[k - 1]
    if k_max >= 1:
        rms = higher_rm(geo.conn, algebra, pair, k_max)
        for k, drm in enumerate(rms, start=1):
            scaled_higher[f"t{k + 2}halves_d{k}rm"] = (
                t ** ((k + 2) / 2.0) * frame_norm(drm, metric)
            )

    return TrajectorySample(
        t=t,
        g=pair.g.copy(),
        j=pair.j.copy(),
        norm_rm=norm_rm,
        norm_dj=dj_norms[0],
        norm_d2j=dj_norms[1],
        norm_n=norm_n,
        norm_domega=norm_domega,
        compat_residual=pair.compatibility_residual,
        jsq_residual=pair.j_squared_residual,
        min_eig_g=min_eig,
        t_half_dj=t**0.5 * dj_norms[0],
        t_rm=t * norm_rm,
        t_d2j=t * dj_norms[1],
        scaled_higher=scaled_higher,
    )


def _check_termination(sample: TrajectorySample, config: IntegratorConfig) -> tuple[str, str] | None:
    if sample.min_eig_g < MIN_EIG_FLOOR:
        return STATUS_INDEFINITE, (
            f"min eigenvalue of g fell to {sample.min_eig_g:.3e} at t={sample.t:.6g}"
        )
    drift = max(sample.compat_residual, sample.jsq_residual)
    if drift > config.drift_tolerance:
        return STATUS_DRIFT, (
            f"structure drift {drift:.3e} exceeded {config.drift_tolerance:.1e} "
            f"at t={sample.t:.6g}"
        )
    worst = max(sample.norm_rm, sample.norm_dj)
    if worst > config.blowup_threshold:
        name = "norm_rm" if sample.norm_rm >= sample.norm_dj else "norm_dj"
        return STATUS_BLOWUP, (
            f"{name} = {worst:.3e} crossed threshold {config.blowup_threshold:.1e} "
            f"at t={sample.t:.6g}"
        )
    return None


def integrate(scenario: "Scenario", config: IntegratorConfig | None = None) -> Trajectory:
    """Run the flow from a validated scenario.  Termination reasons are
    statuses on the trajectory, never exceptions."""
    config = config or IntegratorConfig()
    algebra = scenario.algebra
    state = FlowState(t=0.0, pair=scenario.pair)
    backend = core.backend_name()

    samples = [diagnostics(state, algebra, config.k_max)]
    verdict = _check_termination(samples[0], config)
    if verdict is not None:
        return Trajectory(scenario.label, verdict[0], verdict[1], samples, config, backend)

    if config.scheme == "rk4":
        stepper = _fixed_step_iter(state, algebra, config)
    else:
        stepper = _adaptive_iter(state, algebra, config)

    status, reason = STATUS_COMPLETED, f"reached t_end={config.t_end:g}"
    try:
        for state in stepper:
            sample = diagnostics(state, algebra, config.k_max)
            if not sample.is_finite():
                status, reason = STATUS_BLOWUP, (
                    f"non-finite diagnostics at t={state.t:.6g}"
                )
                break
            samples.append(sample)
            verdict = _check_termination(sample, config)
            if verdict is not None:
                status, reason = verdict
                break
    except BlowupSignal as sig:
        status, reason = STATUS_BLOWUP, sig.detail
    except (ValueError, np.linalg.LinAlgError) as err:
        status, reason = STATUS_INDEFINITE, f"metric degenerated: {err}"

    return Trajectory(scenario.label, status, reason, samples, config, backend)


def _fixed_step_iter(state: FlowState, algebra: LieAlgebraSpec, config: IntegratorConfig):
    """Yields the state at every sample point of a fixed-step run."""
    rhs = core.active_rhs()
    c = algebra.c
    g, j = state.pair.g.copy(), state.pair.j.copy()
    t = state.t
    n_steps = max(int(round((config.t_end - t) / config.dt)), 1)
    dt = (config.t_end - t) / n_steps
    for k in range(1, n_steps + 1):
        g_next, j_next = _rk4_matrices(g, j, dt, c, rhs)
        if not (np.all(np.isfinite(g_next)) and np.all(np.isfinite(j_next))):
            raise BlowupSignal(
                FlowState(t, AlmostHermitianPair(Metric(g), j, tol=np.inf)),
                f"non-finite stage value between t={t:.6g} and t={t + dt:.6g}",
            )
        g, j = g_next, j_next
        t = state.t + k * dt
        if k % config.sample_stride == 0 or k == n_steps:
            yield FlowState(t, AlmostHermitianPair(Metric(g), j, tol=np.inf))


def _adaptive_iter(state: FlowState, algebra: LieAlgebraSpec, config: IntegratorConfig):
    """Step-halving adaptive RK4: one full step against two half steps,
    local-error target on the combined (g, J) max-norm."""
    rhs = core.active_rhs()
    c = algebra.c
    g, j = state.pair.g.copy(), state.pair.j.copy()
    t = state.t
    dt = config.dt
    accepted = 0
    while t < config.t_end - 1e-15:
        dt = min(dt, config.t_end - t)
        g1, j1 = _rk4_matrices(g, j, dt, c, rhs)
        gh, jh = _rk4_matrices(g, j, 0.5 * dt, c, rhs)
        g2, j2 = _rk4_matrices(gh, jh, 0.5 * dt, c, rhs)
        if not (np.all(np.isfinite(g2)) and np.all(np.isfinite(j2))):
            raise BlowupSignal(
                FlowState(t, AlmostHermitianPair(Metric(g), j, tol=np.inf)),
                f"non-finite stage value at t={t:.6g}",
            )
        err = max(np.max(np.abs(g2 - g1)), np.max(np.abs(j2 - j1)))
        if err <= config.adaptive_tol:
            g, j = g2, j2
            t += dt
            accepted += 1
            if accepted % config.sample_stride == 0 or t >= config.t_end - 1e-15:
                yield FlowState(t, AlmostHermitianPair(Metric(g), j, tol=np.inf))
            growth = 2.0 if err == 0.0 else min(2.0, 0.9 * (config.adaptive_tol / err) ** 0.2)
            dt *= max(growth, 1.0)
        else:
            dt *= 0.5
            if dt < 1e-12:
                raise BlowupSignal(
                    FlowState(t, AlmostHermitianPair(Metric(g), j, tol=np.inf)),
                    f"adaptive step collapsed below 1e-12 at t={t:.6g}",
                )


@dataclass(frozen=True)
class BlowupVerdict:
    fired: bool
    t_last_valid: float
    max_quantity_name: str


def detect_blowup(traj: Trajectory, threshold: float) -> BlowupVerdict:
    """Scan a trajectory for the long-time-existence obstruction: fires when
    any sample has max(|Rm|, |DJ|) above the threshold."""
    t_prev = traj.samples[0].t if traj.samples else 0.0
    for sample in traj.samples:
        worst = max(sample.norm_rm, sample.norm_dj)
        name = "norm_rm" if sample.norm_rm >= sample.norm_dj else "norm_dj"
        if worst > threshold:
            return BlowupVerdict(fired=True, t_last_valid=t_prev, max_quantity_name=name)
        t_prev = sample.t
    last = traj.samples[-1]
    name = "norm_rm" if last.norm_rm >= last.norm_dj else "norm_dj"
    return BlowupVerdict(fired=False, t_last_valid=last.t, max_quantity_name=name)
