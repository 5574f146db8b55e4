"""Built-in benchmark geometries, the plain-text scenario format, and
trajectory serialization.

Scenario grammar (line oriented, ``#`` starts a comment, 1-based indices)::

    name = kodaira_thurston
    dim = 4
    class = almost_kahler
    c <i> <j> <k> = <value>     # [e_i, e_j] has e_k-component <value>, i < j
    g <i> = v1 v2 ... vdim      # row i of the metric
    J <i> = v1 v2 ... vdim      # row i of the almost complex structure

Only the i < j structure constants are stored; the antisymmetric twin is
implied.  Trajectories serialise to CSV (fixed column order) or JSON
(bit-exact round trip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .frame_tensor import Metric, check_almost_complex, frame_norm
from .integrator import IntegratorConfig, Trajectory, TrajectorySample
from .lie_geometry import (
    AlmostHermitianPair,
    LieAlgebraSpec,
    compute_geometry,
)

__all__ = [
    "Scenario",
    "ScenarioError",
    "BUILTIN_NAMES",
    "builtin",
    "parse_scenario",
    "scenario_to_text",
    "write_trajectory",
    "read_trajectory",
    "CSV_DIAGNOSTIC_COLUMNS",
]

EXPECTED_CLASSES = ("kahler", "almost_kahler", "hermitian_pluriclosed", "generic")
CLASS_GATE_TOL = 1e-10

CSV_DIAGNOSTIC_COLUMNS = [
    "norm_Rm",
    "norm_DJ",
    "norm_D2J",
    "norm_N",
    "norm_domega",
    "compat_residual",
    "jsq_residual",
    "min_eig_g",
    "t_half_DJ",
    "t_Rm",
]


class ScenarioError(Exception):
    """Scenario rejection with a machine-readable diagnostic code."""

    def __init__(self, code: str, message: str, line: int | None = None):
        self.code = code
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"[{code}]{where} {message}")


@dataclass(frozen=True)
class Scenario:
    """Validated initial data for the flow."""

    algebra: LieAlgebraSpec
    pair: AlmostHermitianPair
    label: str
    expected_class: str = "generic"

    @property
    def g0(self) -> np.ndarray:
        return self.pair.g

    @property
    def j0(self) -> np.ndarray:
        return self.pair.j

    @property
    def dim(self) -> int:
        return self.algebra.dim


def _class_gate(scenario: Scenario):
    """Advisory class labels still gate the matching structure residuals."""
    cls = scenario.expected_class
    if cls == "generic":
        return
    geo = compute_geometry(scenario.pair, scenario.algebra, k_max=1)
    norm_dw = frame_norm(geo.omega.d_omega, scenario.pair.metric)
    norm_n = frame_norm(geo.nijenhuis_low, scenario.pair.metric)
    if cls in ("almost_kahler", "kahler") and norm_dw > CLASS_GATE_TOL:
        raise ScenarioError(
            "CLASS",
            f"class {cls} requires |d omega| <= {CLASS_GATE_TOL:.1e}, got {norm_dw:.3e}",
        )
    if cls in ("hermitian_pluriclosed", "kahler") and norm_n > CLASS_GATE_TOL:
        raise ScenarioError(
            "CLASS",
            f"class {cls} requires |N| <= {CLASS_GATE_TOL:.1e}, got {norm_n:.3e}",
        )


def _make_scenario(
    dim: int,
    c: np.ndarray,
    g: np.ndarray,
    j: np.ndarray,
    label: str,
    expected_class: str,
) -> Scenario:
    try:
        algebra = LieAlgebraSpec(dim, c, name=label)
    except ValueError as err:
        raise ScenarioError("JACOBI", str(err)) from err
    try:
        metric = Metric(g)
    except ValueError as err:
        raise ScenarioError("NOT_SPD", str(err)) from err
    try:
        check_almost_complex(j)
    except ValueError as err:
        raise ScenarioError("J_SQUARED", str(err)) from err
    try:
        pair = AlmostHermitianPair(metric, j)
    except ValueError as err:
        raise ScenarioError("COMPAT", str(err)) from err
    scenario = Scenario(algebra=algebra, pair=pair, label=label, expected_class=expected_class)
    _class_gate(scenario)
    return scenario


def _builtin_flat_torus() -> Scenario:
    c = np.zeros((4, 4, 4))
    j = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    return _make_scenario(4, c, np.eye(4), j, "flat_torus_4", "kahler")


def _builtin_kodaira_thurston() -> Scenario:
    c = np.zeros((4, 4, 4))
    c[2, 0, 1] = 1.0
    c[2, 1, 0] = -1.0
    j = np.array(
        [
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
        ]
    )
    return _make_scenario(4, c, np.eye(4), j, "kodaira_thurston", "almost_kahler")


def _builtin_hopf() -> Scenario:
    c = np.zeros((4, 4, 4))
    for k, i, jj in ((2, 0, 1), (0, 1, 2), (1, 2, 0)):
        c[k, i, jj] = 1.0
        c[k, jj, i] = -1.0
    j = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    return _make_scenario(4, c, np.eye(4), j, "hopf_s3s1", "hermitian_pluriclosed")


_BUILTINS = {
    "flat_torus_4": _builtin_flat_torus,
    "kodaira_thurston": _builtin_kodaira_thurston,
    "hopf_s3s1": _builtin_hopf,
}

BUILTIN_NAMES = tuple(sorted(_BUILTINS))


def builtin(name: str) -> Scenario:
    """One of the shipped benchmark geometries; the catalog holds one
    representative per preserved structure (closed form, integrable J,
    both)."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown builtin scenario {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        ) from None
    return factory()


def _fmt(x: float) -> str:
    return repr(float(x))


def scenario_to_text(s: Scenario) -> str:
    lines = [f"name = {s.label}", f"dim = {s.dim}", f"class = {s.expected_class}"]
    n = s.dim
    c = s.algebra.c
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                if c[k, i, j] != 0.0:
                    lines.append(f"c {i + 1} {j + 1} {k + 1} = {_fmt(c[k, i, j])}")
    for i in range(n):
        lines.append("g " + str(i + 1) + " = " + " ".join(_fmt(v) for v in s.g0[i]))
    for i in range(n):
        lines.append("J " + str(i + 1) + " = " + " ".join(_fmt(v) for v in s.j0[i]))
    return "\n".join(lines) + "\n"


def _syntax(msg: str, line_no: int) -> ScenarioError:
    return ScenarioError("SYNTAX", msg, line=line_no)


def parse_scenario(text: str, label: str = "scenario") -> Scenario:
    """Parse and fully validate a scenario; every failure carries a distinct
    diagnostic code and, for syntax problems, the line number."""
    dim: int | None = None
    expected_class = "generic"
    name = label
    c_entries: dict[tuple[int, int, int], float] = {}
    g_rows: dict[int, list[float]] = {}
    j_rows: dict[int, list[float]] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise _syntax(f"expected 'key = value', got {content!r}", line_no)
        head, _, value = content.partition("=")
        fields = head.split()
        value = value.strip()
        if not fields:
            raise _syntax("empty key before '='", line_no)
        key = fields[0]
        if key == "name":
            if len(fields) != 1 or not value:
                raise _syntax("usage: name = <label>", line_no)
            name = value
        elif key == "dim":
            if len(fields) != 1:
                raise _syntax("usage: dim = <even integer>", line_no)
            try:
                dim = int(value)
            except ValueError:
                raise _syntax(f"dim must be an integer, got {value!r}", line_no) from None
        elif key == "class":
            if value not in EXPECTED_CLASSES:
                raise _syntax(
                    f"class must be one of {', '.join(EXPECTED_CLASSES)}, got {value!r}",
                    line_no,
                )
            expected_class = value
        elif key == "c":
            if dim is None:
                raise _syntax("dim must be declared before structure constants", line_no)
            if len(fields) != 4:
                raise _syntax("usage: c <i> <j> <k> = <value>", line_no)
            try:
                i, j, k = (int(f) for f in fields[1:])
                val = float(value)
            except ValueError:
                raise _syntax(f"bad structure constant line {content!r}", line_no) from None
            if not (1 <= i <= dim and 1 <= j <= dim and 1 <= k <= dim):
                raise _syntax(f"indices out of range 1..{dim}", line_no)
            if i >= j:
                raise _syntax("structure constants are stored with i < j only", line_no)
            if (i, j, k) in c_entries:
                raise _syntax(f"duplicate structure constant c {i} {j} {k}", line_no)
            c_entries[(i, j, k)] = val
        elif key in ("g", "J"):
            if dim is None:
                raise _syntax(f"dim must be declared before {key} rows", line_no)
            if len(fields) != 2:
                raise _syntax(f"usage: {key} <i> = v1 v2 ... v{dim}", line_no)
            try:
                i = int(fields[1])
                row = [float(v) for v in value.split()]
            except ValueError:
                raise _syntax(f"bad {key} row {content!r}", line_no) from None
            if not 1 <= i <= dim:
                raise _syntax(f"row index {i} out of range 1..{dim}", line_no)
            if len(row) != dim:
                raise _syntax(f"{key} row {i} has {len(row)} values, expected {dim}", line_no)
            target = g_rows if key == "g" else j_rows
            if i in target:
                raise _syntax(f"duplicate {key} row {i}", line_no)
            target[i] = row
        else:
            raise _syntax(f"unknown key {key!r}", line_no)

    if dim is None:
        raise ScenarioError("SYNTAX", "missing 'dim =' line")
    for store, what in ((g_rows, "g"), (j_rows, "J")):
        missing = [str(i) for i in range(1, dim + 1) if i not in store]
        if missing:
            raise ScenarioError("SYNTAX", f"missing {what} rows: {', '.join(missing)}")

    c = np.zeros((dim, dim, dim))
    for (i, j, k), val in c_entries.items():
        c[k - 1, i - 1, j - 1] = val
        c[k - 1, j - 1, i - 1] = -val
    g = np.array([g_rows[i] for i in range(1, dim + 1)])
    jmat = np.array([j_rows[i] for i in range(1, dim + 1)])
    return _make_scenario(dim, c, g, jmat, name, expected_class)


def _sample_row(s: TrajectorySample) -> list[float]:
    n = s.g.shape[0]
    row = [s.t]
    row.extend(s.g[i, j] for i in range(n) for j in range(i, n))
    row.extend(s.j.ravel())
    row.extend(
        [
            s.norm_rm,
            s.norm_dj,
            s.norm_d2j,
            s.norm_n,
            s.norm_domega,
            s.compat_residual,
            s.jsq_residual,
            s.min_eig_g,
            s.t_half_dj,
            s.t_rm,
        ]
    )
    return row


def _csv_header(dim: int) -> list[str]:
    cols = ["t"]
    cols.extend(f"g_{i + 1}{j + 1}" for i in range(dim) for j in range(i, dim))
    cols.extend(f"J_{i + 1}{j + 1}" for i in range(dim) for j in range(dim))
    cols.extend(CSV_DIAGNOSTIC_COLUMNS)
    return cols


def _sample_json(s: TrajectorySample) -> dict:
    return {
        "t": s.t,
        "g": s.g.tolist(),
        "J": s.j.tolist(),
        "norm_Rm": s.norm_rm,
        "norm_DJ": s.norm_dj,
        "norm_D2J": s.norm_d2j,
        "norm_N": s.norm_n,
        "norm_domega": s.norm_domega,
        "compat_residual": s.compat_residual,
        "jsq_residual": s.jsq_residual,
        "min_eig_g": s.min_eig_g,
        "t_half_DJ": s.t_half_dj,
        "t_Rm": s.t_rm,
        "t_D2J": s.t_d2j,
        "scaled_higher": s.scaled_higher,
    }


def write_trajectory(traj: Trajectory, format: str = "csv") -> str:
    """Serialise a trajectory; CSV uses the frozen column order with
    full-precision scientific notation, JSON mirrors every sample field by
    name plus the termination status."""
    if format == "csv":
        dim = traj.samples[0].g.shape[0]
        lines = [",".join(_csv_header(dim))]
        for s in traj.samples:
            lines.append(",".join(f"{v:.17e}" for v in _sample_row(s)))
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "label": traj.label,
            "status": traj.status,
            "reason": traj.reason,
            "backend": traj.backend,
            "config": {
                "dt": traj.config.dt,
                "t_end": traj.config.t_end,
                "scheme": traj.config.scheme,
                "blowup_threshold": traj.config.blowup_threshold,
                "drift_tolerance": traj.config.drift_tolerance,
                "sample_stride": traj.config.sample_stride,
                "adaptive_tol": traj.config.adaptive_tol,
                "k_max": traj.config.k_max,
            },
            "samples": [_sample_json(s) for s in traj.samples],
        }
        return json.dumps(doc, indent=1)
    raise ValueError(f"unknown trajectory format {format!r}; use csv or json")


def read_trajectory(text: str, format: str = "json") -> Trajectory:
    """Inverse of :func:`write_trajectory`; JSON round-trips bit-exactly."""
    if format == "json":
        doc = json.loads(text)
        samples = [
            TrajectorySample(
                t=s["t"],
                g=np.array(s["g"]),
                j=np.array(s["J"]),
                norm_rm=s["norm_Rm"],
                norm_dj=s["norm_DJ"],
                norm_d2j=s["norm_D2J"],
                norm_n=s["norm_N"],
                norm_domega=s["norm_domega"],
                compat_residual=s["compat_residual"],
                jsq_residual=s["jsq_residual"],
                min_eig_g=s["min_eig_g"],
                t_half_dj=s["t_half_DJ"],
                t_rm=s["t_Rm"],
                t_d2j=s["t_D2J"],
                scaled_higher=dict(s["scaled_higher"]),
            )
            for s in doc["samples"]
        ]
        config = IntegratorConfig(**doc["config"])
        return Trajectory(
            label=doc["label"],
            status=doc["status"],
            reason=doc["reason"],
            samples=samples,
            config=config,
            backend=doc["backend"],
        )
    if format == "csv":
        return _read_csv(text)
    raise ValueError(f"unknown trajectory format {format!r}; use csv or json")


def _read_csv(text: str) -> Trajectory:
    """Reload the frozen CSV columns.  Fields outside the CSV contract
    (termination status, config, t_D2J and higher scaled norms) are not
    stored in CSV and come back as placeholders."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    n_g = sum(1 for col in header if col.startswith("g_"))
    dim = int(round((np.sqrt(8 * n_g + 1) - 1) / 2))
    samples = []
    for ln in lines[1:]:
        vals = [float(v) for v in ln.split(",")]
        pos = 0
        t = vals[pos]
        pos += 1
        g = np.zeros((dim, dim))
        for i in range(dim):
            for j in range(i, dim):
                g[i, j] = g[j, i] = vals[pos]
                pos += 1
        jmat = np.array(vals[pos : pos + dim * dim]).reshape(dim, dim)
        pos += dim * dim
        diag = vals[pos : pos + len(CSV_DIAGNOSTIC_COLUMNS)]
        samples.append(
            TrajectorySample(
                t=t,
                g=g,
                j=jmat,
                norm_rm=diag[0],
                norm_dj=diag[1],
                norm_d2j=diag[2],
                norm_n=diag[3],
                norm_domega=diag[4],
                compat_residual=diag[5],
                jsq_residual=diag[6],
                min_eig_g=diag[7],
                t_half_dj=diag[8],
                t_rm=diag[9],
                t_d2j=0.0,
            )
        )
    return Trajectory(
        label="csv",
        status="unknown",
        reason="loaded from csv",
        samples=samples,
        config=IntegratorConfig(),
        backend="unknown",
    )
