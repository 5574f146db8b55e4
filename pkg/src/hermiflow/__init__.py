"""Numerical engine for the unified almost Hermitian curvature flow on
left-invariant Lie group geometries: exhaustive tensor-identity verification
plus structure-monitored ODE integration of the flow."""

from .core import available_backends, backend_name
from .catalog_io import (
    BUILTIN_NAMES,
    Scenario,
    ScenarioError,
    builtin,
    parse_scenario,
    read_trajectory,
    scenario_to_text,
    write_trajectory,
)
from .flow_tensors import (
    FlowTensorSet,
    ReductionReport,
    VariationPair,
    assemble,
    check_gauge,
    check_reduction,
    check_variation,
    flow_rhs,
)
from .frame_tensor import (
    LOWER,
    UPPER,
    Metric,
    Tensor,
    compose_j,
    contract,
    frame_norm,
    oracle_contract,
    project_j,
    project_sym_skew,
)
from .integrator import (
    BlowupVerdict,
    FlowState,
    IntegratorConfig,
    Trajectory,
    TrajectorySample,
    detect_blowup,
    diagnostics,
    integrate,
    step,
)
from .lie_geometry import (
    AlmostHermitianPair,
    Connection,
    CurvatureData,
    LieAlgebraSpec,
    compute_geometry,
    cov_derivative,
    curvature,
    dj_bundle,
    higher_rm,
    levi_civita,
    lie_derivative,
    nijenhuis,
    omega_derivatives,
    random_compatible_pair,
    standard_j,
)

__version__ = "0.1.0"
