"""Self-calibrating direction-of-arrival estimation for movable-antenna arrays."""

from .calibration import (
    AOConfig,
    CalibrationState,
    ao_calibrate,
    build_q,
    constraint_matrix,
    extract_antenna_error,
    regularize,
    solve_error_steering,
)
from .estimators import MUSIC, SelfCalibratingMUSIC
from .geometry import (
    ArrayGeometry,
    GeometryConfig,
    Scenario,
    SnapshotMatrix,
    build_geometry,
    draw_scenario,
    steering_matrix,
    steering_vector,
    synthesize_snapshots,
)
from .harness import (
    ExperimentConfig,
    SweepResult,
    oracle_constrained_qp,
    run_baseline_music,
    run_sweep,
    success_rate,
    trimmed_rmse,
)
from .subspace import (
    Pseudospectrum,
    SubspaceDecomposition,
    decompose,
    exact_covariance,
    pick_peaks,
    pseudospectrum,
    sample_covariance,
)

__version__ = "0.1.0"
