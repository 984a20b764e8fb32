"""Multi-snapshot sparse Bayesian learning for DOA estimation on a uniform
linear array, with classical baselines and a Monte Carlo benchmark harness."""

from .array_model import (
    AngularGrid,
    ArrayGeometry,
    SimulatedSnapshots,
    SourceScenario,
    build_transfer_matrix,
    sample_covariance,
    simulate_snapshots,
    steering_vector,
)
from .baselines import (
    AngularSpectrum,
    DoaEstimate,
    cbf_spectrum,
    exhaustive_ml,
    music_spectrum,
    pick_peaks,
    spectrum_to_csv,
)
from .bench import (
    ExperimentConfig,
    MethodSpec,
    RmseSummary,
    TrialRecord,
    convergence_study,
    emit,
    histogram,
    load_config,
    parse_config_text,
    rmse,
    run_monte_carlo,
    summarize,
    timing_study,
)
from .sbl_core import (
    NumericalError,
    SblConfig,
    SblResult,
    convergence_epsilon,
    evidence_gradient_gamma,
    gamma_update_msbl,
    gamma_update_sbl,
    gamma_update_sbl1,
    inverse_model_covariance,
    log_evidence,
    model_covariance,
    noise_update_em,
    noise_update_projection,
    posterior_covariance,
    posterior_rows,
    run_sbl,
    select_active_set,
)

__version__ = "0.1.0"
