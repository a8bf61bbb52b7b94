"""Sharpness-aware optimizers with adaptive perturbation blending.

Optimizer rules (sgd, sam, vasso, samar) live in `optim`, test problems and
oracles in `problems`, learning-rate schedules in `schedule`, convergence
bounds and verification tools in `analysis`, and the seeded experiment
harness plus CLI in `harness` and `cli`.
"""

from .analysis import (
    BoundInputs,
    RateFit,
    check_oracle_inequalities,
    convergence_bound,
    empirical_avg_sq_grad,
    estimate_sharpness,
    fit_rate,
    perturbed_convergence_bound,
)
from .core import (
    ConfigurationError,
    ContractViolationError,
    DegenerateRatioError,
    DivergenceDetected,
    NumericDomainError,
    StochasticOracle,
    VacuousBoundError,
    ZeroGradientError,
    axpy,
    make_rng,
    norm,
)
from .harness import (
    BoundGridSpec,
    ExperimentConfig,
    MetricsSummary,
    compute_metrics,
    emit_report,
    load_config,
    rate_recovery,
    run_bound_grid,
    run_experiment,
)
from .optim import (
    SamarConfig,
    SamarState,
    StepRecord,
    blended_gradient,
    compute_perturbation,
    samar_step,
    sam_step,
    sgd_step,
    sharpness_ratio,
    update_lambda,
    vasso_step,
)
from .problems import (
    GeneratorSpec,
    LogisticProblem,
    MlpProblem,
    QuadraticProblem,
    SyntheticDataset,
    generate_dataset,
    logistic_oracle,
    mlp_oracle,
    quadratic_oracle,
    rosenbrock_oracle,
)
from .runlog import EpochMetrics, RunLog, load_runlog, write_runlog
from .schedule import ScheduleSpec, learning_rate

__version__ = "0.1.0"
