"""Black-box optimization of discretized continuous variables.

A factorization-machine surrogate is retrained from scratch on all data each
iteration, converted to a QUBO with one-hot constraint penalties, and
minimized by restarted simulated annealing; the repaired, deduplicated
candidate gets the next evaluation.  Level-coverage-aware initial designs
(Latin hypercube / scrambled Sobol' with one sample per level) remove the
blind spots an i.i.d. uniform start leaves in the surrogate.
"""

from .annealer import AnnealConfig, SampleResult, brute_force_min, sample, single_flip_delta
from .blackbox import (
    BlackBoxProblem,
    EvalLedger,
    EvaluationError,
    evaluate,
    external_adapter,
    make_problem,
    synthetic_suite,
)
from .encoding import DiscretizationGrid, decode, encode, repair_decode, validate_onehot
from .initdesign import (
    CoverageReport,
    DesignSpec,
    coverage_counts,
    expected_uncovered,
    generate_design,
    lhs_design,
    sobol_design,
    uniform_design,
)
from .optimizer import (
    AggregateSummary,
    LoopConfig,
    RunRecord,
    aggregate,
    dedupe_perturb,
    derive_seed,
    random_search,
    run,
)
from .qubo import (
    QuboMatrix,
    add_one_hot_penalty,
    energy,
    from_fm_params,
    load_coord,
    one_hot_penalty_weight,
    save_coord,
)
from .surrogate import (
    Dataset,
    FmParams,
    TrainConfig,
    gradient,
    init_params,
    loss,
    loss_gradient,
    predict,
    train,
)

__version__ = "0.1.0"
