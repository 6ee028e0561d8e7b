"""Oracle-query algorithms under a cap on coherent query depth.

Each solver runs classical-quantum hybrid circuits on a dense simulator and
charges every circuit to a :class:`QueryLedger`, which refuses any circuit
deeper than the configured limit.
"""
from .errors import (
    DegreeOverflow,
    DepthExceeded,
    HybridCutError,
    InsufficientData,
    InvalidBudget,
    InvalidInput,
    InvalidOperator,
    InvalidSize,
    InvalidWindow,
    NotApplicable,
    OutOfDomain,
    Singular,
)
from .experiments import (
    ExperimentRecord,
    SweepConfig,
    fisher_information,
    fit_scaling_exponent,
    run_sweep,
)
from .ledger import LedgerSummary, QueryLedger, new_ledger, record_circuit, summary
from .nand import (
    NandTree,
    adjacency_matrix,
    build_balanced_tree,
    evaluate_classical,
    solve_nand_interpolated,
    solve_nand_parallel,
    spectral_certificate,
)
from .polynomials import (
    BoundedPolynomial,
    StepSpec,
    certify_bounds,
    erf_poly,
    eval_poly,
    step_poly,
    window_poly,
)
from .qsvt import (
    BlockEncoding,
    OracleInput,
    apply_qsvt,
    complement_block_encoding,
    flag_probability,
    nand_block_encoding,
    sample_flag,
    scalar_value,
    threshold_block_encoding,
)
from .symmetric import (
    SymmetricFunction,
    WeightWindow,
    cut_in_half,
    estimate_hamming_weight,
    solve_symmetric,
)
from .threshold import (
    SolveResult,
    ThresholdInstance,
    amplitude_estimate,
    solve_threshold,
    solve_threshold_interpolated,
    solve_threshold_parallel,
)

__all__ = [name for name, obj in dict(globals()).items() if not name.startswith("_") and not isinstance(obj, type(errors))]
