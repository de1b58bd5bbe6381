"""Truncated path signatures, tree-indexed vector-field calculus and signature
recovery from controlled differential equation solutions."""
from ._validation import NumericOverflowError, UnsupportedOrderError, parse_word
from .cde import (
    CDEProblem,
    SolverConfig,
    SolverError,
    SolveResult,
    solve,
    solve_batch,
    taylor_predict,
    taylor_word_operator,
)
from .independence import (
    CertificateConfig,
    FieldFamily,
    RankReport,
    check_cyclic_word_identity,
    check_ladder_collision,
    independence_certificate,
    numerical_rank,
    sample_matrix,
)
from .jets import Jet
from .observables import CoordinateProjection, ExpLinear, Monomial, QuadraticForm, projections
from .reconstruction import (
    ReconstructionConfig,
    ReconstructionReport,
    SingularSystemError,
    build_system,
    compare,
    r_derivative_at_zero,
    reconstruct,
)
from .signature import (
    PiecewiseLinearPath,
    TruncatedTensor,
    chen_concat,
    get_coefficient,
    path_signature,
    random_walk_path,
    segment_signature,
    shuffle,
    words,
)
from .trees import (
    LabeledRecursiveTree,
    RootedOpTree,
    apply_word_direct,
    apply_word_via_trees,
    enumerate_rooted_ops,
    enumerate_trees,
    eval_tree_vf,
    sum_tree_field,
)
from .vector_fields import (
    LinearModel,
    NeuralDepth1Model,
    NeuralDepth2ExpModel,
    ScalarPolynomialModel,
    ScaledModel,
    VectorFieldModel,
    model_from_dict,
    sample_model,
)

__all__ = [
    "NumericOverflowError",
    "UnsupportedOrderError",
    "parse_word",
    "CDEProblem",
    "SolverConfig",
    "SolverError",
    "SolveResult",
    "solve",
    "solve_batch",
    "taylor_predict",
    "taylor_word_operator",
    "CertificateConfig",
    "FieldFamily",
    "RankReport",
    "check_cyclic_word_identity",
    "check_ladder_collision",
    "independence_certificate",
    "numerical_rank",
    "sample_matrix",
    "Jet",
    "CoordinateProjection",
    "ExpLinear",
    "Monomial",
    "QuadraticForm",
    "projections",
    "ReconstructionConfig",
    "ReconstructionReport",
    "SingularSystemError",
    "build_system",
    "compare",
    "r_derivative_at_zero",
    "reconstruct",
    "PiecewiseLinearPath",
    "TruncatedTensor",
    "chen_concat",
    "get_coefficient",
    "path_signature",
    "random_walk_path",
    "segment_signature",
    "shuffle",
    "words",
    "LabeledRecursiveTree",
    "RootedOpTree",
    "apply_word_direct",
    "apply_word_via_trees",
    "enumerate_rooted_ops",
    "enumerate_trees",
    "eval_tree_vf",
    "sum_tree_field",
    "LinearModel",
    "NeuralDepth1Model",
    "NeuralDepth2ExpModel",
    "ScalarPolynomialModel",
    "ScaledModel",
    "VectorFieldModel",
    "model_from_dict",
    "sample_model",
]

__version__ = "0.1.0"
