"""Commuting contractions on C^3: a von Neumann inequality failure certificate and explicit unitary power dilations."""

from .certify import (
    FailureCertificate,
    VnReport,
    certify_matrix_vn_failure,
    check_scalar_vn,
    failing_polynomial,
    reduce_linear_to_single,
)
from .dilation import (
    CornerUnitary,
    DilationResult,
    TensorUnitary,
    UnitaryTripleResult,
    corner_unitary,
    dilate_triple,
    dilate_unit_nilpotent_triple,
    isometric_coextension_single,
    three_vector_unitaries,
    verify_power_dilation,
)
from .errors import (
    CapacityError,
    DegeneracyError,
    DegenerateInputError,
    DomainError,
    InvalidInputError,
    NumericError,
    StructureError,
    VNDilateError,
)
from .polynomials import (
    MatrixPolynomial,
    TorusSupEstimate,
    evaluate_matrix_tuple,
    evaluate_scalar_point,
    mobius,
    mobius_inverse,
    mobius_of_matrix,
    sample_sup_composed,
    sup_norm_torus,
)
from .tuples import (
    CommutingTuple,
    CounterexampleParams,
    NilpotentStructure,
    ScalarNilpotentSplit,
    build_counterexample,
    decompose_nilpotents,
    random_commuting_contractions,
    split_scalar_nilpotent,
)

__version__ = "0.1.0"
