"""Exact and sampled checks of optional-sampling statements on countable probability spaces."""

from .analysis import (
    HOLDS,
    STATEMENTS,
    UNDECIDABLE,
    VIOLATED,
    BlowupCurve,
    GapReport,
    StatementVerdict,
    StoppingFamilyGenerator,
    UIDiagnostic,
    check_liminf_integrability,
    check_statement_I,
    check_statement_II,
    check_statement_III,
    check_statement_V,
    check_ui,
    falsify_statement_IV,
    hierarchy_consistent,
    limit_existence_check,
    martingale_check,
    randomized_blowup_curve,
    run_hierarchy,
    witness_gap,
)
from .errors import (
    HorizonExceeded,
    IndeterminateTail,
    MartLabError,
    MissingUniform,
    NotApplicable,
    NotTerminating,
    PreconditionFailed,
    SpecError,
    ZeroMassBlock,
)
from .examples import ExampleDescriptor, build, expected_properties
from .lattice import StoppedLaw, stopped_law, walk_marginal_means
from .measure import (
    INF,
    Atom,
    CountableSpace,
    DivergenceCertificate,
    Exact,
    Partition,
    Policy,
    RandomVariable,
    Truncated,
    UniformBlock,
    conditional_expectation,
    enumerate_atoms,
    expectation,
    partial_sums,
    verify_certificate,
)
from .montecarlo import Estimate, estimate_expectation, estimate_stopped, sample_atom
from .process import (
    GenerativeProcess,
    PathProcess,
    PiecewiseConstantPath,
    limit_at_infinity,
    liminf_abs,
    marginal_means,
    simple_random_walk,
    stop,
    value_at,
)
from .stopping import (
    Const,
    HitAbove,
    HitAbsAbove,
    HitAbsBelow,
    Max,
    Min,
    NearLiminf,
    ReciprocalU,
    StoppingSpec,
    TwoPoint,
    ValueEvent,
    adaptedness_check,
    evaluate,
    extend_with_uniform,
    finiteness_check,
)

__version__ = "0.1.0"
