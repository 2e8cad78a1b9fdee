"""Point transformations of differential-equation families.

The package provides an exact expression kernel, jet prolongation of point
transformations, form-preservation checks with induced coefficient actions,
and the Laplace and contact invariants of the linear hyperbolic equation,
plus a small session-file language and a command line front end.
"""

from .errors import (
    AssumptionViolationError,
    DegenerateTransformationError,
    EqvError,
    EvaluationError,
    ParseError,
    SingularTransformationError,
    TheoremPreconditionError,
    UndefinedInvariantError,
    UnknownFamilyError,
    UnsupportedAtomError,
    VariableMismatchError,
    ZeroDenominatorError,
)
from .expressions import (
    ONE,
    ZERO,
    Antideriv,
    Atom,
    DependencySet,
    Expression,
    Func,
    Jet,
    Log,
    Monomial,
    Param,
    Var,
    antiderivative,
    as_atom,
    as_expression,
    collect,
    dependency_closure,
    exp,
    expr_prod,
    expr_sum,
    fraction,
    from_monomial,
    from_terms,
    func,
    jet,
    log,
    normalize,
    param,
    partial,
    polynomial_jets,
    closure_jets,
    sign_canonical,
    substitute,
    substitute_functions,
    var,
)

from .prolongation import (
    PointTransformation,
    ProlongedMap,
    identity_transformation,
    total_derivative,
    transform_derivatives,
    transform_equation,
)
from .families import (
    EQUIVALENCE,
    NOT_EQUIVALENCE,
    CoefficientSlot,
    EquationFamily,
    InducedAction,
    MatchFailure,
    MatchReport,
    TheoremCheckResult,
    catalog,
    catalog_names,
    check_equivalence,
    compose,
    match,
    theorem_instance_check,
)
from .hyperbolic import (
    ContactInvarianceResult,
    HyperbolicEquation,
    InvariantReport,
    Reduction,
)
from .oracle import (
    DEFAULT_SEED,
    CheckResult,
    Instantiation,
    PolyFunc,
    UPoly,
    check_identity,
    check_zero,
    draw_point,
    evaluate,
    fd_total,
    required_point_names,
)
from .parser import Session, parse, parse_expression

__version__ = "0.1.0"

