"""Multiple p-summing norms of multilinear operators through stable-measure integrals."""

__version__ = "0.1.0"

from .errors import DomainError, ParameterError, RegimeRefusal, StableSumError
from .stable import (
    Field,
    MomentConstant,
    StableLaw,
    constant_c,
    real_cdf,
    sample_stable,
    sample_stable_vector,
)
from .multilinear import (
    CodomainSpec,
    DenseOperator,
    DiagonalOperator,
    MultilinearOperator,
    compose_diagonal,
    apply_multipliers,
    evaluate,
    hilbert_schmidt_norm,
    make_phi,
    random_dense_operator,
    random_sign_operator,
    sup_norm,
)
from .summing import (
    NormEstimate,
    Regime,
    RegimeTag,
    WeakPNorm,
    basis_lower_bound,
    estimate_pi,
    integral_moment,
    pietsch_domination_check,
    regime_classify,
    search_lower_bound,
    weak_p_norm,
)
from .asymptotics import (
    LimitOrderQuery,
    SlopeFit,
    contraction_check,
    gamma_ratio_bound,
    inclusion_ratio,
    lambda_formula,
    limit_order_fit,
    optimality_witness,
)
