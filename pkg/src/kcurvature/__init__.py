"""Sectional K-curvature of statistical structures.

A statistical structure on a vector space is a scalar product ``g`` and a
totally symmetric cubic form ``C``; the difference tensor ``K`` is defined by
``C(X, Y, Z) = g(X, K(Y, Z))``.  The package computes the sectional
K-curvature ``k(X ^ Y) = g([K, K](X, Y) Y, X)``, maximizers of
``Phi(X) = C(X, X, X)``, adapted bases of constant-curvature structures,
derivation-based classifiers, and finite-difference checks of the connection
identities on coordinate charts.
"""

from .adapted_basis import (
    AdaptedDecomposition,
    decompose,
    diagonalize_commuting,
    is_constant_curvature,
    mu_from_lambda,
)
from .errors import ConvergenceError, DegeneratePlaneError, DimensionError, NotConstantCurvatureError
from .families import (
    FamilySpec,
    make_diagonal,
    make_h_umbilical,
    make_lambda_quarter,
    make_random,
    make_tracefree_canonical,
    tracefree_canonical_params,
    tracefree_part,
)
from .identities import (
    SkewEndo,
    bracket_derivation_on_k,
    characterize_canonical,
    derivation_on_k,
    negativity_witness,
    rigidity_probe,
)
from .phi_optimizer import (
    CriticalPoint,
    critical_point,
    eigenframe_at,
    find_local_max,
    grid_oracle_max,
    phi,
    track_critical_frame,
)
from .tensor_core import (
    Metric,
    Plane,
    StatStructure,
    SymCubic,
    bracket_kk,
    curvature_like_residuals,
    k_from_c,
    sectional_k_curvature,
    trace_vector,
)

__version__ = "0.1.0"
