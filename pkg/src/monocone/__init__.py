"""Joint spectral analysis of finite families of order-preserving homogeneous maps on the standard cone."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    DimensionTooLarge,
    EvalOverflow,
    FamilyFormatError,
    MonoconeError,
    ParseError,
    SemanticError,
)
from .expr import ZERO, Atom, Geo, MapDef, Max, Min, Sum, Zero, atom, classify, eval_map, support_transition
from .family import Family, format_family, load_family, parse_family
from .inclusion import (
    GreedyMaxNorm,
    GreedyMinNorm,
    PeriodicWord,
    RandomUniform,
    lyapunov_exponent,
    simulate,
)
from .joint import (
    BoundsReport,
    Stable,
    SubradiusReport,
    Unknown,
    check_selectable_stability,
    gsr_lower,
    jsr_bounds,
    partial_jsr,
    subradius_bounds,
    verify_certificate,
)
from .norms import barabanov_norm_eval, extremal_norm_eval, verify_extremal
from .spectral import RadiusBracket, collatz_wielandt_lower, cone_spectral_radius, map_norm
from .structure import (
    PartPreorder,
    boundedness_probe,
    graph_irreducibility,
    invariant_faces,
    is_irreducible,
    is_primitive,
    part_preorder,
)
