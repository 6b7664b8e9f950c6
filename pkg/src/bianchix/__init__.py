"""Exact Bianchi IX heat-coefficient densities, their period form, numeric
Monte Carlo verifiers, and the matching Grothendieck-class / point-count
toolkit."""

from .exprs import (
    AlgebraError,
    Expr,
    GammaRep,
    GaussianRational,
    Mat4,
    QContext,
    gamma_rep,
    gr,
    mu,
    om,
    u,
    var_from_name,
    var_name,
    xi,
    zeta,
    PI,
    SIN_ETA,
    COS_ETA,
    SIN_PSI,
    COS_PSI,
)

__version__ = "0.1.0"
