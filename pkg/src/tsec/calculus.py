"""Exterior calculus on flat tori: d, wedge, interior product, Hodge star.

Conventions
-----------
Orientation is fixed by dx^1 ∧ ... ∧ dx^n.  The Hodge star follows the
pointwise formula

    ⋆(dx^I) = sqrt(det g) · sum_J det(g^{-1}[I, J]) · ε(J, J^c) dx^{J^c}

over increasing multi-indices J, where ε(J, J^c) is the sign of the
permutation (J, J^c) of (1..n).  The codifferential on k-forms is the
sign-explicit composition δ = (−1)^{n(k+1)+1} ⋆ d ⋆ and the Laplacian is
Δ = dδ + δd, so Δ is positive on functions (Δ sin(2πx) = 4π² sin(2πx)).

The contraction of a volume form with a vector field satisfies
⋆_g(i_X vol_g) = ± g(X, ·) with a global sign depending only on the
dimension and the star convention; :func:`star_identity_check` measures
and reports that sign instead of hard-coding it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    DifferentialForm,
    MetricField,
    ResidualReport,
    ScalarField,
    VectorField,
    multi_indices,
    permutation_sign,
    residual_report,
)

__all__ = [
    "StarIdentity",
    "codifferential",
    "cohomology_periods",
    "exterior_derivative",
    "flat",
    "harmonic_residuals",
    "hodge_star",
    "interior_product",
    "is_harmonic",
    "laplacian",
    "lie_derivative_volume",
    "star_identity_check",
    "wedge",
]


def exterior_derivative(alpha):
    """Exterior derivative of a degree-k form, k < n, by spectral differentiation."""
    n, k = alpha.dimension, alpha.degree
    if k >= n:
        raise ValueError("exterior derivative of a top-degree form is not defined")
    out = {key: np.zeros((alpha.resolution,) * n) for key in multi_indices(n, k + 1)}
    for index, coeff in alpha.coefficients.items():
        for axis in range(n):
            if axis in index:
                continue
            sign = permutation_sign((axis,) + index)
            merged = tuple(sorted((axis,) + index))
            out[merged] = out[merged] + sign * coeff.derivative(axis).values
    return DifferentialForm(n, k + 1, out, resolution=alpha.resolution)


def wedge(alpha, beta):
    """Wedge product α ∧ β with coordinate sign bookkeeping."""
    if alpha.dimension != beta.dimension or alpha.resolution != beta.resolution:
        raise ValueError("forms live on different grids")
    n = alpha.dimension
    degree = alpha.degree + beta.degree
    if degree > n:
        raise ValueError(f"wedge degree {degree} exceeds dimension {n}")
    out = {key: np.zeros((alpha.resolution,) * n) for key in multi_indices(n, degree)}
    for ia, ca in alpha.coefficients.items():
        for ib, cb in beta.coefficients.items():
            sign = permutation_sign(ia + ib)
            if sign == 0:
                continue
            merged = tuple(sorted(ia + ib))
            out[merged] = out[merged] + sign * (ca.values * cb.values)
    return DifferentialForm(n, degree, out, resolution=alpha.resolution)


def interior_product(X, alpha):
    """Contraction i_X α of a degree-k form, k >= 1, with a vector field."""
    if alpha.degree < 1:
        raise ValueError("interior product of a 0-form is not defined")
    if X.dimension != alpha.dimension or X.resolution != alpha.resolution:
        raise ValueError("field and form live on different grids")
    n, k = alpha.dimension, alpha.degree
    out = {key: np.zeros((alpha.resolution,) * n) for key in multi_indices(n, k - 1)}
    for index, coeff in alpha.coefficients.items():
        for pos, axis in enumerate(index):
            rest = index[:pos] + index[pos + 1 :]
            contrib = (-1.0) ** pos * X.components[axis].values * coeff.values
            out[rest] = out[rest] + contrib
    return DifferentialForm(n, k - 1, out, resolution=alpha.resolution)


def _inverse_minor(ginv, rows, cols):
    """Determinant of the inverse-metric submatrix g^{-1}[rows, cols]."""
    k = len(rows)
    if k == 0:
        return 1.0
    if k == 1:
        return ginv[..., rows[0], cols[0]]
    if k == 2:
        return (
            ginv[..., rows[0], cols[0]] * ginv[..., rows[1], cols[1]]
            - ginv[..., rows[0], cols[1]] * ginv[..., rows[1], cols[0]]
        )
    a = ginv[..., rows[0], cols[0]] * (
        ginv[..., rows[1], cols[1]] * ginv[..., rows[2], cols[2]]
        - ginv[..., rows[1], cols[2]] * ginv[..., rows[2], cols[1]]
    )
    b = ginv[..., rows[0], cols[1]] * (
        ginv[..., rows[1], cols[0]] * ginv[..., rows[2], cols[2]]
        - ginv[..., rows[1], cols[2]] * ginv[..., rows[2], cols[0]]
    )
    c = ginv[..., rows[0], cols[2]] * (
        ginv[..., rows[1], cols[0]] * ginv[..., rows[2], cols[1]]
        - ginv[..., rows[1], cols[1]] * ginv[..., rows[2], cols[0]]
    )
    return a - b + c


def hodge_star(g, alpha):
    """Pointwise Hodge star of α for the metric field g (SPD checked)."""
    if g.dimension != alpha.dimension or g.resolution != alpha.resolution:
        raise ValueError("metric and form live on different grids")
    n, k = alpha.dimension, alpha.degree
    ginv = g.inverse()
    sqrt_det = np.sqrt(g.det())
    out = {key: np.zeros((alpha.resolution,) * n) for key in multi_indices(n, n - k)}
    full = tuple(range(n))
    for J in multi_indices(n, k):
        complement = tuple(i for i in full if i not in J)
        eps = permutation_sign(J + complement)
        for I, coeff in alpha.coefficients.items():
            minor = _inverse_minor(ginv, I, J)
            out[complement] = out[complement] + coeff.values * sqrt_det * minor * eps
    return DifferentialForm(n, n - k, out, resolution=alpha.resolution)


def codifferential(g, alpha):
    """δα = (−1)^{n(k+1)+1} ⋆ d ⋆ α on k-forms, k >= 1."""
    if alpha.degree < 1:
        raise ValueError("codifferential of a 0-form is not defined")
    n, k = alpha.dimension, alpha.degree
    sign = (-1.0) ** (n * (k + 1) + 1)
    return sign * hodge_star(g, exterior_derivative(hodge_star(g, alpha)))


def laplacian(g, alpha):
    """Hodge Laplacian Δ = dδ + δd (terms of invalid degree contribute zero)."""
    n, k = alpha.dimension, alpha.degree
    total = DifferentialForm.zero(n, k, alpha.resolution)
    if k >= 1:
        total = total + exterior_derivative(codifferential(g, alpha))
    if k < n:
        total = total + codifferential(g, exterior_derivative(alpha))
    return total


def flat(g, X):
    """The 1-form g(X, ·) with coefficients g_ij X^j."""
    if g.dimension != X.dimension or g.resolution != X.resolution:
        raise ValueError("metric and field live on different grids")
    stacked = X.stack()
    covector = np.einsum("...ij,...j->...i", g.matrix, stacked)
    coeffs = {(i,): covector[..., i] for i in range(X.dimension)}
    return DifferentialForm(X.dimension, 1, coeffs, resolution=X.resolution)


def lie_derivative_volume(X, volume):
    """L_X Ω = d(i_X Ω) for a top-degree form; zero iff the flow preserves Ω."""
    if volume.degree != volume.dimension:
        raise ValueError("expected a top-degree form")
    return exterior_derivative(interior_product(X, volume))


def harmonic_residuals(g, alpha):
    """Residual pair (‖dα‖, ‖d ⋆_g α‖); both vanish iff α is g-harmonic."""
    n = alpha.dimension
    if alpha.degree < n:
        d_res = residual_report(exterior_derivative(alpha))
    else:
        d_res = ResidualReport(0.0, 0.0, alpha.resolution)
    starred = hodge_star(g, alpha)
    if starred.degree < n:
        dstar_res = residual_report(exterior_derivative(starred))
    else:
        dstar_res = ResidualReport(0.0, 0.0, alpha.resolution)
    return d_res, dstar_res


def is_harmonic(g, alpha, tol=1e-8):
    d_res, dstar_res = harmonic_residuals(g, alpha)
    return d_res.sup < tol and dstar_res.sup < tol


@dataclass(frozen=True)
class StarIdentity:
    """Measured sign s and residual of ⋆_g(i_X vol_g) − s · g(X, ·)."""

    sign: int
    residual: ResidualReport
    volume_mismatch: float

    def to_dict(self):
        return {
            "sign": self.sign,
            "residual": self.residual.to_dict(),
            "volume_mismatch": self.volume_mismatch,
        }


def star_identity_check(g, X, volume, volume_tol=1e-8):
    """Check ⋆_g(i_X Ω) = s · g(X, ·) where Ω must equal the volume form of g.

    The global sign s ∈ {+1, −1} depends only on the dimension and the star
    convention; it is measured, not assumed.  Raises if the density of Ω
    does not match sqrt(det g).
    """
    if volume.degree != volume.dimension:
        raise ValueError("expected a top-degree form")
    density = volume.coefficient(range(volume.dimension))
    mismatch = float(np.abs(density.values - np.sqrt(g.det())).max())
    if mismatch > volume_tol:
        raise ValueError(
            f"volume form does not match the metric volume (sup mismatch {mismatch:.3e})"
        )
    starred = hodge_star(g, interior_product(X, volume))
    covector = flat(g, X)
    plus = (starred - covector).sup_norm()
    minus = (starred + covector).sup_norm()
    sign = 1 if plus <= minus else -1
    residual = residual_report(starred - float(sign) * covector)
    return StarIdentity(sign=sign, residual=residual, volume_mismatch=mismatch)


def cohomology_periods(alpha, closed_tol=1e-8):
    """Periods of a closed form of degree 1 or n−1 over the coordinate subtori.

    On the flat torus the period over the subtorus spanned by a multi-index
    I is the grid mean of the coefficient a_I (exact for trigonometric
    polynomials); the de Rham class vanishes iff all periods do.
    """
    n, k = alpha.dimension, alpha.degree
    if k not in (1, n - 1):
        raise ValueError(f"periods are defined for degrees 1 and {n - 1}, got {k}")
    d_res = residual_report(exterior_derivative(alpha))
    if d_res.sup > closed_tol:
        raise ValueError(f"form is not closed (d-residual sup {d_res.sup:.3e})")
    return np.array([alpha.coefficients[key].mean() for key in multi_indices(n, k)])
