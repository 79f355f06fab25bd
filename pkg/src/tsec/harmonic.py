"""Adapted metrics that make the flux form of a sectioned flow harmonic.

Given a volume-preserving field X transverse to the kernel foliation of a
closed 1-form dF, the flow is first rescaled to X̃ = X/dF(X) (unit angular
speed) and the volume rescaled to Ω̃ = dF(X)·Ω, which leaves the flux form
θ = i_X Ω unchanged.  The adapted metric g then declares

  * g(X̃, X̃) = 1,
  * X̃ orthogonal to ker dF,
  * the flat Euclidean structure on ker dF, conformally scaled pointwise
    so that the Riemannian volume of g equals Ω̃.

With these choices g(X̃, ·) = dF exactly, hence closed, so θ is both
closed (volume invariance) and co-closed (⋆_g θ = ± dF) for g: the flux
form is harmonic for a metric built in closed form from (X, F, Ω).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    StarIdentity,
    exterior_derivative,
    flat,
    harmonic_residuals,
    interior_product,
    lie_derivative_volume,
    star_identity_check,
)
from .fields import (
    DifferentialForm,
    MetricField,
    ResidualReport,
    ScalarField,
    VectorField,
    residual_report,
)

__all__ = [
    "AdaptedMetric",
    "HarmonicityReport",
    "adapted_metric",
    "certify_harmonicity",
    "frobenius_residual",
    "nabla_symmetry_residual",
    "section_pairing",
]


@dataclass
class AdaptedMetric:
    """Closed-form metric adapted to a transverse angle function.

    Carries the reparametrized field X̃ and volume Ω̃, the conformal scale
    λ applied on ker dF, and the construction residuals: closedness of
    g(X̃, ·) and the volume match ‖vol_g − Ω̃‖.
    """

    metric: MetricField
    scale: ScalarField
    unit_field: VectorField
    reparam_volume: DifferentialForm
    covector_form: DifferentialForm
    flat_closedness: ResidualReport
    volume_match: ResidualReport
    margin: float


def adapted_metric(X, angle, volume, invariance_tol=1e-8):
    """Build the adapted metric for (X, F, Ω); raises on broken preconditions.

    Preconditions: min dF(X) > 0 (transversality) and ‖d i_X Ω‖ below
    `invariance_tol` (the flow preserves Ω).
    """
    n = X.dimension
    if volume.degree != n or volume.dimension != n:
        raise ValueError("expected a top-degree volume form")
    if not volume.is_volume_form():
        raise ValueError("volume density must be positive")
    margin = angle.margin(X)
    if margin <= 0.0:
        raise ValueError(
            f"kernel of the angle differential is not transverse to the flow "
            f"(margin {margin:.3e})"
        )
    invariance = residual_report(lie_derivative_volume(X, volume))
    if invariance.sup > invariance_tol:
        raise ValueError(
            f"flow does not preserve the volume form (L_X residual sup {invariance.sup:.3e})"
        )
    rate = angle.pairing(X)                      # dF(X) > 0
    unit_field = VectorField([c / rate for c in X.components])
    density = volume.coefficient(range(n)) * rate
    omega = angle.differential(X.resolution)     # dF, the covector of X̃
    w = np.stack([omega.coefficient((i,)).values for i in range(n)], axis=-1)
    xt = unit_field.stack()
    eye = np.eye(n)
    proj = eye - xt[..., :, None] * w[..., None, :]          # v ↦ v − dF(v)·X̃
    gram = np.einsum("...ki,...kj->...ij", proj, proj)
    rank_one = w[..., :, None] * w[..., None, :]
    unit_scale_det = _det(rank_one + gram)
    lam_vals = (density.values**2 / unit_scale_det) ** (1.0 / (n - 1))
    metric = MetricField(rank_one + lam_vals[..., None, None] * gram)
    covector = flat(metric, unit_field)
    flat_closedness = residual_report(exterior_derivative(covector))
    volume_match = residual_report(metric.sqrt_det() - density)
    return AdaptedMetric(
        metric=metric,
        scale=ScalarField(lam_vals),
        unit_field=unit_field,
        reparam_volume=DifferentialForm.volume(density),
        covector_form=covector,
        flat_closedness=flat_closedness,
        volume_match=volume_match,
        margin=float(margin),
    )


def _det(matrix):
    n = matrix.shape[-1]
    m = matrix
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


@dataclass
class HarmonicityReport:
    """Outcome of the construct-metric-then-check-harmonicity pipeline."""

    margin: float
    theta_closed: ResidualReport
    star_theta_closed: ResidualReport
    flat_closedness: ResidualReport
    volume_match: ResidualReport
    star_identity: StarIdentity
    tolerance: float
    success: bool
    adapted: AdaptedMetric

    def to_dict(self):
        return {
            "margin": self.margin,
            "residuals": {
                "d_theta": self.theta_closed.sup,
                "d_star_theta": self.star_theta_closed.sup,
                "flat_closedness": self.flat_closedness.sup,
                "volume_match": self.volume_match.sup,
                "star_identity": self.star_identity.residual.sup,
                "measured_sign": self.star_identity.sign,
            },
            "tolerance": self.tolerance,
            "verdict": "harmonic" if self.success else "not-harmonic",
        }


def certify_harmonicity(X, angle, volume, tol=1e-8):
    """Verify that the flux form i_X Ω is harmonic for the adapted metric.

    Success requires both residuals ‖dθ‖ and ‖d ⋆_g θ‖ below `tol` in sup
    norm; the report also carries the construction residuals and the
    measured contraction-identity sign.
    """
    adapted = adapted_metric(X, angle, volume, invariance_tol=tol)
    theta = interior_product(X, volume)
    d_res, dstar_res = harmonic_residuals(adapted.metric, theta)
    star = star_identity_check(
        adapted.metric, adapted.unit_field, adapted.reparam_volume,
        volume_tol=max(tol, 10.0 * adapted.volume_match.sup),
    )
    success = d_res.sup < tol and dstar_res.sup < tol
    return HarmonicityReport(
        margin=adapted.margin,
        theta_closed=d_res,
        star_theta_closed=dstar_res,
        flat_closedness=adapted.flat_closedness,
        volume_match=adapted.volume_match,
        star_identity=star,
        tolerance=tol,
        success=success,
        adapted=adapted,
    )


def frobenius_residual(omega):
    """Integrability residual ‖ω ∧ dω‖ of a 1-form (identically zero on T²)."""
    if omega.degree != 1:
        raise ValueError("expected a 1-form")
    if omega.dimension == 2:
        return ResidualReport(0.0, 0.0, omega.resolution)
    from .calculus import wedge

    return residual_report(wedge(omega, exterior_derivative(omega)))


def nabla_symmetry_residual(metric, X):
    """Closedness residual of X^♭ = g(X, ·).

    Vanishes iff v ↦ ∇_v X is a symmetric operator for the Levi-Civita
    connection of g; no Christoffel symbols are assembled.
    """
    return residual_report(exterior_derivative(flat(metric, X)))


def section_pairing(section, theta, closed_tol=1e-8):
    """Integral of a closed (n−1)-form over a cross-section mesh.

    The mesh orientation is induced by requiring (X-direction, tangent
    frame) to be positively oriented; concretely the sign is fixed so the
    frame (dF-positive normal, tangents) has positive determinant, which
    matches orienting by any transverse field with dF(X) > 0.  For closed
    θ the value depends only on the classes of θ and the section.
    """
    n = theta.dimension
    if theta.degree != n - 1:
        raise ValueError(f"expected a form of degree {n - 1}")
    d_res = residual_report(exterior_derivative(theta))
    if d_res.sup > closed_tol:
        raise ValueError(f"form is not closed (d-residual sup {d_res.sup:.3e})")
    mesh = section.mesh_lifted
    tangents = section.tangents()
    # transverse direction with positive dF-pairing: the Euclidean sharp of dF;
    # det[normal, tangents] then has the same sign as det[X, tangents] for any
    # transverse X with dF(X) > 0.
    omega = section.angle.differential(theta.resolution)
    normal = np.stack(
        [omega.coefficient((i,)).evaluate(mesh) for i in range(n)], axis=-1
    )
    if n == 2:
        t = tangents[0]
        integrand = sum(
            theta.coefficient((i,)).evaluate(mesh) * t[..., i] for i in range(2)
        )
        frame_det = normal[..., 0] * t[..., 1] - normal[..., 1] * t[..., 0]
    else:
        t1, t2 = tangents
        integrand = np.zeros(mesh.shape[:-1])
        for (a, b) in ((0, 1), (0, 2), (1, 2)):
            coeff = theta.coefficient((a, b)).evaluate(mesh)
            integrand = integrand + coeff * (
                t1[..., a] * t2[..., b] - t1[..., b] * t2[..., a]
            )
        frame_det = _det(np.stack([normal, t1, t2], axis=-2))
    orientation = _mean_sign(frame_det)
    return float(orientation * integrand.mean())


def _mean_sign(values):
    s = float(np.sign(values.mean()))
    return s if s != 0.0 else 1.0
