"""Information geometry of the random-field parameter manifold.

Everything here is a closed-form function of a parameter point
theta = (mu, sigma2, beta) and the patch-covariance scalars
(||rho||_+, ||sigma_minus||_+ and their products): the Fisher metric
tensor g, its regularized inverse, the partial derivatives of g in
sigma2 and beta, the 27 Christoffel symbols (13 of which vanish
structurally), the conditional entropy with its beta-derivatives, and
the shape-operator curvatures built from the second-order Fisher
information matrix.

Conventions: coordinates are indexed (0, 1, 2) = (mu, sigma2, beta); the
neighborhood size Delta is fixed at 8 (second-order system).  All
functions are pure and cheap; nothing here touches the lattice or RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError, NonFiniteStateError, SingularMetricError
from .lattice import NEIGHBOR_COUNT, ParamPoint
from .patches import PatchStats

__all__ = [
    "MetricTensor",
    "InverseMetric",
    "ChristoffelTensor",
    "EntropyValues",
    "CurvatureReport",
    "metric_tensor",
    "inverse_metric",
    "metric_derivatives",
    "christoffel_symbols",
    "entropy",
    "curvature_report",
]

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class MetricTensor:
    """Fisher metric g(theta): 3x3 symmetric, with structural zeros
    g[0,1] = g[0,2] = 0 (mu is orthogonal to the other coordinates)."""

    g: np.ndarray


@dataclass(frozen=True)
class InverseMetric:
    """Closed-form inverse of g + lambda_reg * I (same zero pattern)."""

    ginv: np.ndarray
    lambda_reg: float


@dataclass(frozen=True)
class ChristoffelTensor:
    """Connection coefficients Gamma^k_ij, gamma[k] being the 3x3 matrix
    for upper index k.  Symmetric in the lower indices."""

    gamma: np.ndarray  # shape (3, 3, 3)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.gamma[k]


class EntropyValues(NamedTuple):
    h_beta: float
    dh_dbeta: float
    d2h_dbeta2: float


@dataclass(frozen=True)
class CurvatureReport:
    """Shape-operator curvatures plus the entropy triple at one point.

    ``second_form`` is the second-order Fisher information matrix II,
    ``shape_operator`` is P = -II (g + lambda I)^-1; Gaussian, mean and
    principal curvatures are its determinant, trace and eigenvalue real
    parts (descending).  ``has_complex_eigenvalues`` flags non-real
    spectra, since P need not be symmetric.
    """

    second_form: np.ndarray
    shape_operator: np.ndarray
    gaussian_curvature: float
    mean_curvature: float
    principal_curvatures: np.ndarray
    has_complex_eigenvalues: bool
    entropy: float
    dh_dbeta: float
    d2h_dbeta2: float


def metric_tensor(theta: ParamPoint, stats: PatchStats) -> MetricTensor:
    """Fisher metric from the tensorial (entry-sum) closed forms.

    With D = 8, sr = ||rho||_+, ss = ||sigma_minus||_+ and the Kronecker
    sums srr, srs, sss:

        g11 = (1 - b D)^2 / s2 * [1 - (2 b sr - b^2 ss) / s2]
        g22 = 1/(2 s2^2) - (2 b sr - b^2 ss)/s2^3
              + (3 b^2 srr - 3 b^3 srs + 3 b^4 sss)/s2^4
        g23 = (sr - b ss)/s2^2 - (6 b srr - 9 b^2 srs + 3 b^3 sss)/(2 s2^3)
        g33 = ss/s2 + (2 srr - 6 b srs + 3 b^2 sss)/s2^2

    and g12 = g13 = 0.
    """
    s2, b = theta.sigma2, theta.beta
    sr, ss = stats.s_rho, stats.s_sig
    srr, srs, sss = stats.s_rho_rho, stats.s_rho_sig, stats.s_sig_sig
    one_m_bd = 1.0 - b * NEIGHBOR_COUNT
    corr = 2.0 * b * sr - b * b * ss

    g = np.zeros((3, 3))
    g[0, 0] = (one_m_bd * one_m_bd / s2) * (1.0 - corr / s2)
    g[1, 1] = 0.5 / s2**2 - corr / s2**3 + (3.0 * b**2 * srr - 3.0 * b**3 * srs + 3.0 * b**4 * sss) / s2**4
    g[1, 2] = g[2, 1] = (sr - b * ss) / s2**2 - (6.0 * b * srr - 9.0 * b**2 * srs + 3.0 * b**3 * sss) / (2.0 * s2**3)
    g[2, 2] = ss / s2 + (2.0 * srr - 6.0 * b * srs + 3.0 * b**2 * sss) / s2**2
    return MetricTensor(g)


def inverse_metric(g: MetricTensor, lambda_reg: float) -> InverseMetric:
    """Closed-form inverse of the regularized metric g + lambda * I.

    The mu row decouples (g^00 = 1/g00) and the (sigma2, beta) block is a
    2x2 inverse.  Raises SingularMetricError when the block determinant
    (or g00) is below 1e-12 in magnitude after regularization.
    """
    if lambda_reg < 0.0:
        raise InvalidParameterError(f"lambda_reg must be >= 0, got {lambda_reg}")
    gr = g.g + lambda_reg * np.eye(3)
    if not np.all(np.isfinite(gr)):
        raise SingularMetricError("metric tensor has non-finite entries")
    det_block = gr[1, 1] * gr[2, 2] - gr[1, 2] ** 2
    if not math.isfinite(det_block) or abs(det_block) < _SINGULAR_TOL or abs(gr[0, 0]) < _SINGULAR_TOL:
        raise SingularMetricError(
            f"regularized metric is singular (block det {det_block:.3e}, g00 {gr[0, 0]:.3e})"
        )
    ginv = np.zeros((3, 3))
    ginv[0, 0] = 1.0 / gr[0, 0]
    ginv[1, 1] = gr[2, 2] / det_block
    ginv[2, 2] = gr[1, 1] / det_block
    ginv[1, 2] = ginv[2, 1] = -gr[1, 2] / det_block
    return InverseMetric(ginv, lambda_reg)


def metric_derivatives(theta: ParamPoint, stats: PatchStats) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives (dg/dsigma2, dg/dbeta) of the metric tensor.

    The patch statistics are treated as constants (their dependence on
    theta through the field distribution is intentionally ignored, as in
    the closed-form model).  dg/dmu vanishes identically and is not
    materialized.  Each entry is the exact derivative of the
    corresponding ``metric_tensor`` closed form.
    """
    s2, b = theta.sigma2, theta.beta
    sr, ss = stats.s_rho, stats.s_sig
    srr, srs, sss = stats.s_rho_rho, stats.s_rho_sig, stats.s_sig_sig
    d = float(NEIGHBOR_COUNT)
    one_m_bd = 1.0 - b * d
    corr = 2.0 * b * sr - b * b * ss
    quart = 3.0 * b**2 * srr - 3.0 * b**3 * srs + 3.0 * b**4 * sss
    cubic = 6.0 * b * srr - 9.0 * b**2 * srs + 3.0 * b**3 * sss
    quad = 2.0 * srr - 6.0 * b * srs + 3.0 * b**2 * sss

    dg_ds2 = np.zeros((3, 3))
    dg_ds2[0, 0] = -one_m_bd**2 / s2**2 + 2.0 * one_m_bd**2 * corr / s2**3
    dg_ds2[1, 1] = -1.0 / s2**3 + 3.0 * corr / s2**4 - 4.0 * quart / s2**5
    dg_ds2[1, 2] = dg_ds2[2, 1] = -2.0 * (sr - b * ss) / s2**3 + 3.0 * cubic / (2.0 * s2**4)
    dg_ds2[2, 2] = -ss / s2**2 - 2.0 * quad / s2**3

    dg_db = np.zeros((3, 3))
    dg_db[0, 0] = (-2.0 * d * one_m_bd / s2) * (1.0 - corr / s2) - one_m_bd**2 * (2.0 * sr - 2.0 * b * ss) / s2**2
    dg_db[1, 1] = -(2.0 * sr - 2.0 * b * ss) / s2**3 + (6.0 * b * srr - 9.0 * b**2 * srs + 12.0 * b**3 * sss) / s2**4
    dg_db[1, 2] = dg_db[2, 1] = -ss / s2**2 - (6.0 * srr - 18.0 * b * srs + 9.0 * b**2 * sss) / (2.0 * s2**3)
    dg_db[2, 2] = -(6.0 * srs - 6.0 * b * sss) / s2**2
    return dg_ds2, dg_db


def christoffel_symbols(
    g: MetricTensor,
    ginv: InverseMetric,
    dg_dsigma2: np.ndarray,
    dg_dbeta: np.ndarray,
) -> ChristoffelTensor:
    """The 27 Christoffel symbols from the closed forms.

    Only 14 symbols (10 distinct values) are nonzero; the 13 structural
    zeros follow from dg/dmu = 0 and the metric's zero pattern, and are
    never computed.  The inputs must come from the same (theta, stats).
    """
    gi = ginv.ginv
    d2_11, d2_22, d2_23, d2_33 = dg_dsigma2[0, 0], dg_dsigma2[1, 1], dg_dsigma2[1, 2], dg_dsigma2[2, 2]
    d3_11, d3_22, d3_23, d3_33 = dg_dbeta[0, 0], dg_dbeta[1, 1], dg_dbeta[1, 2], dg_dbeta[2, 2]

    gamma = np.zeros((3, 3, 3))
    g1, g2, g3 = gamma[0], gamma[1], gamma[2]
    g1[0, 1] = g1[1, 0] = 0.5 * d2_11 * gi[0, 0]
    g1[0, 2] = g1[2, 0] = 0.5 * d3_11 * gi[0, 0]
    g2[0, 0] = -0.5 * (d2_11 * gi[1, 1] + d3_11 * gi[1, 2])
    g3[0, 0] = -0.5 * (d2_11 * gi[1, 2] + d3_11 * gi[2, 2])
    g2[1, 1] = 0.5 * (d2_22 * gi[1, 1] + (2.0 * d2_23 - d3_22) * gi[1, 2])
    g3[1, 1] = 0.5 * (d2_22 * gi[1, 2] + (2.0 * d2_23 - d3_22) * gi[2, 2])
    g2[1, 2] = g2[2, 1] = 0.5 * (d3_22 * gi[1, 1] + d2_33 * gi[1, 2])
    g3[1, 2] = g3[2, 1] = 0.5 * (d3_22 * gi[1, 2] + d2_33 * gi[2, 2])
    g2[2, 2] = 0.5 * ((2.0 * d3_23 - d2_33) * gi[1, 1] + d3_33 * gi[1, 2])
    g3[2, 2] = 0.5 * ((2.0 * d3_23 - d2_33) * gi[1, 2] + d3_33 * gi[2, 2])
    return ChristoffelTensor(gamma)


def entropy(theta: ParamPoint, stats: PatchStats) -> EntropyValues:
    """Conditional entropy and its first two beta-derivatives.

        H(theta) = H_G - (b * sr - b^2/2 * ss) / s2,   H_G = ln(2 pi e s2)/2
        dH/db    = -(sr - b * ss) / s2
        d2H/db2  = ss / s2

    H is exactly quadratic in beta for fixed statistics and reduces to
    the plain Gaussian entropy H_G at beta = 0.
    """
    s2, b = theta.sigma2, theta.beta
    h_g = 0.5 * math.log(2.0 * math.pi * math.e * s2)
    h = h_g - (b * stats.s_rho - 0.5 * b * b * stats.s_sig) / s2
    dh = -(stats.s_rho - b * stats.s_sig) / s2
    d2h = stats.s_sig / s2
    return EntropyValues(h, dh, d2h)


def _degenerate_block_inverse(g: np.ndarray) -> np.ndarray:
    """Exact inverse on the nonzero block of a metric whose beta row and
    column vanish (uncoupled limit); the beta entries of the inverse are
    left at zero."""
    ginv = np.zeros((3, 3))
    ginv[0, 0] = 1.0 / g[0, 0]
    ginv[1, 1] = 1.0 / g[1, 1]
    return ginv


def curvature_report(theta: ParamPoint, stats: PatchStats, lambda_reg: float = 0.001) -> CurvatureReport:
    """Second fundamental form, shape operator and curvatures at a point.

    The second fundamental form is the second-order Fisher information
    matrix; its nonzero entries are

        II_mu,mu   = (1 - b D)^2 / s2
        II_s2,s2   = 1/(2 s2^2) - (2 b sr - b^2 ss)/s2^3
        II_s2,b    = -(dH/db) / s2
        II_b,b     = d2H/db2

    (the mu off-diagonals vanish, mirroring the metric's zero pattern).
    The shape operator is P = -II (g + lambda I)^-1.  With lambda = 0 and
    an exactly vanishing beta row in g, the inverse is taken on the
    nonzero block only; any other singular metric propagates
    SingularMetricError.
    """
    s2, b = theta.sigma2, theta.beta
    h, dh, d2h = entropy(theta, stats)
    one_m_bd = 1.0 - b * NEIGHBOR_COUNT

    second_form = np.zeros((3, 3))
    second_form[0, 0] = one_m_bd * one_m_bd / s2
    second_form[1, 1] = 0.5 / s2**2 - (2.0 * b * stats.s_rho - b * b * stats.s_sig) / s2**3
    second_form[1, 2] = second_form[2, 1] = -dh / s2
    second_form[2, 2] = d2h

    g = metric_tensor(theta, stats)
    try:
        ginv = inverse_metric(g, lambda_reg).ginv
    except SingularMetricError:
        if lambda_reg == 0.0 and g.g[1, 2] == 0.0 and g.g[2, 2] == 0.0:
            ginv = _degenerate_block_inverse(g.g)
        else:
            raise

    p = -second_form @ ginv
    if not np.all(np.isfinite(p)):
        raise NonFiniteStateError("shape operator has non-finite entries")
    eigvals = np.linalg.eigvals(p)
    has_complex = bool(np.any(np.abs(eigvals.imag) > 1e-12 * (1.0 + np.abs(eigvals.real))))
    principal = np.sort(eigvals.real)[::-1]
    return CurvatureReport(
        second_form=second_form,
        shape_operator=p,
        gaussian_curvature=float(np.linalg.det(p)),
        mean_curvature=float(np.trace(p)),
        principal_curvatures=principal,
        has_complex_eigenvalues=has_complex,
        entropy=h,
        dh_dbeta=dh,
        d2h_dbeta2=d2h,
    )
