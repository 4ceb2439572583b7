"""Covariance statistics of 3x3 lattice patches.

Every lattice site contributes one 9-vector: its 3x3 toroidal patch with
rows piled left-to-right, top-to-bottom (NW, N, NE, W, C, E, SW, S, SE;
center at index 4).  The 9x9 sample covariance of those n*m vectors is
split into

* ``rho``         — 8-vector of center-to-neighbor covariances (central
                    row of the 9x9 matrix, middle entry removed), and
* ``sigma_minus`` — 8x8 matrix of neighbor-to-neighbor covariances
                    (central row and column removed),

plus the entry-sum scalars the metric tensor consumes.  Entry sums of
Kronecker products factor as ||A (x) B||_+ = ||A||_+ * ||B||_+, so the
64- and 4096-entry products are never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError

__all__ = [
    "CENTER_INDEX",
    "PATCH_OFFSETS",
    "PatchStats",
    "patch_matrix",
    "patch_covariance",
    "compute_patch_stats",
    "dump_patch_covariance",
]

#: Row-major (row, col) offsets of the 3x3 patch; entry 4 is the center.
PATCH_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1))
CENTER_INDEX = 4


@dataclass(frozen=True)
class PatchStats:
    """Patch-covariance decomposition and its entry-sum scalars.

    ``s_rho`` and ``s_sig`` are the entry sums of ``rho`` and
    ``sigma_minus``; the three Kronecker sums are their products
    (s_rho**2, s_rho*s_sig, s_sig**2) by the factorization identity.
    ``degenerate`` flags an exactly constant field (all covariances zero),
    which is a legal input for the downstream geometry, not an error.
    """

    rho: np.ndarray
    sigma_minus: np.ndarray
    s_rho: float
    s_sig: float
    s_rho_rho: float
    s_rho_sig: float
    s_sig_sig: float
    degenerate: bool = False
    sigma_p: np.ndarray | None = None

    @classmethod
    def from_components(cls, rho, sigma_minus, degenerate=False, sigma_p=None) -> "PatchStats":
        """Build stats from a covariance decomposition, filling the sums."""
        rho = np.asarray(rho, dtype=float)
        sigma_minus = np.asarray(sigma_minus, dtype=float)
        if rho.shape != (8,) or sigma_minus.shape != (8, 8):
            raise InvalidDimensionError(
                f"expected rho (8,) and sigma_minus (8, 8), got {rho.shape} and {sigma_minus.shape}"
            )
        s_rho = float(rho.sum())
        s_sig = float(sigma_minus.sum())
        return cls(
            rho=rho,
            sigma_minus=sigma_minus,
            s_rho=s_rho,
            s_sig=s_sig,
            s_rho_rho=s_rho * s_rho,
            s_rho_sig=s_rho * s_sig,
            s_sig_sig=s_sig * s_sig,
            degenerate=bool(degenerate),
            sigma_p=sigma_p,
        )

    @classmethod
    def zero(cls) -> "PatchStats":
        """All-zero statistics (constant field / uncoupled limit)."""
        return cls.from_components(np.zeros(8), np.zeros((8, 8)), degenerate=True)


def _as_values(field) -> np.ndarray:
    values = getattr(field, "values", field)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] < 3 or values.shape[1] < 3:
        raise InvalidDimensionError(f"need a 2D lattice at least 3x3, got shape {values.shape}")
    return values


def patch_matrix(field) -> np.ndarray:
    """(n*m, 9) matrix whose row for site (i, j) is its toroidal 3x3 patch.

    Column k holds value[(i + dr) % n, (j + dc) % m] for the k-th offset of
    ``PATCH_OFFSETS``; rows are enumerated in row-major site order.
    """
    values = _as_values(field)
    cols = [np.roll(values, (-dr, -dc), axis=(0, 1)).ravel() for dr, dc in PATCH_OFFSETS]
    return np.stack(cols, axis=1)


def patch_covariance(field) -> np.ndarray:
    """Population (1/N) 9x9 covariance of the patch vectors."""
    pm = patch_matrix(field)
    centered = pm - pm.mean(axis=0)
    return centered.T @ centered / pm.shape[0]


def compute_patch_stats(field) -> PatchStats:
    """Decompose the patch covariance of a lattice into PatchStats.

    Accepts a FieldLattice or a bare 2D array.  Uses toroidal patches and
    the population 1/N normalization over all n*m sites, so the patch
    count equals the site count.
    """
    values = _as_values(field)
    sigma_p = patch_covariance(values)
    keep = [k for k in range(9) if k != CENTER_INDEX]
    rho = sigma_p[CENTER_INDEX, keep]
    sigma_minus = sigma_p[np.ix_(keep, keep)]
    degenerate = bool(np.ptp(values) == 0.0)
    return PatchStats.from_components(rho, sigma_minus, degenerate=degenerate, sigma_p=sigma_p)


def dump_patch_covariance(stats: PatchStats, path) -> None:
    """Debug dump of the full 9x9 patch covariance as CSV."""
    if stats.sigma_p is None:
        raise ValueError("stats carries no full covariance matrix (built from components)")
    np.savetxt(str(path), stats.sigma_p, delimiter=",", fmt="%.17g")
