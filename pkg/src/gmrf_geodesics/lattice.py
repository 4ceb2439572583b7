"""Pairwise-isotropic Gaussian-Markov random fields on a 2D toroidal lattice.

Each site x_i of an n x m grid interacts with its 8 nearest neighbors
(second-order neighborhood) through a single coupling, the inverse
temperature beta.  The model is defined by local conditional densities

    p(x_i | eta_i, theta) = N(mu + beta * sum_{j in eta_i}(x_j - mu), sigma2)

with theta = (mu, sigma2, beta).  Outcomes are evolved by sequential
raster-scan Metropolis-Hastings sweeps with an independence proposal
y ~ N(mu, sigma2).

Boundaries are toroidal so every site has exactly 8 neighbors and the
field is stationary.  All randomness comes from a seeded NumPy PCG64
generator owned by the lattice; Gaussian variates use the generator's
deterministic ziggurat transform of the PCG64 stream (no OS entropy), so
identical seeds and call sequences give bit-identical fields.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidDimensionError, InvalidParameterError

__all__ = [
    "NEIGHBOR_COUNT",
    "ParamPoint",
    "FieldLattice",
    "init_field",
    "local_conditional_density",
    "metropolis_sweep",
    "dump_lattice",
]

#: Size of the second-order neighborhood on the 2D lattice.
NEIGHBOR_COUNT = 8


@dataclass(frozen=True)
class ParamPoint:
    """A point theta = (mu, sigma2, beta) of the 3D parametric manifold.

    Attributes:
        mu: field mean.
        sigma2: field variance; must be strictly positive.
        beta: inverse temperature (spatial coupling); beta = 0 decouples
            the sites into independent Gaussians.
    """

    mu: float
    sigma2: float
    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma2) and math.isfinite(self.beta)):
            raise InvalidParameterError(f"parameters must be finite, got {self}")
        if self.sigma2 <= 0.0:
            raise InvalidParameterError(f"sigma2 must be > 0, got {self.sigma2}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma2, self.beta], dtype=float)


@dataclass
class FieldLattice:
    """One outcome of the random field plus its private RNG stream.

    Attributes:
        height, width: lattice dimensions (each >= 3).
        values: (height, width) float64 array of site values.
        rng: seeded numpy Generator (PCG64) that owns every random draw
            made on behalf of this lattice.
        seed: the integer the generator was created from, kept for
            provenance dumps.

    A lattice is a single mutation stream: sweeps evolve ``values`` in
    place, consuming ``rng``.  Distinct instances are independent and may
    be evolved concurrently; one instance must not be mutated from two
    threads.
    """

    height: int
    width: int
    values: np.ndarray
    rng: np.random.Generator = field(repr=False)
    seed: int = 0


def init_field(n: int, m: int, theta: ParamPoint, seed: int) -> FieldLattice:
    """Create an n x m lattice of independent N(mu, sigma2) draws.

    Args:
        n, m: lattice dimensions, both >= 3 (a 3x3 patch must fit).
        theta: model parameters; only mu and sigma2 are used here.
        seed: seed for the lattice's PCG64 generator.

    Raises:
        InvalidDimensionError: if n < 3 or m < 3.
        InvalidParameterError: if theta is invalid (raised by ParamPoint).
    """
    if n < 3 or m < 3:
        raise InvalidDimensionError(f"lattice must be at least 3x3, got {n}x{m}")
    rng = np.random.default_rng(seed)
    values = theta.mu + math.sqrt(theta.sigma2) * rng.standard_normal((n, m))
    return FieldLattice(height=n, width=m, values=values, rng=rng, seed=int(seed))


def local_conditional_density(x: float, neighbor_sum_centered: float, theta: ParamPoint) -> float:
    """Density p(x | eta, theta) of one site given its neighborhood.

    ``neighbor_sum_centered`` is sum_{j in eta}(x_j - mu); the conditional
    is Gaussian with mean mu + beta * neighbor_sum_centered and variance
    sigma2.
    """
    mean = theta.mu + theta.beta * neighbor_sum_centered
    z = (x - mean) ** 2 / (2.0 * theta.sigma2)
    return math.exp(-z) / math.sqrt(2.0 * math.pi * theta.sigma2)


@njit(cache=True)
def _sweep_kernel(values, proposals, uniforms, mu, sigma2, beta):  # pragma: no cover - jitted
    """One raster-scan MH sweep, in place.  Returns the acceptance count.

    The acceptance ratio is the independence-sampler Hastings ratio
    [p(y|eta) q(x)] / [p(x|eta) q(y)] with q = N(mu, sigma2), which
    simplifies to exp(beta * s * (y - x) / sigma2) for the centered
    neighbor sum s.  Neighbor values are the current ones (sequential
    update), with toroidal wrap-around.
    """
    n, m = values.shape
    inv_sigma2 = 1.0 / sigma2
    accepted = 0
    for i in range(n):
        iu = i - 1 if i > 0 else n - 1
        idn = i + 1 if i < n - 1 else 0
        for j in range(m):
            jl = j - 1 if j > 0 else m - 1
            jr = j + 1 if j < m - 1 else 0
            s = (values[iu, jl] + values[iu, j] + values[iu, jr]
                 + values[i, jl] + values[i, jr]
                 + values[idn, jl] + values[idn, j] + values[idn, jr]) - 8.0 * mu
            y = proposals[i, j]
            x = values[i, j]
            log_ratio = beta * s * (y - x) * inv_sigma2
            if log_ratio >= 0.0 or uniforms[i, j] < np.exp(log_ratio):
                values[i, j] = y
                accepted += 1
    return accepted


def _sweep_reference(values, proposals, uniforms, theta: ParamPoint):
    """Pure-Python sweep used as a cross-check oracle for the kernel.

    Computes the Hastings ratio from explicit density evaluations instead
    of the simplified log form, and asserts the acceptance probability
    contract: always in [0, 1], and exactly 1 whenever the ratio is >= 1.
    """
    n, m = values.shape
    proposal_theta = ParamPoint(theta.mu, theta.sigma2, 0.0)
    accepted = 0
    for i in range(n):
        for j in range(m):
            s = -8.0 * theta.mu
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    s += values[(i + di) % n, (j + dj) % m]
            x = float(values[i, j])
            y = float(proposals[i, j])
            p_y = local_conditional_density(y, s, theta)
            p_x = local_conditional_density(x, s, theta)
            q_y = local_conditional_density(y, 0.0, proposal_theta)
            q_x = local_conditional_density(x, 0.0, proposal_theta)
            ratio = (p_y * q_x) / (p_x * q_y)
            accept_prob = min(1.0, ratio)
            assert 0.0 <= accept_prob <= 1.0
            assert ratio < 1.0 or accept_prob == 1.0
            if uniforms[i, j] < accept_prob:
                values[i, j] = y
                accepted += 1
    return accepted


def metropolis_sweep(field: FieldLattice, theta: ParamPoint, n_sweeps: int) -> FieldLattice:
    """Evolve the lattice in place with ``n_sweeps`` full raster passes.

    Each pass visits sites in row-major order; at each site it proposes
    y ~ N(mu, sigma2) and accepts with the independence-sampler
    Metropolis-Hastings probability computed from the current neighbor
    values.  Proposal and uniform arrays are drawn from the lattice's own
    generator (one pair of (height, width) arrays per sweep, proposals
    first), so evolution is fully reproducible.

    Returns the same (mutated) lattice for chaining.

    Raises:
        InvalidParameterError: if n_sweeps < 1.
    """
    if n_sweeps < 1:
        raise InvalidParameterError(f"n_sweeps must be >= 1, got {n_sweeps}")
    sd = math.sqrt(theta.sigma2)
    shape = (field.height, field.width)
    for _ in range(n_sweeps):
        proposals = theta.mu + sd * field.rng.standard_normal(shape)
        uniforms = field.rng.random(shape)
        _sweep_kernel(field.values, proposals, uniforms, theta.mu, theta.sigma2, theta.beta)
    return field


def resample_iid(field: FieldLattice, theta: ParamPoint) -> FieldLattice:
    """Refill the lattice with fresh independent N(mu, sigma2) draws.

    Consumes the lattice's own stream, so cold restarts inside a longer
    run remain reproducible.
    """
    field.values = theta.mu + math.sqrt(theta.sigma2) * field.rng.standard_normal(
        (field.height, field.width)
    )
    return field


def dump_lattice(field: FieldLattice, path, theta: ParamPoint | None = None) -> None:
    """Debug dump: row-major CSV of the values plus a JSON sidecar.

    Writes ``path`` (CSV, one lattice row per line) and ``path + '.json'``
    with the dimensions, seed and, when given, the generating parameters.
    """
    path = str(path)
    np.savetxt(path, field.values, delimiter=",", fmt="%.17g")
    header = {
        "height": field.height,
        "width": field.width,
        "seed": field.seed,
        "theta": None if theta is None else {"mu": theta.mu, "sigma2": theta.sigma2, "beta": theta.beta},
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
