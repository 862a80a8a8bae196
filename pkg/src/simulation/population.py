#!/usr/bin/env python3
"""
Finite population generation and two-stage stratified cluster sampling

Population steps:
  1. N/2 units from N(mu0, Sigma) and N/2 from N(mu1, Sigma)
  2. true event probability from the correctly specified logistic coefficients
  3. y ~ Bernoulli(p)
  4. sort by the design-variable part of the linear predictor, cut H equal
     strata and A_h equal clusters per stratum
Then the population model(s) are fitted with unit weights and their AUCs recorded.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit

from errors import ConfigError, NonPositiveDefiniteError
from replicates import ResampleRng
from survey_frame import SurveyFrame
from wauc import population_auc
from wlogit import FittedModel, fit_pseudo_likelihood

logger = logging.getLogger(__name__)

VARIABLES = ("X1", "X2", "X3", "X4", "Z1", "Z2", "Z3", "Z4", "Z5", "Z6")
DESIGN_VARIABLES = ("Z1", "Z2", "Z3", "Z4", "Z5", "Z6")


def equicorrelated_covariance(dim: int = 10, gamma: float = 0.15) -> np.ndarray:
    """(1 - gamma) * I + gamma * J"""
    return (1.0 - gamma) * np.eye(dim) + gamma * np.ones((dim, dim))


def x3_correlated_covariance(dim: int = 10, gamma: float = 0.15, x3_cov: float = 0.5) -> np.ndarray:
    """
    Equicorrelated base where X3 has covariance x3_cov with every variable except X4,
    and X4 is uncorrelated with everything
    """
    sigma = equicorrelated_covariance(dim, gamma)
    x3, x4 = 2, 3
    sigma[x3, :] = sigma[:, x3] = x3_cov
    sigma[x4, :] = sigma[:, x4] = 0.0
    sigma[x3, x3] = sigma[x4, x4] = 1.0
    return sigma


COVARIANCES = {
    "equicorrelated": equicorrelated_covariance,
    "x3_correlated_x4_independent": x3_correlated_covariance,
}


@dataclass(frozen=True)
class PopulationSpec:
    """Parameters of one finite population"""
    mu1: Tuple[float, ...]
    sigma: np.ndarray
    mu0: Tuple[float, ...] = (0.0,) * 10
    N: int = 100_000
    prevalence: float = 0.5
    H: int = 5
    A_h: int = 20
    variables: Tuple[str, ...] = VARIABLES
    design_variables: Tuple[str, ...] = DESIGN_VARIABLES
    seed_offset: int = 0

    def __post_init__(self):
        dim = len(self.variables)
        if len(self.mu0) != dim or len(self.mu1) != dim or self.sigma.shape != (dim, dim):
            raise ConfigError(f"means and covariance must match {dim} variables")
        if not np.allclose(self.sigma, self.sigma.T):
            raise ConfigError("covariance matrix must be symmetric")
        if self.N % (2 * self.H * self.A_h) != 0:
            raise ConfigError(f"N={self.N} must be divisible by 2*H*A_h={2 * self.H * self.A_h}")

    @property
    def N_hj(self) -> int:
        """Units per cluster"""
        return self.N // (self.H * self.A_h)

    @property
    def beta_star(self) -> np.ndarray:
        """
        True logistic coefficients (intercept first) implied by two Gaussian
        classes with a shared covariance
        """
        mu0 = np.asarray(self.mu0, dtype=np.float64)
        mu1 = np.asarray(self.mu1, dtype=np.float64)
        slopes = linalg.solve(self.sigma, mu1 - mu0, assume_a="sym")
        intercept = np.log(self.prevalence / (1.0 - self.prevalence)) - 0.5 * (mu1 + mu0) @ slopes
        return np.r_[intercept, slopes]

    @property
    def design_indices(self) -> np.ndarray:
        return np.array([self.variables.index(v) for v in self.design_variables])


@dataclass(frozen=True)
class SamplingScheme:
    """Clusters drawn per stratum and units drawn per selected cluster, by stratum"""
    clusters_per_stratum: int
    units_per_cluster: Tuple[int, ...]
    size: str = "custom"

    @property
    def label(self) -> str:
        return f"a{self.clusters_per_stratum}_{self.size}"

    @property
    def total_units(self) -> int:
        return self.clusters_per_stratum * sum(self.units_per_cluster)


@dataclass(frozen=True)
class FinitePopulation:
    """
    A generated population as a SurveyFrame with unit weights and stratum/cluster labels

    `cluster_members[h][c]` lists the unit positions of cluster c in stratum h.
    """
    spec: PopulationSpec
    frame: SurveyFrame
    generating_class: np.ndarray
    cluster_members: Tuple[Tuple[np.ndarray, ...], ...]
    models: Dict[Tuple[str, ...], FittedModel] = field(default_factory=dict)
    aucs: Dict[Tuple[str, ...], float] = field(default_factory=dict)
    seed: Optional[int] = None


def _draw_covariates(spec: PopulationSpec, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    try:
        chol = linalg.cholesky(spec.sigma, lower=True)
    except linalg.LinAlgError as e:
        raise NonPositiveDefiniteError(f"covariance matrix is not positive definite: {e}") from e
    half = spec.N // 2
    normals = gen.standard_normal((spec.N, len(spec.variables)))
    means = np.vstack([np.tile(spec.mu0, (half, 1)), np.tile(spec.mu1, (spec.N - half, 1))])
    labels = np.r_[np.zeros(half, dtype=np.int8), np.ones(spec.N - half, dtype=np.int8)]
    return means + normals @ chol.T, labels


def generate_population(spec: PopulationSpec, seed: int,
                        models: Sequence[Sequence[str]] = (("X1", "X2", "X3", "X4"),)) -> FinitePopulation:
    """
    Generate a finite population and fit its population models

    Args:
        spec: Population parameters
        seed: Master seed; the population uses stream seed_offset of it
        models: Covariate sets to fit with unit weights

    Returns:
        FinitePopulation with population AUC per model
    """
    gen = ResampleRng(seed, spec.seed_offset).generator(0)
    x, labels = _draw_covariates(spec, gen)

    beta = spec.beta_star
    p = expit(beta[0] + x @ beta[1:])
    y = (gen.random(spec.N) < p).astype(np.int8)

    design_beta = beta[1:][spec.design_indices]
    design_score = x[:, spec.design_indices] @ design_beta
    order = np.argsort(design_score, kind="stable")
    stratum_size = spec.N // spec.H
    N_hj = spec.N_hj

    position = np.empty(spec.N, dtype=np.int64)
    position[order] = np.arange(spec.N)
    stratum = position // stratum_size
    cluster = (position % stratum_size) // N_hj

    members = tuple(
        tuple(order[h * stratum_size + c * N_hj: h * stratum_size + (c + 1) * N_hj] for c in range(spec.A_h))
        for h in range(spec.H)
    )
    frame = SurveyFrame.from_arrays(
        stratum=(stratum + 1).tolist(), psu=(cluster + 1).tolist(),
        weights=np.ones(spec.N), outcomes=y, covariates=x, covariate_names=spec.variables,
    )

    fitted: Dict[Tuple[str, ...], FittedModel] = {}
    aucs: Dict[Tuple[str, ...], float] = {}
    for covariates in models:
        key = tuple(covariates)
        fitted[key] = fit_pseudo_likelihood(frame, key)
        aucs[key] = population_auc(frame, fitted[key])
        logger.info("population (seed %d, offset %d) model %s: AUC=%.4f",
                    seed, spec.seed_offset, ",".join(key), aucs[key])

    return FinitePopulation(spec=spec, frame=frame, generating_class=labels, cluster_members=members,
                            models=fitted, aucs=aucs, seed=seed)


def draw_sample(population: FinitePopulation, scheme: SamplingScheme, rng: ResampleRng) -> SurveyFrame:
    """
    Two-stage stratified cluster sample

    Stage 1 draws a_h clusters per stratum, stage 2 draws n_hj units per drawn
    cluster, both by simple random sampling without replacement. Every unit in
    cluster (h, j) gets weight (A_h / a_h) * (N_hj / n_hj).
    """
    spec = population.spec
    a_h = scheme.clusters_per_stratum
    if len(scheme.units_per_cluster) != spec.H:
        raise ConfigError(f"scheme gives {len(scheme.units_per_cluster)} strata, population has {spec.H}")
    if a_h > spec.A_h or max(scheme.units_per_cluster) > spec.N_hj or a_h < 1 or min(scheme.units_per_cluster) < 1:
        raise ConfigError(f"scheme {scheme.label} exceeds population structure "
                          f"(A_h={spec.A_h}, N_hj={spec.N_hj})")

    rows, weights = [], []
    for h in range(spec.H):
        gen = rng.generator(h)
        n_hj = scheme.units_per_cluster[h]
        weight = (spec.A_h / a_h) * (spec.N_hj / n_hj)
        for c in np.sort(gen.choice(spec.A_h, size=a_h, replace=False)):
            units = np.sort(gen.choice(population.cluster_members[h][c], size=n_hj, replace=False))
            rows.append(units)
            weights.append(np.full(n_hj, weight))
    return population.frame.take(np.concatenate(rows), np.concatenate(weights))
