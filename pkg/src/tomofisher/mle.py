"""
mle contains the rank-truncated RrhoR maximum-likelihood estimator and the
Monte-Carlo evaluation of its mean squared error.

Each iteration maps rho to N[A rho A] with A = (1 - lambda) 1 + lambda R(rho) / k,

    R(rho) = sum_{s,o} N(o|s) / (m max(p_rho(o|s), prob_floor)) P_o^s,

where N[.] normalises the trace, and then keeps only the r largest eigenvalues of
the iterate (negative ones clamped to zero) before renormalising.  The first
iterate is the maximally mixed state, which is not truncated.

R(rho) is divided by the number of settings k.  The projectors of each setting sum
to the identity, so at a state reproducing the observed frequencies R(rho) / k acts
as 1 on the state's support: that state is a fixed point, and the dilution
(1 - lambda) 1 + lambda R(rho) / k mixes the identity with an operator of the
same scale.
"""

import functools
import logging
from collections import namedtuple

import numpy as np
from scipy import linalg
from scipy.special import xlogy

from . import fisher, states
from .sampling import sample_counts
from .workers import derive_seed, map_ordered

logger = logging.getLogger("tomofisher")


class NumericalFailureError(ArithmeticError):
    """Raised when the likelihood or an iterate stops being finite"""

    def __init__(self, message, iteration):
        super().__init__(message, iteration)
        self.iteration = iteration


class MleOptions:
    """
    Settings of the RrhoR iteration.

    Attributes:
        rank:               Number of eigenvalues retained after every iteration.
        max_iters:          Iteration cap.
        conv_tol:           Frobenius distance between iterates at which the iteration stops.
        prob_floor:         Lower bound on model probabilities in R(rho).
        dilution:           lambda in (0, 1]; 1 is the undiluted iteration.
        track_likelihood:   Keep the per-iteration log-likelihood in the diagnostics.
    """

    def __init__(
        self,
        rank,
        max_iters=5000,
        conv_tol=1e-10,
        prob_floor=1e-12,
        dilution=1.0,
        track_likelihood=False,
    ):
        if rank < 1:
            raise states.InvalidRankError("Rank must be positive", rank)
        if max_iters < 1:
            raise ValueError("max_iters must be positive", max_iters)
        if conv_tol <= 0 or prob_floor <= 0:
            raise ValueError("Tolerances must be positive", conv_tol, prob_floor)
        if not 0 < dilution <= 1:
            raise ValueError("dilution must lie in (0, 1]", dilution)
        self.rank = int(rank)
        self.max_iters = int(max_iters)
        self.conv_tol = float(conv_tol)
        self.prob_floor = float(prob_floor)
        self.dilution = float(dilution)
        self.track_likelihood = bool(track_likelihood)

    def to_dict(self):
        return {
            "rank": self.rank,
            "max_iters": self.max_iters,
            "conv_tol": self.conv_tol,
            "prob_floor": self.prob_floor,
            "dilution": self.dilution,
        }

    def __repr__(self):
        return "MleOptions({})".format(
            ", ".join("{}={!r}".format(key, value) for key, value in self.to_dict().items())
        )


MleDiagnostics = namedtuple(
    "MleDiagnostics", ["iterations", "log_likelihood", "converged", "loglik_history"]
)

Estimate = namedtuple("Estimate", ["rho", "diagnostics"])

MonteCarloResult = namedtuple(
    "MonteCarloResult", ["mean", "stderr", "errors", "failures", "diagnostics"]
)


class _StackedDesign:
    """
    All basis vectors of a design side by side, with the flat outcome index
    (over all settings) each vector belongs to.
    """

    def __init__(self, counts):
        design = counts.design
        self.vectors = np.hstack([setting.vectors for setting in design])
        offsets = np.cumsum([0] + [setting.num_outcomes for setting in design])
        self.groups = np.concatenate(
            [offset + setting.outcome_map for offset, setting in zip(offsets, design)]
        )
        self.num_outcomes = int(offsets[-1])
        self.counts = np.concatenate(counts.counts).astype(float)
        self.m = counts.m
        self.k = len(design)

    def probabilities(self, rho):
        fine = np.sum(self.vectors.conj() * (rho @ self.vectors), axis=0).real
        return np.bincount(self.groups, weights=fine, minlength=self.num_outcomes)

    def r_operator(self, probs, prob_floor):
        ratios = self.counts / (self.m * np.maximum(probs, prob_floor))
        return (self.vectors * ratios[self.groups]) @ self.vectors.conj().T


def _log_likelihood(stacked, probs, prob_floor):
    return float(np.sum(xlogy(stacked.counts, np.maximum(probs, prob_floor))))


def log_likelihood(counts, rho, prob_floor=1e-12):
    """ Returns sum_{s,o} N(o|s) log max(p_rho(o|s), prob_floor). """
    stacked = _StackedDesign(counts)
    return _log_likelihood(stacked, stacked.probabilities(rho), prob_floor)


def _normalize(rho):
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def truncate_rank(rho, r):
    """ Keeps the r largest eigenvalues of rho, clamps negatives to zero and renormalises. """
    d = rho.shape[0]
    if r >= d:
        return _normalize(rho)
    eigenvalues, eigenvectors = linalg.eigh(rho)
    kept = np.clip(eigenvalues[d - r :], 0.0, None)
    support = eigenvectors[:, d - r :]
    return _normalize((support * kept) @ support.conj().T)


def rrhor_step(counts, rho, options, stacked=None):
    """
    Returns one truncated RrhoR iterate from rho.

    Args:
        counts:     sampling.CountsTable.
        rho:        Current iterate.
        options:    MleOptions.
        stacked:    Stacked basis vectors of counts.design, reused across steps - Optional.
    """
    stacked = stacked or _StackedDesign(counts)
    probs = stacked.probabilities(rho)
    return _step(stacked, rho, probs, options)


def _step(stacked, rho, probs, options):
    r_operator = stacked.r_operator(probs, options.prob_floor) / stacked.k
    d = rho.shape[0]
    if options.dilution < 1:
        r_operator = (1 - options.dilution) * np.eye(d) + options.dilution * r_operator
    updated = _normalize(r_operator @ rho @ r_operator)
    return truncate_rank(updated, options.rank)


def rrhor_estimate(counts, options):
    """
    Runs the truncated RrhoR iteration on a table of counts.

    Args:
        counts:     sampling.CountsTable.
        options:    MleOptions.

    Raises:
        NumericalFailureError: If the log-likelihood or an iterate is not finite.

    Returns:
        Estimate(rho, diagnostics) with MleDiagnostics(iterations, log_likelihood, converged, loglik_history).
    """
    stacked = _StackedDesign(counts)
    d = counts.design.dim
    rho = np.eye(d, dtype=complex) / d
    history = [] if options.track_likelihood else None
    converged = False
    iteration = 0

    while iteration < options.max_iters:
        iteration += 1
        probs = stacked.probabilities(rho)
        loglik = _log_likelihood(stacked, probs, options.prob_floor)
        if not np.isfinite(loglik):
            raise NumericalFailureError(
                "Log-likelihood is not finite at iteration {}".format(iteration), iteration
            )
        if history is not None:
            history.append(loglik)

        updated = _step(stacked, rho, probs, options)
        if not np.all(np.isfinite(updated)):
            raise NumericalFailureError(
                "Iterate is not finite at iteration {}".format(iteration), iteration
            )
        change = np.linalg.norm(updated - rho)
        rho = updated
        if change <= options.conv_tol:
            converged = True
            break

    final = _log_likelihood(stacked, stacked.probabilities(rho), options.prob_floor)
    if converged:
        logger.debug("RrhoR converged after %d iterations", iteration)
    else:
        logger.warning(
            "RrhoR stopped at max_iters=%d without converging", options.max_iters
        )
    return Estimate(rho, MleDiagnostics(iteration, final, converged, history))


def _replicate(rho, design, m, options, seed, index):
    counts = sample_counts(rho, design, m, derive_seed(seed, index))
    try:
        estimate = rrhor_estimate(counts, options)
    except NumericalFailureError as error:
        return None, "replicate {}: {}".format(index, error.args[0])
    return states.frobenius_sq_dist(estimate.rho, rho), estimate.diagnostics


def mse_monte_carlo(rho, design, m, reps, options, seed, workers=1):
    """
    Estimates the mean squared Frobenius error of the estimator by simulation.

    Replicate i samples its counts from the sub-seed derive_seed(seed, i).
    Replicates whose estimate fails are listed in failures and left out of the mean.

    Args:
        rho:        True density matrix.
        design:     designs.Design.
        m:          Repetitions per setting.
        reps:       Number of replicates (at least 2).
        options:    MleOptions.
        seed:       Non-negative integer seed.
        workers:    Number of worker processes - Optional.

    Returns:
        MonteCarloResult(mean, stderr, errors, failures, diagnostics).
    """
    if reps < 2:
        raise ValueError("Monte-Carlo estimates need at least two replicates", reps)
    rho = states.check_density_matrix(rho)
    job = functools.partial(_replicate, rho, design, m, options, seed)
    results = map_ordered(job, range(reps), workers)

    errors = []
    diagnostics = []
    failures = []
    for error, detail in results:
        if error is None:
            logger.warning("Monte-Carlo %s", detail)
            failures.append(detail)
        else:
            errors.append(error)
            diagnostics.append(detail)

    errors = np.array(errors)
    if errors.size == 0:
        mean, stderr = float("nan"), float("nan")
    elif errors.size == 1:
        mean, stderr = float(errors[0]), float("nan")
    else:
        mean = float(errors.mean())
        stderr = float(errors.std(ddof=1) / np.sqrt(errors.size))
    return MonteCarloResult(mean, stderr, errors, failures, diagnostics)


def ml_relative_error(mc, info, weight, N):
    """
    Returns |1 - N E||rho_hat - rho||^2 / Tr(I^-1 G)|.

    Args:
        mc:     MonteCarloResult, or the mean squared error itself.
        info:   Fisher matrix of the design.
        weight: Weight matrix G.
        N:      Total number of samples.

    Raises:
        NonIdentifiableError: If info is singular.
    """
    mean = mc.mean if isinstance(mc, MonteCarloResult) else float(mc)
    trace = fisher.information_trace(info, weight)
    if isinstance(trace, fisher.NonIdentifiable):
        raise fisher.NonIdentifiableError(
            "Fisher information of the design is singular", trace.min_eigenvalue
        )
    return abs(1 - N * mean / trace)
