"""
fisher contains the information-matrix functionals used to predict tomography
errors: the weight matrix G, classical Fisher information per setting and per
design, the quantum Fisher information, the closed-form Haar average, whitening,
the asymptotic mean squared error and the concentration sample size.

All matrices are D x D real arrays in the canonical parameter order of a
LocalChart.
"""

import functools
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import linalg

from . import designs, states
from .workers import map_ordered, tree_sum

logger = logging.getLogger("tomofisher")

# outcome probabilities below this are treated as zero
PROB_FLOOR = 1e-12
# gradient norm above which a zero-probability outcome makes the Fisher information diverge
GRAD_TOL = 1e-9
# eigenvalues below RCOND times the largest one make a Fisher matrix singular
RCOND = 1e-10
# support eigenvalues at or below this make a state singular for the quantum Fisher information
SUPPORT_TOL = 1e-12


class BoundarySingularityError(ArithmeticError):
    """Raised when an outcome of zero probability has a non-zero probability gradient"""

    def __init__(self, message, setting, outcome):
        super().__init__(message, setting, outcome)
        self.setting = setting
        self.outcome = outcome


class SingularStateError(ArithmeticError):
    pass


class NotPositiveDefiniteError(ArithmeticError):
    pass


class NonIdentifiableError(ArithmeticError):
    pass


class NonIdentifiable:
    """
    Result marker for functionals of a singular Fisher matrix.

    Attributes:
        min_eigenvalue:     Smallest eigenvalue of the Fisher matrix.
        max_eigenvalue:     Largest eigenvalue of the Fisher matrix.
    """

    def __init__(self, min_eigenvalue, max_eigenvalue):
        self.min_eigenvalue = float(min_eigenvalue)
        self.max_eigenvalue = float(max_eigenvalue)

    def __eq__(self, other):
        if not isinstance(other, NonIdentifiable):
            return NotImplemented
        return (self.min_eigenvalue, self.max_eigenvalue) == (
            other.min_eigenvalue,
            other.max_eigenvalue,
        )

    def __repr__(self):
        return "NonIdentifiable(min_eigenvalue={!r}, max_eigenvalue={!r})".format(
            self.min_eigenvalue, self.max_eigenvalue
        )


SpectrumBounds = namedtuple(
    "SpectrumBounds", ["ratio", "max_single", "min_mean", "quantum_max"]
)


@functools.lru_cache(maxsize=None)
def _weight_matrix(d, r):
    dd = np.ones((r - 1, r - 1)) + np.eye(r - 1)
    pairs = r * d - r * (r + 1) // 2
    weight = linalg.block_diag(dd, 2 * np.eye(2 * pairs))
    weight.flags.writeable = False
    return weight


@functools.lru_cache(maxsize=None)
def _weight_inverse_sqrt(d, r):
    matrix = inverse_sqrt(_weight_matrix(d, r))
    matrix.flags.writeable = False
    return matrix


def weight_matrix(chart):
    """
    Returns the weight matrix G of a chart, G_ab = Tr(d_a rho d_b rho).

    G is block diagonal: 1 + delta_ab on the diagonal parameters and 2 times the
    identity on the real and imaginary parameters.  The returned array is shared
    between charts of equal (d, r) and is read-only.
    """
    return _weight_matrix(chart.dim, chart.rank)


def weight_inverse_sqrt(chart):
    """ Returns the read-only G^(-1/2) of a chart, computed once per (d, r). """
    return _weight_inverse_sqrt(chart.dim, chart.rank)


def _symmetrize(matrix):
    return (matrix + matrix.T) / 2


def fisher_single(chart, setting, theta=None):
    """
    Returns the classical Fisher information of one setting.

    I_ab = sum_o (dp(o)/dtheta_a)(dp(o)/dtheta_b) / p(o).  An outcome with p(o)
    below PROB_FLOOR contributes nothing when its gradient vanishes.

    Args:
        chart:      LocalChart.
        setting:    designs.Setting.
        theta:      Chart point - Optional.  Defaults to the base state of the chart.

    Raises:
        BoundarySingularityError:   If an outcome with p(o) < PROB_FLOOR has a gradient of norm >= GRAD_TOL.
        DimensionMismatchError:     If the chart and setting dimensions differ.
    """
    probs, grads = designs.probabilities(chart, theta, setting)
    zero = probs < PROB_FLOOR
    if np.any(zero):
        norms = np.linalg.norm(grads[:, zero], axis=0)
        if np.any(norms >= GRAD_TOL):
            outcome = int(np.flatnonzero(zero)[np.argmax(norms >= GRAD_TOL)])
            raise BoundarySingularityError(
                "Outcome {} of setting {} has zero probability and a non-zero gradient".format(
                    outcome, setting.describe()
                ),
                setting.describe(),
                outcome,
            )
    kept = ~zero
    weighted = grads[:, kept] / probs[kept]
    return _symmetrize(weighted @ grads[:, kept].T)


def fisher_terms(chart, design, workers=1):
    """ Returns the list of per-setting Fisher matrices I(rho|s), in setting order. """
    if len(design) == 0:
        raise designs.DesignSizeError("A design needs at least one setting")
    return map_ordered(functools.partial(fisher_single, chart), design.settings, workers)


def average_information(terms):
    """
    Returns the mean of per-setting Fisher matrices.

    The terms are summed pairwise in setting order, so the result does not depend
    on the number of workers that computed them.
    """
    return tree_sum(terms) / len(terms)


def fisher_design(chart, design, workers=1):
    """ Returns I(rho|S) = (1/k) sum_s I(rho|s) for a design of k settings. """
    return average_information(fisher_terms(chart, design, workers))


def fisher_coarse(chart, observables, workers=1):
    """
    Returns the mean Fisher information of the two-outcome Pauli observables.

    Args:
        chart:          LocalChart.
        observables:    List of observable labels in {0,x,y,z}^n, or a coarse Design.

    Raises:
        InvalidLabelError: If a label is malformed or is the identity.
    """
    if isinstance(observables, designs.Design):
        design = observables
    else:
        observables = list(observables)
        design = designs.coarse_design(
            observables, replacement=len(set(observables)) != len(observables)
        )
    return fisher_design(chart, design, workers)


def quantum_fisher(chart):
    """
    Returns the quantum Fisher information of the chart's base state.

    F_ab = sum_{i<=r} sum_j 4 p_i / (p_i + p_j)^2 Re[(d_a rho)_ij (d_b rho)_ji]
    evaluated in the chart eigenbasis, with p the eigenvalues of the base state.

    Raises:
        SingularStateError: If a support eigenvalue is not strictly positive.
    """
    support = chart.eigenvalues
    if np.any(support <= SUPPORT_TOL):
        raise SingularStateError(
            "Quantum Fisher information needs a strictly positive support", support
        )
    p = np.zeros(chart.dim)
    p[: chart.rank] = support
    weights = np.zeros((chart.dim, chart.dim))
    weights[: chart.rank] = (
        4 * p[: chart.rank, None] / (p[: chart.rank, None] + p[None, :]) ** 2
    )
    flat = chart.derivative_matrices().reshape(chart.num_params, -1)
    info = ((flat * weights.ravel()) @ flat.conj().T).real
    return _symmetrize(info)


def mean_haar_fisher(d, r):
    """
    Returns the Haar average of the Fisher information at an equal-eigenvalue state.

    The average is 2r/(r+1) on the diagonal parameters and r/(r+1) between them,
    2r/(r+1) on real and imaginary parameters inside the support and 2 on the
    parameters coupling the support to its complement.

    Raises:
        InvalidRankError: If r is not in [1, d).
    """
    if not 1 <= r < d:
        raise states.InvalidRankError("Haar average needs 1 <= r < d", r, d)
    scale = r / (r + 1)
    dd = scale * (np.ones((r - 1, r - 1)) + np.eye(r - 1))
    chart = states.LocalChart(np.full(r, 1.0 / r), np.eye(d))
    pair_weights = np.where(chart.pair_cols < r, 2 * scale, 2.0)
    return linalg.block_diag(dd, np.diag(np.concatenate([pair_weights, pair_weights])))


def inverse_sqrt(matrix):
    """
    Returns the symmetric inverse square root of a positive definite matrix.

    Raises:
        NotPositiveDefiniteError: If an eigenvalue is not positive.
    """
    eigenvalues, eigenvectors = linalg.eigh(matrix)
    if eigenvalues[0] <= 0:
        raise NotPositiveDefiniteError(
            "Matrix is not positive definite", float(eigenvalues[0])
        )
    return _symmetrize((eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T)


def whiten(info, weight, root=None):
    """
    Whitens a Fisher matrix by the weight matrix.

    Args:
        info:   D x D Fisher matrix.
        weight: D x D positive definite weight matrix G.
        root:   G^(-1/2), e.g. the cached weight_inverse_sqrt(chart) - Optional.

    Raises:
        NotPositiveDefiniteError: If weight is not positive definite.

    Returns:
        (G^(-1/2) I G^(-1/2), minimum eigenvalue, maximum eigenvalue)
    """
    if root is None:
        root = inverse_sqrt(weight)
    whitened = _symmetrize(root @ info @ root)
    eigenvalues = linalg.eigvalsh(whitened)
    return whitened, float(eigenvalues[0]), float(eigenvalues[-1])


def _whitened_extremes(info, root):
    eigenvalues = linalg.eigvalsh(_symmetrize(root @ info @ root))
    return float(eigenvalues[0]), float(eigenvalues[-1])


def information_trace(info, weight):
    """
    Returns Tr(I^-1 G), or a NonIdentifiable marker when I is singular.

    I counts as singular when its smallest eigenvalue is below RCOND times its
    largest one; it is never pseudo-inverted.
    """
    eigenvalues, eigenvectors = linalg.eigh(info)
    largest = eigenvalues[-1]
    if largest <= 0 or eigenvalues[0] < RCOND * largest:
        return NonIdentifiable(eigenvalues[0], largest)
    projected = np.einsum("ak,ab,bk->k", eigenvectors, weight, eigenvectors)
    return float(np.sum(projected / eigenvalues))


def asymptotic_mse(info, weight, N):
    """
    Returns the asymptotic mean squared error Tr(I^-1 G) / N.

    Args:
        info:   Fisher matrix of the design.
        weight: Weight matrix G.
        N:      Total number of samples.

    Returns:
        The predicted error, or a NonIdentifiable marker when I is singular.
    """
    if N <= 0:
        raise ValueError("Sample size must be positive", N)
    trace = information_trace(info, weight)
    if isinstance(trace, NonIdentifiable):
        return trace
    return trace / N


def relative_error(info, mean_info, weight):
    """ Returns Tr(I_S^-1 G) / Tr(I_bar^-1 G), or a NonIdentifiable marker for a singular input. """
    numerator = information_trace(info, weight)
    if isinstance(numerator, NonIdentifiable):
        return numerator
    denominator = information_trace(mean_info, weight)
    if isinstance(denominator, NonIdentifiable):
        return denominator
    return numerator / denominator


def _check_concentration_arguments(epsilon, delta, r, d):
    if not 0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 1/2]", epsilon)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)", delta)
    if not 1 <= r <= d:
        raise states.InvalidRankError("Rank must satisfy 1 <= r <= d", r, d)


def _concentration_constant(epsilon, r):
    return 4 * math.log(2) / epsilon ** 2 * (r + 1)


def chernoff_k(epsilon, delta, r, d):
    """
    Returns the number of i.i.d. random settings that keeps the MSE within a
    factor 1 +- epsilon of the all-settings mean with probability 1 - delta.

    k = ceil((4 ln 2 / epsilon^2) (r + 1) ln(2 D / delta)) with D = 2rd - r^2 - 1.

    Raises:
        ValueError: If epsilon is not in (0, 1/2], delta not in (0, 1) or r not in [1, d].
    """
    _check_concentration_arguments(epsilon, delta, r, d)
    D = states.num_params(d, r)
    return int(math.ceil(_concentration_constant(epsilon, r) * math.log(2 * D / delta)))


def chernoff_failure_probability(k, epsilon, r, d):
    """ Returns the failure probability 2 D exp(-k epsilon^2 / (4 (r + 1) ln 2)) for k settings. """
    _check_concentration_arguments(epsilon, 0.5, r, d)
    if k < 1:
        raise ValueError("k must be positive", k)
    D = states.num_params(d, r)
    return 2 * D * math.exp(-k / _concentration_constant(epsilon, r))


def whitened_spectrum_bounds(chart, design, workers=1, terms=None):
    """
    Returns the SpectrumBounds of a design at a chart's base state.

    terms, when given, are the design's per-setting Fisher matrices from
    fisher_terms and are not recomputed.

    Attributes of the result:
        ratio:          max_single / min_mean, infinite when the design average is singular.
        max_single:     Largest whitened eigenvalue of any single setting.
        min_mean:       Smallest whitened eigenvalue of the design average.
        quantum_max:    Largest whitened eigenvalue of the quantum Fisher information.
    """
    root = weight_inverse_sqrt(chart)
    if terms is None:
        terms = fisher_terms(chart, design, workers)
    max_single = max(_whitened_extremes(term, root)[1] for term in terms)
    min_mean = _whitened_extremes(average_information(terms), root)[0]
    quantum_max = _whitened_extremes(quantum_fisher(chart), root)[1]
    ratio = max_single / min_mean if min_mean > RCOND * max_single else math.inf
    return SpectrumBounds(ratio, max_single, min_mean, quantum_max)
