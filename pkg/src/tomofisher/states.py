"""
states contains density matrix helpers, random state generation and the LocalChart
class, the local parametrisation of rank-r states around a given state.

Density matrices are plain d x d complex numpy arrays.  check_density_matrix()
validates them against the Hermitian, unit trace and PSD tolerances below.
"""

import logging
from collections import namedtuple

import numpy as np
from scipy import linalg

logger = logging.getLogger("tomofisher")

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-10
RANK_TOL = 1e-10
EMBED_PSD_TOL = 1e-9


class InvalidStateError(ValueError):
    """Raised when a matrix is not a density matrix"""

    pass


class InvalidRankError(ValueError):
    pass


class InvalidBasisError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class RankMismatchError(ValueError):
    """Raised when a state has more than r eigenvalues above RANK_TOL"""

    def __init__(self, message, eigenvalue):
        super().__init__(message, eigenvalue)
        self.eigenvalue = eigenvalue


class OutOfModelError(ValueError):
    """Raised when a chart point is not a PSD matrix"""

    def __init__(self, message, min_eigenvalue):
        super().__init__(message, min_eigenvalue)
        self.min_eigenvalue = min_eigenvalue


# kind is one of "diag", "re", "im"; row and col are 0-based indices in the chart basis
Parameter = namedtuple("Parameter", ["kind", "row", "col"])


def num_params(d, r):
    """ Dimension D = 2rd - r^2 - 1 of the manifold of rank-r states in dimension d. """
    return 2 * r * d - r * r - 1


def _hermitian_part(matrix):
    return (matrix + matrix.conj().T) / 2


def _unitarity_error(basis):
    return np.max(np.abs(basis.conj().T @ basis - np.eye(basis.shape[1])))


def check_density_matrix(rho):
    """
    Validates a density matrix.

    Args:
        rho:    Square complex array.

    Raises:
        InvalidStateError: If rho is not square, Hermitian, unit trace and PSD within tolerance.

    Returns:
        rho as a complex numpy array.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError("A density matrix must be square", rho.shape)
    asymmetry = np.max(np.abs(rho - rho.conj().T))
    if asymmetry > HERMITIAN_TOL:
        raise InvalidStateError("Density matrix is not Hermitian", asymmetry)
    trace = np.trace(rho)
    if abs(trace - 1) > TRACE_TOL:
        raise InvalidStateError("Density matrix does not have unit trace", trace)
    min_eigenvalue = linalg.eigvalsh(rho)[0]
    if min_eigenvalue < -PSD_TOL:
        raise InvalidStateError("Density matrix is not PSD", min_eigenvalue)
    return rho


def frobenius_sq_dist(a, b):
    """ Squared Frobenius distance sum |a_ij - b_ij|^2 between two matrices of equal shape. """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError("Cannot compare matrices", a.shape, b.shape)
    return float(np.sum(np.abs(a - b) ** 2))


def _haar_from_generator(d, rng):
    ginibre = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(
        2
    )
    q, r = linalg.qr(ginibre)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def haar_unitary(d, seed):
    """
    Draws a Haar-distributed d x d unitary.

    The unitary is the Q factor of a complex Ginibre matrix with the phases of the
    diagonal of R moved into Q, which makes the distribution exactly Haar.

    Args:
        d:      Dimension (>= 1).
        seed:   Non-negative integer seed.

    Returns:
        d x d complex unitary array.
    """
    if d < 1:
        raise ValueError("Dimension must be at least 1", d)
    return _haar_from_generator(d, np.random.default_rng(seed))


def random_rank_r_state(d, r, seed):
    """
    Draws a random rank-r state rho = T^dagger T / Tr(T^dagger T) where T is an
    r x d matrix of i.i.d. standard complex Gaussians.

    Raises:
        InvalidRankError: If r is not in [1, d].
    """
    if not 1 <= r <= d:
        raise InvalidRankError("Rank must satisfy 1 <= r <= d", r, d)
    rng = np.random.default_rng(seed)
    factor = (rng.standard_normal((r, d)) + 1j * rng.standard_normal((r, d))) / np.sqrt(
        2
    )
    rho = factor.conj().T @ factor
    rho = _hermitian_part(rho)
    return rho / np.trace(rho).real


def equal_eigenvalue_state(d, r, basis=None):
    """
    Returns U Diag(1/r, ..., 1/r, 0, ..., 0) U^dagger.

    Args:
        d:      Dimension.
        r:      Rank.
        basis:  d x d unitary U - Optional.  Defaults to the identity.

    Raises:
        InvalidRankError:   If r is not in [1, d].
        InvalidBasisError:  If basis is not unitary.
    """
    if not 1 <= r <= d:
        raise InvalidRankError("Rank must satisfy 1 <= r <= d", r, d)
    diagonal = np.zeros(d)
    diagonal[:r] = 1.0 / r
    if basis is None:
        return np.diag(diagonal).astype(complex)
    basis = _check_basis(basis, d)
    return _hermitian_part((basis * diagonal) @ basis.conj().T)


def _check_basis(basis, d):
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (d, d):
        raise InvalidBasisError("Basis must be a {0} x {0} matrix".format(d), basis.shape)
    error = _unitarity_error(basis)
    if error > UNITARY_TOL:
        raise InvalidBasisError("Basis is not unitary", error)
    return basis


def _fix_phases(vectors):
    """ Makes the largest-magnitude entry of every column real and positive. """
    vectors = vectors.copy()
    for column in range(vectors.shape[1]):
        pivot = vectors[np.argmax(np.abs(vectors[:, column])), column]
        vectors[:, column] *= np.conj(pivot) / np.abs(pivot)
    return vectors


class LocalChart:
    """
    The local parametrisation of rank-r states around a rank-r state rho.

    In the eigenbasis of rho, a chart point theta sets the first r rows (and
    columns) of the matrix: theta holds the diagonal entries 2..r, then the real
    parts and then the imaginary parts of the entries (i, j) with i < r, i < j.
    The (1, 1) entry is fixed by the trace and the lower-right corner is zero.

    Attributes:
        dim:            Hilbert space dimension d.
        rank:           Rank r.
        eigenvalues:    Length-r array of the support eigenvalues, descending.
        eigenbasis:     d x d unitary whose columns are the eigenvectors (first r span the support).
        param_index:    List of D Parameter descriptors in canonical order.
    """

    def __init__(self, eigenvalues, eigenbasis):
        """
        Creates a LocalChart.

        Args:
            eigenvalues:    Support eigenvalues, descending.
            eigenbasis:     d x d unitary, columns are eigenvectors.

        Raises:
            InvalidRankError:   If the number of eigenvalues is not in [1, d].
            InvalidBasisError:  If eigenbasis is not unitary.
            InvalidStateError:  If the eigenvalues are not descending or sum to more than one.
        """
        eigenvalues = np.array(eigenvalues, dtype=float)
        eigenbasis = np.asarray(eigenbasis, dtype=complex)
        d = eigenbasis.shape[0]
        r = eigenvalues.size
        if not 1 <= r <= d:
            raise InvalidRankError("Chart rank must satisfy 1 <= r <= d", r, d)
        eigenbasis = _check_basis(eigenbasis, d).copy()
        if np.any(np.diff(eigenvalues) > 0):
            raise InvalidStateError("Chart eigenvalues must be descending", eigenvalues)
        if eigenvalues.sum() > 1 + TRACE_TOL:
            raise InvalidStateError("Chart eigenvalues sum to more than one", eigenvalues)

        self.dim = d
        self.rank = r
        self.eigenvalues = eigenvalues
        self.eigenbasis = eigenbasis
        self.eigenvalues.flags.writeable = False
        self.eigenbasis.flags.writeable = False

        pairs = [(i, j) for i in range(r) for j in range(i + 1, d)]
        self.diag_rows = np.arange(1, r)
        self.pair_rows = np.array([i for i, _ in pairs], dtype=int)
        self.pair_cols = np.array([j for _, j in pairs], dtype=int)
        self.param_index = (
            [Parameter("diag", i, i) for i in range(1, r)]
            + [Parameter("re", i, j) for i, j in pairs]
            + [Parameter("im", i, j) for i, j in pairs]
        )

    @property
    def num_params(self):
        return len(self.param_index)

    @property
    def num_pairs(self):
        return self.pair_rows.size

    @property
    def theta0(self):
        """ The chart coordinates of the base state: eigenvalues 2..r, zeros elsewhere. """
        theta = np.zeros(self.num_params)
        theta[: self.rank - 1] = self.eigenvalues[1:]
        return theta

    def chart_matrix(self, theta):
        """
        Returns the matrix of the chart point theta in the chart eigenbasis.

        Raises:
            DimensionMismatchError: If theta does not have D entries.
        """
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise DimensionMismatchError(
                "Chart point must have {} entries".format(self.num_params), theta.shape
            )
        r = self.rank
        pairs = self.num_pairs
        diagonal = theta[: r - 1]
        real = theta[r - 1 : r - 1 + pairs]
        imag = theta[r - 1 + pairs :]

        matrix = np.zeros((self.dim, self.dim), dtype=complex)
        matrix[self.diag_rows, self.diag_rows] = diagonal
        matrix[0, 0] = 1.0 - diagonal.sum()
        matrix[self.pair_rows, self.pair_cols] = real + 1j * imag
        matrix[self.pair_cols, self.pair_rows] = real - 1j * imag
        return matrix

    def derivative_matrices(self):
        """ Returns the D x d x d stack of partial derivatives of the chart matrix. """
        derivatives = np.zeros((self.num_params, self.dim, self.dim), dtype=complex)
        for a, parameter in enumerate(self.param_index):
            i, j = parameter.row, parameter.col
            if parameter.kind == "diag":
                derivatives[a, i, i] = 1.0
                derivatives[a, 0, 0] = -1.0
            elif parameter.kind == "re":
                derivatives[a, i, j] = 1.0
                derivatives[a, j, i] = 1.0
            else:
                derivatives[a, i, j] = 1j
                derivatives[a, j, i] = -1j
        return derivatives

    def to_chart_basis(self, vectors):
        """ Expresses the columns of vectors in the chart eigenbasis. """
        return self.eigenbasis.conj().T @ vectors

    def __repr__(self):
        return "LocalChart(dim={}, rank={}, eigenvalues={})".format(
            self.dim, self.rank, np.array2string(self.eigenvalues, precision=4)
        )


def eigen_chart(rho, r):
    """
    Builds the LocalChart of a rank-r state in its own eigenbasis.

    Eigenvalues are sorted descending with a stable tie-break and every
    eigenvector's phase is fixed so that its largest-magnitude entry is real and
    positive.

    Args:
        rho:    Density matrix.
        r:      Rank of the model.

    Raises:
        InvalidRankError:   If r is not in [1, d].
        RankMismatchError:  If the (r+1)-th eigenvalue exceeds RANK_TOL.
    """
    rho = check_density_matrix(rho)
    d = rho.shape[0]
    if not 1 <= r <= d:
        raise InvalidRankError("Rank must satisfy 1 <= r <= d", r, d)

    eigenvalues, eigenvectors = linalg.eigh(rho)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    if r < d and eigenvalues[r] > RANK_TOL:
        raise RankMismatchError(
            "State has effective rank above {}".format(r), float(eigenvalues[r])
        )
    support = np.clip(eigenvalues[:r], 0.0, None)
    return LocalChart(support, _fix_phases(eigenvectors))


def chart_embed(chart, theta, check_psd=False):
    """
    Maps a chart point back to a matrix in the original basis.

    The map is the linear (first order) chart: the lower-right (d-r) x (d-r)
    corner is zero, so points off the base state are in general only PSD for
    full-rank charts.

    Args:
        chart:      LocalChart.
        theta:      Length-D real vector.
        check_psd:  Raise OutOfModelError when the result is not PSD - Optional.  Defaults to False.

    Raises:
        DimensionMismatchError: If theta has the wrong length.
        OutOfModelError:        If check_psd is set and the minimum eigenvalue is below -1e-9.

    Returns:
        d x d Hermitian unit-trace complex array.
    """
    matrix = chart.chart_matrix(theta)
    basis = chart.eigenbasis
    embedded = _hermitian_part(basis @ matrix @ basis.conj().T)
    if check_psd:
        min_eigenvalue = float(linalg.eigvalsh(embedded)[0])
        if min_eigenvalue < -EMBED_PSD_TOL:
            raise OutOfModelError("Chart point is not a PSD matrix", min_eigenvalue)
    return embedded
