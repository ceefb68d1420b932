"""
designs contains the Setting, Design and ProbabilityTable classes: Pauli settings,
Haar-random bases and two-outcome Pauli observables, their outcome probabilities
and the gradients of those probabilities in a LocalChart.

Every setting is backed by an orthonormal basis whose vectors are the columns of
Setting.vectors.  A fine setting has one outcome per basis vector; a coarse
(Pauli observable) setting groups the vectors of its compatible Pauli basis into
the +1 and -1 eigenspaces, via Setting.outcome_map.

Outcome index convention for n qubits: outcome o = (o_1, ..., o_n) in {+1, -1}^n
has index sum_i b_i 2^(n-i) with b_i = (1 - o_i) / 2, qubit 1 most significant.
"""

import itertools
import json
import logging
from pathlib import Path

import numpy as np

from . import states
from .workers import derive_seed

logger = logging.getLogger("tomofisher")

PAULI_LETTERS = "xyz"
OBSERVABLE_LETTERS = "0xyz"

# columns are the +1 and -1 eigenvectors
_EIGENVECTORS = {
    "z": np.array([[1, 0], [0, 1]], dtype=complex),
    "x": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
}

_PAULIS = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

KINDS = ("pauli", "haar", "coarse")

PROBABILITY_TOL = 1e-12


class InvalidLabelError(ValueError):
    pass


class IncompatibleLabelError(ValueError):
    """Raised when a Pauli observable cannot be read off a setting's outcomes"""

    pass


class DesignSizeError(ValueError):
    pass


def _check_label(label, letters, n=None):
    if not isinstance(label, str) or not label:
        raise InvalidLabelError("Labels must be non-empty strings", label)
    if n is not None and len(label) != n:
        raise InvalidLabelError("Label must have {} letters".format(n), label)
    invalid = [letter for letter in label if letter not in letters]
    if invalid:
        raise InvalidLabelError(
            "Label letters must be drawn from '{}'".format(letters), label
        )
    return label


def outcome_signs(n):
    """
    Returns the 2^n x n array of outcome signs: row o holds (o_1, ..., o_n) for
    outcome index o.
    """
    indices = np.arange(2 ** n)
    bits = (indices[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def pauli_setting_basis(s, n=None):
    """
    Returns the measurement basis of a Pauli setting.

    Args:
        s:  Label in {x,y,z}^n, e.g. "xz".
        n:  Number of qubits - Optional.  Checked against the label length when given.

    Raises:
        InvalidLabelError: If the label is malformed.

    Returns:
        2^n x 2^n complex array whose column o is the eigenvector for outcome index o.
    """
    s = _check_label(s, PAULI_LETTERS, n)
    basis = np.ones((1, 1), dtype=complex)
    for letter in s:
        basis = np.kron(basis, _EIGENVECTORS[letter])
    return basis


def pauli_observable(b, n=None):
    """ Returns sigma_b = sigma_b1 (x) ... (x) sigma_bn for a label in {0,x,y,z}^n. """
    b = _check_label(b, OBSERVABLE_LETTERS, n)
    operator = np.ones((1, 1), dtype=complex)
    for letter in b:
        operator = np.kron(operator, _PAULIS[letter])
    return operator


def pauli_observable_projectors(b, n=None):
    """
    Returns the spectral projections (P_plus, P_minus) of sigma_b.

    Raises:
        InvalidLabelError: If the label is malformed or is the identity label 0^n.
    """
    b = _check_label(b, OBSERVABLE_LETTERS, n)
    if set(b) == {"0"}:
        raise InvalidLabelError("The identity label carries no information", b)
    operator = pauli_observable(b)
    identity = np.eye(operator.shape[0], dtype=complex)
    return (identity + operator) / 2, (identity - operator) / 2


def compatible_setting(b):
    """ Returns the Pauli setting s with s_i = b_i wherever b_i != 0 and s_i = z elsewhere. """
    b = _check_label(b, OBSERVABLE_LETTERS)
    return b.replace("0", "z")


def enumerate_pauli_settings(n):
    """ Returns the 3^n Pauli setting labels in lexicographic order (x < y < z). """
    return ["".join(letters) for letters in itertools.product(PAULI_LETTERS, repeat=n)]


def enumerate_pauli_observables(n):
    """ Returns the 4^n - 1 non-identity observable labels in lexicographic order (0 < x < y < z). """
    return [
        "".join(letters)
        for letters in itertools.product(OBSERVABLE_LETTERS, repeat=n)
        if set(letters) != {"0"}
    ]


class Setting:
    """
    A single measurement setting.

    Attributes:
        kind:           "pauli", "haar" or "coarse".
        label:          Pauli or observable label, None for Haar bases.
        vectors:        d x d unitary whose columns are the basis vectors.
        outcome_map:    Length-d integer array mapping each basis vector to its outcome index.
        num_outcomes:   Number of distinct outcomes (d for bases, 2 for coarse observables).
    """

    def __init__(self, kind, vectors, label=None, outcome_map=None):
        if kind not in KINDS:
            raise InvalidLabelError("Unknown setting kind", kind)
        vectors = np.array(vectors, dtype=complex)
        d = vectors.shape[0]
        if outcome_map is None:
            outcome_map = np.arange(d)
        outcome_map = np.array(outcome_map, dtype=int)
        self.kind = kind
        self.label = label
        self.vectors = vectors
        self.outcome_map = outcome_map
        self.num_outcomes = int(outcome_map.max()) + 1
        self.vectors.flags.writeable = False
        self.outcome_map.flags.writeable = False

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def is_fine(self):
        return self.num_outcomes == self.dim

    def coarse_grain(self, fine):
        """ Sums the last axis of fine (one entry per basis vector) into outcomes. """
        if self.is_fine:
            return fine
        grouping = np.zeros((self.dim, self.num_outcomes))
        grouping[np.arange(self.dim), self.outcome_map] = 1.0
        return fine @ grouping

    def projectors(self):
        """ Returns the num_outcomes x d x d stack of outcome projectors. """
        projectors = np.zeros((self.num_outcomes, self.dim, self.dim), dtype=complex)
        for index in range(self.dim):
            vector = self.vectors[:, index]
            projectors[self.outcome_map[index]] += np.outer(vector, vector.conj())
        return projectors

    def describe(self):
        return self.label if self.label is not None else "<haar>"

    def to_json(self):
        if self.kind == "haar":
            return [[[entry.real, entry.imag] for entry in row] for row in self.vectors]
        return self.label

    def __eq__(self, other):
        if not isinstance(other, Setting):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind == "haar":
            return np.array_equal(self.vectors, other.vectors)
        return self.label == other.label

    def __hash__(self):
        return hash((self.kind, self.label))

    def __repr__(self):
        return "Setting({}, {})".format(self.kind, self.describe())


def pauli_setting(s, n=None):
    """ Returns the Setting measuring the Pauli basis labelled s. """
    return Setting("pauli", pauli_setting_basis(s, n), label=s)


def haar_setting(unitary):
    """ Returns the Setting measuring in the columns of a unitary. """
    return Setting("haar", unitary)


def coarse_setting(b, n=None):
    """
    Returns the two-outcome Setting measuring the Pauli observable sigma_b.

    The outcomes are read off the compatible Pauli setting: outcome index 0 (+1)
    collects the basis vectors whose sign product over the non-zero positions of
    b is +1, outcome index 1 (-1) the others.
    """
    b = _check_label(b, OBSERVABLE_LETTERS, n)
    if set(b) == {"0"}:
        raise InvalidLabelError("The identity label carries no information", b)
    active = np.array([letter != "0" for letter in b])
    parity = np.prod(outcome_signs(len(b))[:, active], axis=1)
    outcome_map = (1 - parity) // 2
    return Setting(
        "coarse", pauli_setting_basis(compatible_setting(b)), label=b, outcome_map=outcome_map
    )


class Design:
    """
    An ordered list of settings of one kind and one dimension.

    Attributes:
        kind:           "pauli", "haar" or "coarse".
        settings:       List of Setting objects.
        replacement:    Whether settings were drawn with replacement.
        seed:           Seed the design was drawn with, None for hand-built designs.
        num_qubits:     n for Pauli and coarse designs, None for Haar designs.
    """

    def __init__(self, kind, settings, replacement=False, seed=None):
        """
        Creates a Design.

        Raises:
            DesignSizeError:    If settings is empty.
            InvalidLabelError:  If settings mix kinds or dimensions, or repeat without replacement.
        """
        settings = list(settings)
        if not settings:
            raise DesignSizeError("A design needs at least one setting")
        if any(setting.kind != kind for setting in settings):
            raise InvalidLabelError("All settings of a design must be of kind " + kind)
        if len({setting.dim for setting in settings}) != 1:
            raise InvalidLabelError("All settings of a design must share one dimension")
        if not replacement and kind != "haar":
            labels = [setting.label for setting in settings]
            if len(set(labels)) != len(labels):
                raise InvalidLabelError(
                    "Settings drawn without replacement must be distinct", labels
                )
        self.kind = kind
        self.settings = settings
        self.replacement = bool(replacement)
        self.seed = seed

    @property
    def dim(self):
        return self.settings[0].dim

    @property
    def num_qubits(self):
        if self.kind == "haar":
            return None
        return len(self.settings[0].label)

    @property
    def labels(self):
        return [setting.label for setting in self.settings]

    def __len__(self):
        return len(self.settings)

    def __iter__(self):
        return iter(self.settings)

    def __getitem__(self, index):
        return self.settings[index]

    def __eq__(self, other):
        if not isinstance(other, Design):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.replacement == other.replacement
            and self.seed == other.seed
            and self.settings == other.settings
        )

    def __repr__(self):
        return "Design(kind={}, k={}, seed={})".format(self.kind, len(self), self.seed)

    def descriptor(self):
        """ Returns the short {kind, k, seed} descriptor stored in experiment records. """
        return {"kind": self.kind, "k": len(self), "seed": self.seed}

    def to_dict(self):
        """ Returns the JSON-serialisable form of the design. """
        data = {
            "kind": self.kind,
            "seed": self.seed,
            "replacement": self.replacement,
            "settings": [setting.to_json() for setting in self.settings],
        }
        if self.kind == "haar":
            data["d"] = self.dim
        else:
            data["n"] = self.num_qubits
        return data

    @classmethod
    def from_dict(cls, data):
        """
        Rebuilds a design from to_dict() output.

        Raises:
            KeyError:   If a required field is missing.
        """
        kind = data["kind"]
        if kind == "pauli":
            settings = [pauli_setting(label) for label in data["settings"]]
        elif kind == "coarse":
            settings = [coarse_setting(label) for label in data["settings"]]
        elif kind == "haar":
            settings = []
            for entries in data["settings"]:
                unitary = np.array(
                    [[complex(re, im) for re, im in row] for row in entries]
                )
                settings.append(haar_setting(unitary))
        else:
            raise InvalidLabelError("Unknown design kind", kind)
        return cls(
            kind, settings, replacement=data.get("replacement", False), seed=data.get("seed")
        )

    def save(self, path):
        path = Path(path)
        with open(str(path), "w") as outfile:
            json.dump(self.to_dict(), outfile, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(str(path)) as infile:
            return cls.from_dict(json.load(infile))


def pauli_design(labels, replacement=False, seed=None):
    """ Builds a Pauli Design from a list of setting labels. """
    return Design("pauli", [pauli_setting(label) for label in labels], replacement, seed)


def coarse_design(labels, replacement=False, seed=None):
    """ Builds a coarse Design from a list of observable labels. """
    return Design("coarse", [coarse_setting(label) for label in labels], replacement, seed)


def _sample_indices(population, k, replacement, seed):
    if k < 1:
        raise DesignSizeError("A design needs at least one setting", k)
    if not replacement and k > population:
        raise DesignSizeError(
            "Cannot draw {} settings out of {} without replacement".format(k, population)
        )
    rng = np.random.default_rng(seed)
    if replacement:
        indices = rng.integers(0, population, size=k)
    else:
        indices = rng.choice(population, size=k, replace=False)
    # designs are sets (multisets with replacement); sorting makes equal sets equal designs
    return np.sort(indices)


def sample_settings(n, k, replacement, seed):
    """
    Draws a uniformly random design of k Pauli settings.

    Args:
        n:              Number of qubits.
        k:              Number of settings.
        replacement:    Draw with replacement (i.i.d. settings) or without.
        seed:           Non-negative integer seed.

    Raises:
        DesignSizeError: If k < 1, or k > 3^n without replacement.
    """
    labels = enumerate_pauli_settings(n)
    indices = _sample_indices(len(labels), k, replacement, seed)
    return pauli_design([labels[i] for i in indices], replacement, seed)


def sample_observables(n, k, replacement, seed):
    """
    Draws a uniformly random design of k non-identity Pauli observables.

    Raises:
        DesignSizeError: If k < 1, or k > 4^n - 1 without replacement.
    """
    labels = enumerate_pauli_observables(n)
    indices = _sample_indices(len(labels), k, replacement, seed)
    return coarse_design([labels[i] for i in indices], replacement, seed)


def haar_basis_design(d, k, seed):
    """
    Draws k independent Haar-random orthonormal bases.

    The i-th basis is drawn from the sub-seed derive_seed(seed, i), so a design of
    k bases is a prefix of the design of k + 1 bases with the same seed.
    """
    if k < 1:
        raise DesignSizeError("A design needs at least one setting", k)
    settings = [
        haar_setting(states.haar_unitary(d, derive_seed(seed, index)))
        for index in range(k)
    ]
    return Design("haar", settings, replacement=True, seed=seed)


class ProbabilityTable:
    """
    Outcome probabilities of one setting at a chart point and their gradients.

    Attributes:
        probs:  Length num_outcomes array.
        grads:  D x num_outcomes array, grads[a, o] = dp(o) / dtheta_a.
    """

    def __init__(self, probs, grads):
        self.probs = probs
        self.grads = grads

    def __iter__(self):
        return iter((self.probs, self.grads))


def _check_dimensions(chart, setting):
    if chart.dim != setting.dim:
        raise states.DimensionMismatchError(
            "Chart and setting dimensions differ", chart.dim, setting.dim
        )


def probability_gradients(chart, setting):
    """
    Returns the D x num_outcomes gradient of the outcome probabilities.

    The chart is linear, so the gradient does not depend on the chart point.  With
    w = U^dagger v the measurement vector in the chart basis, the derivatives are
    |w_i|^2 - |w_1|^2 for diagonal parameters, 2 Re(w_i conj(w_j)) for real parts
    and 2 Im(w_i conj(w_j)) for imaginary parts.
    """
    _check_dimensions(chart, setting)
    w = chart.to_chart_basis(setting.vectors)
    weights = np.abs(w[: chart.rank]) ** 2
    diagonal = weights[1:] - weights[0]
    pairs = w[chart.pair_rows] * w[chart.pair_cols].conj()
    fine = np.vstack([diagonal, 2 * pairs.real, 2 * pairs.imag])
    return setting.coarse_grain(fine)


def probabilities(chart, theta, setting):
    """
    Returns the ProbabilityTable of a setting at a chart point.

    Args:
        chart:      LocalChart.
        theta:      Length-D chart point - Optional.  None means the base point theta0.
        setting:    Setting.

    Raises:
        DimensionMismatchError: If the chart and setting dimensions differ.
    """
    _check_dimensions(chart, setting)
    if theta is None:
        theta = chart.theta0
    matrix = chart.chart_matrix(theta)
    w = chart.to_chart_basis(setting.vectors)
    fine = np.sum(w.conj() * (matrix @ w), axis=0).real
    return ProbabilityTable(
        setting.coarse_grain(fine), probability_gradients(chart, setting)
    )


def outcome_probabilities(rho, setting):
    """ Returns p(o|s) = Tr(rho P_o^s) for every outcome of a setting. """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (setting.dim, setting.dim):
        raise states.DimensionMismatchError(
            "State and setting dimensions differ", rho.shape, setting.dim
        )
    vectors = setting.vectors
    fine = np.sum(vectors.conj() * (rho @ vectors), axis=0).real
    return setting.coarse_grain(fine)


def pauli_expectation_from_counts(counts, s, b):
    """
    Estimates <sigma_b> from the outcome counts of the Pauli setting s.

    Args:
        counts: Length-2^n outcome counts of setting s.
        s:      Pauli setting label.
        b:      Observable label; must agree with s wherever b is not 0.

    Raises:
        IncompatibleLabelError: If b cannot be read off s.
        ValueError:             If counts has the wrong length or sums to zero.

    Returns:
        sum_o (prod_{i: b_i != 0} o_i) N(o|s) / m.
    """
    s = _check_label(s, PAULI_LETTERS)
    b = _check_label(b, OBSERVABLE_LETTERS, len(s))
    if any(bi != "0" and bi != si for si, bi in zip(s, b)):
        raise IncompatibleLabelError(
            "Observable {} cannot be estimated from setting {}".format(b, s)
        )
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (2 ** len(s),):
        raise ValueError("Expected {} outcome counts".format(2 ** len(s)), counts.shape)
    m = counts.sum()
    if m <= 0:
        raise ValueError("Counts must contain at least one sample")
    active = np.array([letter != "0" for letter in b])
    parity = np.prod(outcome_signs(len(s))[:, active], axis=1)
    return float(parity @ counts / m)
