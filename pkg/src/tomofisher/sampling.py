"""
sampling contains the CountsTable class and the helpers that draw synthetic
multinomial outcome counts for a design.
"""

import csv
import functools
import json
import logging
from pathlib import Path

import numpy as np

from . import designs
from .workers import derive_seed, map_ordered

logger = logging.getLogger("tomofisher")

PROBABILITY_TOL = 1e-10

CSV_COLUMNS = ["setting_index", "outcome_index", "count"]


class InvalidProbabilityError(ValueError):
    pass


class InvalidCountsError(ValueError):
    pass


def repetitions_for_budget(N, k):
    """
    Returns the repetitions per setting m = floor(N / k) for a budget of N samples.

    Raises:
        ValueError: If k < 1 or the budget is smaller than k.
    """
    if k < 1:
        raise ValueError("A design needs at least one setting", k)
    m = int(N) // int(k)
    if m < 1:
        raise ValueError("Budget of {} samples is too small for {} settings".format(N, k))
    return m


class CountsTable:
    """
    Outcome counts of m repetitions of every setting of a design.

    Attributes:
        design: designs.Design the counts were taken with.
        m:      Repetitions per setting.
        counts: List with one integer array of outcome counts per setting.
        seed:   Seed the counts were drawn with, None for hand-built tables.
    """

    def __init__(self, design, m, counts, seed=None):
        """
        Creates a CountsTable.

        Raises:
            InvalidCountsError: If a row has the wrong length, a negative entry or does not sum to m.
        """
        if m < 1:
            raise InvalidCountsError("Repetitions per setting must be positive", m)
        counts = [np.array(row, dtype=np.int64) for row in counts]
        if len(counts) != len(design):
            raise InvalidCountsError(
                "Expected counts for {} settings, got {}".format(len(design), len(counts))
            )
        for index, (setting, row) in enumerate(zip(design, counts)):
            if row.shape != (setting.num_outcomes,):
                raise InvalidCountsError(
                    "Setting {} needs {} outcome counts".format(index, setting.num_outcomes),
                    row.shape,
                )
            if np.any(row < 0) or row.sum() != m:
                raise InvalidCountsError(
                    "Counts of setting {} must be non-negative and sum to {}".format(index, m),
                    row.tolist(),
                )
            row.flags.writeable = False
        self.design = design
        self.m = int(m)
        self.counts = counts
        self.seed = seed

    @property
    def num_samples(self):
        """ Total number of samples N = m k. """
        return self.m * len(self.design)

    def frequencies(self):
        return [row / self.m for row in self.counts]

    def __eq__(self, other):
        if not isinstance(other, CountsTable):
            return NotImplemented
        return (
            self.m == other.m
            and self.seed == other.seed
            and self.design == other.design
            and all(np.array_equal(a, b) for a, b in zip(self.counts, other.counts))
        )

    def __repr__(self):
        return "CountsTable(k={}, m={}, seed={})".format(len(self.design), self.m, self.seed)

    def to_csv(self, path):
        """
        Writes the counts to a CSV file and the design, m and seed to a JSON
        sidecar next to it (same name, .json suffix).

        Returns:
            (csv path, sidecar path)
        """
        path = Path(path)
        sidecar = path.with_suffix(".json")
        with open(str(path), "w", newline="") as outfile:
            writer = csv.writer(outfile)
            writer.writerow(CSV_COLUMNS)
            for setting_index, row in enumerate(self.counts):
                for outcome_index, count in enumerate(row):
                    writer.writerow([setting_index, outcome_index, int(count)])
        with open(str(sidecar), "w") as outfile:
            json.dump(
                {"design": self.design.to_dict(), "m": self.m, "seed": self.seed},
                outfile,
                sort_keys=True,
            )
        logger.info("Counts written to {}".format(path))
        return path, sidecar

    @classmethod
    def from_csv(cls, path):
        """
        Reads a table written by to_csv.

        Raises:
            InvalidCountsError: If the CSV does not match the sidecar.
        """
        path = Path(path)
        with open(str(path.with_suffix(".json"))) as infile:
            sidecar = json.load(infile)
        design = designs.Design.from_dict(sidecar["design"])
        counts = [np.zeros(setting.num_outcomes, dtype=np.int64) for setting in design]
        with open(str(path), newline="") as infile:
            for row in csv.DictReader(infile):
                try:
                    setting_index = int(row["setting_index"])
                    counts[setting_index][int(row["outcome_index"])] = int(row["count"])
                except (IndexError, KeyError, ValueError):
                    raise InvalidCountsError("Malformed counts row", row)
        return cls(design, sidecar["m"], counts, seed=sidecar.get("seed"))


def outcome_probabilities(rho, setting):
    """
    Returns the outcome distribution of a setting, clipped to [0, 1] and renormalised.

    Raises:
        InvalidProbabilityError: If a probability is below -PROBABILITY_TOL or they do not sum to one.
    """
    probs = designs.outcome_probabilities(rho, setting)
    if np.any(probs < -PROBABILITY_TOL) or abs(probs.sum() - 1) > PROBABILITY_TOL:
        raise InvalidProbabilityError(
            "Setting {} has an invalid outcome distribution".format(setting.describe()),
            probs.tolist(),
        )
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _sample_setting(rho, m, seed, job):
    index, setting = job
    probs = outcome_probabilities(rho, setting)
    rng = np.random.default_rng(derive_seed(seed, index))
    return rng.multinomial(m, probs)


def sample_counts(rho, design, m, seed, workers=1):
    """
    Draws m multinomial outcomes for every setting of a design.

    Setting i is sampled from the sub-seed derive_seed(seed, i), so the table
    depends only on (rho, design, m, seed).

    Args:
        rho:        Density matrix.
        design:     designs.Design.
        m:          Repetitions per setting.
        seed:       Non-negative integer seed.
        workers:    Number of worker processes - Optional.

    Raises:
        InvalidProbabilityError:    If rho gives an invalid outcome distribution.
        InvalidCountsError:         If m < 1.
    """
    if m < 1:
        raise InvalidCountsError("Repetitions per setting must be positive", m)
    rho = np.asarray(rho, dtype=complex)
    counts = map_ordered(
        functools.partial(_sample_setting, rho, m, seed), enumerate(design.settings), workers
    )
    return CountsTable(design, m, counts, seed=seed)
