"""
experiments contains the Experiment class and its subclasses, one per study.

An experiment splits its grid into independent jobs.  Each job draws its states
and designs from sub-seeds of the master seed derived from the job's coordinates,
so the records of a run do not depend on the number of workers, and any single
record can be recomputed with Experiment.replay.
"""

import logging

import numpy as np

from . import designs, fisher, records
from .mle import MleOptions, ml_relative_error, mse_monte_carlo
from .sampling import repetitions_for_budget
from .states import (
    InvalidRankError,
    LocalChart,
    eigen_chart,
    haar_unitary,
    random_rank_r_state,
)
from .workers import (
    BASIS_STREAM,
    DESIGN_STREAM,
    REPLICATE_STREAM,
    STATE_STREAM,
    derive_seed,
    map_ordered,
    tree_sum,
)

logger = logging.getLogger("tomofisher")


def make_record(kind, metric, value, **fields):
    """ Builds a record; NonIdentifiable values become non-identifiable records. """
    aux = dict(fields.pop("aux", None) or {})
    if isinstance(value, fisher.NonIdentifiable):
        aux.update(min_eigenvalue=value.min_eigenvalue, max_eigenvalue=value.max_eigenvalue)
        return records.ExperimentRecord(
            kind, metric, None, status=records.STATUS_NON_IDENTIFIABLE, aux=aux, **fields
        )
    return records.ExperimentRecord(kind, metric, value, aux=aux, **fields)


class Experiment:
    """
    General class for an experiment over a grid of cells.

    Attributes:
        kind:       Experiment kind stamped into every record.
        metric:     Name of the main metric.
        seed:       Master seed.
        workers:    Number of worker processes.
        timestamp:  Timestamp stamped into every record.
    """

    kind = None
    metric = None
    subcommand = None

    def __init__(self, seed=0, workers=1, timestamp=None):
        self.seed = int(seed)
        self.workers = int(workers)
        self.timestamp = timestamp

    def jobs(self):
        """ Returns the list of independent jobs, each a tuple of integers. """
        raise NotImplementedError

    def run_job(self, job):
        """ Returns the records of one job (index and timestamp unset). """
        raise NotImplementedError

    def job_for(self, cell):
        """ Returns the job that produces the record with the given cell coordinates. """
        raise NotImplementedError

    def expected_count(self):
        raise NotImplementedError

    def run(self):
        """
        Runs every job and returns the records in job order.

        Returns:
            List of ExperimentRecord, numbered from 0.
        """
        jobs = self.jobs()
        logger.info("Running {} over {} jobs".format(self.kind, len(jobs)))
        results = map_ordered(self.run_job, jobs, self.workers)
        output = [record for batch in results for record in batch]
        for index, record in enumerate(output):
            record.index = index
            record.timestamp = self.timestamp

        singular = sum(r.status == records.STATUS_NON_IDENTIFIABLE for r in output)
        failed = sum(r.status == records.STATUS_FAILED for r in output)
        if singular:
            logger.warning("{} of {} designs are not identifiable".format(singular, len(output)))
        if failed:
            logger.warning("{} of {} records failed".format(failed, len(output)))
        if len(output) != self.expected_count():
            logger.error(
                "{} produced {} records, expected {}".format(
                    self.kind, len(output), self.expected_count()
                )
            )
        logger.info("Finished {}: {} records".format(self.kind, len(output)))
        return output

    def replay(self, record):
        """
        Recomputes a single record from its cell coordinates.

        Raises:
            KeyError: If the experiment does not produce the record's cell and metric.
        """
        cell = list(record.cell)
        for candidate in self.run_job(self.job_for(cell)):
            if candidate.cell == cell and candidate.metric == record.metric:
                candidate.index = record.index
                candidate.timestamp = record.timestamp
                return candidate
        raise KeyError("No record for cell {} and metric {}".format(cell, record.metric))

    def _record(self, value, metric=None, **fields):
        return make_record(self.kind, metric or self.metric, value, **fields)

    def _failed(self, error, metric=None, **fields):
        logger.warning("{} cell {} failed: {}".format(self.kind, fields.get("cell"), error))
        aux = dict(fields.pop("aux", None) or {})
        aux["error"] = str(error)
        return records.ExperimentRecord(
            self.kind,
            metric or self.metric,
            None,
            status=records.STATUS_FAILED,
            aux=aux,
            **fields
        )


def _full_k_grid(k, largest):
    return list(k) if k is not None else list(range(1, largest + 1))


class _PauliStateMixin:
    """ Random rank-r states on n qubits and their per-setting Fisher information. """

    def _state(self, r, s):
        state_seed = derive_seed(self.seed, STATE_STREAM, r, s)
        rho = random_rank_r_state(2 ** self.n, r, state_seed)
        return state_seed, rho, eigen_chart(rho, r)

    @staticmethod
    def _per_setting(chart, settings):
        return {setting.label: fisher.fisher_single(chart, setting) for setting in settings}

    @staticmethod
    def _design_mean(per_setting, design):
        return tree_sum([per_setting[label] for label in design.labels]) / len(design)


class SettingsSweep(_PauliStateMixin, Experiment):
    """
    Asymptotic MSE Tr(I^-1 G) / N of random Pauli designs of k settings under a
    fixed budget of N samples (m = floor(N / k) repetitions per setting).

    Designs are drawn per (k, j) and shared by every state.
    """

    kind = "settings_sweep"
    metric = "asymptotic_mse"
    subcommand = "sweep"

    def __init__(
        self, n, ranks, k, N, states, designs, replacement=False, seed=0, workers=1, timestamp=None
    ):
        super().__init__(seed, workers, timestamp)
        self.n = n
        self.ranks = list(ranks)
        self.k_grid = _full_k_grid(k, 3 ** n)
        self.N = N
        self.states = states
        self.designs = designs
        self.replacement = replacement

    def jobs(self):
        return [(r, s) for r in self.ranks for s in range(self.states)]

    def job_for(self, cell):
        return tuple(cell[:2])

    def expected_count(self):
        return len(self.ranks) * self.states * len(self.k_grid) * self.designs

    def _design(self, k, j):
        return designs.sample_settings(
            self.n, k, self.replacement, derive_seed(self.seed, DESIGN_STREAM, k, j)
        )

    def run_job(self, job):
        r, s = job
        state_seed, rho, chart = self._state(r, s)
        weight = fisher.weight_matrix(chart)
        logger.debug("settings_sweep: r={} state {}".format(r, s))
        per_setting = None
        output = []
        for k in self.k_grid:
            m = repetitions_for_budget(self.N, k)
            for j in range(self.designs):
                design = self._design(k, j)
                fields = dict(
                    n=self.n,
                    d=2 ** self.n,
                    r=r,
                    state_seed=state_seed,
                    design=design.descriptor(),
                    N=self.N,
                    m=m,
                    cell=[r, s, k, j],
                    aux={"N_eff": m * k},
                )
                try:
                    if per_setting is None:
                        per_setting = self._per_setting(
                            chart, designs.pauli_design(designs.enumerate_pauli_settings(self.n))
                        )
                    info = self._design_mean(per_setting, design)
                except fisher.BoundarySingularityError as error:
                    output.append(self._failed(error, **fields))
                    continue
                output.append(self._record(fisher.asymptotic_mse(info, weight, m * k), **fields))
        return output


class MlVsFisher(Experiment):
    """
    Relative deviation |1 - N E||rho_ml - rho||^2 / Tr(I^-1 G)| of the truncated
    RrhoR estimator from the Fisher prediction, for one random rank-r state and
    random Pauli designs.
    """

    kind = "ml_vs_fisher"
    metric = "ml_relative_error"
    subcommand = "mle-compare"

    def __init__(
        self,
        n,
        r,
        k,
        N,
        designs,
        reps,
        max_iters=5000,
        conv_tol=1e-10,
        dilution=1.0,
        seed=0,
        workers=1,
        timestamp=None,
    ):
        super().__init__(seed, workers, timestamp)
        self.n = n
        self.r = r
        self.k_grid = _full_k_grid(k, 3 ** n)
        self.N = N
        self.designs = designs
        self.reps = reps
        self.options = MleOptions(r, max_iters=max_iters, conv_tol=conv_tol, dilution=dilution)

    def jobs(self):
        return [(k, j) for k in self.k_grid for j in range(self.designs)]

    def job_for(self, cell):
        return tuple(cell)

    def expected_count(self):
        return len(self.k_grid) * self.designs

    def run_job(self, job):
        k, j = job
        state_seed = derive_seed(self.seed, STATE_STREAM, self.r, 0)
        rho = random_rank_r_state(2 ** self.n, self.r, state_seed)
        chart = eigen_chart(rho, self.r)
        design = designs.sample_settings(
            self.n, k, False, derive_seed(self.seed, DESIGN_STREAM, k, j)
        )
        m = repetitions_for_budget(self.N, k)
        fields = dict(
            n=self.n,
            d=2 ** self.n,
            r=self.r,
            state_seed=state_seed,
            design=design.descriptor(),
            N=self.N,
            m=m,
            cell=[k, j],
        )
        weight = fisher.weight_matrix(chart)
        try:
            info = fisher.fisher_design(chart, design)
        except fisher.BoundarySingularityError as error:
            return [self._failed(error, **fields)]
        predicted = fisher.asymptotic_mse(info, weight, m * k)
        if isinstance(predicted, fisher.NonIdentifiable):
            return [self._record(predicted, **fields)]

        logger.debug("ml_vs_fisher: k={} design {}".format(k, j))
        mc = mse_monte_carlo(
            rho,
            design,
            m,
            self.reps,
            self.options,
            derive_seed(self.seed, REPLICATE_STREAM, k, j),
        )
        aux = {
            "mse_ml": mc.mean,
            "mse_ml_stderr": mc.stderr,
            "mse_fisher": predicted,
            "failures": len(mc.failures),
            "mean_iterations": float(np.mean([d.iterations for d in mc.diagnostics]))
            if mc.diagnostics
            else None,
            "converged_fraction": float(np.mean([d.converged for d in mc.diagnostics]))
            if mc.diagnostics
            else None,
        }
        fields["aux"] = aux
        if not mc.diagnostics:
            return [self._failed("every replicate failed", **fields)]
        return [self._record(ml_relative_error(mc, info, weight, m * k), **fields)]


class HaarConcentration(Experiment):
    """
    Whitened spectrum of the Fisher information of k Haar-random bases at an
    equal-eigenvalue state of rank r, and its relative error against the Haar
    average.
    """

    kind = "haar_concentration"
    metric = "relative_error"
    subcommand = "haar-concentration"

    def __init__(self, d, ranks, k, designs=1, seed=0, workers=1, timestamp=None):
        super().__init__(seed, workers, timestamp)
        self.d = d
        self.ranks = list(ranks)
        self.k_grid = _full_k_grid(k, 20)
        self.designs = designs

    def jobs(self):
        return [(r, k, t) for r in self.ranks for k in self.k_grid for t in range(self.designs)]

    def job_for(self, cell):
        return tuple(cell)

    def expected_count(self):
        return len(self.ranks) * len(self.k_grid) * self.designs

    def run_job(self, job):
        r, k, t = job
        chart = LocalChart(np.full(r, 1.0 / r), np.eye(self.d))
        basis_seed = derive_seed(self.seed, BASIS_STREAM, r, k, t)
        design = designs.haar_basis_design(self.d, k, basis_seed)
        weight = fisher.weight_matrix(chart)
        fields = dict(
            d=self.d, r=r, design=design.descriptor(), cell=[r, k, t]
        )
        try:
            terms = fisher.fisher_terms(chart, design)
        except fisher.BoundarySingularityError as error:
            return [self._failed(error, **fields)]
        info = fisher.average_information(terms)
        whitened, low, high = fisher.whiten(info, weight, fisher.weight_inverse_sqrt(chart))
        spectrum = np.linalg.eigvalsh(whitened)
        bounds = fisher.whitened_spectrum_bounds(chart, design, terms=terms)
        fields["aux"] = {
            "spectrum": spectrum,
            "whitened_min": low,
            "whitened_max": high,
            "max_single": bounds.max_single,
            "quantum_max": bounds.quantum_max,
        }
        value = fisher.relative_error(info, fisher.mean_haar_fisher(self.d, r), weight)
        return [self._record(value, **fields)]


class PauliRelativeError(_PauliStateMixin, Experiment):
    """
    Relative error Tr(I_S^-1 G) / Tr(I_bar^-1 G) of random Pauli designs against
    the average over all 3^n settings, at one random rank-r state.
    """

    kind = "pauli_relative_error"
    metric = "relative_error"
    subcommand = "pauli-re"

    def __init__(self, n, r, k, designs, seed=0, workers=1, timestamp=None):
        super().__init__(seed, workers, timestamp)
        self.n = n
        self.r = r
        self.k_grid = _full_k_grid(k, 3 ** n)
        self.designs = designs

    def jobs(self):
        return [(k,) for k in self.k_grid]

    def job_for(self, cell):
        return (cell[0],)

    def expected_count(self):
        return len(self.k_grid) * self.designs

    def run_job(self, job):
        (k,) = job
        state_seed, rho, chart = self._state(self.r, 0)
        weight = fisher.weight_matrix(chart)
        full = designs.pauli_design(designs.enumerate_pauli_settings(self.n))
        try:
            per_setting = self._per_setting(chart, full)
            mean_info = self._design_mean(per_setting, full)
        except fisher.BoundarySingularityError as error:
            per_setting = error
        output = []
        for j in range(self.designs):
            design = designs.sample_settings(
                self.n, k, False, derive_seed(self.seed, DESIGN_STREAM, k, j)
            )
            fields = dict(
                n=self.n,
                d=2 ** self.n,
                r=self.r,
                state_seed=state_seed,
                design=design.descriptor(),
                cell=[k, j],
            )
            if isinstance(per_setting, Exception):
                output.append(self._failed(per_setting, **fields))
                continue
            info = self._design_mean(per_setting, design)
            output.append(self._record(fisher.relative_error(info, mean_info, weight), **fields))
        return output


class MinEigenvalueStudy(Experiment):
    """
    Smallest eigenvalue of G^-1/2 I_bar G^-1/2 for the full Pauli design at
    equal-eigenvalue states of rank r, rotated by a Haar-random unitary unless
    rotate is False.
    """

    kind = "min_eigenvalue_study"
    metric = "min_eigenvalue"
    subcommand = "min-eig"

    def __init__(
        self, n_grid, ranks, states, rotate=True, stretch=False, seed=0, workers=1, timestamp=None
    ):
        """
        Creates a MinEigenvalueStudy.

        Raises:
            InvalidRankError: If a rank exceeds the dimension of the smallest system in n_grid.
        """
        super().__init__(seed, workers, timestamp)
        self.n_grid = list(n_grid)
        self.ranks = list(ranks)
        if max(self.ranks) > 2 ** min(self.n_grid):
            raise InvalidRankError(
                "Every rank must fit the smallest system", max(self.ranks), min(self.n_grid)
            )
        self.states = states
        self.rotate = rotate
        self.stretch = stretch

    def jobs(self):
        return [
            (n, r, s) for n in self.n_grid for r in self.ranks for s in range(self.states)
        ]

    def job_for(self, cell):
        return tuple(cell)

    def expected_count(self):
        return len(self.n_grid) * len(self.ranks) * self.states

    def run_job(self, job):
        n, r, s = job
        d = 2 ** n
        state_seed = None
        basis = np.eye(d)
        if self.rotate:
            state_seed = derive_seed(self.seed, STATE_STREAM, n, r, s)
            basis = haar_unitary(d, state_seed)
        chart = LocalChart(np.full(r, 1.0 / r), basis)
        full = designs.pauli_design(designs.enumerate_pauli_settings(n))
        fields = dict(n=n, d=d, r=r, state_seed=state_seed, design=full.descriptor(), cell=[n, r, s])
        try:
            bounds = fisher.whitened_spectrum_bounds(chart, full)
        except fisher.BoundarySingularityError as error:
            return [self._failed(error, **fields)]
        fields["aux"] = {
            "max_single": bounds.max_single,
            "quantum_max": bounds.quantum_max,
            "ratio": bounds.ratio,
        }
        return [self._record(bounds.min_mean, **fields)]


class CoarseGrainedSweep(_PauliStateMixin, Experiment):
    """
    Asymptotic MSE of random sets of k two-outcome Pauli observables under a
    fixed budget of N samples.  With compare_fine, each state also gets the
    asymptotic MSE of the full fine Pauli design at the same budget.
    """

    kind = "coarse_grained_sweep"
    metric = "asymptotic_mse"
    fine_metric = "fine_full_mse"
    subcommand = "coarse-compare"

    def __init__(
        self,
        n,
        ranks,
        k,
        N,
        states,
        designs,
        compare_fine=False,
        seed=0,
        workers=1,
        timestamp=None,
    ):
        super().__init__(seed, workers, timestamp)
        self.n = n
        self.ranks = list(ranks)
        self.k_grid = _full_k_grid(k, 4 ** n - 1)
        self.N = N
        self.states = states
        self.designs = designs
        self.compare_fine = compare_fine

    def jobs(self):
        return [(r, s) for r in self.ranks for s in range(self.states)]

    def job_for(self, cell):
        return tuple(cell[:2])

    def expected_count(self):
        per_state = len(self.k_grid) * self.designs + (1 if self.compare_fine else 0)
        return len(self.ranks) * self.states * per_state

    def run_job(self, job):
        r, s = job
        state_seed, rho, chart = self._state(r, s)
        weight = fisher.weight_matrix(chart)
        d = 2 ** self.n
        output = []
        try:
            per_observable = self._per_setting(
                chart, designs.coarse_design(designs.enumerate_pauli_observables(self.n))
            )
        except fisher.BoundarySingularityError as error:
            per_observable = error

        for k in self.k_grid:
            m = repetitions_for_budget(self.N, k)
            for j in range(self.designs):
                design = designs.sample_observables(
                    self.n, k, False, derive_seed(self.seed, DESIGN_STREAM, k, j)
                )
                fields = dict(
                    n=self.n,
                    d=d,
                    r=r,
                    state_seed=state_seed,
                    design=design.descriptor(),
                    N=self.N,
                    m=m,
                    cell=[r, s, k, j],
                    aux={"N_eff": m * k},
                )
                if isinstance(per_observable, Exception):
                    output.append(self._failed(per_observable, **fields))
                    continue
                info = self._design_mean(per_observable, design)
                output.append(self._record(fisher.asymptotic_mse(info, weight, m * k), **fields))

        if self.compare_fine:
            full = designs.pauli_design(designs.enumerate_pauli_settings(self.n))
            m = repetitions_for_budget(self.N, len(full))
            fields = dict(
                n=self.n,
                d=d,
                r=r,
                state_seed=state_seed,
                design=full.descriptor(),
                N=self.N,
                m=m,
                cell=[r, s, "fine"],
                aux={"N_eff": m * len(full)},
            )
            try:
                info = fisher.fisher_design(chart, full)
            except fisher.BoundarySingularityError as error:
                output.append(self._failed(error, metric=self.fine_metric, **fields))
            else:
                output.append(
                    self._record(
                        fisher.asymptotic_mse(info, weight, m * len(full)),
                        metric=self.fine_metric,
                        **fields
                    )
                )
        return output


EXPERIMENTS = {
    cls.subcommand: cls
    for cls in (
        SettingsSweep,
        MlVsFisher,
        HaarConcentration,
        PauliRelativeError,
        MinEigenvalueStudy,
        CoarseGrainedSweep,
    )
}


def create(subcommand, parameters, seed=0, workers=1, timestamp=None):
    """
    Creates the experiment of a subcommand.

    Raises:
        KeyError: If the subcommand does not run an experiment.
    """
    return EXPERIMENTS[subcommand](seed=seed, workers=workers, timestamp=timestamp, **parameters)


def settings_sweep(n, ranks, k, states, designs, N, seed, replacement=False, workers=1):
    return SettingsSweep(n, ranks, k, N, states, designs, replacement, seed, workers).run()


def ml_vs_fisher(n, r, k, N, reps, seed, designs=1, options=None, workers=1):
    experiment = MlVsFisher(n, r, k, N, designs, reps, seed=seed, workers=workers)
    if options is not None:
        experiment.options = options
    return experiment.run()


def haar_concentration(d, ranks, k, seed, designs=1, workers=1):
    return HaarConcentration(d, ranks, k, designs, seed, workers).run()


def pauli_relative_error(n, r, k, designs, seed, workers=1):
    return PauliRelativeError(n, r, k, designs, seed, workers).run()


def min_eigenvalue_study(n_grid, ranks, states, seed, rotate=True, stretch=False, workers=1):
    if not stretch and max(n_grid) > 6:
        raise ValueError("Studies beyond 6 qubits need stretch=True", max(n_grid))
    return MinEigenvalueStudy(n_grid, ranks, states, rotate, stretch, seed, workers).run()


def coarse_grained_sweep(n, ranks, k, N, states, designs, seed, compare_fine=False, workers=1):
    return CoarseGrainedSweep(n, ranks, k, N, states, designs, compare_fine, seed, workers).run()
