"""
workers contains the helpers that keep parallel runs reproducible: counter-based
sub-seeding, an order-preserving map over a process pool and pairwise summation.
"""

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

logger = logging.getLogger("tomofisher")

# stream identifiers, always the first sub-seed coordinate
STATE_STREAM = 0
DESIGN_STREAM = 1
SAMPLE_STREAM = 2
BASIS_STREAM = 3
REPLICATE_STREAM = 4


def _seed_sequence(seed, coordinates):
    if int(seed) < 0:
        raise ValueError("Seeds must be non-negative integers", seed)
    return np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(c) for c in coordinates)
    )


def derive_seed(seed, *coordinates):
    """
    Derives a sub-seed from a master seed and a tuple of integer coordinates.

    The derivation depends only on its arguments, never on the order in which
    sub-seeds are requested, so work split over any number of workers draws
    the same random numbers.

    Args:
        seed:           Master seed (non-negative integer).
        coordinates:    Integer coordinates of the job (e.g. stream, rank, index).

    Returns:
        A non-negative integer seed.
    """
    state = _seed_sequence(seed, coordinates).generate_state(1, dtype=np.uint64)
    return int(state[0])


def map_ordered(function, items, workers=1):
    """
    Applies function to every item and returns the results in item order.

    Args:
        function:   Picklable callable (module-level function, bound method of a picklable object or functools.partial).
        items:      Iterable of job descriptions.
        workers:    Number of worker processes - Optional.  1 (the default) runs in-process.

    Returns:
        List of results, ordered like items regardless of completion order.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]

    logger.debug("Dispatching {} jobs to {} workers".format(len(items), workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items))


def tree_sum(terms):
    """
    Sums arrays pairwise, ((t0 + t1) + (t2 + t3)) + ..., so the rounding of the
    result depends on the order of terms only.

    Raises:
        ValueError: If terms is empty.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("Cannot sum an empty sequence of terms")
    while len(terms) > 1:
        paired = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]
