"""
Keyed Random Streams

Every random draw in the simulator comes from a stream identified by
(master_seed, purpose, s, i, c, r). Streams are numpy Philox generators
(counter-based), seeded through SeedSequence spawn keys, so the draws of a
task never depend on which worker ran it or in what order.

PURPOSE TAGS:
- topology:    (s)           random regular graph of class s
- class-delay: (s)           mean edge delays of class s
- inst-tau:    (s, i)        node time constants of instance i
- inst-delay:  (s, i)        edge delays of instance i
- challenge:   (s)           challenge set of class s
- noise:       (s, i, c, r)  per-step Gaussian noise of one integration
"""

import numpy as np

from src.errors import ParameterError


PURPOSE_TAGS = {
    'topology': 0,
    'class-delay': 1,
    'inst-tau': 2,
    'inst-delay': 3,
    'challenge': 4,
    'noise': 5,
}


def make_stream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """
    Build the generator for one keyed stream

    Args:
        master_seed: Experiment seed (non-negative integer)
        purpose: One of PURPOSE_TAGS
        *indices: Class/instance/challenge/repeat indices of the key

    Returns:
        numpy Generator backed by Philox

    Example:
        rng = make_stream(7, 'noise', 0, 3, 12, 1)
        eps = rng.standard_normal(256)
    """
    if purpose not in PURPOSE_TAGS:
        raise ParameterError(f"unknown stream purpose '{purpose}'")
    if int(master_seed) < 0:
        raise ParameterError(f"master_seed must be non-negative, got {master_seed}")
    if any(int(k) < 0 for k in indices):
        raise ParameterError(f"stream indices must be non-negative, got {indices}")

    key = (PURPOSE_TAGS[purpose],) + tuple(int(k) for k in indices)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
