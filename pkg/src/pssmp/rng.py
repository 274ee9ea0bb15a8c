"""Counter-style random streams.

Every random draw in the package comes from a generator keyed by
``(master seed, path index, block index, purpose tag)``.  Results therefore
never depend on the order in which paths are processed or on how many
worker threads were used.
"""
import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags keep independent uses of the same (seed, path) apart
TAG_INCREMENTS = 0
TAG_LIFETIME = 1
TAG_AUX = 2


def normalize_seed(seed):
    """Reduce an arbitrary integer to a 64-bit master seed."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    return int(seed) & MASK64


def stream(seed, path=0, block=0, tag=TAG_INCREMENTS):
    """Return the generator for one (seed, path, block, tag) counter."""
    key = [normalize_seed(seed), int(path), int(block), int(tag)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def derive(seed, *labels):
    """Derive a child master seed from a parent seed and integer labels.

    Used to give independent sub-experiments (e.g. the two samples of a
    two-sample test) disjoint stream families.
    """
    ss = np.random.SeedSequence([normalize_seed(seed)] + [int(v) & MASK64 for v in labels])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
