"""Named, reproducible random streams derived from one run seed."""

import zlib

import numpy as np


def seed_sequence(seed: int, name: str, *index: int) -> np.random.SeedSequence:
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag, *(int(i) for i in index)])


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Generator for the sub-stream ``name`` (optionally indexed, e.g. by sample)."""
    return np.random.default_rng(seed_sequence(seed, name, *index))


def child_seed(seed: int, name: str, *index: int) -> int:
    """A plain integer seed for APIs that take one (e.g. training shuffles)."""
    return int(seed_sequence(seed, name, *index).generate_state(1, np.uint32)[0])
