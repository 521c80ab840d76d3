"""Seed derivation.

Every random stream in the package is derived from one top-level seed through
a (module, purpose, index) path, so results never depend on call order or on
how work is split between workers.
"""
import zlib

import numpy as np


def _tag(name):
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(seed, module, purpose="", index=0):
    """Return a SeedSequence for the node (module, purpose, index) under `seed`."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _tag(module), _tag(purpose), int(index)])


def derive_rng(seed, module, purpose="", index=0):
    return np.random.default_rng(derive_seed(seed, module, purpose, index))
