"""Seeded random substreams.

Every random draw in the package comes from a generator keyed by
``(root_seed, tag, *indices)`` through :class:`numpy.random.SeedSequence`'s
``spawn_key``. A stream therefore depends only on its key, never on how many
other streams were consumed before it, so serial and parallel runs agree and
changing ``B`` or ``trials`` leaves earlier iterations untouched.

Tags:

* ``PARTITION`` - permutation used by :func:`dackrr.dac.make_partition`.
* ``BOOTSTRAP, b`` - draws of bootstrap iteration ``b``.
* ``TRIAL, P, t`` - root of simulation trial ``t`` at partition count ``P``.
* ``DATA`` - covariates and noise in :func:`dackrr.simulate.simulate_data`.
* ``DESIGN`` - Nyström design sample drawn by the ``diagnose`` command.
"""

import numpy as np

PARTITION = 1
BOOTSTRAP = 2
TRIAL = 3
DATA = 4
DESIGN = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed for ``key``, for APIs that take plain integer seeds."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
