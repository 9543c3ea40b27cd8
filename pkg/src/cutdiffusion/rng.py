"""Deterministic random streams.

Every random draw in the engine comes from a named substream derived from
the run seed, so results are bit-identical for any worker count and any
execution order. A substream is a Philox counter-based generator whose
128-bit key is the BLAKE2b-16 digest of ``repr((seed, *tags))`` read as two
little-endian u64 words.

Streams used by the engine:

- ``(seed, "patchset")``: initial patch noise, drawn patch-major then
  row-major (patch 0 fully, then patch 1, ...; C order within a patch).
- ``(seed, "interact", t)``: pixel-interaction permutation keys for step t,
  one uniform array of shape (h, w, L1).
"""

import hashlib

import numpy as np


def substream(seed: int, *tags) -> np.random.Generator:
    """Return the named substream for (seed, *tags).

    Tags may be strings or integers; the tuple repr is the key material, so
    ("interact", 3) and ("interact", "3") are distinct streams.
    """
    msg = repr((int(seed),) + tuple(tags)).encode("utf-8")
    key = np.frombuffer(hashlib.blake2b(msg, digest_size=16).digest(), dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))
