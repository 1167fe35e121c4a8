"""Deterministic seed derivation for independent simulation components.

Every random stream in a simulation run is seeded from the master seed plus
a label path, so changing one component's labels or seeds never perturbs the
random draws of another.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(master_seed: int, *labels: object) -> int:
    """Derive a child seed from a master seed and a label path.

    Built on sha256 so the result does not depend on interpreter hash
    randomization or platform word size.
    """
    text = ":".join([str(int(master_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK
