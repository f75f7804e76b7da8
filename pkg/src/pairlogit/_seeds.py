"""Deterministic seed derivation.

Per-chain and per-iteration seeds are mixed from a master seed plus integer
and string tags with a fixed splitmix-style hash. Using our own mixer (not
Python's salted hash) keeps the derived streams identical across processes
and machines, which the reproducibility contract depends on.
"""

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a(text: str) -> int:
    h = _FNV_OFFSET
    for b in text.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _mix_round(h: int) -> int:
    h = (h + 0x9E3779B97F4A7C15) & _MASK
    z = h
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_seed(*parts) -> int:
    """Fold integers and strings into one 64-bit seed."""
    h = 0x8F1BBCDC2E096F11
    for part in parts:
        if isinstance(part, str):
            h ^= _fnv1a(part)
        else:
            h ^= int(part) & _MASK
        h = _mix_round(h)
    return h
