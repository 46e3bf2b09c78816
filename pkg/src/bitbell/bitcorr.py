"""Bit extraction from occupation numbers and same-index bit correlators.

A bit value ``b`` is read out as the sign ``(-1)**b`` (bit 0 -> +1), so the
correlator of the ``y``-th least significant bits is

    E_y = sum_{n1, n2} Pr(n1, n2) (-1)**(bit(n1, y) + bit(n2, y))

over the retained grid.  Unseen probability can shift ``E_y`` by at most its
own mass in either direction; the reported error is ``2 * tail_mass``.
"""

from __future__ import annotations

import numpy as np

from .fock import JointDistribution

MAX_BIT = 3


def _check_index(y: int, max_bit: int | None = None) -> int:
    if int(y) != y or y < 1:
        raise ValueError(f"bit index must be an integer >= 1, got {y!r}")
    if max_bit is not None and y > max_bit:
        raise ValueError(f"bit index {y} exceeds the measurable maximum {max_bit}")
    return int(y)


def bit(n, y: int):
    """The ``y``-th least significant binary digit of ``n`` (``y = 1`` is the parity)."""
    y = _check_index(y)
    if np.any(np.asarray(n) < 0):
        raise ValueError("occupation numbers must be >= 0")
    return (n >> (y - 1)) & 1


def bit_sign(n, y: int):
    return 1 - 2 * bit(n, y)


def correlator(dist: JointDistribution, y: int, max_bit: int | None = None) -> tuple[float, float]:
    """``(E, err)`` for the ``y``-th bits of the two occupation numbers."""
    _check_index(y, max_bit)
    signs = bit_sign(np.arange(dist.probs.shape[0]), y).astype(float)
    value = float(signs @ dist.probs @ signs)
    return value, 2.0 * dist.tail_mass


def _disagreement(probs: np.ndarray, low: np.ndarray) -> float:
    # `low` marks occupation numbers whose bit is 0
    return float(probs[np.ix_(low, ~low)].sum() + probs[np.ix_(~low, low)].sum())


def correlator_partition_y2(dist: JointDistribution) -> float:
    """``E_2 = 1 - 2 Pr(disagree)`` with bit 2 zero on ``{0, 1, 4, 5, 8, 9, ...}``."""
    n = np.arange(dist.probs.shape[0])
    low = n % 4 < 2
    return 1.0 - 2.0 * _disagreement(dist.probs, low)


def correlator_partition_y3(dist: JointDistribution) -> float:
    """``E_3`` from the ``4i + j`` split: bit 3 is zero exactly when ``i`` is even.

    The disagreement sums run over ``n1 = 4i + j``, ``n2 = 4l + s`` with
    ``j, s in 0..3`` and ``i``, ``l`` of opposite parity.
    """
    probs = dist.probs
    size = probs.shape[0]
    total = 0.0
    blocks = range((size + 3) // 4)
    for i in blocks:
        for l in blocks:
            if (i + l) % 2 == 0:
                continue
            total += probs[4 * i : 4 * i + 4, 4 * l : 4 * l + 4].sum()
    return 1.0 - 2.0 * total
