r"""Closed-form photon-number statistics of the displaced and locally squeezed TMSV.

Displaced state ``D1(z1) D2(z2) S12(r)|0,0>``.  With ``t = tanh r``,
``p = min(n1, n2)``, ``q = max(n1, n2)``::

    mu1 = z1 - t z2^*            mu2 = z2 - t z1^*
    <n1,n2|psi> = t^p / cosh r * sqrt(p!/q!) * mu^(q-p) * L_p^(q-p)(-mu1 mu2 / t)
                  * exp(-(z1^* mu1 + z2^* mu2) / 2)

where ``mu`` is ``mu1`` when ``n1 >= n2`` and ``mu2`` otherwise.  Two details
are easy to get wrong and are pinned by agreement with the brute-force engine
in :mod:`bitbell.fock`: the ``t`` term enters ``mu1``, ``mu2`` with a minus
sign for ``S12(r) = exp(r(B1^+ B2^+ - B1 B2))``, and the power ``q - p`` sits
on the ``mu`` of the more occupied mode (writing ``mu1^(n1-p) mu2^(n2-q)``
gives a negative exponent whenever ``n1 > n2``).

Locally squeezed state ``S1(r+) S2(r-) S12(r)|0,0>`` with
``S(s) = exp(s/2 (B^2 - B^+2))``.  After normal ordering the state is
``sqrt(M/K) exp(P B1^+2 + Q B2^+2 + R B1^+ B2^+)|0,0>`` and::

    <n1,n2|psi> = sqrt(M/K) sqrt(n1! n2!) cosh^-n1 r+ cosh^-n2 r-
                  * sum_j e_two^j e+^k1 e-^k2 / (j! k1! k2!)

with ``k1 = (n1 - j)/2``, ``k2 = (n2 - j)/2`` and ``j`` running over
``0..min(n1, n2)`` with the parity of ``n1``.  Only ``n1 + n2`` even is
populated.  ``M = 1/(1 - 4 d3 d4)`` (evaluated through the SU(1,1)
disentangling in :mod:`bitbell.lie`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CutoffExceeded, DegenerateDenominator
from .fock import EPS_TAIL, N_MAX_CAP, N_MAX_START, R_MAX, JointDistribution, budget
from .lie import decompose_su11

TANH_ZERO = 1e-12
PROB_FLOOR = 1e-300


def tmsv_coefficient(r: float, n: int) -> float:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return math.tanh(r) ** n / math.cosh(r)


def laguerre(p: int, a: int, x):
    """Generalised Laguerre polynomial ``L_p^(a)(x)`` by forward recurrence in ``p``.

    ``x`` may be real, complex or an array.
    """
    if p < 0:
        raise ValueError(f"degree must be >= 0, got {p}")
    prev = np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    if p == 0:
        return prev
    cur = 1.0 + a - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + a - x) * cur - (k + a) * prev) / (k + 1)
    return cur


def _coherent_amplitude(z: complex, n: int) -> complex:
    if z == 0:
        return 1.0 if n == 0 else 0.0
    log_mag = -abs(z) ** 2 / 2 + n * math.log(abs(z)) - 0.5 * math.lgamma(n + 1)
    return math.exp(log_mag) * np.exp(1j * n * np.angle(z))


def displaced_amplitude(r: float, z1: complex, z2: complex, n1: int, n2: int) -> complex:
    """``<n1, n2| D1(z1) D2(z2) S12(r) |0, 0>``."""
    if n1 < 0 or n2 < 0:
        raise ValueError("occupation numbers must be >= 0")
    z1, z2 = complex(z1), complex(z2)
    t = math.tanh(r)
    if abs(t) < TANH_ZERO:
        return complex(_coherent_amplitude(z1, n1) * _coherent_amplitude(z2, n2))
    p, q = min(n1, n2), max(n1, n2)
    mu1 = z1 - z2.conjugate() * t
    mu2 = z2 - z1.conjugate() * t
    lead = mu1 if n1 >= n2 else mu2
    ratio = math.exp(0.5 * (math.lgamma(p + 1) - math.lgamma(q + 1)))
    envelope = np.exp(-(z1.conjugate() * mu1 + z2.conjugate() * mu2) / 2)
    poly = laguerre(p, q - p, -mu1 * mu2 / t)
    return complex(t**p / math.cosh(r) * ratio * lead ** (q - p) * poly * envelope)


def displaced_prob(r: float, z1: complex, z2: complex, n1: int, n2: int) -> float:
    prob = abs(displaced_amplitude(r, z1, z2, n1, n2)) ** 2
    return 0.0 if prob < PROB_FLOOR else prob


def displaced_amplitudes(r: float, z1: complex, z2: complex, n_max: int) -> np.ndarray:
    """Amplitude grid for ``n1, n2 <= n_max``.

    Uses the recurrence for ``mu^a sqrt(p!/(p+a)!) t^p L_p^(a)(-mu1 mu2/t)``
    in ``p``, vectorised over ``a = |n1 - n2|``; it has no ``t -> 0``
    singularity and stays in range for large cutoffs.
    """
    z1, z2 = complex(z1), complex(z2)
    t = math.tanh(r)
    mu1 = z1 - z2.conjugate() * t
    mu2 = z2 - z1.conjugate() * t
    w = mu1 * mu2
    side = n_max + 1
    a = np.arange(side, dtype=float)
    half_log_fact = 0.5 * np.array([math.lgamma(k + 1) for k in range(side)])

    def seed(mu):
        out = np.zeros(side, dtype=complex)
        if mu == 0:
            out[0] = 1.0
            return out
        out[:] = np.exp(a * math.log(abs(mu)) - half_log_fact + 1j * a * np.angle(mu))
        return out

    # phi[:, p, a]; index 0 -> mu1 (n1 >= n2), 1 -> mu2 (n2 > n1)
    phi = np.zeros((2, side, side), dtype=complex)
    phi[:, 0] = np.stack([seed(mu1), seed(mu2)])
    for k in range(side - 1):
        c_now = (2 * k + 1 + a) * t + w
        c_back = np.sqrt(k * (k + a)) * t * t
        nxt = c_now * phi[:, k]
        if k > 0:
            nxt -= c_back * phi[:, k - 1]
        phi[:, k + 1] = nxt / np.sqrt((k + 1) * (k + 1 + a))

    n1, n2 = np.indices((side, side))
    p = np.minimum(n1, n2)
    gap = np.abs(n1 - n2)
    which = (n2 > n1).astype(int)
    envelope = np.exp(-(abs(z1) ** 2 + abs(z2) ** 2) / 2 + t * z1.conjugate() * z2.conjugate())
    return envelope / math.cosh(r) * phi[which, p, gap]


def _distribution_from(amps: np.ndarray) -> JointDistribution:
    probs = np.abs(amps) ** 2
    probs[probs < PROB_FLOOR] = 0.0
    return JointDistribution(probs, max(1.0 - float(probs.sum()), 0.0))


def _adaptive(
    build: Callable[[int], np.ndarray], n_max: int | None, eps_tail: float | None, what: str
) -> JointDistribution:
    n = n_max or N_MAX_START
    while True:
        dist = _distribution_from(build(n))
        if eps_tail is None or budget(dist) <= eps_tail:
            return dist
        if 2 * n > N_MAX_CAP:
            raise CutoffExceeded(
                f"{what}: truncation budget {budget(dist):.3g} exceeds {eps_tail:g} "
                f"at n_max={n} (cap {N_MAX_CAP})"
            )
        n *= 2


def displaced_distribution(
    r: float,
    z1: complex,
    z2: complex,
    n_max: int | None = None,
    *,
    eps_tail: float | None = EPS_TAIL,
) -> JointDistribution:
    """Joint distribution of the displaced TMSV; grows ``n_max`` until the tail fits."""
    return _adaptive(
        lambda n: displaced_amplitudes(r, z1, z2, n), n_max, eps_tail, f"displaced({r}, {z1}, {z2})"
    )


# -- local squeezing ---------------------------------------------------------


@dataclass(frozen=True)
class SqueezeParams:
    r: float
    r_plus: float = 0.0
    r_minus: float = 0.0

    def __post_init__(self):
        for name in ("r", "r_plus", "r_minus"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or abs(value) > R_MAX:
                raise ValueError(f"{name} must be finite with |{name}| <= {R_MAX}, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class SqueezeConstants:
    d1: float
    d2: float
    d3: float
    d4: float
    e_plus: float
    e_minus: float
    e_two: float
    K: float
    M: float


def squeeze_constants(params: SqueezeParams) -> SqueezeConstants:
    t = math.tanh(params.r)
    tp, tm = math.tanh(params.r_plus), math.tanh(params.r_minus)
    chp, chm = math.cosh(params.r_plus), math.cosh(params.r_minus)
    d1 = t * tm
    d3 = 0.5 * tm
    d4 = 0.5 * tp * t * t
    denom = 1.0 - 4.0 * d3 * d4
    if abs(denom) < 1e-12:
        raise DegenerateDenominator(f"1 - 4 d3 d4 = {denom:g} for {params}")
    d2 = d4 / denom
    e_plus = -0.5 * tp * chp**2 + 0.5 * tm * t * t + d1 * d1 * d2
    e_minus = -0.5 * tm * chm**2 + d2
    e_two = t + 2.0 * d1 * d2
    K = math.cosh(params.r) ** 2 * chp * chm
    M = math.exp(decompose_su11(d3, d4).beta2)
    return SqueezeConstants(d1, d2, d3, d4, e_plus, e_minus, e_two, K, M)


def _signed_log_power(base: float, k: int) -> tuple[float, float]:
    """``base**k`` as ``(sign, log|.|)``; ``(0, -inf)`` for a vanishing power."""
    if k == 0:
        return 1.0, 0.0
    if base == 0:
        return 0.0, -math.inf
    return math.copysign(1.0, base) ** k, k * math.log(abs(base))


def squeezed_amplitude(params: SqueezeParams, n1: int, n2: int) -> float:
    if n1 < 0 or n2 < 0:
        raise ValueError("occupation numbers must be >= 0")
    if (n1 + n2) % 2:
        return 0.0
    c = squeeze_constants(params)
    prefactor = (
        0.5 * (math.log(c.M) - math.log(c.K))
        + 0.5 * (math.lgamma(n1 + 1) + math.lgamma(n2 + 1))
        - n1 * math.log(math.cosh(params.r_plus))
        - n2 * math.log(math.cosh(params.r_minus))
    )
    terms = []
    for j in range(n1 % 2, min(n1, n2) + 1, 2):
        k1, k2 = (n1 - j) // 2, (n2 - j) // 2
        sign, log_mag = 1.0, prefactor - math.lgamma(j + 1) - math.lgamma(k1 + 1) - math.lgamma(k2 + 1)
        for base, power in ((c.e_two, j), (c.e_plus, k1), (c.e_minus, k2)):
            s, lm = _signed_log_power(base, power)
            sign *= s
            log_mag += lm
        if sign:
            terms.append(sign * math.exp(log_mag))
    return math.fsum(terms)


def squeezed_prob(params: SqueezeParams, n1: int, n2: int) -> float:
    prob = squeezed_amplitude(params, n1, n2) ** 2
    return 0.0 if prob < PROB_FLOOR else prob


def _single_mode_series(lam: float, size: int) -> np.ndarray:
    """``<m| exp(lam/2 B^+2) |0>`` for ``m < size``."""
    g = np.zeros(size)
    g[0] = 1.0
    for m in range(2, size, 2):
        g[m] = lam * math.sqrt((m - 1) / m) * g[m - 2]
    return g


def _rotation_sectors(c: float, s: float, top: int, n_max: int | None = None):
    """Yield ``(N, lo, W_N)`` for ``N = 0..top``, the passive rotation on each number sector.

    ``W`` maps ``B1^+ -> c B1^+ + s B2^+`` and ``B2^+ -> -s B1^+ + c B2^+``;
    ``W_N[n1 - lo, m1] = <n1, N-n1| W |m1, N-m1>``.  With ``n_max`` only the
    rows with both occupations ``<= n_max`` are kept (``lo = max(0, N - n_max)``).
    Each sector follows from the previous one by averaging the two one-boson
    extensions with weights ``m1/N`` and ``m2/N``, a contraction, so rounding
    does not build up.
    """
    n_max = top if n_max is None else n_max
    w = np.ones((1, 1))
    lo = 0
    yield 0, lo, w
    for N in range(1, top + 1):
        up = np.sqrt(np.arange(1, N + 1) / N)
        down = up[::-1]
        # w scaled by sqrt(m1/N) for the first extension, sqrt(m2/N) for the second
        wa = w * up
        wb = w * down
        new_lo, hi = max(0, N - n_max), min(N, n_max)
        rows = np.arange(new_lo, hi + 1)
        out = np.zeros((hi - new_lo + 1, N + 1))
        # row n1 draws on rows n1 - 1 (creation on mode 1) and n1 (mode 2) of the last sector
        from_left = rows - 1 - lo
        from_same = rows - lo
        ok = (from_left >= 0) & (from_left < w.shape[0])
        idx = np.nonzero(ok)[0]
        r1 = np.sqrt(rows[idx] / N)[:, None]
        out[idx, 1:] += c * r1 * wa[from_left[idx]]
        out[idx, :-1] -= s * r1 * wb[from_left[idx]]
        ok = (from_same >= 0) & (from_same < w.shape[0]) & (rows < N)
        idx = np.nonzero(ok)[0]
        r2 = np.sqrt((N - rows[idx]) / N)[:, None]
        out[idx, 1:] += s * r2 * wa[from_same[idx]]
        out[idx, :-1] += c * r2 * wb[from_same[idx]]
        w, lo = out, new_lo
        yield N, lo, w


def squeezed_amplitudes(params: SqueezeParams, n_max: int) -> np.ndarray:
    """Amplitude grid for ``n1, n2 <= n_max``.

    The normal-ordered state ``exp(P B1^+2 + Q B2^+2 + R B1^+ B2^+)|0,0>``
    (``P = e+/cosh^2 r+``, ``Q = e-/cosh^2 r-``, ``R = e_two/(cosh r+ cosh r-)``)
    is evaluated on the principal axes of ``[[2P, R], [R, 2Q]]``, where it
    factorizes into two single-mode series, then rotated back one number
    sector at a time.  Summing the series directly in the original modes
    loses all precision once the signed terms start to cancel.
    """
    c = squeeze_constants(params)
    chp, chm = math.cosh(params.r_plus), math.cosh(params.r_minus)
    P, Q, R = c.e_plus / chp**2, c.e_minus / chm**2, c.e_two / (chp * chm)
    lam, vec = np.linalg.eigh(np.array([[2 * P, R], [R, 2 * Q]]))
    if np.linalg.det(vec) < 0:
        vec[:, 1] *= -1
    cos, sin = vec[0, 0], vec[1, 0]
    side = n_max + 1
    top = 2 * n_max
    g1, g2 = _single_mode_series(lam[0], top + 1), _single_mode_series(lam[1], top + 1)
    h = np.zeros((side, side))
    tiny = 1e-40 * (float(g1 @ g1) * float(g2 @ g2))
    for N, lo, w in _rotation_sectors(cos, sin, top, n_max):
        if N % 2:
            continue
        gN = g1[: N + 1] * g2[N::-1]
        if N > n_max and float(gN @ gN) < tiny:
            break
        rows = np.arange(lo, lo + w.shape[0])
        h[rows, N - rows] = w @ gN
    return math.sqrt(c.M / c.K) * h


def squeezed_distribution(
    params: SqueezeParams, n_max: int | None = None, *, eps_tail: float | None = EPS_TAIL
) -> JointDistribution:
    return _adaptive(lambda n: squeezed_amplitudes(params, n), n_max, eps_tail, f"squeezed({params})")
