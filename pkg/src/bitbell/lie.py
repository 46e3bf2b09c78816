r"""Operator reordering identities for two bosonic modes ``A``, ``B``.

Identities checked numerically on truncated Fock spaces::

    (1) e^{c1 A^2} e^{c2 A^+ B^+}
          = e^{c2 A^+ B^+} e^{c1 c2^2 B^+2} e^{2 c1 c2 A B^+} e^{c1 A^2}
    (2) e^{c1 A^2} e^{c2 A^+2}
          = e^{beta1 A^+2} e^{beta2 (A^+ A + 1/2)} e^{beta3 A^2}
    (3) e^{c1 A^+ B} e^{c2 B^+2}
          = e^{c2 B^+2} e^{2 c1 c2 A^+ B^+} e^{c1^2 c2 A^+2} e^{c1 A^+ B}

and the single-exponential form
``e^{c1 A^2} e^{c2 A^+ B^+} = exp(c1 A^2 + c2 A^+B^+ + c1 c2 A B^+ + c1 c2^2/6 B^+2)``.
The Lie algebra spanned by those four generators is nilpotent
(``B^+2`` is central), so the Baker-Campbell-Hausdorff series stops at third
order and this form is exact.

The coefficients in (2) follow from the faithful 2x2 representation
``A^+2 -> 2 sigma_+``, ``A^2 -> -2 sigma_-``, ``A^+A + 1/2 -> sigma_z``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import BranchDomain, CutoffExceeded, DegenerateDenominator

DENOM_MIN = 1e-12
GUARD = 16
SEED = 20240611
# Fock-level checks truncate exp(c A^+2)|n>, whose amplitudes fall only like
# (2|c|)^k; at this bound the residual at cutoff 48 + guard 16 stays near 1e-11
FOCK_BOUND = 0.125
# relative weight a test vector may carry in the guard band before the
# retained-level residual stops meaning anything
GUARD_LEAK = 1e-6

SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class Su11Decomposition:
    beta1: complex
    beta2: complex
    beta3: complex


def decompose_su11(c1, c2) -> Su11Decomposition:
    """Coefficients ``(beta1, beta2, beta3)`` of identity (2).

    ``beta2 = arccosh(1 + 2 c1 c2/(1 - 4 c1 c2) - 2 c1 c2)``; the argument
    minus one is evaluated as ``8 (c1 c2)^2 / (1 - 4 c1 c2)`` so that small
    products keep full precision.  The sign is the one for which
    ``exp(-beta2) = 1 - 4 c1 c2`` (the lower-right matrix entry).
    """
    prod = c1 * c2
    denom = 1 - 4 * prod
    if abs(denom) < DENOM_MIN:
        raise DegenerateDenominator(f"1 - 4 c1 c2 = {denom} for c1={c1}, c2={c2}")
    excess = 8 * prod * prod / denom
    if np.iscomplexobj(np.asarray([c1, c2])) and (np.imag(c1) or np.imag(c2)):
        beta2 = cmath.acosh(1 + complex(excess))
        sign_test = lambda b: abs(cmath.exp(-b) - denom)  # noqa: E731
    else:
        c1, c2, denom, excess = float(np.real(c1)), float(np.real(c2)), float(np.real(denom)), float(np.real(excess))
        if excess < 0:
            raise BranchDomain(
                f"arccosh argument {1 + excess} < 1 for c1={c1}, c2={c2} (1 - 4 c1 c2 < 0)"
            )
        beta2 = math.log1p(excess + math.sqrt(excess * (excess + 2)))
        sign_test = lambda b: abs(math.exp(-b) - denom)  # noqa: E731
    if sign_test(-beta2) < sign_test(beta2):
        beta2 = -beta2
    return Su11Decomposition(c2 / denom, beta2, c1 / denom)


def seeded_pairs(count: int, bound: float = FOCK_BOUND, seed: int = SEED) -> np.ndarray:
    """``count`` reproducible ``(c1, c2)`` rows drawn uniformly from ``[-bound, bound]^2``."""
    return np.random.default_rng(seed).uniform(-bound, bound, size=(count, 2))


def closure_pairs(count: int = 100, seed: int = SEED) -> np.ndarray:
    """Seeded ``(c1, c2)`` with ``|c| <= 0.5`` and ``|1 - 4 c1 c2| > 0.1``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        c1, c2 = rng.uniform(-0.5, 0.5, size=2)
        if abs(1 - 4 * c1 * c2) > 0.1:
            out.append((c1, c2))
    return np.array(out)


def lhs_matrix(c1, c2) -> np.ndarray:
    """``exp(-2 c1 sigma_-) exp(2 c2 sigma_+)``; both factors are nilpotent so exp = 1 + X."""
    left = np.eye(2) - 2 * c1 * SIGMA_MINUS
    right = np.eye(2) + 2 * c2 * SIGMA_PLUS
    return left @ right


def rhs_matrix(d: Su11Decomposition) -> np.ndarray:
    """``exp(2 beta1 sigma_+) exp(beta2 sigma_z) exp(-2 beta3 sigma_-)``."""
    left = np.eye(2) + 2 * d.beta1 * SIGMA_PLUS
    middle = np.diag([np.exp(d.beta2), np.exp(-d.beta2)])
    right = np.eye(2) - 2 * d.beta3 * SIGMA_MINUS
    return left @ middle @ right


# -- Fock-space checks -------------------------------------------------------


@lru_cache(maxsize=16)
def _single_ops(dim: int):
    a = sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr")
    return a, sp.identity(dim, format="csr")


@lru_cache(maxsize=16)
def _pair_ops(dim: int):
    a, eye = _single_ops(dim)
    return sp.kron(a, eye, format="csr"), sp.kron(eye, a, format="csr")


def _coherent_like(dim: int, modes: int, top: int = 4) -> np.ndarray:
    weights = np.zeros(dim)
    for n in range(min(top, dim - 1) + 1):
        weights[n] = 0.5**n / math.sqrt(math.factorial(n))
    vec = weights
    for _ in range(modes - 1):
        vec = np.kron(vec, weights)
    return vec / np.linalg.norm(vec)


def probe_basis(dim: int, modes: int, levels=None) -> np.ndarray:
    """Columns: vacuum, a few low number states, and a coherent-like superposition.

    ``levels`` replaces the default number states (tuples of occupations).
    """
    if levels is None:
        levels = [(0,), (1,), (2,)] if modes == 1 else [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)]
    cols = []
    for occ in levels:
        v = np.zeros(dim**modes)
        v[occ[0] * dim + occ[1] if modes == 2 else occ[0]] = 1.0
        cols.append(v)
    cols.append(_coherent_like(dim, modes))
    return np.column_stack(cols).astype(complex)


def _apply_chain(factors, vecs):
    """Apply ``exp(G_0) exp(G_1) ... exp(G_k)`` (rightmost first) to the columns of ``vecs``."""
    out = vecs
    for gen in reversed(factors):
        if gen is None:
            continue
        if sp.issparse(gen) and gen.nnz == 0:
            continue
        out = expm_multiply(gen, out)
    return out


def _retained_mask(dim: int, cutoff: int, modes: int) -> np.ndarray:
    keep = np.arange(dim) <= cutoff
    return keep if modes == 1 else np.kron(keep, keep).astype(bool)


def _deviation(lhs: np.ndarray, rhs: np.ndarray, dim: int, cutoff: int, modes: int) -> float:
    keep = _retained_mask(dim, cutoff, modes)
    for side in (lhs, rhs):
        total = np.sum(np.abs(side) ** 2, axis=0)
        leak = np.sum(np.abs(side[~keep]) ** 2, axis=0)
        if np.any(leak > GUARD_LEAK * total):
            raise CutoffExceeded(
                f"test vectors carry {float(np.max(leak / total)):.2g} of their weight "
                f"beyond level {cutoff}"
            )
    return float(np.max(np.abs(lhs[keep] - rhs[keep])))


def _check_coeffs(c1, c2) -> None:
    if abs(c1) > 0.5 or abs(c2) > 0.5:
        raise ValueError(f"coefficients must satisfy |c| <= 0.5, got c1={c1}, c2={c2}")


def verify_identity(which: int, c1, c2, cutoff: int = 48, guard: int = GUARD, levels=None) -> float:
    """Largest amplitude mismatch between the two sides of identity ``which``.

    Both sides are ordered products of exponentials of truncated generators
    on ``cutoff + guard + 1`` levels per mode, applied to :func:`probe_basis`;
    only levels ``<= cutoff`` are compared.  ``levels`` overrides the
    number states in the probe set.
    """
    _check_coeffs(c1, c2)
    dim = cutoff + guard + 1
    if which == 2:
        a, eye = _single_ops(dim)
        d = decompose_su11(c1, c2)
        number = a.T @ a + 0.5 * eye
        vecs = probe_basis(dim, 1, levels)
        lhs = _apply_chain([c1 * (a @ a), c2 * (a.T @ a.T)], vecs)
        rhs = _apply_chain([d.beta1 * (a.T @ a.T), d.beta2 * number, d.beta3 * (a @ a)], vecs)
        return _deviation(lhs, rhs, dim, cutoff, 1)
    A, B = _pair_ops(dim)
    vecs = probe_basis(dim, 2, levels)
    if which == 1:
        lhs = _apply_chain([c1 * (A @ A), c2 * (A.T @ B.T)], vecs)
        rhs = _apply_chain(
            [c2 * (A.T @ B.T), c1 * c2**2 * (B.T @ B.T), 2 * c1 * c2 * (A @ B.T), c1 * (A @ A)], vecs
        )
    elif which == 3:
        lhs = _apply_chain([c1 * (A.T @ B), c2 * (B.T @ B.T)], vecs)
        rhs = _apply_chain(
            [c2 * (B.T @ B.T), 2 * c1 * c2 * (A.T @ B.T), c1**2 * c2 * (A.T @ A.T), c1 * (A.T @ B)], vecs
        )
    else:
        raise ValueError(f"identity must be 1, 2 or 3, got {which!r}")
    return _deviation(lhs, rhs, dim, cutoff, 2)


def verify_bch_compose(c1, c2, cutoff: int = 48, guard: int = GUARD) -> float:
    """Mismatch between ``e^{c1 A^2} e^{c2 A^+B^+}`` and its single-exponential form."""
    _check_coeffs(c1, c2)
    dim = cutoff + guard + 1
    A, B = _pair_ops(dim)
    vecs = probe_basis(dim, 2)
    lhs = _apply_chain([c1 * (A @ A), c2 * (A.T @ B.T)], vecs)
    combined = c1 * (A @ A) + c2 * (A.T @ B.T) + c1 * c2 * (A @ B.T) + c1 * c2**2 / 6 * (B.T @ B.T)
    rhs = _apply_chain([combined], vecs)
    return _deviation(lhs, rhs, dim, cutoff, 2)
