"""Brute-force two-mode Fock-space engine.

States are amplitude grids ``amps[n1, n2] = <n1, n2|psi>`` truncated at a
per-mode occupation ``n_max``.  Each operation acts on a state padded to
``n_max + guard + 1`` levels per mode, and the guard levels are dropped
again afterwards.  The operator blocks on that working space are cropped
from exponentials taken on a still larger space, sized to how far each
generator spreads a number state, so that truncating the generator does not
corrupt the retained matrix elements.  Norm that leaves the retained levels
is not renormalised away; it is accumulated in ``tail_mass`` as the
truncation error budget.

Operator conventions (``B1``, ``B2`` are the two mode annihilators)::

    D_j(alpha) = exp(alpha B_j^+ - alpha^* B_j)
    S_j(r)     = exp(r/2 (B_j^2 - B_j^+2))
    S_12(r)    = exp(r (B1^+ B2^+ - B1 B2))

``S_12(r)`` on the vacuum gives ``sum_n tanh^n r / cosh r |n, n>``.  The
single-mode convention is the one under which the normal-ordered
decomposition ``exp(-tanh r B^+2 / 2) exp(-ln cosh r (N + 1/2))
exp(tanh r B^2 / 2)`` holds, which is what the closed-form squeezed
probabilities in :mod:`bitbell.analytic` are written against.

The operations grow the cutoff on demand: after each application the mass
in the outermost ``TAIL_BAND`` retained levels plus the accumulated tail
must stay below ``eps_tail``; otherwise the state is rebuilt from the vacuum
at twice the cutoff by replaying its recorded operations, and the step is
repeated, up to ``N_MAX_CAP``.  Zero-padding the truncated input instead
would drop amplitudes of order ``sqrt(eps_tail)``, far above the
probability tolerance the closed forms are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal, expm

from .errors import CutoffExceeded

N_MAX_START = 32
N_MAX_CAP = 512
GUARD = 16
TAIL_BAND = 4
EPS_TAIL = 1e-10
EPS_NORM = 1e-9
R_MAX = 2.0
ALPHA_MAX = 4.0


@dataclass(frozen=True)
class FockCutoff:
    """Truncation of each mode: ``n_max`` retained levels plus ``guard`` padding."""

    n_max: int = N_MAX_START
    guard: int = GUARD

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if int(self.guard) != self.guard or self.guard < 0:
            raise ValueError(f"guard must be an integer >= 0, got {self.guard!r}")

    @property
    def dim(self) -> int:
        """Working dimension per mode while an operator is applied."""
        return self.n_max + self.guard + 1


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _check_norm(total: float, tail_mass: float, what: str) -> None:
    if tail_mass < 0:
        raise ValueError(f"{what}: tail_mass must be >= 0, got {tail_mass}")
    if abs(total + tail_mass - 1.0) > EPS_NORM:
        raise ValueError(
            f"{what}: retained mass {total!r} + tail {tail_mass!r} is not 1 "
            f"within {EPS_NORM}"
        )


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Truncated amplitude grid.

    ``history`` lists the operations applied since :func:`vacuum` as
    ``(name, *args)`` tuples, or is ``None`` for states assembled by hand
    (those can only be zero-padded when the cutoff grows).
    """

    amps: np.ndarray
    cutoff: FockCutoff
    tail_mass: float = 0.0
    history: tuple | None = None

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        side = self.cutoff.n_max + 1
        if amps.shape != (side, side):
            raise ValueError(f"amps must have shape {(side, side)}, got {amps.shape}")
        object.__setattr__(self, "amps", _readonly(amps))
        object.__setattr__(self, "tail_mass", float(self.tail_mass))
        _check_norm(self.norm, self.tail_mass, "TwoModeState")

    @property
    def norm(self) -> float:
        """Squared norm of the retained amplitudes."""
        return float(np.sum(np.abs(self.amps) ** 2))

    @property
    def n_max(self) -> int:
        return self.cutoff.n_max


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint photon-number distribution ``probs[n1, n2]`` plus unseen mass."""

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValueError(f"probs must be a square grid, got shape {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite and nonnegative")
        object.__setattr__(self, "probs", _readonly(probs))
        object.__setattr__(self, "tail_mass", float(self.tail_mass))
        _check_norm(float(probs.sum()), self.tail_mass, "JointDistribution")

    @property
    def n_max(self) -> int:
        return self.probs.shape[0] - 1


def vacuum(cutoff: FockCutoff | None = None) -> TwoModeState:
    cutoff = cutoff or FockCutoff()
    amps = np.zeros((cutoff.n_max + 1, cutoff.n_max + 1), dtype=complex)
    amps[0, 0] = 1.0
    return TwoModeState(amps, cutoff, 0.0, history=())


def with_cutoff(state: TwoModeState, n_max: int) -> TwoModeState:
    """Zero-pad ``state`` onto a larger grid (exact; never truncates)."""
    if n_max < state.n_max:
        raise ValueError(f"cannot shrink a state from n_max={state.n_max} to {n_max}")
    if n_max == state.n_max:
        return state
    amps = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    side = state.n_max + 1
    amps[:side, :side] = state.amps
    return TwoModeState(amps, replace(state.cutoff, n_max=n_max), state.tail_mass, state.history)


def rebuild(state: TwoModeState, n_max: int) -> TwoModeState:
    """Recompute ``state`` at a larger cutoff from its recorded history."""
    if state.history is None:
        return with_cutoff(state, n_max)
    if n_max < state.n_max:
        raise ValueError(f"cannot shrink a state from n_max={state.n_max} to {n_max}")
    out = vacuum(replace(state.cutoff, n_max=n_max))
    for name, *args in state.history:
        out = _OPS[name](out, *args, eps_tail=None)
    return out


def tail_bound(state: TwoModeState | JointDistribution, band: int) -> float:
    """Probability held in the outermost ``band`` retained levels of either mode."""
    probs = state.probs if isinstance(state, JointDistribution) else np.abs(state.amps) ** 2
    n_max = probs.shape[0] - 1
    if band < 0 or band > n_max:
        raise ValueError(f"band must lie in [0, {n_max}], got {band}")
    if band == 0:
        return 0.0
    edge = n_max + 1 - band
    # summed directly: total minus interior cancels below ~1e-16
    return float(probs[edge:, :].sum() + probs[:edge, edge:].sum())


def budget(state: TwoModeState | JointDistribution) -> float:
    """Edge-band mass plus accumulated tail; the quantity the cutoff rule bounds."""
    return tail_bound(state, min(TAIL_BAND, state.n_max)) + state.tail_mass


def joint_distribution(state: TwoModeState) -> JointDistribution:
    return JointDistribution(np.abs(state.amps) ** 2, state.tail_mass)


# -- operator matrices -------------------------------------------------------


@lru_cache(maxsize=None)
def lowering(dim: int) -> np.ndarray:
    """Truncated annihilation operator on ``dim`` levels."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    a.setflags(write=False)
    return a


# Truncating an unbounded generator corrupts matrix elements near the edge.
# Where it is cheap, the exponential is taken on a larger space and cropped.
EDGE_AMPLITUDE = 1e-13
SQUEEZE_PAD_CAP = 8000


def _displacement_size(alpha: complex, dim: int) -> int:
    # D(alpha) couples n to about (sqrt(n) +- |alpha|)^2
    return max(dim, math.ceil((math.sqrt(dim) + abs(alpha) + 3.0) ** 2))


@lru_cache(maxsize=512)
def _displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    a = lowering(_displacement_size(alpha, dim))
    u = np.ascontiguousarray(expm(alpha * a.T - np.conj(alpha) * a)[:dim, :dim])
    u.setflags(write=False)
    return u


def _squeeze_size(r: float, dim: int) -> int:
    # |n> spreads to about n * exp(2|r|); the cap bounds eigenvector memory
    return max(dim, min(math.ceil((math.sqrt(dim) * math.exp(abs(r)) + 4.0) ** 2), SQUEEZE_PAD_CAP))


@lru_cache(maxsize=512)
def _squeeze_matrix(r: float, dim: int) -> np.ndarray:
    """``<m|S(r)|n>`` for ``m, n < dim``, exponentiated in a padded space.

    Each parity sector of the generator is antisymmetric tridiagonal.  Conjugating
    by ``diag(i**k)`` turns it into ``-i`` times a real symmetric tridiagonal
    matrix, whose eigenvectors give the exponential directly.
    """
    size = _squeeze_size(r, dim)
    u = np.zeros((dim, dim))
    for parity in (0, 1):
        n = np.arange(parity, size, 2, dtype=float)
        off = 0.5 * r * np.sqrt((n[:-1] + 1.0) * (n[:-1] + 2.0))
        w, v = eigh_tridiagonal(np.zeros(n.size), off)
        rows = np.arange(parity, dim, 2)
        head = v[: rows.size]
        phase = 1j ** np.arange(rows.size)
        block = (head * np.exp(-1j * w)) @ head.T
        u[np.ix_(rows, rows)] = (np.conj(phase)[:, None] * block * phase[None, :]).real
    u.setflags(write=False)
    return u


def _pair_chain_extra(r: float) -> int:
    # pair amplitudes fall like tanh(r)^n along a chain
    t = math.tanh(abs(r))
    if t == 0.0:
        return 0
    return min(math.ceil(math.log(EDGE_AMPLITUDE) / math.log(t)), N_MAX_CAP)


@lru_cache(maxsize=4096)
def _pair_sector_matrix(r: float, dim: int, offset: int) -> np.ndarray:
    # S_12 conserves n1 - n2; the sector |n + offset, n> is a tridiagonal chain.
    length = dim - offset
    full = length + _pair_chain_extra(r)
    n = np.arange(full - 1, dtype=float)
    hop = r * np.sqrt((n + offset + 1) * (n + 1))
    u = np.ascontiguousarray(expm(np.diag(hop, -1) - np.diag(hop, 1))[:length, :length])
    u.setflags(write=False)
    return u


def _sector_index(dim: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(dim - abs(k))
    if k >= 0:
        return n + k, n
    return n, n - k


# -- evolution ---------------------------------------------------------------


def _act_padded(
    state: TwoModeState, act: Callable[[np.ndarray], np.ndarray], step: tuple
) -> TwoModeState:
    cut = state.cutoff
    side, dim = cut.n_max + 1, cut.dim
    padded = np.zeros((dim, dim), dtype=complex)
    padded[:side, :side] = state.amps
    out = act(padded)
    # the operators are unitary, so whatever the retained block misses was lost
    lost = float(np.sum(np.abs(state.amps) ** 2) - np.sum(np.abs(out[:side, :side]) ** 2))
    history = None if state.history is None else state.history + (step,)
    return TwoModeState(out[:side, :side], cut, state.tail_mass + max(lost, 0.0), history)


def _evolve(
    state: TwoModeState,
    act: Callable[[int], Callable[[np.ndarray], np.ndarray]],
    eps_tail: float | None,
    step: tuple,
) -> TwoModeState:
    """Apply ``act(dim)`` to ``state``, doubling the cutoff until the budget holds."""
    what = f"{step[0]}{step[1:]}"
    while True:
        out = _act_padded(state, act(state.cutoff.dim), step)
        if eps_tail is None or budget(out) <= eps_tail:
            return out
        grown = 2 * state.n_max
        stuck = state.history is None and state.tail_mass > eps_tail
        if stuck or grown > N_MAX_CAP:
            raise CutoffExceeded(
                f"{what}: truncation budget {budget(out):.3g} exceeds {eps_tail:g} "
                f"at n_max={state.n_max} (cap {N_MAX_CAP})"
            )
        state = rebuild(state, grown)


def _check_mode(mode: int) -> None:
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")


def _check_squeeze(r: float) -> float:
    r = float(r)
    if not np.isfinite(r) or abs(r) > R_MAX:
        raise ValueError(f"squeeze parameter must satisfy |r| <= {R_MAX}, got {r}")
    return r


def apply_two_mode_squeeze(
    state: TwoModeState, r: float, *, eps_tail: float | None = EPS_TAIL
) -> TwoModeState:
    r = _check_squeeze(r)
    if r == 0.0:
        return state

    def act(dim):
        def run(psi):
            out = np.zeros_like(psi)
            for k in range(-(dim - 1), dim):
                i1, i2 = _sector_index(dim, k)
                v = psi[i1, i2]
                if np.any(v):
                    out[i1, i2] = _pair_sector_matrix(r, dim, abs(k)) @ v
            return out

        return run

    return _evolve(state, act, eps_tail, ("S12", r))


def apply_displacement(
    state: TwoModeState, mode: int, alpha: complex, *, eps_tail: float | None = EPS_TAIL
) -> TwoModeState:
    _check_mode(mode)
    alpha = complex(alpha)
    if not np.isfinite(alpha) or abs(alpha) > ALPHA_MAX:
        raise ValueError(f"displacement must satisfy |alpha| <= {ALPHA_MAX}, got {alpha}")
    if alpha == 0:
        return state

    def act(dim):
        u = _displacement_matrix(alpha, dim)
        return (lambda psi: u @ psi) if mode == 1 else (lambda psi: psi @ u.T)

    return _evolve(state, act, eps_tail, ("D", mode, alpha))


def apply_single_mode_squeeze(
    state: TwoModeState, mode: int, r: float, *, eps_tail: float | None = EPS_TAIL
) -> TwoModeState:
    _check_mode(mode)
    r = _check_squeeze(r)
    if r == 0.0:
        return state

    def act(dim):
        u = _squeeze_matrix(r, dim)
        return (lambda psi: u @ psi) if mode == 1 else (lambda psi: psi @ u.T)

    return _evolve(state, act, eps_tail, ("S", mode, r))


_OPS = {
    "S12": apply_two_mode_squeeze,
    "D": apply_displacement,
    "S": apply_single_mode_squeeze,
}


def tmsv(r: float, cutoff: FockCutoff | None = None, *, eps_tail: float | None = EPS_TAIL) -> TwoModeState:
    """Two-mode squeezed vacuum ``S_12(r)|0, 0>``."""
    return apply_two_mode_squeeze(vacuum(cutoff), r, eps_tail=eps_tail)
