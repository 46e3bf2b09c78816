"""CHSH combinations of bit correlators, 1-D scans in ``J`` and their maximization.

A quad holds the two settings of each side.  For the displacement family
side 1 displaces mode 1 by ``a`` or ``a'`` and side 2 displaces mode 2 by
``b`` or ``b'``; for the squeeze family the same four numbers are local
squeezing parameters ``r+`` (mode 1) and ``r-`` (mode 2).  Scans put
``(a, a', b, b') = J * coefs`` with ``coefs = (0, 1, 0, -1)`` by default.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic, fock
from .bitcorr import correlator
from .errors import BitbellError
from .fock import ALPHA_MAX, EPS_TAIL, GUARD, R_MAX, FockCutoff, JointDistribution

TSIRELSON = 2.0 * math.sqrt(2.0)
DEFAULT_COEFS = (0.0, 1.0, 0.0, -1.0)
COARSE_POINTS = 64
GOLDEN_TOL = 1e-4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Family(str, enum.Enum):
    DISPLACEMENT = "displacement"
    SQUEEZE = "squeeze"


class Method(str, enum.Enum):
    ORACLE = "oracle"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class MeasurementSetting:
    """One setting pair: ``mode1_param`` acts on mode 1, ``mode2_param`` on mode 2."""

    kind: Family
    mode1_param: complex
    mode2_param: complex

    def __post_init__(self):
        object.__setattr__(self, "kind", Family(self.kind))
        for name in ("mode1_param", "mode2_param"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ValueError(f"{name} must be finite, got {value}")
            if self.kind is Family.SQUEEZE:
                if value.imag != 0:
                    raise ValueError(f"squeeze parameters must be real, got {name}={value}")
                if abs(value) > R_MAX:
                    raise ValueError(f"|{name}| must be <= {R_MAX}, got {value.real}")
            elif abs(value) > ALPHA_MAX:
                raise ValueError(f"|{name}| must be <= {ALPHA_MAX}, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ChshQuad:
    a: complex
    a_prime: complex
    b: complex
    b_prime: complex
    y: int
    r: float
    kind: Family = Family.DISPLACEMENT

    def settings(self) -> tuple[MeasurementSetting, ...]:
        """The pairs ``(a, b), (a, b'), (a', b), (a', b')`` in that order."""
        return tuple(
            MeasurementSetting(self.kind, s1, s2)
            for s1, s2 in (
                (self.a, self.b),
                (self.a, self.b_prime),
                (self.a_prime, self.b),
                (self.a_prime, self.b_prime),
            )
        )


@dataclass(frozen=True)
class ChshResult:
    E_ab: float
    E_abp: float
    E_apb: float
    E_apbp: float
    S: float
    err: float
    cutoff_used: int


@dataclass(frozen=True)
class ScanRow:
    J: float
    S: float
    E_ab: float
    E_abp: float
    E_apb: float
    E_apbp: float
    err: float
    cutoff_used: int

    @classmethod
    def failed(cls, J: float) -> "ScanRow":
        nan = float("nan")
        return cls(J, nan, nan, nan, nan, nan, nan, -1)


@dataclass(frozen=True)
class ScanCurve:
    family: Family
    r: float
    y: int
    method: Method
    coefs: tuple[float, float, float, float]
    rows: tuple[ScanRow, ...]
    failures: tuple[tuple[float, str], ...] = field(default=())


def chsh_combination(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    return abs(e_ab + e_abp + e_apb - e_apbp)


# -- state preparation -------------------------------------------------------


def _squeeze_args(r: float, setting: MeasurementSetting) -> analytic.SqueezeParams:
    return analytic.SqueezeParams(r, setting.mode1_param.real, setting.mode2_param.real)


def _oracle_distribution(
    r: float, setting: MeasurementSetting, n_max: int | None, eps_tail: float | None, guard: int
) -> JointDistribution:
    state = fock.vacuum(FockCutoff(n_max or fock.N_MAX_START, guard))
    state = fock.apply_two_mode_squeeze(state, r, eps_tail=eps_tail)
    if setting.kind is Family.DISPLACEMENT:
        state = fock.apply_displacement(state, 1, setting.mode1_param, eps_tail=eps_tail)
        state = fock.apply_displacement(state, 2, setting.mode2_param, eps_tail=eps_tail)
    else:
        state = fock.apply_single_mode_squeeze(state, 1, setting.mode1_param.real, eps_tail=eps_tail)
        state = fock.apply_single_mode_squeeze(state, 2, setting.mode2_param.real, eps_tail=eps_tail)
    return fock.joint_distribution(state)


def setting_distribution(
    r: float,
    setting: MeasurementSetting,
    method: Method | str = Method.ANALYTIC,
    n_max: int | None = None,
    *,
    eps_tail: float | None = EPS_TAIL,
    guard: int = GUARD,
) -> JointDistribution:
    """Joint number distribution after the two local operations of ``setting``.

    ``n_max`` is the starting cutoff; with ``eps_tail=None`` it is also the final one.
    """
    method = Method(method)
    if method is Method.ORACLE:
        return _oracle_distribution(r, setting, n_max, eps_tail, guard)
    if setting.kind is Family.DISPLACEMENT:
        return analytic.displaced_distribution(
            r, setting.mode1_param, setting.mode2_param, n_max, eps_tail=eps_tail
        )
    return analytic.squeezed_distribution(_squeeze_args(r, setting), n_max, eps_tail=eps_tail)


def settings_correlator(
    r: float,
    s1: complex,
    s2: complex,
    kind: Family | str,
    y: int,
    method: Method | str = Method.ANALYTIC,
    *,
    eps_tail: float | None = EPS_TAIL,
) -> tuple[float, float]:
    """Bit-``y`` correlator ``(E, err)`` for one setting pair."""
    dist = setting_distribution(r, MeasurementSetting(kind, s1, s2), method, eps_tail=eps_tail)
    return correlator(dist, y)


def s_values(
    quad: ChshQuad,
    ys,
    method: Method | str = Method.ANALYTIC,
    *,
    eps_tail: float | None = EPS_TAIL,
    n_start: int | None = None,
    guard: int = GUARD,
) -> dict[int, ChshResult]:
    """:func:`s_value` for several bit indices, sharing the four distributions."""
    settings = quad.settings()
    cache: dict[MeasurementSetting, JointDistribution] = {}
    for s in settings:
        if s not in cache:
            cache[s] = setting_distribution(quad.r, s, method, n_start, eps_tail=eps_tail, guard=guard)
    n_max = max(d.n_max for d in cache.values())
    for s, d in list(cache.items()):
        if d.n_max < n_max:
            cache[s] = setting_distribution(quad.r, s, method, n_max, eps_tail=None, guard=guard)
    out = {}
    for y in ys:
        pairs = [correlator(cache[s], y) for s in settings]
        es = [e for e, _ in pairs]
        out[y] = ChshResult(*es, chsh_combination(*es), sum(err for _, err in pairs), n_max)
    return out


def s_value(
    quad: ChshQuad,
    method: Method | str = Method.ANALYTIC,
    *,
    eps_tail: float | None = EPS_TAIL,
    n_start: int | None = None,
    guard: int = GUARD,
) -> ChshResult:
    """Evaluate the four correlators on one shared cutoff and combine them."""
    return s_values(quad, (quad.y,), method, eps_tail=eps_tail, n_start=n_start, guard=guard)[quad.y]


# -- scans -------------------------------------------------------------------


def quad_at(
    family: Family | str, r: float, y: int, J: float, coefs=DEFAULT_COEFS
) -> ChshQuad:
    ca, cap, cb, cbp = (float(c) for c in coefs)
    return ChshQuad(ca * J, cap * J, cb * J, cbp * J, y, r, Family(family))


def j_grid(j_min: float, j_max: float, steps: int) -> np.ndarray:
    if int(steps) != steps or steps < 2:
        raise ValueError(f"steps must be an integer >= 2, got {steps!r}")
    if not (math.isfinite(j_min) and math.isfinite(j_max)) or not j_min < j_max:
        raise ValueError(f"need finite j_min < j_max, got [{j_min}, {j_max}]")
    return np.linspace(j_min, j_max, int(steps))


def _scan_point(args) -> tuple[ScanRow, str | None]:
    family, r, y, J, method, coefs, trunc = args
    try:
        res = s_value(quad_at(family, r, y, J, coefs), method, **trunc)
    except (BitbellError, ZeroDivisionError) as exc:
        return ScanRow.failed(J), f"{type(exc).__name__}: {exc}"
    return ScanRow(J, res.S, res.E_ab, res.E_abp, res.E_apb, res.E_apbp, res.err, res.cutoff_used), None


def scan_j(
    family: Family | str,
    r: float,
    y: int,
    j_min: float,
    j_max: float,
    steps: int,
    method: Method | str = Method.ANALYTIC,
    *,
    coefs=DEFAULT_COEFS,
    threads: int = 1,
    eps_tail: float | None = EPS_TAIL,
    n_start: int | None = None,
    guard: int = GUARD,
) -> ScanCurve:
    """``S`` and its four correlators on ``steps`` evenly spaced ``J`` values.

    Points that raise a package error become NaN rows and are listed in
    ``failures``; the scan itself carries on.
    """
    family, method = Family(family), Method(method)
    coefs = tuple(float(c) for c in coefs)
    if len(coefs) != 4:
        raise ValueError(f"coefs needs four entries, got {len(coefs)}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    trunc = {"eps_tail": eps_tail, "n_start": n_start, "guard": guard}
    jobs = [(family, r, y, float(J), method, coefs, trunc) for J in j_grid(j_min, j_max, steps)]
    if threads == 1:
        results = [_scan_point(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_scan_point, jobs))
    rows = tuple(row for row, _ in results)
    failures = tuple((row.J, msg) for row, msg in results if msg is not None)
    return ScanCurve(family, float(r), int(y), method, coefs, rows, failures)


# -- maximization ------------------------------------------------------------


def _golden_max(f, lo: float, hi: float, tol: float) -> list[tuple[float, float]]:
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``; returns every evaluation."""
    seen = []
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    seen += [(x1, f1), (x2, f2)]
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
            seen.append((x1, f1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
            seen.append((x2, f2))
    return seen


def maximize_violation(
    family: Family | str,
    r: float,
    y: int,
    j_min: float,
    j_max: float,
    method: Method | str = Method.ANALYTIC,
    *,
    coefs=DEFAULT_COEFS,
    coarse: int = COARSE_POINTS,
    tol: float = GOLDEN_TOL,
    threads: int = 1,
    eps_tail: float | None = EPS_TAIL,
    n_start: int | None = None,
    guard: int = GUARD,
) -> tuple[float, float]:
    """Best ``(J*, S*)`` over ``[j_min, j_max]``.

    Each local maximum of a coarse grid is refined by golden-section search
    over its neighbouring grid interval, so curves with several humps are
    handled; the best point ever evaluated wins (ties go to smaller ``J``).
    """
    trunc = {"eps_tail": eps_tail, "n_start": n_start, "guard": guard}
    curve = scan_j(family, r, y, j_min, j_max, coarse, method, coefs=coefs, threads=threads, **trunc)
    if curve.failures:
        J, msg = curve.failures[0]
        raise BitbellError(f"coarse grid failed at J={J}: {msg}")
    js = np.array([row.J for row in curve.rows])
    ss = np.array([row.S for row in curve.rows])

    def f(J):
        return s_value(quad_at(family, r, y, J, coefs), method, **trunc).S

    best = (float(ss[0]), -float(js[0]))
    for i in range(len(ss)):
        left = ss[i - 1] if i > 0 else -np.inf
        right = ss[i + 1] if i + 1 < len(ss) else -np.inf
        best = max(best, (float(ss[i]), -float(js[i])))
        if not (ss[i] >= left and ss[i] >= right and (ss[i] > left or ss[i] > right)):
            continue
        lo, hi = js[max(i - 1, 0)], js[min(i + 1, len(js) - 1)]
        for J, S in _golden_max(f, float(lo), float(hi), tol):
            best = max(best, (S, -J))
    return -best[1], best[0]
