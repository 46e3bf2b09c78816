"""Command-line front end: ``prob``, ``scan``, ``figure``, ``verify`` and ``optimize``.

Exit codes: 0 success, 1 failed verification or other package error,
2 invalid input, 3 cutoff exceeded, 4 degenerate denominator.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analytic, chsh, fock, lie
from .bitcorr import MAX_BIT
from .errors import BitbellError, CutoffExceeded, DegenerateDenominator

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_CUTOFF, EXIT_DEGENERATE = 0, 1, 2, 3, 4
COLUMNS = ("J", "S", "E_ab", "E_abp", "E_apb", "E_apbp", "err", "cutoff_used")


class UsageError(ValueError):
    pass


# -- configuration -----------------------------------------------------------


@dataclass
class RunConfig:
    family: str = "displacement"
    r: float = 0.5
    y: int = 2
    j_min: float = 0.0
    j_max: float = 2.0
    steps: int = 201
    # None picks analytic for displacement and oracle for squeeze
    method: str | None = None
    a: float = chsh.DEFAULT_COEFS[0]
    a_prime: float = chsh.DEFAULT_COEFS[1]
    b: float = chsh.DEFAULT_COEFS[2]
    b_prime: float = chsh.DEFAULT_COEFS[3]
    n_max: int | None = None
    guard: int = fock.GUARD
    eps_tail: float = fock.EPS_TAIL
    cross_tol: float = 1e-8
    max_bit: int = MAX_BIT
    format: str = "csv"
    output: str | None = None
    threads: int = 1

    @property
    def coefs(self) -> tuple[float, float, float, float]:
        return (self.a, self.a_prime, self.b, self.b_prime)

    def resolved_method(self) -> chsh.Method:
        if self.method is None:
            return chsh.Method.ORACLE if self.family == "squeeze" else chsh.Method.ANALYTIC
        return chsh.Method(self.method)

    def truncation(self) -> dict:
        return {"eps_tail": self.eps_tail, "n_start": self.n_max, "guard": self.guard}

    def validate(self) -> "RunConfig":
        if self.family not in {f.value for f in chsh.Family}:
            raise UsageError(f"family must be displacement or squeeze, got {self.family!r}")
        if self.method is not None and self.method not in {m.value for m in chsh.Method}:
            raise UsageError(f"method must be analytic or oracle, got {self.method!r}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format!r}")
        if not 1 <= self.max_bit:
            raise UsageError("max_bit must be >= 1")
        if not 1 <= self.y <= self.max_bit:
            raise UsageError(f"y must lie in [1, {self.max_bit}], got {self.y}")
        if not (math.isfinite(self.r) and abs(self.r) <= fock.R_MAX):
            raise UsageError(f"|r| must be <= {fock.R_MAX}, got {self.r}")
        if self.steps < 2:
            raise UsageError(f"steps must be >= 2, got {self.steps}")
        if not self.j_min < self.j_max:
            raise UsageError(f"need j_min < j_max, got [{self.j_min}, {self.j_max}]")
        if self.n_max is not None and not 1 <= self.n_max <= fock.N_MAX_CAP:
            raise UsageError(f"n_max must lie in [1, {fock.N_MAX_CAP}]")
        if self.guard < 0:
            raise UsageError("guard must be >= 0")
        if not (0 < self.eps_tail < 1) or not (0 < self.cross_tol < 1):
            raise UsageError("eps_tail and cross_tol must lie in (0, 1)")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw):
    if raw is None:
        return None
    kind = str(_FIELDS[name].type)
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: cannot read {raw!r} as a number") from None
    return str(raw)


def read_config(path: str | os.PathLike) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment, unknown keys are errors."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def build_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    """Defaults, then ``base``, then the config file, then explicit flags."""
    values = dict(base or {})
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    for name in _FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = _coerce(name, flag)
    return RunConfig(**values).validate()


# -- output ------------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def curve_meta(curve: chsh.ScanCurve, cfg: RunConfig) -> dict:
    return {
        "tool": "bitbell",
        "version": __version__,
        "family": curve.family.value,
        "r": curve.r,
        "y": curve.y,
        "method": curve.method.value,
        "coefs": list(curve.coefs),
        "eps_tail": cfg.eps_tail,
        "failures": [{"J": J, "error": msg} for J, msg in curve.failures],
    }


def render_csv(curve: chsh.ScanCurve, cfg: RunConfig) -> str:
    meta = curve_meta(curve, cfg)
    out = io.StringIO()
    for key in ("tool", "version", "family", "r", "y", "method", "coefs", "eps_tail"):
        value = meta[key]
        if isinstance(value, list):
            value = ",".join(_num(v) for v in value)
        elif isinstance(value, float):
            value = _num(value)
        out.write(f"# {key} = {value}\n")
    out.write(f"# failures = {len(curve.failures)}\n")
    for J, msg in curve.failures:
        out.write(f"# failure J={_num(J)}: {msg}\n")
    out.write(",".join(COLUMNS) + "\n")
    for row in curve.rows:
        out.write(",".join(_num(getattr(row, c)) for c in COLUMNS) + "\n")
    return out.getvalue()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def render_json(curve: chsh.ScanCurve, cfg: RunConfig) -> str:
    rows = [{c: _json_value(getattr(row, c)) for c in COLUMNS} for row in curve.rows]
    return json.dumps({"meta": curve_meta(curve, cfg), "rows": rows}, indent=1) + "\n"


def render(curve: chsh.ScanCurve, cfg: RunConfig) -> str:
    return render_json(curve, cfg) if cfg.format == "json" else render_csv(curve, cfg)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def emit(text: str, output: str | None) -> None:
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def cmd_prob(args) -> int:
    if args.n1 < 0 or args.n2 < 0:
        raise UsageError("n1 and n2 must be >= 0")
    if args.family == "displaced":
        setting = chsh.MeasurementSetting(chsh.Family.DISPLACEMENT, args.z1, args.z2)

        def closed_form():
            return analytic.displaced_prob(args.r, args.z1, args.z2, args.n1, args.n2)

    else:
        params = analytic.SqueezeParams(args.r, args.rp, args.rm)
        setting = chsh.MeasurementSetting(chsh.Family.SQUEEZE, args.rp, args.rm)

        def closed_form():
            return analytic.squeezed_prob(params, args.n1, args.n2)

    def oracle():
        start = fock.N_MAX_START
        while start < max(args.n1, args.n2):
            start *= 2
        dist = chsh.setting_distribution(args.r, setting, chsh.Method.ORACLE, start, eps_tail=args.eps_tail)
        return float(dist.probs[args.n1, args.n2])

    if args.method == "analytic":
        print(_num(closed_form()))
    elif args.method == "oracle":
        print(_num(oracle()))
    else:
        a, o = closed_form(), oracle()
        print(f"analytic = {_num(a)}")
        print(f"oracle = {_num(o)}")
        print(f"difference = {_num(abs(a - o))}")
    return EXIT_OK


def _scan(cfg: RunConfig) -> chsh.ScanCurve:
    return chsh.scan_j(
        cfg.family,
        cfg.r,
        cfg.y,
        cfg.j_min,
        cfg.j_max,
        cfg.steps,
        cfg.resolved_method(),
        coefs=cfg.coefs,
        threads=cfg.threads,
        **cfg.truncation(),
    )


def _report_failures(curve: chsh.ScanCurve) -> None:
    for J, msg in curve.failures:
        print(f"warning: r={curve.r} J={_num(J)} failed: {msg}", file=sys.stderr)


def cmd_scan(args) -> int:
    cfg = build_config(args)
    curve = _scan(cfg)
    _report_failures(curve)
    emit(render(curve, cfg), cfg.output)
    return EXIT_OK


# (family, y, r values, j_max, steps); j_min is 0 throughout
FIGURES = {
    "fig2": ("displacement", 1, (0.5, 1.0, 1.5), 2.0, 201),
    "fig3a": ("displacement", 2, (0.5, 1.0, 1.5), 2.0, 201),
    "fig3b": ("displacement", 2, (0.5,), 2.0, 201),
    "fig4a": ("displacement", 3, (0.5,), 2.0, 201),
    "fig4b": ("displacement", 3, (1.0, 1.5), 2.0, 201),
    "fig5a": ("squeeze", 2, (0.5,), 1.0, 101),
    "fig5b": ("squeeze", 2, (1.0, 1.25), 1.0, 101),
}


def figure_paths(fig: str, r_values, out_dir: str, fmt: str) -> list[Path]:
    return [Path(out_dir) / f"{fig}_r{_num(r)}.{fmt}" for r in r_values]


def cmd_figure(args) -> int:
    family, y, r_values, j_max, steps = FIGURES[args.id]
    base = {"family": family, "y": y, "j_min": 0.0, "j_max": j_max, "steps": steps}
    cfg = build_config(args, base)
    if args.r is not None:
        r_values = (cfg.r,)
    # render everything before touching the output directory
    texts = []
    for r in r_values:
        curve = _scan(dataclasses.replace(cfg, r=r))
        _report_failures(curve)
        texts.append(render(curve, cfg))
    paths = figure_paths(args.id, r_values, args.out_dir, cfg.format)
    for path, text in zip(paths, texts):
        write_atomic(path, text)
        print(path)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = build_config(args, {"j_max": 2.0 if args.family != "squeeze" else 1.0})
    j_star, s_star = chsh.maximize_violation(
        cfg.family,
        cfg.r,
        cfg.y,
        cfg.j_min,
        cfg.j_max,
        cfg.resolved_method(),
        coefs=cfg.coefs,
        threads=cfg.threads,
        **cfg.truncation(),
    )
    payload = {
        "family": cfg.family,
        "r": cfg.r,
        "y": cfg.y,
        "method": cfg.resolved_method().value,
        "j_min": cfg.j_min,
        "j_max": cfg.j_max,
        "J_star": j_star,
        "S_star": s_star,
        "violation": s_star > 2.0,
    }
    print(f"J* = {_num(j_star)}  S* = {_num(s_star)}")
    text = json.dumps(payload, indent=1) + "\n"
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- verification suites -----------------------------------------------------

def _check(name: str, value: float, tol: float) -> dict:
    passed = bool(np.isfinite(value) and value <= tol)
    return {"name": name, "value": float(value), "tol": tol, "passed": passed}


def _guarded(name: str, tol: float, fn) -> dict:
    try:
        return _check(name, fn(), tol)
    except BitbellError as exc:
        return {"name": name, "value": None, "tol": tol, "passed": False, "error": f"{type(exc).__name__}: {exc}"}


def suite_identities(cfg: RunConfig) -> list[dict]:
    checks = []
    closure = max(
        float(np.max(np.abs(lie.rhs_matrix(lie.decompose_su11(c1, c2)) - lie.lhs_matrix(c1, c2))))
        for c1, c2 in lie.closure_pairs()
    )
    checks.append(_check("su11 matrix closure (100 seeded pairs)", closure, 1e-12))
    coeffs = lie.seeded_pairs(8)
    for which in (1, 2, 3):
        checks.append(
            _guarded(
                f"identity {which} on probe basis, cutoff 48 guard 16",
                1e-8,
                lambda w=which: max(lie.verify_identity(w, c1, c2) for c1, c2 in coeffs),
            )
        )
    checks.append(
        _guarded(
            "identity 2 on |n>, n <= 8",
            1e-8,
            lambda: max(lie.verify_identity(2, c1, c2, levels=[(n,) for n in range(9)]) for c1, c2 in coeffs),
        )
    )
    checks.append(
        _guarded("single-exponential composition", 1e-8, lambda: max(lie.verify_bch_compose(c1, c2) for c1, c2 in coeffs[:4]))
    )
    edge = [
        lie.verify_identity(1, 0.0, 0.2),
        lie.verify_identity(3, 0.2, 0.0),
        lie.verify_bch_compose(0.0, 0.2),
        lie.verify_bch_compose(0.2, 0.0),
    ]
    checks.append(_check("identities with a vanishing coefficient", max(edge), 1e-12))
    return checks


CROSS_DISPLACED_R = (0.5, 1.0, 1.5)
CROSS_DISPLACEMENTS = (0.0, 0.2, -0.2, 0.5, -0.5, 1.0, -1.0)
CROSS_SQUEEZED_R = (0.5, 1.0, 1.25)
CROSS_LOCAL_SQUEEZES = (0.0, 0.2, -0.2, 0.5, -0.5)
CROSS_LEVELS = 10


def cross_displaced(eps_tail: float = fock.EPS_TAIL) -> float:
    """Largest gap between pointwise closed-form and oracle probabilities, ``n1, n2 <= 10``."""
    worst = 0.0
    for r in CROSS_DISPLACED_R:
        for z1 in CROSS_DISPLACEMENTS:
            for z2 in CROSS_DISPLACEMENTS:
                setting = chsh.MeasurementSetting(chsh.Family.DISPLACEMENT, z1, z2)
                dist = chsh.setting_distribution(r, setting, chsh.Method.ORACLE, eps_tail=eps_tail)
                for n1 in range(CROSS_LEVELS + 1):
                    for n2 in range(CROSS_LEVELS + 1):
                        gap = abs(analytic.displaced_prob(r, z1, z2, n1, n2) - dist.probs[n1, n2])
                        worst = max(worst, gap)
    return worst


def cross_squeezed(eps_tail: float = fock.EPS_TAIL) -> float:
    worst = 0.0
    for r in CROSS_SQUEEZED_R:
        for rp in CROSS_LOCAL_SQUEEZES:
            for rm in CROSS_LOCAL_SQUEEZES:
                params = analytic.SqueezeParams(r, rp, rm)
                setting = chsh.MeasurementSetting(chsh.Family.SQUEEZE, rp, rm)
                dist = chsh.setting_distribution(r, setting, chsh.Method.ORACLE, eps_tail=eps_tail)
                for n1 in range(CROSS_LEVELS + 1):
                    for n2 in range(CROSS_LEVELS + 1):
                        gap = abs(analytic.squeezed_prob(params, n1, n2) - dist.probs[n1, n2])
                        worst = max(worst, gap)
    return worst


def suite_cross(cfg: RunConfig) -> list[dict]:
    checks = [
        _guarded("displaced: closed form vs oracle", cfg.cross_tol, lambda: cross_displaced(cfg.eps_tail)),
        _guarded("squeezed: closed form vs oracle", cfg.cross_tol, lambda: cross_squeezed(cfg.eps_tail)),
    ]
    for family, r, y in (("displacement", 0.5, 2), ("squeeze", 0.5, 2)):

        def gap(family=family, r=r, y=y):
            curves = [
                chsh.scan_j(family, r, y, 0.0, 1.0, 6, m, eps_tail=cfg.eps_tail)
                for m in (chsh.Method.ORACLE, chsh.Method.ANALYTIC)
            ]
            return max(abs(a.S - b.S) for a, b in zip(curves[0].rows, curves[1].rows))

        checks.append(_guarded(f"S oracle vs analytic, {family} r={r} y={y}", 4 * cfg.cross_tol, gap))
    return checks


def suite_parity(cfg: RunConfig) -> list[dict]:
    checks = []
    for r in (0.5, 1.0, 1.25):

        def gap(r=r):
            curve = chsh.scan_j("squeeze", r, 1, 0.0, 1.0, 11, chsh.Method.ORACLE, eps_tail=cfg.eps_tail)
            if curve.failures:
                raise BitbellError(curve.failures[0][1])
            return max(max(abs(row.S - 2.0), *(abs(e - 1.0) for e in (row.E_ab, row.E_abp, row.E_apb, row.E_apbp))) for row in curve.rows)

        checks.append(_guarded(f"squeeze family S_1 = 2, r={r}", 1e-9, gap))
    return checks


SUITES = {"identities": suite_identities, "cross": suite_cross, "parity": suite_parity}


def cmd_verify(args) -> int:
    cfg = build_config(args)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    report = {"tool": "bitbell", "version": __version__, "suites": {}}
    for name in names:
        checks = SUITES[name](cfg)
        report["suites"][name] = {"passed": all(c["passed"] for c in checks), "checks": checks}
    report["passed"] = all(s["passed"] for s in report["suites"].values())
    emit(json.dumps(report, indent=1) + "\n", cfg.output)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# -- parser ------------------------------------------------------------------


def _add_run_options(p: argparse.ArgumentParser, *, family_choices=("displacement", "squeeze")) -> None:
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--family", choices=family_choices)
    p.add_argument("--r", type=float)
    p.add_argument("--y", type=int)
    p.add_argument("--j-min", dest="j_min", type=float)
    p.add_argument("--j-max", dest="j_max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--method", choices=[m.value for m in chsh.Method])
    for name in ("a", "a-prime", "b", "b-prime"):
        p.add_argument(f"--coef-{name}", dest=name.replace("-", "_"), type=float, help="setting = coef * J")
    p.add_argument("--n-max", dest="n_max", type=int, help="starting cutoff")
    p.add_argument("--guard", type=int)
    p.add_argument("--eps-tail", dest="eps_tail", type=float)
    p.add_argument("--cross-tol", dest="cross_tol", type=float)
    p.add_argument("--max-bit", dest="max_bit", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bitbell", description="Bitwise Bell inequality calculator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="joint number probability Pr(n1, n2)")
    p.add_argument("--family", choices=("displaced", "squeezed"), required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--z1", type=_complex, default=0j)
    p.add_argument("--z2", type=_complex, default=0j)
    p.add_argument("--rp", type=float, default=0.0)
    p.add_argument("--rm", type=float, default=0.0)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--method", choices=("analytic", "oracle", "both"), default="analytic")
    p.add_argument("--eps-tail", dest="eps_tail", type=float, default=fock.EPS_TAIL)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("scan", help="S(J) over a grid of J")
    _add_run_options(p)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("figure", help="scan data for one figure, one file per r")
    p.add_argument("id", choices=sorted(FIGURES))
    _add_run_options(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("verify", help="run a verification suite and print a JSON report")
    p.add_argument("suite", choices=[*SUITES, "all"])
    p.add_argument("--config")
    p.add_argument("--eps-tail", dest="eps_tail", type=float)
    p.add_argument("--cross-tol", dest="cross_tol", type=float)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", help="maximize S over J")
    _add_run_options(p)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CutoffExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CUTOFF
    except DegenerateDenominator as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BitbellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
