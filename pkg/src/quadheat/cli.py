"""Command-line front end: evaluate kernels, scan grids, verify, evolve.

Commands
    eval    kernel values at configured points (JSON lines)
    scan    kernel values over a grid (CSV, written atomically)
    verify  run the numerical verification suite (JSON report)
    evolve  heat evolution of expression-defined initial data (CSV)

A single JSON config drives every command; see the README for the schema.
Exit codes: 0 success, 1 numeric failure, 2 invalid input.  All floating
point output uses shortest round-trip representations so reruns are
byte-identical and files reparse exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boxop import (
    GridFunction,
    GridSpec,
    heat_apply,
    initial_condition_check,
    pde_residual,
    semigroup_check,
)
from .errors import NumericsError
from .forms import FormIndex, epsilon
from .hermite import UTildeParams, u_tilde_closed, u_tilde_series
from .kernel import (
    KernelQuery,
    rho_hat,
    rho_hat_adapted,
    rho_via_inversion,
    rho_hat_eta,
    weighted_heat_kernel,
)
from .quadrature import QuadratureSpec
from .quadric import QuadricForm
from .spectral import SpectralData, decompose_form, to_adapted

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INVALID = 2

ALL_CHECKS = (
    "mehler",
    "inversion",
    "pde_residual",
    "semigroup",
    "initial_condition",
    "euclidean",
    "evenness",
)

DEFAULT_TOLERANCES = {
    "mehler": 1e-9,
    "inversion": 1e-6,
    "pde_residual": 1e-5,
    "semigroup": 1e-5,
    "initial_condition": 5e-3,
    "euclidean": 1e-14,
    "evenness": 1e-12,
}


# ---------------------------------------------------------------------------
# initial-data expression grammar: identifiers, literals, + - * / ^, exp, ()


class ExprError(ValueError):
    """Parse failure with a character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ExprError(f"unexpected character {rest[0]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    """Recursive descent for the tiny initial-data grammar."""

    def __init__(self, text: str, variables: set):
        self.tokens = _tokenize(text)
        self.variables = variables
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected trailing token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                node = (
                    (lambda a, b: lambda env: a(env) + b(env))
                    if val == "+"
                    else (lambda a, b: lambda env: a(env) - b(env))
                )(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                node = (
                    (lambda a, b: lambda env: a(env) * b(env))
                    if val == "*"
                    else (lambda a, b: lambda env: a(env) / b(env))
                )(node, rhs)
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.advance()
            inner = self.factor()
            if val == "-":
                return lambda env: -inner(env)
            return inner
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            expo = self.factor()
            return lambda env: base(env) ** expo(env)
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return lambda env, v=val: v
        if kind == "ident":
            if val == "exp":
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return lambda env: np.exp(inner(env))
            if val in self.variables:
                return lambda env, name=val: env[name]
            raise ExprError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExprError(f"expected a value, got {val!r}", pos)


def parse_initial_expression(text: str, n: int):
    """Compile an initial-data expression over x1..xn, y1..yn.

    Returns a callable mapping an (N, n) complex array of points to N values.
    """
    variables = {f"x{j + 1}" for j in range(n)} | {f"y{j + 1}" for j in range(n)}
    fn = _Parser(text, variables).parse()

    def evaluate(Z):
        Z = np.asarray(Z, dtype=complex)
        env = {}
        for j in range(n):
            env[f"x{j + 1}"] = Z[..., j].real
            env[f"y{j + 1}"] = Z[..., j].imag
        return fn(env) * np.ones(Z.shape[:-1])

    return evaluate


# ---------------------------------------------------------------------------
# config parsing


@dataclass
class JobConfig:
    quadric: QuadricForm
    lam: np.ndarray
    L: FormIndex
    s_values: list
    raw: dict
    spectral: SpectralData = field(init=False)

    def __post_init__(self):
        self.spectral = decompose_form(self.quadric, self.lam)


def _parse_complex_vector(obj, n: int, name: str) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape != (n, 2):
        raise ValueError(
            f"config field '{name}': expected {n} [re, im] pairs, got shape {arr.shape}"
        )
    return arr[:, 0] + 1j * arr[:, 1]


def load_config(path: str) -> JobConfig:
    """Parse and validate the job config, raising ValueError with field names."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from exc

    errors = []
    quadric = None
    qspec = raw.get("quadric")
    if qspec is None:
        errors.append("config field 'quadric': missing")
    else:
        try:
            if isinstance(qspec, str):
                base = os.path.dirname(os.path.abspath(path))
                qpath = qspec if os.path.isabs(qspec) else os.path.join(base, qspec)
                with open(qpath, "r", encoding="utf-8") as fh:
                    qspec = json.load(fh)
            quadric = QuadricForm.from_json(qspec)
        except (ValueError, OSError, json.JSONDecodeError) as exc:
            errors.append(f"config field 'quadric': {exc}")

    lam = None
    if "lambda" not in raw:
        errors.append("config field 'lambda': missing")
    elif quadric is not None:
        lam = np.asarray(raw["lambda"], dtype=float).reshape(-1)
        if lam.shape != (quadric.m,):
            errors.append(
                f"config field 'lambda': expected length m={quadric.m}, got {lam.shape[0]}"
            )
            lam = None

    form = None
    try:
        entries = raw.get("L", [])
        if len(set(entries)) != len(entries):
            raise ValueError(f"repeated index in {entries}")
        form = FormIndex(entries)
        if quadric is not None:
            form.validate_against(quadric.n)
    except (ValueError, TypeError) as exc:
        errors.append(f"config field 'L': {exc}")

    s_raw = raw.get("s", 1.0)
    s_values = []
    try:
        s_list = [s_raw] if np.isscalar(s_raw) else list(s_raw)
        for s in s_list:
            s = float(s)
            if s <= 0.0:
                raise ValueError(f"time values must be positive, got {s}")
            s_values.append(s)
        if not s_values:
            raise ValueError("empty list")
    except (ValueError, TypeError) as exc:
        errors.append(f"config field 's': {exc}")

    if errors:
        raise ValueError("; ".join(errors))
    return JobConfig(quadric=quadric, lam=lam, L=form, s_values=s_values, raw=raw)


def config_digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# commands


def cmd_eval(cfg: JobConfig, out_path: str | None) -> int:
    n = cfg.quadric.n
    pts_raw = cfg.raw.get("points")
    if pts_raw is None:
        raise ValueError("config field 'points': missing (required by eval)")
    points = [
        _parse_complex_vector(p, n, f"points[{i}]") for i, p in enumerate(pts_raw)
    ]
    zt = None
    if "point_tilde" in cfg.raw:
        zt = _parse_complex_vector(cfg.raw["point_tilde"], n, "point_tilde")
    S = cfg.spectral
    eps = epsilon(cfg.L, S)
    lines = []
    for s in cfg.s_values:
        for z in points:
            if zt is None:
                val = complex(rho_hat(KernelQuery(s, z, S, cfg.L)))
            else:
                val = weighted_heat_kernel(s, z, zt, cfg.quadric, S, cfg.L)
            record = {
                "s": s,
                "point": [[float(c.real), float(c.imag)] for c in z],
                "lambda": [float(x) for x in cfg.lam],
                "L": list(cfg.L.L),
                "mu": [float(x) for x in S.mu],
                "nu": S.nu,
                "eps": [int(e) for e in eps],
                "value": [val.real, val.imag],
                "log10_abs": float(np.log10(abs(val))) if val != 0 else None,
            }
            if zt is not None:
                record["point_tilde"] = [[float(c.real), float(c.imag)] for c in zt]
            lines.append(json.dumps(record))
    text = "\n".join(lines) + "\n"
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _grid_from_config(cfg: JobConfig) -> GridSpec:
    gspec = cfg.raw.get("grid")
    if gspec is None:
        raise ValueError("config field 'grid': missing")
    try:
        half_widths = gspec["half_widths"]
        points = int(gspec["points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"config field 'grid': {exc}") from exc
    spec = GridSpec(half_widths, points)
    if spec.dim != 2 * cfg.quadric.n:
        raise ValueError(
            f"config field 'grid.half_widths': expected 2n={2 * cfg.quadric.n} axes, "
            f"got {spec.dim}"
        )
    return spec


def _scan_rows(cfg: JobConfig, spec: GridSpec, s: float, threads: int) -> list:
    S = cfg.spectral
    pts = spec.flat_points()
    c = pts[:, 0::2] + 1j * pts[:, 1::2]

    def block(lo_hi):
        lo, hi = lo_hi
        return rho_hat_adapted(s, c[lo:hi], S, cfg.L)

    chunk = max(1, (pts.shape[0] + threads - 1) // threads)
    ranges = [(i, min(i + chunk, pts.shape[0])) for i in range(0, pts.shape[0], chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(block, ranges))
    else:
        vals = [block(r) for r in ranges]
    values = np.concatenate(vals)
    rows = []
    for coords, v in zip(pts, values):
        cells = [repr(float(x)) for x in coords]
        cells += [repr(float(v)), repr(0.0), repr(float(np.log10(v)))]
        rows.append(",".join(cells))
    return rows


def cmd_scan(cfg: JobConfig, out_path: str | None, threads: int) -> int:
    if out_path is None:
        raise ValueError("scan requires --out PATH for its CSV output")
    if len(cfg.s_values) != 1:
        raise ValueError("config field 's': scan expects a single time value")
    spec = _grid_from_config(cfg)
    s = cfg.s_values[0]
    S = cfg.spectral
    eps = epsilon(cfg.L, S)
    names = [f"{'x' if k % 2 == 0 else 'y'}{k // 2 + 1}" for k in range(spec.dim)]
    header = [
        f"# config_sha256={config_digest(cfg.raw)}",
        f"# lambda={[float(x) for x in cfg.lam]}",
        f"# mu={[float(x) for x in S.mu]}",
        f"# nu={S.nu}",
        f"# eps={[int(e) for e in eps]}",
        f"# s={repr(s)}",
        ",".join(names + ["re", "im", "log10_abs"]),
    ]
    rows = _scan_rows(cfg, spec, s, threads)
    _atomic_write(out_path, "\n".join(header + rows) + "\n")
    return EXIT_OK


def cmd_evolve(cfg: JobConfig, out_path: str | None, threads: int) -> int:
    if out_path is None:
        raise ValueError("evolve requires --out PATH for its CSV output")
    n = cfg.quadric.n
    spec = _grid_from_config(cfg)
    expr = cfg.raw.get("initial")
    csv_path = cfg.raw.get("initial_csv")
    if (expr is None) == (csv_path is None):
        raise ValueError(
            "config field 'initial': evolve needs exactly one of "
            "'initial' (expression) or 'initial_csv' (grid CSV)"
        )
    out_raw = cfg.raw.get("out_points")
    if out_raw is None:
        raise ValueError("config field 'out_points': missing (required by evolve)")
    out_points = [
        _parse_complex_vector(p, n, f"out_points[{i}]") for i, p in enumerate(out_raw)
    ]
    S = cfg.spectral
    if expr is not None:
        f = parse_initial_expression(expr, n)
        nodes = spec.flat_points()
        c = nodes[:, 0::2] + 1j * nodes[:, 1::2]
        z_nodes = c @ S.V.T
        gf = GridFunction(spec, np.asarray(f(z_nodes)).reshape(spec.shape()))
    else:
        try:
            gf = GridFunction.load_csv(csv_path, spec)
        except OSError as exc:
            raise ValueError(f"config field 'initial_csv': {exc}") from exc

    def one_s(s):
        return heat_apply(gf, s, cfg.quadric, S, cfg.L, out_points)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_s, cfg.s_values))
    else:
        results = [one_s(s) for s in cfg.s_values]
    lines = [
        f"# config_sha256={config_digest(cfg.raw)}",
        "s,point_index,re,im",
    ]
    for s, vals in zip(cfg.s_values, results):
        for i, v in enumerate(vals):
            lines.append(f"{repr(float(s))},{i},{repr(v.real)},{repr(v.imag)}")
    _atomic_write(out_path, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification checks


def _check_mehler(cfg: JobConfig, tol: float) -> float:
    S = cfg.spectral
    if S.nu < 1:
        raise NumericsError("mehler check needs at least one nonzero eigenvalue")
    worst = 0.0
    grid = np.linspace(-4.0, 4.0, 5)
    complement = FormIndex([j for j in range(1, S.n + 1) if not cfg.L.contains(j)])
    for L in (cfg.L, complement):
        for s in (0.1, 1.0):
            for a in grid:
                for b in grid:
                    p = UTildeParams(s, [a] * S.nu, [b] * S.nu, S, L)
                    diff = abs(u_tilde_closed(p) - u_tilde_series(p, 300))
                    worst = max(worst, diff)
    return worst


def _check_inversion(cfg: JobConfig, tol: float) -> float:
    S = cfg.spectral
    if S.nu < 1:
        raise NumericsError("inversion check needs nu >= 1")
    worst = 0.0
    samples = [(0.3, -0.2), (0.0, 0.0), (-0.7, 0.5)]
    for s in (0.3, 0.7):
        for x, y in samples:
            xp = np.full(S.nu, x)
            yp = np.full(S.nu, y)
            want = rho_hat_eta(s, xp, yp, None, S, cfg.L)
            got = rho_via_inversion(s, xp, yp, None, S, cfg.L, tol=tol)
            worst = max(worst, abs(got - want), abs(got.imag))
    return worst


def _check_pde_residual(cfg: JobConfig, tol: float) -> float:
    n = cfg.quadric.n
    if n == 1:
        grid = GridSpec.cube(2.0, 2, 2001)
    elif n == 2:
        grid = GridSpec.cube(0.06, 4, 49)
    else:
        raise NumericsError("pde_residual check supports n <= 2 grids only")
    return pde_residual(0.7, cfg.spectral, cfg.L, grid, 1e-4)


def _semigroup_points(n: int):
    z = np.zeros(n, dtype=complex)
    zt = np.zeros(n, dtype=complex)
    z[0] = 0.3 + 0.1j
    zt[0] = -0.2 + 0.5j
    return z, zt


def _check_semigroup(cfg: JobConfig, tol: float) -> float:
    n = cfg.quadric.n
    if n > 1:
        raise NumericsError("semigroup check runs on n = 1 geometries")
    debug = cfg.raw.get("debug", {})
    phase_sign = float(debug.get("phase_sign", -1.0))
    z, zt = _semigroup_points(n)
    quad = QuadratureSpec(half_width=6.0, points=400, tail_rate=1.0)
    return semigroup_check(0.4, 0.4, z, zt, cfg.quadric, cfg.spectral, cfg.L, quad,
                           phase_sign=phase_sign)


def _check_initial_condition(cfg: JobConfig, tol: float) -> float:
    if cfg.quadric.n > 1:
        raise NumericsError("initial_condition check runs on n = 1 geometries")

    def f(Z):
        return np.exp(-np.sum(np.abs(Z) ** 2, axis=-1))

    errs = initial_condition_check(
        f, [0.1, 0.01, 0.001], cfg.quadric, cfg.spectral, cfg.L
    )
    if not all(a > b for a, b in zip(errs, errs[1:])):
        raise NumericsError(f"initial-condition errors not decreasing: {errs}")
    return errs[-1]


def _check_euclidean(cfg: JobConfig, tol: float) -> float:
    rng = np.random.default_rng(20240811)
    n, m = cfg.quadric.n, cfg.quadric.m
    S0 = decompose_form(cfg.quadric, np.zeros(m))
    worst = 0.0
    for _ in range(200):
        s = float(rng.uniform(0.3, 3.0))
        z = rng.normal(size=n) + 1j * rng.normal(size=n)
        got = rho_hat(KernelQuery(s, z, S0, cfg.L))
        want = (
            2.0**n
            * (2.0 * np.pi) ** (-(0.5 * m + n))
            * s ** (-n)
            * np.exp(-float(np.sum(np.abs(z) ** 2)) / s)
        )
        worst = max(worst, abs(got - want) / want)
    return worst


def _check_evenness(cfg: JobConfig, tol: float) -> float:
    rng = np.random.default_rng(20240812)
    S = cfg.spectral
    worst = 0.0
    for _ in range(100):
        s = float(rng.uniform(0.2, 2.0))
        z = rng.normal(size=S.n) + 1j * rng.normal(size=S.n)
        base = rho_hat(KernelQuery(s, z, S, cfg.L))
        p = to_adapted(S, z)
        c = np.concatenate([p.zp, p.zpp])
        for j in range(S.n):
            # x_j -> -x_j and y_j -> -y_j sign flips in adapted coordinates
            for flip in (-np.conj(c[j]), np.conj(c[j])):
                c2 = c.copy()
                c2[j] = flip
                other = rho_hat(KernelQuery(s, S.V @ c2, S, cfg.L))
                worst = max(worst, abs(other - base) / base)
        neg = rho_hat(KernelQuery(s, -z, S, cfg.L))
        worst = max(worst, abs(neg - base) / base)
    return worst


CHECK_FUNCTIONS = {
    "mehler": _check_mehler,
    "inversion": _check_inversion,
    "pde_residual": _check_pde_residual,
    "semigroup": _check_semigroup,
    "initial_condition": _check_initial_condition,
    "euclidean": _check_euclidean,
    "evenness": _check_evenness,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float | None
    tolerance: float
    runtime_s: float
    message: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "error": self.error,
            "tolerance": self.tolerance,
            "runtime_s": round(self.runtime_s, 3),
            "message": self.message,
        }


def run_verification(cfg: JobConfig, tol_override: float | None = None) -> dict:
    """Run the configured checks and assemble the report dict."""
    names = cfg.raw.get("checks", list(ALL_CHECKS))
    unknown = [c for c in names if c not in CHECK_FUNCTIONS]
    if unknown:
        raise ValueError(f"config field 'checks': unknown check names {unknown}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(cfg.raw.get("tolerances", {}))
    results = []
    for name in names:
        tol = float(tol_override if tol_override is not None else tolerances[name])
        t0 = time.perf_counter()
        try:
            err = CHECK_FUNCTIONS[name](cfg, tol)
            results.append(
                CheckResult(name, bool(err <= tol), float(err), tol,
                            time.perf_counter() - t0)
            )
        except NumericsError as exc:
            results.append(
                CheckResult(name, False, None, tol, time.perf_counter() - t0,
                            message=str(exc))
            )
    return {
        "config_sha256": config_digest(cfg.raw),
        "checks": [r.to_json() for r in results],
        "all_pass": all(r.passed for r in results),
    }


def cmd_verify(cfg: JobConfig, out_path: str | None, tol_override: float | None) -> int:
    report = run_verification(cfg, tol_override)
    text = json.dumps(report, indent=2) + "\n"
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["all_pass"] else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadheat",
        description="Evaluate and verify heat kernels on quadric geometries.",
    )
    parser.add_argument("command", choices=["eval", "scan", "verify", "evolve"])
    parser.add_argument("--config", required=True, help="path to the JSON job config")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--threads", type=int, default=1, help="parallelism cap")
    parser.add_argument("--tol", type=float, default=None,
                        help="override every verification tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        sys.stderr.write("error: --threads must be at least 1\n")
        return EXIT_INVALID
    try:
        cfg = load_config(args.config)
        if args.command == "eval":
            return cmd_eval(cfg, args.out)
        if args.command == "scan":
            return cmd_scan(cfg, args.out, args.threads)
        if args.command == "evolve":
            return cmd_evolve(cfg, args.out, args.threads)
        return cmd_verify(cfg, args.out, args.tol)
    except (ValueError, ExprError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except NumericsError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
