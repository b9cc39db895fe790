"""Command line entry point: ``radlap <subcommand> [domain flags] [options]``.

Every subcommand prints one table (CSV with a fixed header, or a JSON object
``{config, results, assertions}``). Exit status is 0 on success, 1 when a
checked inequality or identity fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .calculus import RadicalSpectrum, weyl_count, weyl_fit, weyl_predicted_constant
from .discretize import assemble_laplacian, check_green_identities, norm
from .eigensolve import DENSE_CAP, eigendecompose
from .errors import RadlapError
from .evolution import ModalState, WaveParams, heat_solve, wave_energy, wave_solve
from .geometry import Domain, Field, build_domain, load_domain_spec
from .nodal import courant_check, nodal_tone_check
from .variational import comparison_tolerance, dirichlet_bracket, neumann_bracket, partition, rayleigh_quotient

log = logging.getLogger("radlap")

HEADERS = {
    "spectrum": ("k", "lambda", "radical", "residual"),
    "weyl": ("k", "lambda", "count", "predicted_count", "exponent", "constant", "predicted_constant"),
    "heat": ("t", "node", "x", "y", "value"),
    "wave": ("t", "node", "x", "y", "value"),
    "rayleigh": ("quotient", "lambda_1", "holds"),
    "bracket": ("k", "lambda", "piece_lambda", "holds"),
    "nodal": ("k", "lambda", "nodal_count", "courant_ok", "ratio", "tone", "tone_rel_err"),
    "green": ("pair", "r1", "r2", "r3", "r4", "scale", "ok"),
    "diffgeo": ("check", "value", "tolerance", "ok"),
}

INLINE_DOMAIN_FLAGS = ("domain", "length", "lx", "ly", "grid", "bc", "metric")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    domain: Domain
    modes: int
    format: str
    output: str | None
    seed: int
    options: dict = dc_field(default_factory=dict)


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def _json(obj):
    """JSON text with floats written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return f"{v:.17g}" if math.isfinite(v) else json.dumps(str(v))
    return json.dumps(obj)


def render(cfg: RunConfig, rows, assertions: dict) -> str:
    header = HEADERS[cfg.subcommand]
    if cfg.format == "csv":
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()
    d = cfg.domain
    config = {
        "subcommand": cfg.subcommand,
        "domain": {"kind": d.kind, "lengths": list(d.lengths), "grid": list(d.grid),
                   "bc": list(d.bc), "metric": None if d.metric is None else d.metric.name},
        "modes": cfg.modes,
        "seed": cfg.seed,
        "options": {k: v for k, v in sorted(cfg.options.items())},
    }
    results = [dict(zip(header, row)) for row in rows]
    return _json({"config": config, "results": results, "assertions": assertions}) + "\n"


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _grid(text):
    parts = str(text).lower().replace("x", ",").split(",")
    try:
        values = [int(p) for p in parts if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return values


def _index_pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    return vals


def _expression(text, dim):
    import sympy

    names = ("x", "y")[:dim]
    symbols = sympy.symbols(names)
    try:
        expr = sympy.sympify(text, locals={n: s for n, s in zip(names, symbols)})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise UsageError(f"cannot parse expression {text!r}: {exc}") from None
    extra = expr.free_symbols - set(symbols)
    if extra:
        raise UsageError(f"expression {text!r} uses unknown symbols {sorted(map(str, extra))}")
    fn = sympy.lambdify(symbols, expr, "numpy")
    return fn


def _domain_from_args(args) -> Domain:
    inline = [k for k in INLINE_DOMAIN_FLAGS if getattr(args, k, None) is not None]
    if args.domain_file:
        if inline:
            log.warning("--domain-file given; ignoring inline flags %s", ", ".join("--" + k for k in inline))
        return load_domain_spec(args.domain_file)
    kind = args.domain or "interval"
    if kind in ("interval", "circle"):
        default = 2 * math.pi if kind == "circle" else 1.0
        lengths = [args.length if args.length is not None else default]
    else:
        lx = args.lx if args.lx is not None else (args.length or 1.0)
        ly = args.ly if args.ly is not None else lx
        lengths = [lx, ly]
    grid = args.grid or ([200] if kind in ("interval", "circle") else [32])
    spec = {"kind": kind, "lengths": lengths, "grid": grid}
    if args.bc:
        bc = [b.strip() for b in args.bc.split(",")]
        spec["bc"] = bc[0] if len(bc) == 1 else bc
    if args.metric:
        spec["metric"] = args.metric
    return build_domain(spec)


def build_parser():
    common = _Parser(add_help=False)
    g = common.add_argument_group("domain")
    g.add_argument("--domain", choices=("interval", "circle", "rectangle", "masked-grid"))
    g.add_argument("--domain-file", help="JSON or YAML domain description")
    g.add_argument("--length", type=float)
    g.add_argument("--lx", type=float)
    g.add_argument("--ly", type=float)
    g.add_argument("--grid", type=_grid, help="nodes per axis, e.g. 200 or 64x48")
    g.add_argument("--bc", help="dirichlet|neumann|periodic, or one per boundary segment, comma separated")
    g.add_argument("--metric", help="flat, exp2x or one_plus_x2 (intervals only)")
    o = common.add_argument_group("output")
    o.add_argument("--modes", type=int, default=10)
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--output", help="write here instead of standard output")
    o.add_argument("--seed", type=int, default=0)

    parser = _Parser(prog="radlap", description="Spectral toolkit for the square-root Laplacian.")
    parser.add_argument("--version", action="version", version=f"radlap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    sub.add_parser("spectrum", parents=[common], help="eigenvalues and radicals")

    p = sub.add_parser("weyl", parents=[common], help="eigenvalue counts and Weyl fit")
    p.add_argument("--analytic", action="store_true", help="use the closed-form spectrum")
    p.add_argument("--window", type=_index_pair, help="LO,HI fit window")
    p.add_argument("--by", choices=("index", "lambda"), default="index")

    for name in ("heat", "wave"):
        p = sub.add_parser(name, parents=[common], help=f"{name} equation snapshots")
        p.add_argument("--times", type=_floats, default=[0.0, 0.5, 1.0])
        p.add_argument("--initial", default="sin(pi*x)",
                       help="initial shape as an expression in x (and y)")
        if name == "wave":
            p.add_argument("--rho", type=float, default=1.0)
            p.add_argument("--tau", type=float, default=1.0)

    p = sub.add_parser("rayleigh", parents=[common], help="Rayleigh quotient of a field")
    p.add_argument("--field", required=True, help="expression in x (and y)")

    p = sub.add_parser("bracket", parents=[common], help="Dirichlet/Neumann bracketing")
    p.add_argument("--interface", choices=("dirichlet", "neumann"), default="dirichlet")
    p.add_argument("--cut", type=_floats, required=True)
    p.add_argument("--axis", type=int, default=0)

    p = sub.add_parser("nodal", parents=[common], help="nodal counts and Courant bound")
    p.add_argument("--tone", type=int, help="also run the tone check for this k")

    p = sub.add_parser("green", parents=[common], help="Green identity residuals")
    p.add_argument("--pairs", type=int, default=20)

    sub.add_parser("diffgeo", parents=[common], help="Christoffel and divergence cross-checks")
    return parser


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _decompose(cfg, count=None):
    op = assemble_laplacian(cfg.domain)
    return eigendecompose(op, min(count or cfg.modes, op.n))


def cmd_spectrum(cfg):
    d = _decompose(cfg)
    rows = [(k + 1, d.lambdas[k], d.radicals[k], d.residuals[k]) for k in range(d.count)]
    w = d.domain.weights
    gram = d.vectors.T @ (w[:, None] * d.vectors)
    assertions = {
        "residuals_below_1e-9": bool(np.all(d.residuals <= 1e-9)),
        "orthonormal_to_1e-10": bool(np.abs(gram - np.eye(d.count)).max() <= 1e-10),
        "nonnegative": bool(d.raw_min >= -1e-10 * d.operator.norm),
    }
    return rows, assertions


def _closed_form_tag(domain):
    if domain.kind == "circle":
        return "circle"
    if domain.kind == "interval" and domain.metric is None:
        bc = domain.bc
        if bc == ("dirichlet", "dirichlet"):
            return "interval-dirichlet"
        if bc == ("neumann", "neumann"):
            return "interval-neumann"
        if set(bc) == {"dirichlet", "neumann"}:
            return "interval-mixed"
    if domain.kind == "rectangle" and all(b == "dirichlet" for b in domain.bc):
        return "rectangle-dirichlet"
    raise UsageError(f"no closed form for a {domain.kind} with bc {domain.bc}")


def cmd_weyl(cfg):
    o = cfg.options
    if o["analytic"]:
        s = RadicalSpectrum.analytic(_closed_form_tag(cfg.domain), cfg.domain.lengths, count=cfg.modes)
    else:
        s = RadicalSpectrum.from_decomposition(_decompose(cfg))
    n = len(s.lambdas)
    window = o["window"] or [max(1, n // 10), n]
    fit = weyl_fit(s, window, by=o["by"])
    predicted = weyl_predicted_constant(s.dim, s.volume)
    counts = [weyl_count(s, lam) for lam in s.lambdas]
    rows = [(k + 1, s.lambdas[k], counts[k], predicted * s.lambdas[k] ** (s.dim / 2),
             fit.exponent, fit.constant, fit.predicted_constant) for k in range(n)]
    assertions = {"count_monotone": bool(np.all(np.diff(counts) >= 0)),
                  "count_at_top_equals_modes": counts[-1] == n if n else True}
    return rows, assertions


def _initial(cfg):
    fn = _expression(cfg.options["initial"], cfg.domain.dim)
    return cfg.domain.sample(fn)


def _snapshot_rows(t, u):
    d = u.domain
    ys = d.y if d.dim == 2 else np.zeros(d.n)
    return [(t, i, d.x[i], ys[i], u.values[i]) for i in range(d.n)]


def cmd_heat(cfg):
    d = _decompose(cfg)
    f = _initial(cfg)
    times = sorted(cfg.options["times"])
    if times and times[0] < 0:
        raise UsageError("times must be nonnegative")
    rows, norms = [], []
    for t in times:
        u = heat_solve(d, f, t)
        norms.append(norm(u))
        rows.extend(_snapshot_rows(t, u))
    ok = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(norms, norms[1:]))
    return rows, {"norm_nonincreasing": ok}


def cmd_wave(cfg):
    d = _decompose(cfg)
    f = _initial(cfg)
    try:
        p = WaveParams(cfg.options["rho"], cfg.options["tau"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    state = ModalState.from_field(d, f)
    rows, energies = [], []
    for t in cfg.options["times"]:
        rows.extend(_snapshot_rows(t, wave_solve(d, f, t, p)))
        energies.append(wave_energy(d, state, t, p))
    e0 = energies[0] if energies else 0.0
    ok = all(abs(e - e0) <= 1e-10 * max(abs(e0), 1e-300) for e in energies)
    return rows, {"energy_conserved_1e-10": ok}


def cmd_rayleigh(cfg):
    op = assemble_laplacian(cfg.domain)
    f = cfg.domain.sample(_expression(cfg.options["field"], cfg.domain.dim))
    q = rayleigh_quotient(f, op)
    lam1 = eigendecompose(op, 1).lambdas[0]
    holds = bool(q >= lam1 - comparison_tolerance(lam1, op.norm))
    return [(q, lam1, holds)], {"quotient_at_least_lambda_1": holds}


def cmd_bracket(cfg):
    o = cfg.options
    part = partition(cfg.domain, o["cut"], o["interface"], axis=o["axis"])
    fn = dirichlet_bracket if o["interface"] == "dirichlet" else neumann_bracket
    res = fn(part, cfg.modes)
    rows = [(k + 1, res.lambdas[k], res.pieces[k], res.holds[k]) for k in range(cfg.modes)]
    name = "lambda_le_nu" if o["interface"] == "dirichlet" else "mu_le_lambda"
    return rows, {name: res.ok}


def cmd_nodal(cfg):
    d = _decompose(cfg)
    table = courant_check(d, d.count)
    tone_k = cfg.options.get("tone")
    tone = None
    if tone_k is not None:
        if not 1 <= tone_k <= d.count:
            raise UsageError(f"--tone must lie in 1..{d.count}")
        tone = nodal_tone_check(d, tone_k)
    rows = []
    for r in table:
        hit = tone is not None and r.k == tone_k
        rows.append((r.k, r.lam, r.count, r.ok, r.count / r.k,
                     tone.tone if hit else None, tone.rel_err if hit else None))
    assertions = {"courant_bound": all(r.ok for r in table),
                  "first_mode_one_domain": table[0].count == 1}
    return rows, assertions


def cmd_green(cfg):
    d = _decompose(cfg, count=cfg.domain.n)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(cfg.options["pairs"]):
        f = Field(cfg.domain, rng.standard_normal(cfg.domain.n))
        h = Field(cfg.domain, rng.standard_normal(cfg.domain.n))
        rep = check_green_identities(f, h, d)
        rows.append((i + 1, rep.r1, rep.r2, rep.r3, rep.r4, rep.scale, rep.ok))
    return rows, {"residuals_below_1e-9_scale": all(r[-1] for r in rows)}


def cmd_diffgeo(cfg):
    from .geometry import diffgeo_report
    checks = diffgeo_report(cfg.domain)
    rows = [(c.name, c.value, c.tolerance, c.ok) for c in checks]
    return rows, {c.name: c.ok for c in checks}


COMMANDS = {
    "spectrum": cmd_spectrum, "weyl": cmd_weyl, "heat": cmd_heat, "wave": cmd_wave,
    "rayleigh": cmd_rayleigh, "bracket": cmd_bracket, "nodal": cmd_nodal,
    "green": cmd_green, "diffgeo": cmd_diffgeo,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    try:
        domain = _domain_from_args(args)
        if args.modes < 1:
            raise UsageError("--modes must be positive")
        if domain.n > DENSE_CAP:
            raise UsageError(f"{domain.n} unknowns exceed the dense cap of {DENSE_CAP}")
        options = {k: v for k, v in vars(args).items()
                   if k not in INLINE_DOMAIN_FLAGS + ("domain_file", "modes", "format", "output",
                                                     "seed", "subcommand")}
        cfg = RunConfig(args.subcommand, domain, args.modes, args.format, args.output, args.seed, options)
        rows, assertions = COMMANDS[args.subcommand](cfg)
    except (UsageError, RadlapError, OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"radlap: error: {exc}", file=sys.stderr)
        return 2
    text = render(cfg, rows, assertions)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [k for k, v in assertions.items() if not v]
    if failed:
        print(f"radlap: assertion failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main():
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
