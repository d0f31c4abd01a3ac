"""Command-line driver.

Usage::

    poroplate --config run.cfg [--out DIR] [--override key=value ...] [--quiet]

The config document is a flat ``key = value`` file with optional
``[section]`` headers and ``#`` comments. Keys may be written bare when
their name is unique across sections (``tau``, ``c_p``, ``N3`` ...) or as
``section.key``. ``grid = M N N3`` is accepted as shorthand.

Exit codes: 0 success, 1 solver failure, 2 a CHECK line failed,
64 command-line usage error, 65 unreadable or invalid config.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import inertial as inr
from . import quasistatic as qs
from . import verify
from .discretization import MAX_UNKNOWNS, GridSpec, plate_w_norm, pressure_v_norm, random_field
from .errors import ParseError, PoroPlateError, SchemaError, UnsupportedPermeability
from .io import Manifest, write_csv, write_slices
from .model import (
    PERMEABILITY_PRESETS, InitialData, PhysicalParams, SourceTerms, make_permeability,
)
from .operators import OperatorContext, inner, make_context

log = logging.getLogger("poroplate")

EX_OK, EX_SOLVER, EX_CHECK, EX_USAGE, EX_CONFIG = 0, 1, 2, 64, 65

MODES = ("quasistatic", "inertial", "verify", "convergence")
SOURCE_PRESETS = ("none", "decaying-mode", "smooth", "manufactured")
INITIAL_PRESETS = ("zero", "smooth", "random", "manufactured")

REQUIRED = object()


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text):
    return [int(x) for x in text.replace(",", " ").split()]


def _words(text):
    return [x for x in text.replace(",", " ").split()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "mode": (str, REQUIRED),
        "T": (float, 1.0),
        "tau": (float, 0.01),
        "seed": (int, 0),
        "tol": (float, 1e-10),
        "scheme": (str, "backward_euler"),
        "path": (str, "direct"),
        "snapshot_every": (int, 0),
        "suites": (_words, list(verify.QUICK_SUITES)),
        "study": (str, "quasistatic"),
        "ladder_tau": (_floats, [t for t, _ in verify.QS_TAU_LADDER]),
        "ladder_N3": (_ints, [n for _, n in verify.QS_N3_LADDER]),
        "ladder_fixed_N3": (int, verify.QS_TAU_LADDER[0][1]),
        "ladder_fixed_tau": (float, verify.QS_N3_LADDER[0][0]),
        "out": (str, ""),
    },
    "params": {
        "D": (float, 1.0),
        "alpha": (float, 1.0),
        "c_p": (float, 1.0),
        "rho_p": (float, 0.0),
        "h": (float, 0.5),
    },
    "grid": {"M": (int, 4), "N": (int, 4), "N3": (int, 17)},
    "permeability": {
        "preset": (str, "constant"),
        "k0": (float, 1.0),
        "amplitude": (float, 0.5),
        "omega": (float, 1.0),
        "k_top": (float, 2.0),
        "k_bottom": (float, 0.5),
    },
    "sources": {
        "preset": (str, "none"),
        "amplitude": (float, 1.0),
        "sigma": (float, 1.0),
    },
    "initial": {
        "preset": (str, "smooth"),
        "kind": (str, "d0"),
        "convention": (str, "w1"),
        "amplitude": (float, 1.0),
    },
}

_BARE = {}
for _sec, _keys in SCHEMA.items():
    for _k in _keys:
        _BARE.setdefault(_k, []).append(_sec)


def resolve_key(key: str, section: Optional[str] = None) -> tuple:
    """Map a config key to ``(section, key)``; raises :class:`SchemaError`."""
    if "." in key:
        section, key = key.split(".", 1)
    if section is not None:
        if section not in SCHEMA:
            raise SchemaError("unknown section", section)
        if key not in SCHEMA[section]:
            raise SchemaError("unknown key", f"{section}.{key}")
        return section, key
    owners = _BARE.get(key)
    if not owners:
        raise SchemaError("unknown key", key)
    if len(owners) > 1:
        raise SchemaError(f"ambiguous key; write one of {', '.join(s + '.' + key for s in owners)}",
                          key)
    return owners[0], key


def parse_document(text: str) -> dict:
    """Parse into ``{(section, key): raw string}`` without type conversion."""
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]") or len(body) < 3:
                raise ParseError(f"malformed section header {body!r}", lineno)
            section = body[1:-1].strip()
            if section not in SCHEMA:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise ParseError(f"empty key or value in {body!r}", lineno)
        if key == "grid" and section in (None, "grid"):
            parts = value.replace(",", " ").split()
            if len(parts) != 3:
                raise ParseError("grid shorthand needs three integers: M N N3", lineno)
            for k, v in zip(("M", "N", "N3"), parts):
                raw[("grid", k)] = v
            continue
        try:
            sk = resolve_key(key, section)
        except SchemaError as exc:
            raise SchemaError(f"{exc.message} (line {lineno})", exc.key) from None
        if sk in raw:
            raise ParseError(f"duplicate key {sk[0]}.{sk[1]}", lineno)
        raw[sk] = value
    return raw


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: PhysicalParams
    grid: GridSpec
    T: float
    tau: float
    permeability: str
    permeability_args: tuple
    source: str
    source_args: tuple
    initial: str
    initial_args: tuple
    out: str
    tol: float
    seed: int
    scheme: str
    path: str
    snapshot_every: int
    suites: tuple
    study: str
    ladder_tau: tuple
    ladder_N3: tuple
    ladder_fixed_N3: int
    ladder_fixed_tau: float
    values: dict = field(default_factory=dict, compare=False, repr=False)

    def echo(self) -> str:
        """Effective config as a document that parses back to an equal config."""
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                text = _render(self.values[(section, key)])
                # empty values cannot be written back; their default is empty too
                lines.append(f"{key} = {text}" if text else f"# {key} =")
            lines.append("")
        return "\n".join(lines)

    def permeability_model(self):
        return make_permeability(self.permeability, **dict(self.permeability_args))


def _render(v):
    if isinstance(v, (list, tuple)):
        return " ".join(_render(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PERM_ARGS = {
    "constant": ("k0",),
    "sin-in-time": ("k0", "amplitude", "omega"),
    "layered-x3": ("k_top", "k_bottom"),
}


def build_config(raw: dict) -> RunConfig:
    """Type-convert, apply defaults and validate before anything is allocated."""
    values = {}
    for section, keys in SCHEMA.items():
        for key, (conv, default) in keys.items():
            name = f"{section}.{key}"
            if (section, key) in raw:
                try:
                    values[(section, key)] = conv(raw[(section, key)])
                except ValueError as exc:
                    raise SchemaError(f"invalid value {raw[(section, key)]!r}: {exc}", name) from None
            elif default is REQUIRED:
                raise SchemaError("required key missing", name)
            else:
                values[(section, key)] = default
    v = lambda s, k: values[(s, k)]  # noqa: E731

    mode = v("run", "mode")
    if mode not in MODES:
        raise SchemaError(f"must be one of {', '.join(MODES)}", "run.mode")
    P = {k: v("params", k) for k in SCHEMA["params"]}
    for k in ("D", "alpha", "h"):
        if not P[k] > 0:
            raise SchemaError("must be positive", f"params.{k}")
    if P["c_p"] < 0 or P["rho_p"] < 0:
        raise SchemaError("must be nonnegative", "params.c_p" if P["c_p"] < 0 else "params.rho_p")
    if mode in ("quasistatic", "inertial", "convergence") and P["c_p"] == 0:
        raise SchemaError("incompressible case unsupported (c_p = 0)", "params.c_p")
    study = v("run", "study")
    if study not in ("quasistatic", "inertial"):
        raise SchemaError("must be quasistatic or inertial", "run.study")
    needs_rho = mode == "inertial" or (mode == "convergence" and study == "inertial")
    if needs_rho and not P["rho_p"] > 0:
        raise SchemaError("inertial runs need rho_p > 0", "params.rho_p")

    grid = GridSpec(v("grid", "M"), v("grid", "N"), v("grid", "N3"))
    if grid.M < 1 or grid.N < 1:
        raise SchemaError("M and N must be at least 1", "grid.M" if grid.M < 1 else "grid.N")
    if grid.N3 < 3:
        raise SchemaError("must be at least 3", "grid.N3")
    if grid.unknowns > MAX_UNKNOWNS:
        raise SchemaError(f"M*N*N3 = {grid.unknowns} exceeds {MAX_UNKNOWNS}", "grid.N3")

    T, tau = v("run", "T"), v("run", "tau")
    if not T > 0:
        raise SchemaError("must be positive", "run.T")
    if not tau > 0:
        raise SchemaError("must be positive", "run.tau")
    if mode in ("quasistatic", "inertial"):
        n = round(T / tau)
        if n < 1 or abs(n * tau - T) > 1e-9 * T:
            raise SchemaError("T must be an integer multiple of tau", "run.tau")
    if v("run", "tol") <= 0:
        raise SchemaError("must be positive", "run.tol")
    if v("run", "scheme") not in inr.SCHEMES:
        raise SchemaError(f"must be one of {', '.join(inr.SCHEMES)}", "run.scheme")
    if v("run", "path") not in ("direct", "translated"):
        raise SchemaError("must be direct or translated", "run.path")
    if v("run", "snapshot_every") < 0:
        raise SchemaError("must be nonnegative", "run.snapshot_every")
    for s in v("run", "suites"):
        if s not in verify.SUITES:
            raise SchemaError(f"unknown suite {s!r}", "run.suites")
    if mode == "convergence":
        if len(v("run", "ladder_tau")) < 3 or len(v("run", "ladder_N3")) < 3:
            raise SchemaError("ladders need at least three rungs", "run.ladder_tau")

    perm = v("permeability", "preset")
    if perm not in PERMEABILITY_PRESETS:
        raise SchemaError(f"must be one of {', '.join(PERMEABILITY_PRESETS)}", "permeability.preset")
    perm_args = tuple((k, v("permeability", k)) for k in _PERM_ARGS[perm])
    try:
        make_permeability(perm, **dict(perm_args))
    except ValueError as exc:
        raise SchemaError(str(exc), "permeability.preset") from None

    src = v("sources", "preset")
    if src not in SOURCE_PRESETS:
        raise SchemaError(f"must be one of {', '.join(SOURCE_PRESETS)}", "sources.preset")
    init = v("initial", "preset")
    if init not in INITIAL_PRESETS:
        raise SchemaError(f"must be one of {', '.join(INITIAL_PRESETS)}", "initial.preset")
    if (src == "manufactured") != (init == "manufactured"):
        raise SchemaError("manufactured sources and initial data go together", "sources.preset")
    if src == "manufactured" and perm not in ("constant", "sin-in-time"):
        raise SchemaError("manufactured solutions need a spatially uniform permeability",
                          "permeability.preset")
    if v("initial", "kind") not in ("d0", "p0"):
        raise SchemaError("must be d0 or p0", "initial.kind")
    if v("initial", "convention") not in ("w1", "w0"):
        raise SchemaError("must be w1 or w0", "initial.convention")

    return RunConfig(
        mode=mode, params=PhysicalParams(**P), grid=grid, T=T, tau=tau,
        permeability=perm, permeability_args=perm_args,
        source=src, source_args=(("amplitude", v("sources", "amplitude")),
                                 ("sigma", v("sources", "sigma"))),
        initial=init, initial_args=(("kind", v("initial", "kind")),
                                    ("convention", v("initial", "convention")),
                                    ("amplitude", v("initial", "amplitude"))),
        out=v("run", "out"), tol=v("run", "tol"), seed=v("run", "seed"),
        scheme=v("run", "scheme"), path=v("run", "path"),
        snapshot_every=v("run", "snapshot_every"), suites=tuple(v("run", "suites")),
        study=study, ladder_tau=tuple(v("run", "ladder_tau")),
        ladder_N3=tuple(v("run", "ladder_N3")), ladder_fixed_N3=v("run", "ladder_fixed_N3"),
        ladder_fixed_tau=v("run", "ladder_fixed_tau"), values=values,
    )


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse a config document, apply ``key=value`` overrides, validate."""
    raw = parse_document(text)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key == "grid":
            raw.update(parse_document(f"grid = {value}"))
            continue
        raw[resolve_key(key)] = value
    return build_config(raw)


# Problem setup from presets.

def _manufactured(cfg: RunConfig, ctx: OperatorContext):
    args = dict(cfg.source_args)
    perm = ctx.permeability
    try:
        if cfg.mode == "inertial":
            return verify.make_manufactured_inertial(cfg.params, (1, 1), args["sigma"], perm,
                                                     w_amp=0.01 * args["amplitude"])
        return verify.make_manufactured_qs(cfg.params, (1, 1), args["sigma"], perm,
                                           f_amp=args["amplitude"])
    except UnsupportedPermeability as exc:
        raise SchemaError(str(exc), "permeability.preset") from None


def build_sources(cfg: RunConfig, ctx: OperatorContext) -> SourceTerms:
    args = dict(cfg.source_args)
    amp, sig = args["amplitude"], args["sigma"]
    if cfg.source == "none":
        return SourceTerms()
    if cfg.source == "decaying-mode":
        def f(t):
            out = np.zeros(ctx.basis.shape)
            out[0, 0] = amp * np.exp(-sig * t)
            return out
        return SourceTerms(f=f)
    if cfg.source == "smooth":
        base, _ = verify.stability_data(ctx)
        return SourceTerms(f=lambda t: amp * base.f(t), g=lambda t: amp * base.g(t))
    return _manufactured(cfg, ctx).sources(ctx)


def build_initial(cfg: RunConfig, ctx: OperatorContext) -> InitialData:
    args = dict(cfg.initial_args)
    amp = args["amplitude"]
    rng = np.random.default_rng(cfg.seed)
    plate = ctx.basis.shape
    if cfg.initial == "manufactured":
        return _manufactured(cfg, ctx).initial(ctx, args["kind"])
    if cfg.initial == "zero":
        field0 = np.zeros(ctx.shape)
        w0 = np.zeros(plate)
    elif cfg.initial == "smooth":
        _, field0 = verify.stability_data(ctx)
        field0 = amp * field0
        w0 = np.zeros(plate)
        w0[0, 0] = 0.01 * amp
    else:
        field0 = amp * random_field(rng, ctx.shape, smooth=ctx.basis)
        w0 = 0.01 * amp * random_field(rng, plate, smooth=ctx.basis)
    if cfg.mode == "inertial":
        return InitialData("inertial", d0=field0, w0=w0, w1=np.zeros(plate))
    if args["kind"] == "p0":
        return InitialData("p0", p0=field0)
    return InitialData("d0", d0=field0)


def _snapshot_due(cfg, n, n_last):
    every = cfg.snapshot_every
    return n == 0 or n == n_last or (every > 0 and n % every == 0)


def run_quasistatic(cfg: RunConfig, outdir: Path) -> int:
    ctx = make_context(cfg.params, cfg.grid.M, cfg.grid.N, cfg.grid.N3, cfg.permeability_model())
    src = build_sources(cfg, ctx)
    init = build_initial(cfg, ctx)
    manifest = Manifest(outdir)
    n_last = int(round(cfg.T / cfg.tau))
    rows = []
    counter = iter(range(n_last + 1))

    def on_step(st):
        n = next(counter)
        rows.append((st.t, st.energy, np.sqrt(inner(ctx, st.p, st.p)),
                     pressure_v_norm(ctx.grid, st.p), plate_w_norm(ctx.basis, st.w),
                     st.cg_iterations))
        if _snapshot_due(cfg, n, n_last):
            manifest.snapshot(f"p_{n:06d}.bin", "pressure", st.t, st.p)
            manifest.snapshot(f"w_{n:06d}.bin", "plate", st.t, st.w)

    run = qs.run(ctx, init, src, cfg.T, cfg.tau, path=cfg.path, tol=cfg.tol, on_step=on_step)
    write_csv(outdir / "timeseries.csv",
              ["t", "energy", "p_l2", "p_v", "w_W", "cg_iterations"], rows)
    last = run.states[-1]
    write_slices(outdir, ctx.basis, ctx.grid, last.t, last.p, last.w)
    stab = qs.stability_report(ctx, run, src, run.states[0].zeta)
    write_csv(outdir / "stability.csv", list(stab), [list(stab.values())])
    manifest.write()
    log.info("quasi-static run finished: %d steps, final energy %.6e", n_last, last.energy)
    return EX_OK


def run_inertial_mode(cfg: RunConfig, outdir: Path) -> int:
    ctx = make_context(cfg.params, cfg.grid.M, cfg.grid.N, cfg.grid.N3, cfg.permeability_model())
    src = build_sources(cfg, ctx)
    init = build_initial(cfg, ctx)
    y0 = inr.initial_state(ctx, init, dict(cfg.initial_args)["convention"])
    manifest = Manifest(outdir)
    n_last = int(round(cfg.T / cfg.tau))
    counter = iter(range(n_last + 1))

    def on_step(y):
        n = next(counter)
        if _snapshot_due(cfg, n, n_last):
            manifest.snapshot(f"w_{n:06d}.bin", "plate", y.t, y.w)
            manifest.snapshot(f"v_{n:06d}.bin", "velocity", y.t, y.v)
            manifest.snapshot(f"p_{n:06d}.bin", "pressure", y.t, y.p)

    run = inr.run_inertial(ctx, y0, src, cfg.T, cfg.tau, scheme=cfg.scheme, tol=cfg.tol,
                           on_step=on_step)
    rows = [(s.t, e, d, b, np.sqrt(inner(ctx, s.p, s.p)), plate_w_norm(ctx.basis, s.w))
            for s, e, d, b in zip(run.states, run.energy, run.dissipation, run.balance_defect)]
    write_csv(outdir / "timeseries.csv",
              ["t", "x_norm", "dissipation_integral", "balance_defect", "p_l2", "w_W"], rows)
    last = run.states[-1]
    write_slices(outdir, ctx.basis, ctx.grid, last.t, last.p, last.w)
    bc = inr.boundary_condition_check(ctx, last)
    write_csv(outdir / "boundary.csv", list(bc), [list(bc.values())])
    manifest.write()
    return EX_OK


def _emit_checks(checks, outdir: Path, quiet: bool, name="summary.txt") -> int:
    lines = [c.line for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"SUMMARY {len(checks) - n_fail} passed, {n_fail} failed")
    (outdir / name).write_text("\n".join(lines) + "\n")
    write_csv(outdir / "checks.csv", ["suite", "name", "passed", "value", "bound"],
              [(c.suite, c.name, int(c.passed), c.value, c.bound) for c in checks])
    if not quiet:
        print("\n".join(lines))
    return EX_CHECK if n_fail else EX_OK


def run_verify(cfg: RunConfig, outdir: Path, quiet: bool) -> int:
    return _emit_checks(verify.run_suites(cfg.suites), outdir, quiet)


def run_convergence(cfg: RunConfig, outdir: Path, quiet: bool) -> int:
    perm = cfg.permeability_model()
    sigma = dict(cfg.source_args)["sigma"]
    try:
        if cfg.study == "inertial":
            case = verify.make_manufactured_inertial(cfg.params, (1, 1), sigma, perm)
        else:
            case = verify.make_manufactured_qs(cfg.params, (1, 1), sigma, perm)
    except UnsupportedPermeability as exc:
        raise SchemaError(str(exc), "permeability.preset") from None
    tt = verify.convergence_study(case, [(t, cfg.ladder_fixed_N3) for t in cfg.ladder_tau], cfg.T)
    tn = verify.convergence_study(case, [(cfg.ladder_fixed_tau, n) for n in cfg.ladder_N3], cfg.T)
    (outdir / "convergence_tau.csv").write_text(tt.to_csv())
    (outdir / "convergence_N3.csv").write_text(tn.to_csv())
    s = "convergence"
    checks = [
        verify.SuiteCheck(s, "tau_order_p", abs(tt.order_p - 1) <= 0.2, tt.order_p, 1.0),
        verify.SuiteCheck(s, "tau_order_w", abs(tt.order_w - 1) <= 0.2, tt.order_w, 1.0),
        verify.SuiteCheck(s, "N3_order_p", abs(tn.order_p - 2) <= 0.2, tn.order_p, 2.0),
        verify.SuiteCheck(s, "N3_order_w", abs(tn.order_w - 2) <= 0.2, tn.order_w, 2.0),
    ]
    return _emit_checks(checks, outdir, quiet)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poroplate",
                description="Poro-elastic plate simulator and verification suite.")
    p.add_argument("--config", required=True, help="path to the run configuration")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value; repeatable")
    p.add_argument("--quiet", action="store_true", help="suppress progress and CHECK output")
    return p


def run_cli(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.override)
    except OSError as exc:
        print(f"poroplate: cannot read config: {exc}", file=sys.stderr)
        return EX_CONFIG
    except (ParseError, SchemaError) as exc:
        print(f"poroplate: config error: {exc}", file=sys.stderr)
        return EX_CONFIG

    outdir = Path(args.out or cfg.out or "poroplate_out")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo").write_text(cfg.echo(), encoding="utf-8")
    try:
        if cfg.mode == "quasistatic":
            return run_quasistatic(cfg, outdir)
        if cfg.mode == "inertial":
            return run_inertial_mode(cfg, outdir)
        if cfg.mode == "verify":
            return run_verify(cfg, outdir, args.quiet)
        return run_convergence(cfg, outdir, args.quiet)
    except SchemaError as exc:
        print(f"poroplate: config error: {exc}", file=sys.stderr)
        return EX_CONFIG
    except PoroPlateError as exc:
        print(f"poroplate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_SOLVER


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
