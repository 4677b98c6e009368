"""Command-line front end: ``run``, ``bounds``, ``oracle`` and ``table``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import channels, fixtures
from .core import ObjectiveSequence, ParamDomain, SequenceConstants
from .markov import (
    HiddenMarkovSource,
    MarkovChain,
    conditional_entropy_bruteforce,
    conditional_entropy_forward,
)
from .optimizer import (
    Algo1Config,
    Algo3Config,
    BacktrackExhausted,
    ConfigError,
    Trace,
    certified_bound,
    run_algorithm1,
    run_algorithm3,
    verify_lemma1,
    verify_lemma5,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3
CHANNELS = ("bec", "noiseless", "gilbert-elliott", "generic")
TRACE_HEADER = ["outer_k", "theta", "f_value", "grad_norm", "step_t", "backtracks", "perturbed", "floor_active"]

# per-channel defaults; any key can be overridden from the file or --override
CHANNEL_DEFAULTS: dict[str, dict[str, Any]] = {
    "bec": dict(algorithm=1, epsilon=0.1, domain=[0.2, 0.6], theta0=0.5, outer_iters=110, beta=0.9,
                N_poly=[371.0], rho=0.1, M=5.81, m=1.88, k0=18, reference_eta=0.767),
    "noiseless": dict(algorithm=1, domain=[0.4, 0.9], theta0=0.5, outer_iters=450, beta=0.9,
                      N_poly=[46587.2, 6207.73, 374.945], rho=0.875, M=10.37, m=1.2, k0=120,
                      reference_eta=0.901061),
    "gilbert-elliott": dict(algorithm=3, crossover=[0.01, 0.1], state_matrix=[[0.7, 0.3], [0.3, 0.7]],
                            domain=[0.05, 0.95], theta0=0.2, outer_iters=10, beta=0.5, b=0.5,
                            N_poly=[10.0], rho=0.1, M=11.0, k0=6, grid_points=201),
    "generic": dict(algorithm=3, input_family="rll", domain=[0.05, 0.95], theta0=0.2, outer_iters=3,
                    beta=0.5, b=0.5, rho=0.1, k0=6, grid_points=41),
}


@dataclass
class RunConfig:
    channel: str
    algorithm: int = 1
    # channel parameters
    epsilon: float = 0.1
    crossover: list = field(default_factory=lambda: [0.01, 0.1])
    state_matrix: list = field(default_factory=lambda: [[0.7, 0.3], [0.3, 0.7]])
    input_family: str = "rll"
    state_kernel: Optional[list] = None
    emission: Optional[list] = None
    domain: list = field(default_factory=lambda: [0.2, 0.6])
    # sequence constants
    N_poly: list = field(default_factory=lambda: [1.0])
    rho: float = 0.1
    M: float = 1.0
    m: Optional[float] = None
    k0: int = 0
    # algorithm parameters
    alpha: float = 0.4
    beta: float = 0.9
    b: float = 0.5
    y0: Optional[float] = None
    theta0: Any = 0.5
    outer_iters: int = 10
    max_backtracks: int = 200
    eval_tol: float = 1e-14
    # verification and bound
    grid_points: int = 4001
    enforce_verification: bool = True
    delta0: Optional[float] = None
    bound_mode: str = "literal"
    reference_eta: Optional[float] = None
    # outputs
    trace_csv: str = "trace.csv"
    report_json: str = "report.json"

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        if "channel" not in raw:
            raise ConfigError("channel: missing (one of " + ", ".join(CHANNELS) + ")")
        channel = raw["channel"]
        if channel not in CHANNELS:
            raise ConfigError(f"channel: unknown value {channel!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config key")
        merged = {**CHANNEL_DEFAULTS[channel], **raw}
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algorithm not in (1, 3):
            raise ConfigError("algorithm must be 1 or 3")
        if not 0 < self.alpha < 0.5:
            raise ConfigError("alpha must lie in (0,0.5)")
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0,1)")
        if self.algorithm == 3 and not 0 < self.b < 1:
            raise ConfigError("b must lie in (0,1)")
        if self.algorithm == 1 and self.m is None:
            raise ConfigError("m: algorithm 1 needs the strong-concavity modulus")
        if not (isinstance(self.domain, list) and len(self.domain) == 2):
            raise ConfigError("domain must be [lower, upper]")
        if self.bound_mode not in ("literal", "observed"):
            raise ConfigError("bound_mode must be 'literal' or 'observed'")
        if self.channel == "generic" and (self.state_kernel is None or self.emission is None):
            raise ConfigError("state_kernel: generic channel needs state_kernel and emission")
        if self.channel == "generic" and self.input_family not in ("rll", "iid"):
            raise ConfigError("input_family must be 'rll' or 'iid'")
        if not isinstance(self.outer_iters, int) or self.outer_iters < 1:
            raise ConfigError("outer_iters must be a positive integer")


def load_config(path: Optional[str], overrides: Sequence[str] = ()) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: {exc}") from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override: expected key=value, got {item!r}")
        raw[key.strip()] = _parse_value(value.strip())
    try:
        return RunConfig.from_mapping(raw)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from exc


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def build_objective(cfg: RunConfig) -> ObjectiveSequence:
    lo, hi = (float(x) for x in cfg.domain)
    N_poly = tuple(cfg.N_poly)
    if cfg.channel == "bec":
        seq = channels.bec_objective(channels.BecRllChannel(cfg.epsilon), domain=(lo, hi))
    elif cfg.channel == "noiseless":
        seq = channels.noiseless_objective(domain=(lo, hi))
    elif cfg.channel == "gilbert-elliott":
        ch = channels.GilbertElliott(MarkovChain(cfg.state_matrix), tuple(cfg.crossover))
        seq = channels.ge_objective(ch, domain=(lo, hi))
    else:
        seq = generic_objective(cfg)
    consts = SequenceConstants(N_poly, cfg.rho, cfg.M, cfg.m, cfg.k0)
    return dataclasses.replace(seq, constants=consts)


def generic_objective(cfg: RunConfig) -> ObjectiveSequence:
    if cfg.input_family == "rll":
        family = lambda th: channels.rll_input_matrix(channels.as_scalar(th))
    else:
        family = lambda th: np.array([[channels.as_scalar(th), 1 - channels.as_scalar(th)]] * 2)
    fsc = channels.GenericFsc(family, np.array(cfg.state_kernel), np.array(cfg.emission))
    return ObjectiveSequence(
        domain=ParamDomain.interval(*cfg.domain),
        constants=SequenceConstants(tuple(cfg.N_poly), cfg.rho, cfg.M, cfg.m, cfg.k0),
        eval=lambda k, th: channels.generic_fsc_fk(fsc, th, k),
        name="generic",
        proxy_k=channels.GENERIC_K_MAX,
        max_k=channels.GENERIC_K_MAX,
    )


# --------------------------------------------------------------------------
# output formats


def _num(x: float) -> str:
    return f"{x:.9g}"


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace:
        w.writerow([
            r.outer_k,
            ";".join(_num(x) for x in r.theta),
            _num(r.f_value),
            _num(r.grad_norm),
            _num(r.step_t),
            r.backtracks,
            int(r.perturbed),
            int(r.floor_active),
        ])
    return buf.getvalue()


def _plain(x: Any) -> Any:
    """Convert numpy scalars and tuples into JSON-native values."""
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def build_report(cfg: RunConfig, seq: ObjectiveSequence, trace: Optional[Trace], verification, bound) -> dict:
    c = seq.constants
    report: dict[str, Any] = {
        "channel": cfg.channel,
        "algorithm": cfg.algorithm,
        "constants": {"N_poly": list(c.N_poly), "rho": c.rho, "M": c.M, "m": c.m, "k0": c.k0},
        "final": None,
        "bound": None,
        "verification": {
            "passed": verification.passed,
            "delta": verification.delta_est,
            "y0": verification.y0,
            "dist": verification.dist_C_boundary,
            "failures": list(verification.failures),
        },
    }
    witness = getattr(verification, "witness", None)
    if witness is not None:
        report["verification"]["witness"] = list(witness)
    if trace is not None:
        report["stop_reason"] = trace.stop_reason
        if trace.records:
            r = trace.final
            report["final"] = {"theta": list(r.theta), "f": r.f_value, "grad_norm": r.grad_norm}
    if bound is not None:
        report["bound"] = {
            "eta": bound.eta,
            "recursion": bound.recursion_bound,
            "tail": bound.tail,
            "interval": list(bound.interval),
            "mode": bound.mode,
            "delta0": bound.delta0,
            "eta_observed": bound.eta_observed,
            "reference_eta": bound.reference_eta,
        }
    return _plain(report)


def emit_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


# --------------------------------------------------------------------------
# commands


def execute(cfg: RunConfig, out=sys.stdout) -> int:
    seq = build_objective(cfg)
    if cfg.algorithm == 1:
        verification = verify_lemma1(seq, cfg.grid_points)
    else:
        verification = verify_lemma5(seq, cfg.b, cfg.grid_points)
    print(f"verification passed={verification.passed} delta={verification.delta_est:.6g} "
          f"y0={verification.y0:.6g} dist={verification.dist_C_boundary:.6g}", file=out)
    for msg in verification.failures:
        print(f"  failed: {msg}", file=out)
    if not verification.passed and cfg.enforce_verification:
        Path(cfg.report_json).write_text(emit_report(build_report(cfg, seq, None, verification, None)))
        print("run refused (set enforce_verification = false to run anyway)", file=out)
        return EXIT_VERIFY

    theta0 = tuple(np.atleast_1d(cfg.theta0).astype(float))
    bound = None
    if cfg.algorithm == 1:
        acfg = Algo1Config(cfg.alpha, cfg.beta, theta0, cfg.outer_iters, cfg.max_backtracks, cfg.eval_tol)
        trace = run_algorithm1(seq, acfg)
        bound = certified_bound(
            trace, seq, verification.dist_C_boundary, cfg.delta0, cfg.alpha, cfg.beta,
            mode=cfg.bound_mode, eval_tol=cfg.eval_tol, reference_eta=cfg.reference_eta,
        )
    else:
        y0 = cfg.y0 if cfg.y0 is not None else (verification.y0 if verification.passed else None)
        acfg = Algo3Config(cfg.alpha, cfg.beta, theta0, cfg.outer_iters, cfg.max_backtracks, cfg.eval_tol,
                           b=cfg.b, y0=y0)
        trace = run_algorithm3(seq, acfg)

    Path(cfg.trace_csv).write_text(trace_csv(trace))
    Path(cfg.report_json).write_text(emit_report(build_report(cfg, seq, trace, verification, bound)))
    if trace.records:
        r = trace.final
        print(f"final k={r.outer_k} theta={';'.join(_num(x) for x in r.theta)} f={_num(r.f_value)} "
              f"({trace.stop_reason})", file=out)
    if bound is not None:
        lo, hi = bound.interval
        print(f"interval [{lo:.9g}, {hi:.9g}] eta={bound.eta:.6g} mode={bound.mode}", file=out)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.override or ())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BacktrackExhausted as exc:
        Path(cfg.trace_csv).write_text(trace_csv(exc.trace))
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def order_gain(channel: str, p: Optional[float] = None, q: Optional[float] = None,
               epsilon: float = 0.1, horizon: int = 5) -> dict:
    """Certified order-k interval next to the order-(k+1) Birch bound."""
    if channel == "bec":
        seq = channels.bec_objective(channels.BecRllChannel(epsilon))
        cfg = Algo1Config(theta0=0.5, outer_iters=110)
        p0, q0 = fixtures.BEC["birch_pq"]
        p, q = (p0 if p is None else p), (q0 if q is None else q)
        birch = channels.birch_bound_bec(p, q, epsilon, horizon)
        ref_eta = fixtures.BEC["eta"]
    elif channel == "noiseless":
        seq = channels.noiseless_objective()
        cfg = Algo1Config(theta0=0.5, outer_iters=450)
        p0, q0 = fixtures.NOISELESS["birch_pq"]
        p, q = (p0 if p is None else p), (q0 if q is None else q)
        birch = channels.birch_bound_noiseless(p, q)
        ref_eta = fixtures.NOISELESS["eta"]
    else:
        raise ValueError(f"no order-gain comparison for channel {channel!r}")
    trace = run_algorithm1(seq, cfg)
    lemma = verify_lemma1(seq)
    literal = certified_bound(trace, seq, lemma.dist_C_boundary, reference_eta=ref_eta, eval_tol=cfg.eval_tol)
    observed = certified_bound(trace, seq, lemma.dist_C_boundary, mode="observed", eval_tol=cfg.eval_tol)
    out = {
        "channel": channel,
        "p": p,
        "q": q,
        "f_final": trace.final.f_value,
        "interval_literal": literal.interval,
        "interval_observed": observed.interval,
        "eta": literal.eta,
        "eta_observed": observed.eta_observed,
        "birch": birch,
        "verification_passed": lemma.passed,
        "gain_vs_observed": birch > observed.interval[1],
        "gain_vs_literal": birch > literal.interval[1],
    }
    if channel == "noiseless":
        out["shannon_capacity"] = channels.shannon_capacity("101")
    return out


def cmd_bounds(args) -> int:
    res = order_gain(args.channel, args.p, args.q, args.epsilon, args.horizon)
    lo, hi = res["interval_observed"]
    llo, lhi = res["interval_literal"]
    print(f"channel           {res['channel']}")
    print(f"order-k interval  [{lo:.9g}, {hi:.9g}]  (observed steps, eta_max={res['eta_observed']:.6g})")
    print(f"                  [{llo:.9g}, {lhi:.9g}]  (worst-case eta={res['eta']:.6g})")
    print(f"Birch bound       {res['birch']:.9g}  at p={res['p']:.6g} q={res['q']:.6g}")
    if "shannon_capacity" in res:
        print(f"Shannon capacity  {res['shannon_capacity']:.9g}")
    if not res["verification_passed"]:
        print("note: starting-constant check failed for this channel; interval is conditional on it")
    if res["gain_vs_observed"]:
        print("order gain demonstrated")
    else:
        print("no order gain: Birch bound does not exceed the interval's upper end")
    return EXIT_OK


ORACLE_SOURCES = ("fair-coin", "deterministic", "ge-noise", "ge-output", "bec", "noiseless")


def oracle_source(name: str, theta: float = 0.4) -> HiddenMarkovSource:
    if name == "fair-coin":
        return HiddenMarkovSource(MarkovChain([[1.0]]), [[0.5, 0.5]])
    if name == "deterministic":
        return HiddenMarkovSource(MarkovChain([[1.0]]), [[1.0, 0.0]])
    if name == "ge-noise":
        return channels.GilbertElliott().noise_source()
    if name == "ge-output":
        return channels.GilbertElliott().output_source(theta)
    if name == "bec":
        return channels.bec_source(theta, 0.1)
    if name == "noiseless":
        return channels.noiseless_source(theta)
    raise ValueError(f"unknown source {name!r}")


def cmd_oracle(args) -> int:
    if args.n < 1 or args.n > 8:
        print("oracle: n must lie in 1..8 (brute force is exponential in n)", file=sys.stderr)
        return EXIT_CONFIG
    src = oracle_source(args.source, args.theta)
    fwd = conditional_entropy_forward(src, args.n)
    brute = conditional_entropy_bruteforce(src, args.n)
    print(f"source      {args.source}  n={args.n}")
    print(f"forward     {fwd:.17g}")
    print(f"bruteforce  {brute:.17g}")
    print(f"difference  {abs(fwd - brute):.3g}")
    return EXIT_OK


def cmd_table(args) -> int:
    columns, rows = fixtures.FIXTURES[args.fixture]
    w = csv.writer(sys.stdout, lineterminator="\n")
    if args.compute and args.fixture == "ge":
        trace = run_algorithm3(channels.ge_objective(), Algo3Config())
        k0 = channels.ge_objective().constants.k0
        w.writerow(list(columns) + ["theta_run", "f_run", "d_theta", "d_f"])
        ours = {r.outer_k + k0: r for r in trace}
        for row in rows:
            r = ours.get(row[0])
            if r is None:
                w.writerow(list(row) + ["", "", "", ""])
                continue
            w.writerow(list(row) + [_num(r.theta[0]), _num(r.f_value),
                                    f"{r.theta[0] - row[1]:.2e}", f"{r.f_value - row[3]:.2e}"])
        return EXIT_OK
    w.writerow(columns)
    for row in rows:
        w.writerow([json.dumps(v) if isinstance(v, tuple) else v for v in row])
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovcap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="verify constants, optimise, certify")
    p.add_argument("--config", help="flat TOML file")
    p.add_argument("--override", action="append", metavar="KEY=VALUE", help="repeatable; wins over the file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bounds", help="certified interval versus a higher-order Birch bound")
    p.add_argument("--channel", choices=("bec", "noiseless"), required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--horizon", type=int, default=5, help="BEC window end index (default 5)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("oracle", help="forward versus brute-force conditional entropy")
    p.add_argument("--source", choices=ORACLE_SOURCES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, default=0.4)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("table", help="print a regression table")
    p.add_argument("--fixture", choices=sorted(fixtures.FIXTURES), required=True)
    p.add_argument("--compute", action="store_true", help="rerun and print differences (ge only)")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
