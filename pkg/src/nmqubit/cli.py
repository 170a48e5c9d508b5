"""Command-line front end: figure data as CSV, solver runs and the acceptance suite.

Settings are resolved as command-line flags > ``--config`` file (plain
``key=value`` lines) > defaults. The seed additionally falls back to the
``NMQ_SEED`` environment variable before its default. Exit codes: 0 success,
1 validation or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import dephasing, gaussian_noise, hybrid, measures, random_unitary, validation
from .errors import InvalidArgumentError
from .linops import pauli

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    gamma: float = 1.0
    horizon: float | None = None    # per-command default, see COMMAND_DEFAULTS
    points: int = 1000
    n: str | None = None
    r: float = 0.5
    ntraj: int = 10000
    seed: int = 42
    diffusion: float = 1.0
    out: str | None = None
    family: str = "dephasing"
    events: str | None = None

    def n_list(self) -> list[int]:
        try:
            ns = [int(s) for s in str(self.n).split(",") if s.strip()]
        except ValueError:
            raise UsageError(f"--n must be a comma-separated list of integers, got {self.n!r}")
        if not ns or any(k < 2 or k % 2 for k in ns):
            raise UsageError(f"collision numbers must be even integers >= 2, got {self.n!r}")
        return ns

    def apply_command_defaults(self):
        for key, value in COMMAND_DEFAULTS.get(self.command, {}).items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.horizon is None:
            self.horizon = 10.0
        if self.n is None:
            self.n = "2"

    def validate(self):
        if not self.gamma > 0:
            raise UsageError("--gamma must be positive")
        if not self.horizon > 0:
            raise UsageError("--horizon must be positive")
        if self.points < 2:
            raise UsageError("--points must be at least 2")
        if self.ntraj < 1:
            raise UsageError("--ntraj must be at least 1")
        if not self.diffusion > 0:
            raise UsageError("--diffusion must be positive")
        if not 0 <= self.r <= 1:
            raise UsageError("--r must lie in [0, 1]")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon / self.gamma, self.points)


COMMAND_DEFAULTS = {
    "fig4": {"n": "2,10,20"},
    # the measures need the long-time tail, where Gamma has returned to zero
    "measure": {"horizon": 40.0},
}

_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "float | None": float, "int": int, "str": str, "str | None": str}


def read_config_file(path: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _TYPES or key == "command":
            raise UsageError(f"{path}:{lineno}: expected a known key=value, got {line!r}")
        try:
            out[key] = _CASTS[_TYPES[key]](value.strip())
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value.strip()!r}")
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values = {"command": getattr(args, "command", "")}
    if environ.get("NMQ_SEED"):
        try:
            values["seed"] = int(environ["NMQ_SEED"])
        except ValueError:
            raise UsageError(f"NMQ_SEED must be an integer, got {environ['NMQ_SEED']!r}")
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for name in _TYPES:
        if name == "command":
            continue
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    cfg.apply_command_defaults()
    cfg.validate()
    return cfg


# -- output -----------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str):
    """Write to a temporary file in the target directory, then rename over the target."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(cfg: RunConfig, text: str, path: str | None = None):
    path = cfg.out if path is None else path
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _sibling(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}"))


# -- commands ---------------------------------------------------------------

def cmd_fig1(cfg: RunConfig) -> int:
    ts = cfg.times()
    g = dephasing.rate_gamma(ts, cfg.gamma)
    big = dephasing.big_gamma(ts, cfg.gamma)
    emit(cfg, render_csv(["t", "gamma_t", "Gamma_t"], zip(ts, g, big)))
    return EXIT_OK


def cmd_fig2(cfg: RunConfig) -> int:
    ts = cfg.times()
    rates = random_unitary.example_rates(ts, cfg.gamma)
    emit(cfg, render_csv(["t", "gamma1", "gamma2", "gamma3"], zip(ts, *rates)))
    return EXIT_OK


def cmd_fig4(cfg: RunConfig) -> int:
    ns = cfg.n_list()
    ts = cfg.times()
    cols = [dephasing.coherence_cn(ts, n, cfg.gamma) for n in ns]
    emit(cfg, render_csv(["t"] + [f"c_{n}" for n in ns], zip(ts, *cols)))
    return EXIT_OK


def _family(cfg: RunConfig) -> measures.PropagatorFamily:
    if cfg.family not in measures.FAMILIES or cfg.family == "identity":
        raise UsageError(f"unknown family {cfg.family!r}; choose dephasing, random-unitary, mixture or markov-x")
    return measures.FAMILIES[cfg.family](cfg.gamma, cfg.r)


def cmd_measure(cfg: RunConfig) -> int:
    fam = _family(cfg)
    horizon = cfg.horizon / cfg.gamma
    report = measures.measure_Mk(fam, 1, [pauli(1), pauli(2), pauli(3)], horizon=horizon)
    # past ~10/gamma the Markovian maps are too close to singular to invert
    nmd = measures.nmd_classify(fam, horizon=min(cfg.horizon, 10.0) / cfg.gamma)
    print(f"family: {fam.name}")
    print(f"M1: {report.M:.10f}")
    for w, label in zip(report.witnesses, ("sigma_x", "sigma_y", "sigma_z")):
        print(f"  {label}: N+ = {w.n_plus:.10g}, N- = {w.n_minus:.10g}")
    verdict = "CP-divisible" if nmd.cp_scan.passed else (
        "not CP-divisible" if nmd.cp_scan.violated else "inconclusive")
    print(f"divisibility: {verdict} (min Choi eigenvalue of V_ts {nmd.cp_scan.min_value:.3e})")
    print(f"NMD: {'indeterminate' if nmd.degree is None else nmd.degree} ({nmd.diagnostics})")
    if cfg.out:
        ts = cfg.times()
        rows = [(t, *(measures.lambda_k(fam, x, t) for x in (pauli(1), pauli(2), pauli(3)))) for t in ts]
        emit(cfg, render_csv(["t", "lambda1_sx", "lambda1_sy", "lambda1_sz"], rows))
    return EXIT_OK


def cmd_trajectories(cfg: RunConfig) -> int:
    ns = cfg.n_list()
    if len(ns) != 1:
        raise UsageError("trajectories takes a single --n")
    n = ns[0]
    ts = cfg.times()
    model = hybrid.dephasing_chain_model(cfg.gamma, n)
    ens = hybrid.simulate_trajectories(model, validation.PLUS, ts, cfg.ntraj, cfg.seed,
                                       keep_records=cfg.events is not None)
    coh, se = ens.coherence(0, 1)
    exact = dephasing.coherence_cn(ts, n, cfg.gamma)
    emit(cfg, render_csv(["t", "coh_mc", "stderr", "coh_exact"], zip(ts, 2 * coh.real, 2 * se.real, exact)))
    if cfg.events:
        rows = [(rec.stream_id, len(rec.jump_times), " ".join(_fmt(t) for t in rec.jump_times))
                for rec in ens.records]
        write_atomic(cfg.events, render_csv(["trajectory", "n_jumps", "jump_times"], rows))
    return EXIT_OK


def cmd_ou(cfg: RunConfig) -> int:
    ou = gaussian_noise.OUParams(cfg.gamma, cfg.diffusion)
    ts = cfg.times()
    ens = gaussian_noise.ensemble_average(gaussian_noise.pure_dephasing_model(ou), validation.PLUS, ts,
                                          cfg.ntraj, cfg.seed)
    coh, se = ens.coherence(0, 1)
    oracle = gaussian_noise.gaussian_dephasing_coherence(ts, ou)
    emit(cfg, render_csv(["t", "coh_mc", "stderr", "coh_cumulant_oracle"],
                         zip(ts, 2 * coh.real, 2 * se.real, oracle)))
    dt = ts[1] - ts[0]
    lags = dt * np.unique(np.rint(np.linspace(0, 3.0 / cfg.gamma, 13) / dt))
    est, est_se = gaussian_noise.ou_lag_correlations(ou, dt, lags, cfg.ntraj, cfg.seed + 1)
    table = render_csv(["lag", "corr_mc", "stderr", "corr_exact"], zip(lags, est, est_se, ou.correlation(lags)))
    if cfg.out:
        write_atomic(_sibling(cfg.out, "correlation"), table)
    else:
        sys.stdout.write("\n" + table)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, scale: float = 1.0, only=None) -> int:
    results = validation.run_all(scale=scale, seed=cfg.seed, only=only, echo=lambda s: print(s, flush=True))
    n_pass = sum(r.passed for r in results)
    print(f"summary: {n_pass}/{len(results)} criteria passed, total runtime "
          f"{sum(r.runtime for r in results):.1f}s")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


COMMANDS = {
    "fig1": cmd_fig1, "fig2": cmd_fig2, "fig4": cmd_fig4, "measure": cmd_measure,
    "trajectories": cmd_trajectories, "ou": cmd_ou, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gamma", type=float, help="collision / relaxation rate (default 1)")
    common.add_argument("--horizon", type=float, help="final time in units of 1/gamma (default 10; 40 for measure)")
    common.add_argument("--points", type=int, help="number of output time points (default 1000)")
    common.add_argument("--n", type=str, help="even collision number(s), comma separated (default 2; 2,10,20 for fig4)")
    common.add_argument("--r", type=float, help="mixture weight in [0, 1] (default 0.5)")
    common.add_argument("--ntraj", type=int, help="trajectories or noise paths (default 10000)")
    common.add_argument("--seed", type=int, help="master seed (default: NMQ_SEED, then 42)")
    common.add_argument("--diffusion", type=float, help="OU diffusion constant D (default 1)")
    common.add_argument("--out", type=str, help="output CSV path (default: stdout)")
    common.add_argument("--family", type=str, help="dephasing | random-unitary | mixture | markov-x")
    common.add_argument("--config", type=str, help="key=value settings file")

    parser = argparse.ArgumentParser(prog="nmqubit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common], help="dephasing rate gamma(t) and Gamma(t)")
    sub.add_parser("fig2", parents=[common], help="random-unitary rates gamma_1..3(t)")
    sub.add_parser("fig4", parents=[common], help="coherence c_n(t) for the n-collision chains")
    sub.add_parser("measure", parents=[common], help="M1, divisibility and NMD of a family")
    p = sub.add_parser("trajectories", parents=[common], help="Monte Carlo collision trajectories")
    p.add_argument("--events", type=str, help="optional per-trajectory jump log CSV")
    sub.add_parser("ou", parents=[common], help="Ornstein-Uhlenbeck dephasing ensemble")
    p = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    p.add_argument("--criteria", type=str, help="comma-separated subset of criterion numbers")
    p.add_argument("--corrupt-tolerances", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.command == "validate":
            only = None
            if args.criteria:
                try:
                    only = {int(s) for s in args.criteria.split(",")}
                except ValueError:
                    raise UsageError("--criteria must list integers")
                if not only <= set(validation.CRITERIA):
                    raise UsageError("criteria are numbered 1..11")
            return cmd_validate(cfg, scale=0.0 if args.corrupt_tolerances else 1.0, only=only)
        return COMMANDS[args.command](cfg)
    except (UsageError, InvalidArgumentError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
