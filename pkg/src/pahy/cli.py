"""Command-line interface.

Subcommands: ``estimate``, ``simulate``, ``mc``, ``calibrate`` and
``kernel-constants``.  Exit codes: 0 success, 2 usage, 3 invalid data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .exceptions import NumericalError, ValidationError

logger = logging.getLogger("pahy")

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """All tunable settings of a run; every field has a default."""

    theta: float = 0.15
    kernel: str = "triangle"
    kn_rule: str = "ceil"
    k_n: int | None = None
    variance: str = "subsample"
    varpi: float = 1.0
    eta: float = 7.0 / 12.0
    u_points: int = 101
    l_n: float | None = None
    ci: float | None = None
    joint: bool = False
    normalize_time: bool = False
    joint_tolerance: float = 0.0
    scenario: int = 2
    scheme: str | None = None
    N: int = 23400
    gamma: float = 0.5
    ma_coef: float = 0.0
    noise_convention: str = "increment"
    reps: int = 500
    seed: int | None = None
    threads: int = 1
    rho: float = 1.0
    calibration: str | None = None
    no_calibration: bool = False
    input: str | None = None
    out: str | None = None

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        return cls.from_dict(data)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _emit(payload, out):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _scheme(cfg):
    from .sim import SCENARIOS

    if cfg.scheme is None:
        if cfg.scenario not in SCENARIOS:
            raise UsageError(f"scenario must be one of {sorted(SCENARIOS)}, got {cfg.scenario}")
        return SCENARIOS[cfg.scenario](cfg.N)
    template = {"subset": 1, "shifted": 2, "poisson": 3}.get(cfg.scheme)
    if template is None:
        raise UsageError(f"unknown scheme {cfg.scheme!r}")
    return SCENARIOS[template](cfg.N)


def _need_seed(cfg):
    if cfg.seed is None:
        raise UsageError("--seed is required for this command")


def cmd_kernel_constants(cfg):
    from .kernel import kernel_summary

    return kernel_summary(cfg.kernel)


def cmd_estimate(cfg):
    from .estimator import PreAveragedHY
    from .grids import read_ticks_csv
    from .sim import CalibrationTable

    if not cfg.input:
        raise UsageError("estimate needs --input")
    panel = read_ticks_csv(cfg.input, normalize_time=cfg.normalize_time)
    calib = CalibrationTable.load(cfg.calibration).factors if cfg.calibration else None
    model = PreAveragedHY(cfg.theta, cfg.kernel, cfg.kn_rule, cfg.k_n, calib, cfg.joint_tolerance).fit(panel)
    out = {"assets": list(panel.names), "estimate": model.estimate_.to_dict()}
    if cfg.ci is not None:
        kwargs = {}
        if cfg.variance == "subsample":
            kwargs = {"varpi": cfg.varpi, "eta": cfg.eta}
        elif cfg.variance == "plugin":
            kwargs = {"u_points": cfg.u_points, "l_n": cfg.l_n}
        V = model.variance(cfg.variance, **kwargs)
        from .inference import confidence_region

        out["variance"] = V.to_dict()
        out["confidence_region"] = confidence_region(model.estimate_, V, model.n_, cfg.ci, cfg.joint).to_dict()
    return out


def cmd_simulate(cfg):
    from .grids import write_ticks_csv
    from .sim import SvModelParams, simulate_panel

    _need_seed(cfg)
    if not cfg.out:
        raise UsageError("simulate needs --out DIR")
    scheme = _scheme(cfg)
    params = SvModelParams(N=cfg.N, gamma=cfg.gamma)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reps = []
    for rep in range(cfg.reps):
        panel, paths = simulate_panel(params, scheme, cfg.seed, rep, cfg.ma_coef, cfg.noise_convention)
        name = f"rep_{rep:05d}.csv"
        write_ticks_csv(panel, outdir / name)
        reps.append({"rep": rep, "file": name, "integrated_covariance": paths.integrated.tolist()})
    manifest = {
        "scheme": scheme.to_dict(),
        "params": params.to_dict(),
        "seed": cfg.seed,
        "ma_coef": cfg.ma_coef,
        "noise_convention": cfg.noise_convention,
        "replications": reps,
    }
    _emit(manifest, outdir / "manifest.json")
    return None


def cmd_calibrate(cfg):
    from .sim import calibrate

    _need_seed(cfg)
    table = calibrate(_scheme(cfg), cfg.theta, cfg.kernel, cfg.kn_rule, cfg.reps, cfg.rho, cfg.seed)
    return table.to_dict()


def cmd_mc(cfg):
    from .mc import Tuning, run_mc
    from .sim import CalibrationTable, SvModelParams

    _need_seed(cfg)
    if cfg.calibration:
        calib = CalibrationTable.load(cfg.calibration)
    elif cfg.no_calibration:
        calib = False
    else:
        raise UsageError("mc needs --calibration FILE or --no-calibration")
    scheme = _scheme(cfg)
    tuning = Tuning(cfg.theta, cfg.kernel, cfg.kn_rule, cfg.varpi, cfg.eta)
    report = run_mc(
        scheme,
        SvModelParams(N=cfg.N, gamma=cfg.gamma),
        tuning,
        cfg.reps,
        cfg.seed,
        calib,
        cfg.threads,
        cfg.ma_coef,
        cfg.noise_convention,
    )
    logger.info("mc finished in %.1f s", report.runtime)
    return report.to_dict(include_runtime=False)


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "calibrate": cmd_calibrate,
    "kernel-constants": cmd_kernel_constants,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bandwidth(text):
    if text == "auto":
        return "auto"
    return float(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--out", help="output path (directory for simulate)")
    common.add_argument("--kernel")
    common.add_argument("--theta", type=float)
    common.add_argument("--kn-rule", dest="kn_rule", choices=["ceil", "round"])
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    sim_opts = argparse.ArgumentParser(add_help=False)
    sim_opts.add_argument("--scenario", type=int, choices=[1, 2, 3])
    sim_opts.add_argument("--scheme", choices=["subset", "shifted", "poisson"])
    sim_opts.add_argument("--N", type=int)
    sim_opts.add_argument("--reps", type=int)
    sim_opts.add_argument("--seed", type=int)
    sim_opts.add_argument("--gamma", type=float)
    sim_opts.add_argument("--ma-coef", dest="ma_coef", type=float)
    sim_opts.add_argument("--noise-convention", dest="noise_convention", choices=["increment", "level"])
    sim_opts.add_argument("--threads", type=int)

    parser = _Parser(prog="pahy", description="Pre-averaged Hayashi-Yoshida covariance estimation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", parents=[common], help="estimate the covariance of a tick CSV")
    p.add_argument("--input")
    p.add_argument("--k-n", dest="k_n", type=int)
    p.add_argument("--ci", type=float, help="confidence level, adds intervals")
    p.add_argument("--variance", choices=["subsample", "plugin", "univariate"])
    p.add_argument("--varpi", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--u-points", dest="u_points", type=int)
    p.add_argument("--ln", dest="l_n", type=_bandwidth, help="spot bandwidth, 'auto' for n**(-1/3)")
    p.add_argument("--joint", action="store_true", default=None)
    p.add_argument("--normalize-time", dest="normalize_time", action="store_true", default=None)
    p.add_argument("--joint-tolerance", dest="joint_tolerance", type=float)
    p.add_argument("--calibration")

    sub.add_parser("simulate", parents=[common, sim_opts], help="write simulated tick CSVs")

    p = sub.add_parser("calibrate", parents=[common, sim_opts], help="Brownian calibration factors")
    p.add_argument("--rho", type=float)

    p = sub.add_parser("mc", parents=[common, sim_opts], help="Monte Carlo study")
    p.add_argument("--calibration")
    p.add_argument("--no-calibration", dest="no_calibration", action="store_true", default=None)
    p.add_argument("--varpi", type=float)
    p.add_argument("--eta", type=float)

    sub.add_parser("kernel-constants", parents=[common], help="print kernel constants")
    return parser


def resolve_config(args):
    """Config file values overridden by any flag given on the command line."""
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose") and v is not None
    }
    merged = cfg.to_dict()
    merged.update(overrides)
    if merged.get("l_n") == "auto":
        merged["l_n"] = None
    return RunConfig.from_dict(merged)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        cfg = resolve_config(args)
        if cfg.threads < 1:
            raise UsageError("--threads must be at least 1")
        result = COMMANDS[args.command](cfg)
        if result is not None:
            _emit(result, cfg.out)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
