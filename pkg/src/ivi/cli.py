"""Command-line front end.

Every run writes a CSV plus a ``<name>.manifest.json`` holding the fully
resolved configuration; passing the manifest back through ``--config``
replays the run and reproduces the CSV byte for byte.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, NumericalError
from .montecarlo import (
    PATH_COLUMNS,
    Calls,
    ExperimentConfig,
    LaplaceU,
    error_table,
    path_dump,
    write_csv,
)
from .params import ModelParams, table1_case

OUTPUT_ENV = "IVI_OUTPUT_DIR"
TOP_KEYS = ("model", "kernel", "scheme", "experiment", "rng")
EXPERIMENT_KEYS = ("steps", "paths", "w", "strikes", "hurst", "antithetic", "resolvent", "m")

# per-command defaults for the experiment block
DEFAULTS = {
    "simulate": {"steps": [100], "paths": 10, "scheme": "ivi"},
    "laplace-error": {"steps": [1, 7, 32, 100], "paths": 200_000, "w": -1.0, "scheme": "both"},
    "price": {"steps": [1, 7, 32, 100], "paths": 200_000, "strikes": None, "scheme": "both"},
    "smile": {"steps": [32], "paths": 200_000, "strikes": [0.8, 0.9, 1.0, 1.1, 1.2], "scheme": "ivi"},
    "char-check": {"steps": [1], "paths": 200_000, "w": -1.0, "scheme": "ivi"},
}


def _csv_floats(field):
    def parse(text):
        try:
            return [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(field, f"expected comma-separated numbers, got {text!r}") from None

    return parse


def _csv_ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError("experiment.steps", f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="ivi", description="iVi simulation of Volterra Heston models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("--case", type=int, help="preset parameter set 1-4")
        p.add_argument("--config", help="JSON config or a manifest from an earlier run")
        p.add_argument("--steps", type=str, help="comma-separated step counts")
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--w", type=str, help="Laplace argument (complex allowed for char-check)")
        p.add_argument("--strikes", type=str, help="comma-separated strikes")
        p.add_argument("--hurst", type=float, help="override the Hurst index of the preset")
        p.add_argument("--scheme", choices=("ivi", "explicit", "both"))
        p.add_argument("--resolvent", action="store_true", default=None, help="simulate the drift-free resolvent form")
        p.add_argument("--antithetic", action="store_true", default=None)
        p.add_argument("--m", type=int, help="Riccati grid size for references")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or .)")
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc.msg} at line {exc.lineno}") from None
    if isinstance(cfg, dict) and "config" in cfg and "tool_version" in cfg:
        cfg = cfg["config"]
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = set(cfg) - set(TOP_KEYS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    return cfg


def resolve_config(command, args):
    """Merge defaults, config file and flags into one plain-JSON config."""
    cfg = _load_config(args.config) if args.config else {}
    experiment = dict(DEFAULTS[command])
    scheme = experiment.pop("scheme")
    file_exp = cfg.get("experiment", {})
    if not isinstance(file_exp, dict):
        raise ConfigError("experiment", "must be an object")
    unknown = set(file_exp) - set(EXPERIMENT_KEYS)
    if unknown:
        raise ConfigError(f"experiment.{sorted(unknown)[0]}", "unknown field")
    experiment.update(file_exp)
    scheme = cfg.get("scheme", scheme)
    rng = cfg.get("rng", {})
    if not isinstance(rng, dict):
        raise ConfigError("rng", "must be an object")
    seed = rng.get("seed", 0)

    if args.case is not None:
        params = table1_case(args.case)
    elif "model" in cfg or "kernel" in cfg:
        params = ModelParams.from_config(cfg)
    else:
        raise ConfigError("model", "give --case or a config with model and kernel")

    if args.steps is not None:
        experiment["steps"] = _csv_ints(args.steps)
    if args.paths is not None:
        experiment["paths"] = args.paths
    if args.seed is not None:
        seed = args.seed
    if args.w is not None:
        try:
            experiment["w"] = float(args.w)
        except ValueError:
            experiment["w"] = args.w
    if args.strikes is not None:
        experiment["strikes"] = _csv_floats("experiment.strikes")(args.strikes)
    if args.hurst is not None:
        experiment["hurst"] = args.hurst
    if args.scheme is not None:
        scheme = args.scheme
    if args.resolvent:
        experiment["resolvent"] = True
    if args.antithetic:
        experiment["antithetic"] = True
    if args.m is not None:
        experiment["m"] = args.m

    hurst = experiment.pop("hurst", None)
    if hurst is not None:
        params = params.with_hurst(float(hurst))
    if scheme not in ("ivi", "explicit", "both"):
        raise ConfigError("scheme", f"must be ivi, explicit or both, got {scheme!r}")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("rng.seed", f"must be an integer, got {seed!r}")
    steps = experiment.get("steps")
    if isinstance(steps, int):
        steps = [steps]
    if not isinstance(steps, list) or not all(isinstance(n, int) for n in steps):
        raise ConfigError("experiment.steps", f"must be a list of integers, got {steps!r}")
    experiment["steps"] = steps
    if not isinstance(experiment.get("paths"), int):
        raise ConfigError("experiment.paths", f"must be an integer, got {experiment.get('paths')!r}")

    out = params.to_config()
    out["scheme"] = scheme
    out["experiment"] = experiment
    out["rng"] = {"seed": seed}
    return params, out


def _schemes(cfg):
    return ("ivi", "explicit") if cfg["scheme"] == "both" else (cfg["scheme"],)


def _experiment(params, cfg, scheme, target, threads):
    exp = cfg["experiment"]
    return ExperimentConfig(
        params=params,
        scheme=scheme,
        steps_list=exp["steps"],
        paths=exp["paths"],
        seed=cfg["rng"]["seed"],
        target=target,
        antithetic=bool(exp.get("antithetic", False)),
        resolvent=bool(exp.get("resolvent", False)),
        threads=threads,
    )


def _riccati_m(cfg):
    from .riccati import DEFAULT_M

    m = cfg["experiment"].get("m", DEFAULT_M)
    if not isinstance(m, int) or m < 1:
        raise ConfigError("experiment.m", f"must be a positive integer, got {m!r}")
    return m


def _real_w(cfg):
    try:
        return float(cfg["experiment"]["w"])
    except (TypeError, ValueError):
        raise ConfigError("experiment.w", f"must be a real number, got {cfg['experiment']['w']!r}") from None


def cmd_simulate(params, cfg, threads):
    if cfg["scheme"] == "both":
        raise ConfigError("scheme", "simulate takes a single scheme")
    econf = _experiment(params, cfg, cfg["scheme"], None, threads)
    rows = path_dump(econf, cfg["experiment"]["paths"])
    return PATH_COLUMNS, rows, {}


def cmd_laplace_error(params, cfg, threads):
    from .riccati import laplace_U

    w = _real_w(cfg)
    target = LaplaceU(w)
    reference = laplace_U(params, w, _riccati_m(cfg))
    rows = []
    for s in _schemes(cfg):
        econf = _experiment(params, cfg, s, target, threads)
        rows += [(r.scheme, r.steps, r.value, r.error, r.std_error, r.reference) for r in error_table(econf, (s,), reference)]
    return ("scheme", "steps", "value", "error", "std_error", "reference"), rows, {"reference": reference, "w": w}


def cmd_price(params, cfg, threads):
    from .montecarlo import estimate_calls
    from .pricing import call_price_fourier

    strikes = cfg["experiment"].get("strikes") or [params.S0]
    refs = np.atleast_1d(call_price_fourier(params, strikes, _riccati_m(cfg)))
    exp = cfg["experiment"]
    rows = []
    for s in _schemes(cfg):
        for n in ExperimentConfig(params, s, exp["steps"], exp["paths"], cfg["rng"]["seed"]).steps_list:
            ests = estimate_calls(
                params, strikes, n, exp["paths"], cfg["rng"]["seed"], s,
                bool(exp.get("antithetic", False)), bool(exp.get("resolvent", False)), threads,
            )
            for k, e, r in zip(strikes, ests, refs):
                rows.append((s, n, k, e.value, abs(e.value - r), e.std_error, r))
    header = ("scheme", "steps", "strike", "value", "error", "std_error", "reference")
    return header, rows, {"references": dict(zip(map(str, strikes), map(float, refs)))}


def cmd_smile(params, cfg, threads):
    from .pricing import smile

    if cfg["scheme"] == "both":
        raise ConfigError("scheme", "smile takes a single scheme")
    exp = cfg["experiment"]
    strikes = exp.get("strikes") or [params.S0]
    econf = _experiment(params, cfg, cfg["scheme"], Calls(tuple(strikes)), threads)
    if econf.antithetic or econf.resolvent:
        raise ConfigError("experiment", "smile supports neither antithetic nor resolvent sampling")
    points = smile(params, strikes, econf.steps_list[-1], econf.paths, econf.seed, econf.scheme, _riccati_m(cfg), threads)
    rows = [(p.strike, p.iv_mc, p.iv_reference, p.iv_std_error, p.price_mc, p.std_error, p.price_reference) for p in points]
    header = ("strike", "iv_mc", "iv_reference", "iv_std_error", "price_mc", "price_std_error", "price_reference")
    return header, rows, {"steps": econf.steps_list[-1]}


def cmd_char_check(params, cfg, threads):
    from .scheme import one_step_char_check

    exp = cfg["experiment"]
    try:
        w = complex(str(exp["w"]).replace(" ", ""))
    except ValueError:
        raise ConfigError("experiment.w", f"not a number: {exp['w']!r}") from None
    rows = []
    for n in ExperimentConfig(params, "ivi", exp["steps"], exp["paths"], cfg["rng"]["seed"]).steps_list:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg["rng"]["seed"], spawn_key=(n,))))
        chk = one_step_char_check(params, n, w, exp["paths"], rng)
        rows.append((
            n, w.real, w.imag, chk.mc_estimate.real, chk.mc_estimate.imag, chk.std_error,
            chk.exact.real, chk.exact.imag, abs(chk.mc_estimate - chk.exact), chk.residual,
        ))
    header = ("steps", "w_re", "w_im", "mc_re", "mc_im", "std_error", "exact_re", "exact_im", "abs_error", "root_residual")
    return header, rows, {}


COMMANDS = {
    "simulate": cmd_simulate,
    "laplace-error": cmd_laplace_error,
    "price": cmd_price,
    "smile": cmd_smile,
    "char-check": cmd_char_check,
}


def output_dir(args):
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def run_command(args):
    start = time.perf_counter()
    params, cfg = resolve_config(args.command, args)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {args.threads}")
    header, rows, meta = COMMANDS[args.command](params, cfg, args.threads)
    out = output_dir(args)
    stem = args.command.replace("-", "_")
    csv_path = write_csv(os.path.join(out, f"{stem}.csv"), header, rows)
    manifest_path = os.path.join(out, f"{stem}.manifest.json")
    manifest = {
        "command": args.command,
        "config": cfg,
        "seed": cfg["rng"]["seed"],
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time": time.perf_counter() - start,
        "outputs": [os.path.abspath(csv_path)],
        "rows": len(rows),
        "metadata": meta,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
        fh.write("\n")
    print(f"wrote {csv_path} ({len(rows)} rows) and {manifest_path}")
    return manifest


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run_command(args)
    except NumericalError as exc:
        print(f"ivi: numerical error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"ivi: invalid config: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"ivi: invalid input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
