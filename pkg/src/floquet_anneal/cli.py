"""Command-line entry point: run, validate, presets, resume.

Thread counts are exported to the BLAS environment before numpy is imported,
so heavy modules load lazily inside the subcommands.

Exit codes: 0 success, 2 invalid config, 3 numerical abort.
"""

import argparse
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _set_threads(n):
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _status(msg):
    print(msg, file=sys.stderr, flush=True)


def _load(path):
    from .config import load_config
    try:
        return load_config(path)
    except (OSError, ValueError) as exc:
        _status(f"config error: {exc}")
        return None


def _apply_overrides(cfg, args):
    updates = {}
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.dt_divisor is not None:
        updates["dt_divisor"] = args.dt_divisor
    if args.checkpoint_every is not None:
        updates["checkpoint_every"] = args.checkpoint_every
    if args.threads is not None:
        updates["threads"] = args.threads
    return cfg.replace(**updates) if updates else cfg


def _report_findings(findings):
    for f in findings:
        _status(str(f))
    return any(f.severity == "error" for f in findings)


def cmd_run(args):
    if args.threads:
        _set_threads(args.threads)
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    cfg = _apply_overrides(cfg, args)
    if cfg.threads and args.threads is None:
        _set_threads(cfg.threads)
    from .config import validate_config
    if _report_findings(validate_config(cfg)):
        return EXIT_CONFIG
    from .evolution import NumericalAbort
    from .experiments import run_experiment
    try:
        manifest = run_experiment(cfg, progress=_status)
    except NumericalAbort as exc:
        _status(f"numerical abort: {exc}")
        return EXIT_NUMERICS
    _status(f"done in {manifest.wall_time:.1f} s; outputs in {manifest.out_dir}")
    print(manifest.path)
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    from .config import validate_config
    findings = validate_config(cfg)
    if not findings:
        _status("config ok")
    return EXIT_CONFIG if _report_findings(findings) else EXIT_OK


def cmd_presets(args):
    from .config import EXPERIMENTS, preset
    for name in EXPERIMENTS:
        cfg = preset(name)
        if args.write:
            os.makedirs(args.write, exist_ok=True)
            path = os.path.join(args.write, f"{name}.cfg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(cfg.to_text())
            _status(f"wrote {path}")
        else:
            print(f"# preset: {name}")
            print(cfg.to_text())
    return EXIT_OK


def cmd_resume(args):
    if args.threads:
        _set_threads(args.threads)
    from .evolution import NumericalAbort
    from .experiments import resume_run
    try:
        manifest = resume_run(args.manifest, progress=_status)
    except (OSError, ValueError) as exc:
        _status(f"resume error: {exc}")
        return EXIT_CONFIG
    except NumericalAbort as exc:
        _status(f"numerical abort: {exc}")
        return EXIT_NUMERICS
    _status(f"done in {manifest.wall_time:.1f} s; outputs in {manifest.out_dir}")
    print(manifest.path)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="floquet-anneal",
        description="Quantum annealing of driven honeycomb lattices: "
                    "ramps, Floquet spectra, edge currents, Chern markers.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--threads", type=int, help="BLAS thread count")
    run.add_argument("--dt-divisor", type=int, dest="dt_divisor",
                     help="integration steps per drive period")
    run.add_argument("--checkpoint-every", type=int, dest="checkpoint_every",
                     metavar="N_PERIODS", help="checkpoint interval in periods")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="validate a config and report findings")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)

    pre = sub.add_parser("presets", help="print the five figure presets")
    pre.add_argument("--write", metavar="DIR", help="write .cfg files instead")
    pre.set_defaults(func=cmd_presets)

    res = sub.add_parser("resume", help="resume an interrupted run")
    res.add_argument("manifest")
    res.add_argument("--threads", type=int, help="BLAS thread count")
    res.set_defaults(func=cmd_resume)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
