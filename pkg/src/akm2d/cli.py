"""Command-line entry point: ``akm2d {run,replicate,sensitivity,phantom,validate}``.

Exit status is 0 on success, 1 on a configuration error and 2 on a
runtime failure. Every config key can be given as ``--key value`` and
overrides the ``--config`` file.
"""

import argparse
import dataclasses
import logging
import os
import sys

from .experiment import (
    ConfigError,
    ExperimentConfig,
    load_config,
    make_phantom,
    run_replicated,
    run_sensitivity,
    run_single,
    write_table,
)
from .sampler import trap_index, validate_params
from .simgen import write_field_csv, write_pgm

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="akm2d", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "single sequential sampling run"),
        ("replicate", "seeded replications with checkpoint summary"),
        ("sensitivity", "(h, lam, u) x disk-radius sweep of MMD and AMMD"),
        ("phantom", "write the phantom fields only"),
        ("validate", "parameter advisory for the adaptive sampler"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value file")
        for f in dataclasses.fields(ExperimentConfig):
            sp.add_argument(f"--{f.name}", dest=f.name, default=None, metavar="V")
    return p


def _overrides(ns):
    return {f.name: getattr(ns, f.name) for f in dataclasses.fields(ExperimentConfig)}


def main(argv=None):
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(ns.config, _overrides(ns))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _dispatch(ns.command, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(command, config):
    out = config.output_dir
    if command == "validate":
        params = config.sampler_params()
        print(f"trap_index = {trap_index(params):.6g}")
        warnings = validate_params(params)
        for w in warnings:
            print(f"warning [{w.code}]: {w.message}")
        if not warnings:
            print("ok")
        return EXIT_OK
    if command == "phantom":
        os.makedirs(out, exist_ok=True)
        ph = make_phantom(config)
        for name in ("Y", "M", "A"):
            write_pgm(os.path.join(out, f"phantom_{name}.pgm"), getattr(ph, name))
            write_field_csv(os.path.join(out, f"phantom_{name}.csv"), getattr(ph, name))
        write_pgm(os.path.join(out, "phantom_region.pgm"), ph.true_region.astype(float))
        print(f"true region fraction {ph.true_region.mean():.4f}; written to {out}")
        return EXIT_OK
    if command == "run":
        res = run_single(config, write=True)
        last = res.rows[-1]
        print(" ".join(f"{k}={last[k]:.4g}" for k in ("n", "precision", "recall", "f", "er", "ammd", "mmd")))
        return EXIT_OK
    if command == "replicate":
        summary, _ = run_replicated(config, write=True)
        for row in summary:
            print(f"{row['sampler']} n={row['checkpoint']} {row['metric']}: "
                  f"{row['mean']:.4g} ({row['sd']:.2g}) ok={row['n_ok']} failed={row['n_failed']}")
        return EXIT_OK if summary and summary[0]["n_ok"] > 0 else EXIT_RUNTIME
    if command == "sensitivity":
        rows = run_sensitivity(config, write=True)
        write_table(os.path.join(out, "sensitivity.csv"), rows)
        for r in rows:
            flag = " STALL" if r["stalled"] else ""
            print(f"radius={r['radius']} h={r['h']} lam={r['lam']} u={r['u']:g}: "
                  f"mmd={r['mmd']:.4f} ammd={r['ammd']:.4f}{flag}")
        return EXIT_OK
    raise ConfigError(f"unknown command {command!r}")


if __name__ == "__main__":
    sys.exit(main())
