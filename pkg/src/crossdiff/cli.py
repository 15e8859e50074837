"""Command-line experiment runner.

Subcommands::

    crossdiff presets [--dump N] [--scale desk|paper] [--beta B]
    crossdiff run <config>      [--scale ...] [--out DIR] [--snapshot-stride K]
    crossdiff decay <config>    [--scale ...] [--out DIR]
    crossdiff converge <config> [--scale ...] [--out DIR] [--threads N]
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .diagnostics import (convergence_study, decay_fit, default_workers, entropy_audit,
                          kappa_bound)
from .errors import CrossDiffError, ParseError, RunFailure, ValidationError
from .field import rao_entropy, write_field_csv
from .solver import run, uniqueness_advisory

log = logging.getLogger("crossdiff")


def _load(args):
    cfg = cfgmod.load_config(args.config, scale=args.scale)
    changes = {}
    if args.out:
        changes["output_dir"] = args.out
    if getattr(args, "snapshot_stride", None):
        changes["snapshot_stride"] = args.snapshot_stride
    return replace(cfg, **changes) if changes else cfg


def _outdir(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfgmod.render_config(cfg))
    return out


def _run_and_write(cfg, out: Path):
    traj = run(cfg)
    traj.write_diagnostics_csv(out / "diagnostics.csv")
    for k in sorted(traj.snapshots):
        write_field_csv(out / f"field_{k:06d}.csv", traj.mesh, traj.snapshots[k])
    return traj


def _run_summary(cfg, traj) -> list:
    audit = entropy_audit(traj)
    last = traj.diagnostics[-1]
    mass0 = traj.diagnostics[0].mass
    drift = float(np.max(np.abs(np.array([d.mass for d in traj.diagnostics]) - mass0)))
    min_density = min(d.min_density for d in traj.diagnostics)
    H0 = rao_entropy(traj.mesh, traj.model.A, traj.snapshots[0])
    adv = uniqueness_advisory(traj.mesh, traj.model, traj.dt, H0, cfg.C_user)
    masses = ", ".join(f"{m:.12g}" for m in last.mass)
    return [
        f"run: {cfg.name}  ({traj.mesh.n_cells} cells, n={traj.model.n}, "
        f"dt={traj.dt:.6g}, {traj.n_steps} steps, t_final={last.t:.6g})",
        f"final masses: ({masses}); max drift {drift:.3e}",
        f"entropy: H(u0)={audit['H_initial']:.12g} -> H(u^N,u^N-1)={audit['H_final']:.12g}; "
        f"nonincreasing={'yes' if audit['nonincreasing'] else 'NO'}; "
        f"steps over slack: {len(audit['violations'])}",
        f"min density: {min_density:.6e}",
        f"distance to equilibrium: {traj.diagnostics[0].distance:.6e} -> {last.distance:.6e}",
        f"uniqueness advisory: {adv.message}",
    ]


def cmd_presets(args):
    if args.dump is not None:
        raw = cfgmod.preset(args.dump, args.scale or "desk", args.beta)
        sys.stdout.write(cfgmod.render_config(cfgmod.from_mapping(raw)))
        return 0
    for num, text in cfgmod.PRESET_SUMMARY.items():
        print(f"experiment {num}: {text}")
    return 0


def cmd_run(args):
    cfg = _load(args)
    out = _outdir(cfg)
    traj = _run_and_write(cfg, out)
    lines = _run_summary(cfg, traj)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_decay(args):
    cfg = _load(args)
    out = _outdir(cfg)
    traj = _run_and_write(cfg, out)
    rep = decay_fit(traj, cfg.window_fraction, cfg.C_P)
    rep.write_series_csv(out / "decay.csv")
    lines = _run_summary(cfg, traj) + [rep.summary()]
    (out / "decay_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_converge(args):
    cfg = _load(args)
    if not cfg.p_list or cfg.p_ref is None:
        raise ValidationError("p_list", "converge needs [study] p_list and p_ref")
    out = _outdir(cfg)
    workers = args.threads or default_workers()
    rep = convergence_study(cfg, cfg.p_list, cfg.p_ref, cfg.T, cfg.dt_base, workers=workers)
    rep.write_csv(out / "convergence.csv")
    text = (f"convergence study: {cfg.name}, T={cfg.T:g}, dt_p = {cfg.dt_base:g} * 2^-p, "
            f"reference p={cfg.p_ref}\n" + rep.summary()
            + f"\nerrors strictly decreasing: {'yes' if rep.strictly_decreasing else 'no'}\n")
    (out / "convergence_report.txt").write_text(text)
    print(text, end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="crossdiff",
                                description="BDF2 finite-volume solver for population cross-diffusion")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("presets", help="list the built-in experiments")
    sp.add_argument("--dump", type=int, metavar="N", help="print the TOML config of preset N")
    sp.add_argument("--scale", choices=["paper", "desk"])
    sp.add_argument("--beta", type=float)
    sp.set_defaults(func=cmd_presets)

    for name, func, hlp in (("run", cmd_run, "run a simulation"),
                            ("decay", cmd_decay, "run and fit the exponential decay rate"),
                            ("converge", cmd_converge, "temporal convergence-order study")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("config")
        sp.add_argument("--scale", choices=["paper", "desk"])
        sp.add_argument("--out", help="output directory (overrides the config)")
        if name == "converge":
            sp.add_argument("--threads", type=int, default=None,
                            help="worker processes (default: number of CPUs)")
        else:
            sp.add_argument("--snapshot-stride", type=int, default=None)
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except (CrossDiffError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
