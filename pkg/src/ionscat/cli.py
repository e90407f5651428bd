"""Command-line entry point (``ionscat``)."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .basis import channel_table_rows
from .cli_io import (
    ArtifactError,
    ConfigError,
    build_surface,
    emit_plotdata,
    load_run_config,
    pec_dump,
    resonances_from_scan,
    run_scan,
    thermal_rates_from_scan,
    write_resonances,
)
from .landau_zener import (
    ClassicallyForbiddenError,
    LZCrossing,
    TopologyError,
    default_x1_crossing,
    double_path,
    fclz_from_potentials,
    fclz_network,
    lz_probability,
)
from .observables import ConvergenceError, CoverageError
from .potentials import IngestionError, ModelFitError
from .propagator import BelowThresholdError, ConfigurationError, PropagationError
from .units import cm1_to_hartree

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_PARTIAL = 0, 2, 3, 4

PHYSICS_ERRORS = (
    PropagationError,
    ConvergenceError,
    CoverageError,
    ModelFitError,
    TopologyError,
    ClassicallyForbiddenError,
    BelowThresholdError,
)
CONFIG_ERRORS = (ConfigError, ConfigurationError, IngestionError, ArtifactError, FileNotFoundError)


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=d, help="run configuration (INI)")
    parser.add_argument("--workers", type=int, metavar="N", default=d, help="parallel worker processes")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory")
    parser.add_argument("--resume", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="reuse completed blocks of a previous run")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ionscat", description="Coupled-channel Li + Ba+ collision engine")
    _global_options(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global_options(sp, suppress=True)
        return sp

    sp = add("pec-dump", "write the 16 diabatic curves (and adiabats) on a radial grid")
    sp.add_argument("--hunds-case", choices=["a", "c", "e"], default="a")
    sp.add_argument("--J", type=int, default=0)
    sp.add_argument("--parity", choices=["+", "-"], default="+")
    sp.add_argument("--rmin", type=float, default=4.0)
    sp.add_argument("--rmax", type=float, default=60.0)
    sp.add_argument("--dr", type=float, default=0.1)
    sp = add("channels", "list case (e) channels of a (J, parity) block")
    sp.add_argument("--J", type=int, required=True)
    sp.add_argument("--parity", choices=["+", "-"], required=True)
    sp = add("lz", "Landau-Zener probabilities")
    sp.add_argument("--from-potentials", action="store_true")
    sp.add_argument("--formula", choices=["value-consistent", "printed"], default="value-consistent")
    sp.add_argument("--w", type=float, help="half-gap W_c (hartree)")
    sp.add_argument("--df", type=float, help="slope difference (hartree/bohr)")
    sp.add_argument("--uc-cm1", type=float, help="crossing energy relative to the entrance (cm-1)")
    sp.add_argument("--rc", type=float, default=11.06)
    sp.add_argument("--pt", type=float, default=0.264, help="P_T for the network")
    sp.add_argument("--pb", type=float, default=0.982, help="P_B (5D5/2) for the network")
    sp.add_argument("--pb32", type=float, default=0.979, help="P_B (5D3/2) for the network")
    add("xsec-scan", "solve all blocks of the configured energy scan")
    sp = add("thermal-rates", "thermally average the scanned rates")
    sp.add_argument("--temperatures", help="override temperatures (kelvin), comma separated")
    add("resonance-find", "list resonance peaks of a finished scan")
    sp = add("plot-data", "emit CSV bundles for plotting")
    sp.add_argument("--style", choices=["xsec", "rates", "pecs", "adiabats"], required=True)
    return p


def _config(args):
    return load_run_config(args.config, out_dir=args.out, workers=args.workers)


def _out(args, cfg) -> Path:
    return Path(args.out or cfg.out_dir)


def _cmd_channels(args, cfg) -> int:
    surface = build_surface(cfg)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["J", "parity", "asymptote", "ja", "jb", "j", "ell", "threshold_cm1"])
    par = 1 if args.parity == "+" else -1
    for row in channel_table_rows(args.J, par, surface.thresholds):
        w.writerow(row)
    return EXIT_OK


def _cmd_lz(args, cfg) -> int:
    rows = []
    if args.from_potentials:
        res = fclz_from_potentials(build_surface(cfg))
        for lab, c in res["crossings"].items():
            rows.append((f"crossing {lab}", f"Rc={c.rc:.4f} W={c.wc:.6e} dF={c.df:.6e} Uc={c.uc:.6e}"))
        for k in ("P_T", "P_B", "P_B_32", "P_X"):
            if k in res:
                rows.append((k, f"{res[k]:.6f}"))
        pt, pb, pb32 = res.get("P_T"), res.get("P_B"), res.get("P_B_32")
    else:
        c = default_x1_crossing()
        if args.w is not None or args.df is not None or args.uc_cm1 is not None:
            c = LZCrossing(
                args.rc,
                args.w if args.w is not None else c.wc,
                args.df if args.df is not None else c.df,
                cm1_to_hartree(args.uc_cm1) if args.uc_cm1 is not None else c.uc,
            )
        p = lz_probability(c)
        rows += [("single-path", f"{p:.6f}"), ("double-path", f"{double_path(p):.6f}"),
                 ("statistical NRCE (/20)", f"{double_path(p) / 20:.6f}")]
        pt, pb, pb32 = args.pt, args.pb, args.pb32
    if pt is not None and pb is not None:
        net = fclz_network(pt, pb, "5D5/2", args.formula)
        for k, v in net.probabilities.items():
            rows.append((f"network 5D5/2 {k} [{args.formula}]", f"{v:.6f}"))
    if pb32 is not None:
        net = fclz_network(None, pb32, "5D3/2", args.formula)
        for k, v in net.probabilities.items():
            rows.append((f"network 5D3/2 {k} [{args.formula}]", f"{v:.6f}"))
    width = max(len(r[0]) for r in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def _cmd_scan(args, cfg) -> int:
    def progress(t, err):
        if err is not None:
            print(f"block E={t[1]:.3e} K J={t[2]} p={t[3]} failed: {err}", file=sys.stderr)

    res = run_scan(cfg, _out(args, cfg), args.workers, getattr(args, "resume", False), progress)
    print(f"config {res.config_sha256[:12]}: {res.computed} blocks computed, {res.reused} reused, "
          f"{len(res.failed)} failed -> {res.out_dir}")
    if res.unconverged:
        print(f"J sum not converged at {len(res.unconverged)} energies (see xsec.csv header)", file=sys.stderr)
    if res.failed:
        for (ie, e_k, J, p), err in res.failed:
            print(f"FAILED E={e_k:.4e} K J={J} p={p}: {err}")
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_thermal(args, cfg) -> int:
    temps = cfg.temperatures_K
    if args.temperatures:
        temps = tuple(float(t) for t in args.temperatures.split(","))
    s = build_surface(cfg)
    res = thermal_rates_from_scan(_out(args, cfg), temps, s.reduced_mass, s.c4, cfg.sha256)
    for pr, d in res.items():
        for t, v in zip(d["T"], d["plain"]):
            print(f"{pr:5s} T={t:.4e} K  K={v:.6e} a.u.")
    return EXIT_OK


def _cmd_resonances(args, cfg) -> int:
    out = _out(args, cfg)
    recs = resonances_from_scan(out)
    write_resonances(recs, out / "resonances.csv", cfg.sha256)
    for r in recs:
        print(f"{r.process:5s} J={r.J} p={r.parity} E={r.peak_energy_K:.4e} K sigma={r.peak_sigma:.4e} width={r.width_K:.3e} K")
    if not recs:
        print("no resonances found")
    return EXIT_OK


def _cmd_plot(args, cfg) -> int:
    for p in emit_plotdata(_out(args, cfg), args.style, cfg):
        print(p)
    return EXIT_OK


def _cmd_pecs(args, cfg) -> int:
    surface = build_surface(cfg)
    kw = dict(hunds_case=args.hunds_case, J=args.J, parity=1 if args.parity == "+" else -1,
              rmin=args.rmin, rmax=args.rmax, dr=args.dr, sha=cfg.sha256)
    if args.out:
        path = Path(args.out) / "pec_dump.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            pec_dump(surface, fh, **kw)
        print(path)
    else:
        pec_dump(surface, sys.stdout, **kw)
    return EXIT_OK


COMMANDS = {
    "pec-dump": _cmd_pecs,
    "channels": _cmd_channels,
    "lz": _cmd_lz,
    "xsec-scan": _cmd_scan,
    "thermal-rates": _cmd_thermal,
    "resonance-find": _cmd_resonances,
    "plot-data": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PHYSICS_ERRORS as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
