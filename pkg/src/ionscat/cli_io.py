"""Run configuration, batch scans, S-matrix archive and plot-data bundles."""

from __future__ import annotations

import configparser
import csv
import datetime as _dt
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .observables import (
    INELASTIC,
    PROCESSES,
    ProcessLabel,
    RateTable,
    _j_sum_converged,
    block_cross_sections,
    compose_cross_sections,
    entrance_level,
    j_max_default,
    langevin_average,
    langevin_rate,
    langevin_sigma,
    rate_from_cross_section,
    thermal_rate,
)
from .potentials import (
    PotentialSurfaceSet,
    _default_config_text,
    _parser,
    adiabats_case_c,
    adiabats_case_e,
    surface_from_config,
)
from .propagator import (
    ChannelInfo,
    Grid,
    SMatrixBlock,
    fcqs_problem,
    mcqs_problem,
    solve_block,
)
from .units import CONSTANTS, hartree_to_cm1, kelvin_to_hartree

__all__ = [
    "ConfigError",
    "ArtifactError",
    "RunConfig",
    "load_run_config",
    "parse_energy_grid",
    "build_surface",
    "ScanResult",
    "run_scan",
    "write_smatrix_record",
    "read_smatrix_record",
    "read_table",
    "ResonanceRecord",
    "find_resonances",
    "resonances_from_scan",
    "thermal_rates_from_scan",
    "emit_plotdata",
]

MODEL_SECTION_PREFIXES = ("pec.", "soc.")
MODEL_SECTIONS = ("thresholds", "x1", "lz")
XSEC_HEADER = ["energy_K", "process", "J_or_ell", "parity", "sigma_a0sq"]
RATE_HEADER = ["T_K", "process", "rate_cm3s", "rate_over_KL"]


class ConfigError(ValueError):
    """Invalid run configuration."""


class ArtifactError(RuntimeError):
    """Missing or inconsistent scan artifacts."""


# ------------------------------------------------------------------ config


def parse_energy_grid(spec: str) -> tuple[float, ...]:
    """``"logspace LO HI PER_DECADE"`` or a comma/space separated list (kelvin)."""
    toks = spec.replace(",", " ").split()
    if not toks:
        raise ConfigError("empty energy grid")
    if toks[0] == "logspace":
        if len(toks) != 4:
            raise ConfigError("logspace needs LO HI PER_DECADE")
        lo, hi, per = float(toks[1]), float(toks[2]), float(toks[3])
        if not (0 < lo < hi) or per <= 0:
            raise ConfigError("logspace needs 0 < LO < HI and PER_DECADE > 0")
        n = int(round(math.log10(hi / lo) * per)) + 1
        vals = np.logspace(math.log10(lo), math.log10(hi), n)
    else:
        try:
            vals = np.array([float(t) for t in toks])
        except ValueError as exc:
            raise ConfigError(f"bad energy list: {exc}") from None
    if np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
        raise ConfigError("energy grid must be positive and strictly increasing")
    return tuple(float(v) for v in vals)


def _canonical_ini(cp: configparser.ConfigParser) -> str:
    lines = []
    for sec in sorted(cp.sections()):
        lines.append(f"[{sec}]")
        for k in sorted(cp[sec]):
            lines.append(f"{k}={cp[sec][k].strip()}")
    return "\n".join(lines)


@dataclass(frozen=True)
class RunConfig:
    model_text: str
    model_base: str | None
    energies_K: tuple[float, ...]
    model: str = "MCQS"
    entrance: str = "5D5/2"
    processes: tuple[str, ...] = ("FSQ", "NRCE", "NRQ")
    j_max: int | None = None
    parities: tuple[int, ...] = (1, -1)
    normalization: str = "verbatim"
    grid: Grid = Grid()
    temperatures_K: tuple[float, ...] = (3e-5,)
    out_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("MCQS", "FCQS"):
            raise ConfigError("model must be MCQS or FCQS")
        try:
            entrance_level(self.entrance)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for p in self.processes:
            if p not in ProcessLabel.__members__:
                raise ConfigError(f"unknown process {p!r}")
        if not self.energies_K or any(e <= 0 for e in self.energies_K):
            raise ConfigError("energies must be positive")
        if any(b <= a for a, b in zip(self.energies_K, self.energies_K[1:])):
            raise ConfigError("energy grid must be strictly increasing")
        if set(self.parities) - {1, -1} or not self.parities:
            raise ConfigError("parities must be a subset of {+, -}")
        g = self.grid
        if not (0 < g.r_min < g.r_max) or g.step <= 0:
            raise ConfigError("propagator needs 0 < r_min < r_max and step > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.normalization not in ("verbatim", "statistical"):
            raise ConfigError("normalization must be verbatim or statistical")
        if self.j_max is not None and self.j_max < 0:
            raise ConfigError("j_max must be >= 0")

    def canonical(self) -> str:
        """Physics content as canonical JSON (output location and workers excluded)."""
        d = {
            "model_text": self.model_text,
            "energies_K": [repr(e) for e in self.energies_K],
            "model": self.model,
            "entrance": self.entrance,
            "processes": list(self.processes),
            "j_max": self.j_max,
            "parities": list(self.parities),
            "normalization": self.normalization,
            "grid": [repr(self.grid.r_min), repr(self.grid.r_max), repr(self.grid.step),
                     self.grid.auto_extend, repr(self.grid.residual_ratio), self.grid.extrapolate],
            "temperatures_K": [repr(t) for t in self.temperatures_K],
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def j_max_for(self, energy_K: float, reduced_mass: float, c4: float) -> int:
        if self.j_max is not None:
            return self.j_max
        return j_max_default(kelvin_to_hartree(energy_K), reduced_mass, c4)

    def grid_text(self) -> str:
        g = self.grid
        return f"r_min={g.r_min};r_max={g.r_max};step={g.step};auto_extend={g.auto_extend}"


def _model_parser(run_cp: configparser.ConfigParser | None, base: Path | None):
    cp = _parser()
    cp.read_string(_default_config_text())
    model_base = None
    if run_cp is not None:
        pot = run_cp.get("system", "potentials", fallback=None)
        if pot:
            p = Path(pot)
            if not p.is_absolute() and base is not None:
                p = base / p
            if not p.exists():
                raise ConfigError(f"potentials file not found: {p}")
            with open(p, encoding="utf-8") as fh:
                cp.read_file(fh)
            model_base = str(p.parent)
        for sec in run_cp.sections():
            if sec in MODEL_SECTIONS or sec.startswith(MODEL_SECTION_PREFIXES):
                if not cp.has_section(sec):
                    cp.add_section(sec)
                for k, v in run_cp[sec].items():
                    cp[sec][k] = v
                model_base = model_base or (str(base) if base else None)
        for key in ("reduced_mass_au", "c4_au"):
            if run_cp.has_option("system", key):
                cp["system"][key] = run_cp["system"][key]
    return cp, model_base


def _parities(text: str) -> tuple[int, ...]:
    out = []
    for t in text.replace(",", " ").split():
        if t in ("+", "+1", "1"):
            out.append(1)
        elif t in ("-", "-1"):
            out.append(-1)
        else:
            raise ConfigError(f"bad parity {t!r}")
    return tuple(out)


def load_run_config(path=None, **overrides) -> RunConfig:
    """Read a run INI file; ``overrides`` replace individual RunConfig fields."""
    run_cp = _parser()
    base = None
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                run_cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    try:
        model_cp, model_base = _model_parser(run_cp, base)
        scan = run_cp["scan"] if run_cp.has_section("scan") else {}
        prop = run_cp["propagator"] if run_cp.has_section("propagator") else {}
        kw = {}
        kw["energies_K"] = parse_energy_grid(scan.get("energies_K", "logspace 1e-8 1e-1 120"))
        kw["model"] = scan.get("model", "MCQS").strip().upper()
        kw["entrance"] = scan.get("entrance", "5D5/2").strip()
        kw["processes"] = tuple(p.strip().upper() for p in scan.get("processes", "FSQ, NRCE, NRQ").split(",") if p.strip())
        jm = scan.get("j_max", "auto").strip()
        kw["j_max"] = None if jm == "auto" else int(jm)
        kw["parities"] = _parities(scan.get("parities", "+, -"))
        kw["normalization"] = scan.get("normalization", "verbatim").strip()
        kw["grid"] = Grid(
            r_min=float(prop.get("r_min", 4.0)),
            r_max=float(prop.get("r_max", 10000.0)),
            step=float(prop.get("step", 0.005)),
            auto_extend=str(prop.get("auto_extend", "yes")).lower() in ("yes", "true", "1", "on"),
            extrapolate=str(prop.get("extrapolate", "yes")).lower() in ("yes", "true", "1", "on"),
        )
        temps = run_cp.get("thermal", "temperatures_K", fallback="3e-5")
        kw["temperatures_K"] = parse_energy_grid(temps)
        kw["out_dir"] = run_cp.get("outputs", "directory", fallback="out")
        kw["workers"] = run_cp.getint("run", "workers", fallback=1)
    except (ValueError, KeyError, configparser.Error) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(_canonical_ini(model_cp), model_base, **kw)


def build_surface(cfg: RunConfig, check: bool = False) -> PotentialSurfaceSet:
    cp = _parser()
    cp.read_string(cfg.model_text)
    try:
        return surface_from_config(cp, Path(cfg.model_base) if cfg.model_base else None, check)
    except (KeyError, configparser.Error) as exc:
        raise ConfigError(f"model configuration: {exc}") from None


# ------------------------------------------------------------ S-matrix I/O


def _fmt(x: float) -> str:
    return repr(float(x))


def write_smatrix_record(meta: dict, block: SMatrixBlock) -> str:
    """Self-describing text record: ``#key=value`` header, then ``i j re im`` lines."""
    buf = io.StringIO()
    buf.write("#record=smatrix\n")
    for k, v in meta.items():
        buf.write(f"#{k}={v}\n")
    buf.write(f"#energy_total_au={_fmt(block.energy)}\n")
    buf.write(f"#r_max={_fmt(block.r_max)}\n")
    buf.write(f"#n_open={len(block.channels)}\n")
    for k, c in enumerate(block.channels):
        buf.write(f"#channel.{k}={c.label}|{c.level}|{_fmt(c.threshold)}|{c.ell}|{c.j}\n")
    n = block.S.shape[0]
    for i in range(n):
        for j in range(n):
            z = block.S[i, j]
            buf.write(f"{i} {j} {_fmt(z.real)} {_fmt(z.imag)}\n")
    return buf.getvalue()


def read_smatrix_record(text: str) -> tuple[dict, SMatrixBlock]:
    meta, chans, data = {}, {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            if k.startswith("channel."):
                lab, lev, thr, ell, j = v.split("|")
                chans[int(k.split(".")[1])] = ChannelInfo(lab, lev, float(thr), int(ell), int(j))
            else:
                meta[k] = v
        elif line.strip():
            data.append(line.split())
    n = int(meta["n_open"])
    S = np.zeros((n, n), dtype=complex)
    for i, j, re, im in data:
        S[int(i), int(j)] = complex(float(re), float(im))
    block = SMatrixBlock(
        float(meta["energy_total_au"]), (), tuple(chans[k] for k in range(n)), S,
        np.full((n, n), np.nan), float(meta["r_max"]),
    )
    return meta, block


# -------------------------------------------------------------------- scan

_WORKER: dict = {}


def _init_worker(cfg: RunConfig) -> None:
    _WORKER["cfg"] = cfg
    _WORKER["surface"] = build_surface(cfg)


def _task_name(t) -> str:
    ie, _, J, p = t
    ps = {1: "p", -1: "m", 0: "l"}[p]
    return f"E{ie:04d}_{'l' if p == 0 else 'J'}{J:03d}_{ps}.txt"


def _solve_task(task):
    cfg, surface = _WORKER["cfg"], _WORKER["surface"]
    ie, e_k, J, p = task
    energy = kelvin_to_hartree(e_k)
    ent = entrance_level(cfg.entrance)
    try:
        if p == 0:
            prob = fcqs_problem(surface, J)
        else:
            prob = mcqs_problem(surface, J, p)
        thr = [c.threshold for c in prob.channels if c.level == ent]
        if not thr:
            return task, None, None
        blk = solve_block(prob, thr[0] + energy, cfg.grid)
        meta = {
            "config_sha256": cfg.sha256,
            "model": cfg.model,
            "entrance": cfg.entrance,
            "energy_K": _fmt(e_k),
            "J_or_ell": J,
            "parity": {1: "+", -1: "-", 0: "na"}[p],
        }
        return task, write_smatrix_record(meta, blk), None
    except Exception as exc:  # failure isolation: recorded per block
        return task, None, f"{type(exc).__name__}: {exc}"


@dataclass
class ScanResult:
    config_sha256: str
    out_dir: Path
    energies_K: tuple[float, ...]
    blocks: dict  # energy index -> {(J, p): {process: sigma}}
    totals: dict  # energy index -> {process: {"+", "-", "total"}}
    failed: list = field(default_factory=list)
    unconverged: list = field(default_factory=list)
    computed: int = 0
    reused: int = 0

    @property
    def ok(self) -> bool:
        return not self.failed


def _plan(cfg: RunConfig, surface: PotentialSurfaceSet) -> list[tuple]:
    tasks = []
    for ie, e_k in enumerate(cfg.energies_K):
        jm = cfg.j_max_for(e_k, surface.reduced_mass, surface.c4)
        for J in range(jm + 1):
            if cfg.model == "FCQS":
                tasks.append((ie, e_k, J, 0))
            else:
                for p in cfg.parities:
                    tasks.append((ie, e_k, J, p))
    return tasks


def _header_lines(cfg: RunConfig, extra: dict, timestamp: bool = True) -> list[str]:
    lines = [f"config_sha256={cfg.sha256}", f"model={cfg.model}", f"entrance={cfg.entrance}",
             f"grid={cfg.grid_text()}", f"normalization={cfg.normalization}"]
    lines += [f"{k}={v}" for k, v in extra.items()]
    if timestamp:
        lines.append(f"created={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
    return lines


def _write_csv(path: Path, header_lines, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for h in header_lines:
            fh.write(f"#{h}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def run_scan(cfg: RunConfig, out_dir=None, workers: int | None = None, resume: bool = False,
             progress=None) -> ScanResult:
    """Solve every (E, J, p) block of the configured scan and write the outputs.

    Writes ``smatrix/`` (one archive record per block), ``xsec.csv`` (per
    block and summed cross sections), ``rates.csv`` (energy-resolved rates)
    and ``failures.txt`` when any block failed.  With ``resume`` blocks
    whose archive record carries the same config hash are reused.
    With ``j_max = auto`` unconverged energies get further J blocks, up to
    twice the default cutoff.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    workers = workers or cfg.workers
    arch = out / "smatrix"
    arch.mkdir(parents=True, exist_ok=True)
    surface = build_surface(cfg)
    mu, c4 = surface.reduced_mass, surface.c4
    tasks = _plan(cfg, surface)

    records: dict[tuple, str | None] = {}
    empty = arch / "empty.txt"
    empty_set = set()
    if resume and empty.exists():
        for line in empty.read_text().split():
            empty_set.add(line)
    failed = []
    n_done = n_reused = 0

    def collect(res):
        t, text, err = res
        if err is not None:
            failed.append((t, err))
        else:
            records[t] = text
            if text is not None:
                (arch / _task_name(t)).write_text(text)
            else:
                empty_set.add(_task_name(t))
        if progress:
            progress(t, err)

    def run(batch):
        nonlocal n_done, n_reused
        todo = []
        for t in batch:
            f = arch / _task_name(t)
            if _task_name(t) in empty_set:
                records[t] = None
            elif resume and f.exists() and f"#config_sha256={cfg.sha256}\n" in f.read_text():
                records[t] = f.read_text()
                n_reused += 1
            else:
                todo.append(t)
        n_done += len(todo)
        if workers == 1:
            _init_worker(cfg)
            for t in todo:
                collect(_solve_task(t))
        elif todo:
            with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg,)) as ex:
                for res in ex.map(_solve_task, todo, chunksize=1):
                    collect(res)

    def summarize():
        blocks: dict[int, dict] = {ie: {} for ie in range(len(cfg.energies_K))}
        for t in tasks:
            if t not in records:
                continue
            ie, e_k, J, p = t
            text = records[t]
            blk = None if text is None else read_smatrix_record(text)[1]
            blocks[ie][(J, p)] = block_cross_sections(
                blk, kelvin_to_hartree(e_k), cfg.entrance, mu, cfg.normalization
            )
        totals, unconverged = {}, []
        procs = [pr for pr in (ProcessLabel(q) for q in cfg.processes) if pr in INELASTIC]
        for ie, e_k in enumerate(cfg.energies_K):
            b = blocks[ie]
            jm = max((k[0] for k in b), default=0)
            if cfg.model == "FCQS":
                tot = {pr: sum(v[pr] for v in b.values()) for pr in PROCESSES}
                totals[ie] = {pr: {"total": tot[pr]} for pr in PROCESSES}
                conv = _fcqs_converged(b, jm, procs)
            else:
                totals[ie] = compose_cross_sections(b)
                conv = _j_sum_converged(b, jm, 1e-4, procs)
            if not conv:
                unconverged.append(e_k)
        return blocks, totals, unconverged

    run(tasks)
    blocks, totals, unconverged = summarize()
    # with automatic J_max the convergence test decides: extend two J at a time
    while cfg.j_max is None and unconverged and not failed:
        extra = []
        for ie, e_k in enumerate(cfg.energies_K):
            if e_k not in unconverged:
                continue
            jm = max(t[2] for t in tasks if t[0] == ie)
            cap = 2 * cfg.j_max_for(e_k, mu, c4)
            for J in range(jm + 1, min(jm + 2, cap) + 1):
                pars = (0,) if cfg.model == "FCQS" else cfg.parities
                extra.extend((ie, e_k, J, p) for p in pars)
        if not extra:
            break
        tasks.extend(extra)
        run(extra)
        blocks, totals, unconverged = summarize()
    empty.write_text("\n".join(sorted(empty_set)) + ("\n" if empty_set else ""))

    res = ScanResult(cfg.sha256, out, cfg.energies_K, blocks, totals, sorted(failed), unconverged,
                     n_done, n_reused)
    _write_scan_tables(cfg, res, mu, c4)
    fail_path = out / "failures.txt"
    if failed:
        with open(fail_path, "w") as fh:
            fh.write(f"#config_sha256={cfg.sha256}\n")
            for (ie, e_k, J, p), err in sorted(failed):
                fh.write(f"{e_k!r}\t{J}\t{p}\t{err}\n")
    elif fail_path.exists():
        fail_path.unlink()
    return res


def _fcqs_converged(b: dict, lmax: int, processes) -> bool:
    if lmax < 2:
        return False
    for pr in processes:
        tot = sum(v[pr] for v in b.values())
        if any(b.get((l, 0), {}).get(pr, 0.0) > 1e-4 * tot for l in (lmax - 2, lmax - 1, lmax)):
            return False
    return True


def _par(p: int) -> str:
    return {1: "+", -1: "-", 0: "na"}[p]


def _write_scan_tables(cfg: RunConfig, res: ScanResult, mu: float, c4: float) -> None:
    procs = [ProcessLabel(p) for p in cfg.processes]
    rows = []
    for ie, e_k in enumerate(cfg.energies_K):
        ek = f"{e_k:.10e}"
        for (J, p) in sorted(res.blocks[ie], key=lambda k: (k[0], -k[1])):
            v = res.blocks[ie][(J, p)]
            for pr in procs:
                rows.append([ek, pr.value, str(J), _par(p), f"{v[pr]:.10e}"])
        for pr in procs:
            t = res.totals[ie][pr]
            for key in ("+", "-", "total"):
                if key in t:
                    rows.append([ek, pr.value, "sum", key, f"{t[key]:.10e}"])
    extra = {
        "J_max": "auto" if cfg.j_max is None else cfg.j_max,
        "failed_blocks": len(res.failed),
        "unconverged_energies_K": ";".join(f"{e:.6e}" for e in res.unconverged) or "none",
    }
    _write_csv(res.out_dir / "xsec.csv", _header_lines(cfg, extra), XSEC_HEADER, rows)

    table = RateTable(cfg.model, cfg.entrance, thermal=False)
    for ie, e_k in enumerate(cfg.energies_K):
        for pr in procs:
            table.add(e_k, pr, res.totals[ie][pr]["total"], mu, c4)
    table.write_csv(res.out_dir / "rates.csv", _header_lines(cfg, {"kind": "energy-resolved"}))


# ---------------------------------------------------------- reading tables


def read_table(path) -> tuple[dict, list[dict]]:
    """``#key=value`` metadata and rows of a CSV written by this module."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].rstrip("\n").partition("=")
                meta[k] = v
            else:
                lines.append(line)
    rows = list(csv.DictReader(lines))
    return meta, rows


def _xsec_arrays(rows: list[dict], process: str):
    """Energies, total sigma and per-block sigma (weighted as in the total) for one process."""
    e_set = sorted({float(r["energy_K"]) for r in rows if r["process"] == process})
    idx = {e: k for k, e in enumerate(e_set)}
    total = np.zeros(len(e_set))
    per = {}
    for r in rows:
        if r["process"] != process:
            continue
        k = idx[float(r["energy_K"])]
        if r["J_or_ell"] == "sum":
            if r["parity"] == "total":
                total[k] = float(r["sigma_a0sq"])
            continue
        J = int(r["J_or_ell"])
        par = r["parity"]
        w = 1.0 if par == "na" else 0.5 * (2 * J + 1)
        per.setdefault((J, par), np.zeros(len(e_set)))[k] = w * float(r["sigma_a0sq"])
    return np.array(e_set), total, per


# -------------------------------------------------------------- resonances


@dataclass(frozen=True)
class ResonanceRecord:
    process: str
    J: int
    parity: str
    peak_energy_K: float
    peak_sigma: float
    width_K: float


def _half_width(e, s, i) -> float:
    half = 0.5 * s[i]
    x = np.log(e)

    def cross(direction):
        k = i
        while 0 <= k + direction < len(s) and s[k + direction] > half:
            k += direction
        j = k + direction
        if not 0 <= j < len(s):
            return x[k]
        t = (s[k] - half) / (s[k] - s[j])
        return x[k] + t * (x[j] - x[k])

    lo, hi = cross(-1), cross(1)
    return float(np.exp(hi) - np.exp(lo))


def find_resonances(energies_K, sigma, per_block: dict | None = None, process: str = "",
                    ratio: float = 3.0) -> list[ResonanceRecord]:
    """Grid points whose cross section exceeds both neighbours by more than ``ratio``.

    Each peak is attributed to the block key ``(J, parity)`` of ``per_block``
    with the largest contribution at the peak.
    """
    e = np.asarray(energies_K, dtype=float)
    s = np.asarray(sigma, dtype=float)
    out = []
    for i in range(1, len(s) - 1):
        if s[i] > ratio * s[i - 1] and s[i] > ratio * s[i + 1]:
            J, par = -1, "na"
            if per_block:
                key = max(per_block, key=lambda k: (per_block[k][i], k))
                J, par = key
            out.append(ResonanceRecord(process, int(J), str(par), float(e[i]), float(s[i]), _half_width(e, s, i)))
    return out


def resonances_from_scan(out_dir, processes=None) -> list[ResonanceRecord]:
    meta, rows = read_table(Path(out_dir) / "xsec.csv")
    procs = processes or sorted({r["process"] for r in rows})
    out = []
    for pr in procs:
        e, tot, per = _xsec_arrays(rows, pr)
        out.extend(find_resonances(e, tot, per, pr))
    return out


def write_resonances(records, path, config_sha256: str) -> None:
    rows = [[r.process, r.J, r.parity, f"{r.peak_energy_K:.10e}", f"{r.peak_sigma:.10e}", f"{r.width_K:.10e}"]
            for r in records]
    _write_csv(Path(path), [f"config_sha256={config_sha256}"],
               ["process", "J", "parity", "peak_energy_K", "peak_sigma_a0sq", "width_K"], rows)


# ----------------------------------------------------------- thermal rates


def thermal_rates_from_scan(out_dir, temperatures_K, reduced_mass: float = 10481.62, c4: float = 82.2,
                            config_sha256: str | None = None) -> dict:
    """Thermal averages of the scanned K(E) at each temperature.

    Writes ``rates_thermal.csv`` and ``langevin_average.csv``; returns
    ``{process: {"T": [...], "plain": [...], "capped": [...]}}`` in atomic units.
    """
    out = Path(out_dir)
    meta, rows = read_table(out / "rates.csv")
    _check_hash(meta, config_sha256, out / "rates.csv")
    procs = sorted({r["process"] for r in rows})
    kl = langevin_rate(c4, reduced_mass)
    au = CONSTANTS.au_rate_in_cm3_per_s
    result, trows, lrows = {}, [], []
    for pr in procs:
        sel = [r for r in rows if r["process"] == pr]
        e = np.array([kelvin_to_hartree(float(r["energy_K"])) for r in sel])
        k = np.array([float(r["rate_cm3s"]) for r in sel]) / au
        res = {"T": [], "plain": [], "capped": []}
        for t in temperatures_K:
            plain = thermal_rate(t, e, k)
            capped = langevin_average(t, e, k, "capped", c4, reduced_mass)
            res["T"].append(t)
            res["plain"].append(plain)
            res["capped"].append(capped)
            trows.append([f"{t:.10e}", pr, f"{plain * au:.10e}", f"{plain / kl:.10e}"])
            lrows.append([f"{t:.10e}", pr, "capped", f"{capped * au:.10e}", f"{capped / kl:.10e}"])
        result[pr] = res
    head = [f"config_sha256={meta.get('config_sha256', '')}", "kind=thermal"]
    _write_csv(out / "rates_thermal.csv", head, RATE_HEADER, trows)
    _write_csv(out / "langevin_average.csv", head, ["T_K", "process", "estimator", "rate_cm3s", "rate_over_KL"], lrows)
    return result


def _check_hash(meta: dict, expected: str | None, path) -> None:
    if expected is not None and meta.get("config_sha256") != expected:
        raise ArtifactError(f"{path} was produced by config {meta.get('config_sha256')}, expected {expected}")


# --------------------------------------------------------------- plot data


def pec_dump(
    surface: PotentialSurfaceSet,
    stream,
    hunds_case: str = "a",
    J: int = 0,
    parity: int = 1,
    rmin: float = 4.0,
    rmax: float = 60.0,
    dr: float = 0.1,
    sha: str | None = None,
) -> int:
    """Write diabatic curves (and optionally adiabats) as CSV to ``stream``.

    Columns are ``R``, ``V_state1..V_state16`` and ``G23`` in hartree.  Case
    ``c`` appends the eigenvalues of every Omega block, case ``e`` those of
    the (J, parity) block including rotation.  Returns the number of rows.
    """
    if hunds_case not in ("a", "c", "e"):
        raise ConfigError("hunds_case must be a, c or e")
    if not (dr > 0 and rmax > rmin > 0):
        raise ConfigError("need 0 < rmin < rmax and dr > 0")
    n = int(math.floor((rmax - rmin) / dr + 1e-9)) + 1
    R = rmin + dr * np.arange(n)
    M = surface.matrix(R)
    cols = ["R"] + [f"V_state{k + 1}" for k in range(16)] + ["G23"]
    data = [np.diagonal(M, axis1=1, axis2=2), M[:, 1, 2][:, None]]
    if hunds_case == "c":
        for om, vals in adiabats_case_c(surface, R, track=True).items():
            cols += [f"U_{om}_{k}" for k in range(vals.shape[1])]
            data.append(vals)
    elif hunds_case == "e":
        vals = adiabats_case_e(surface, J, parity, R, track=True)
        tag = "p" if parity > 0 else "m"
        cols += [f"U_J{J}{tag}_{k}" for k in range(vals.shape[1])]
        data.append(vals)
    table = np.hstack([R[:, None]] + data)
    stream.write(f"#config_sha256={sha or 'default'}\n#energy_unit=hartree above S+S\n#hunds_case={hunds_case}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(cols)
    for row in table:
        w.writerow([repr(float(x)) for x in row])
    return n


def emit_plotdata(out_dir, style: str, cfg: RunConfig | None = None, surface: PotentialSurfaceSet | None = None) -> list[Path]:
    """Write the CSV bundle of one figure style into ``out_dir/plot``."""
    out = Path(out_dir)
    plot = out / "plot"
    plot.mkdir(parents=True, exist_ok=True)
    sha = cfg.sha256 if cfg is not None else None
    if style in ("pecs", "adiabats"):
        if surface is None:
            surface = build_surface(cfg) if cfg is not None else None
        if surface is None:
            raise ArtifactError("pecs/adiabats need a configuration")
        head = [f"config_sha256={sha or 'default'}", "energy_unit=cm-1 above S+S"]
        R = np.round(np.linspace(4.0, 60.0, 561), 10)
        if style == "pecs":
            V = surface.matrix(R)
            names = [f"V{k + 1}" for k in range(16)]
            thr = [pec.threshold for pec in surface.pecs]
            head.append("threshold_cm1=" + ";".join(f"{hartree_to_cm1(t):.6f}" for t in thr))
            rows = [[f"{r:.6f}"] + [f"{hartree_to_cm1(V[i, k, k]):.6f}" for k in range(16)] for i, r in enumerate(R)]
            p = plot / "pecs.csv"
            _write_csv(p, head, ["R_bohr"] + names, rows)
            return [p]
        paths = []
        ad = adiabats_case_c(surface, R, track=True)
        for om, vals in ad.items():
            rows = [[f"{r:.6f}"] + [f"{hartree_to_cm1(v):.6f}" for v in vals[i]] for i, r in enumerate(R)]
            p = plot / f"adiabats_{om.replace('+', 'plus').replace('-', 'minus')}.csv"
            _write_csv(p, head, ["R_bohr"] + [f"U{k}" for k in range(vals.shape[1])], rows)
            paths.append(p)
        return paths

    xs = out / "xsec.csv"
    if not xs.exists():
        raise ArtifactError(f"{xs} not found; run 'xsec-scan' first")
    meta, rows = read_table(xs)
    _check_hash(meta, sha, xs)
    c4 = 82.2
    mu = 10481.62
    if cfg is not None:
        s = surface or build_surface(cfg)
        c4, mu = s.c4, s.reduced_mass
    procs = sorted({r["process"] for r in rows})
    e = None
    cols = {}
    for pr in procs:
        e, tot, _ = _xsec_arrays(rows, pr)
        cols[pr] = tot
    head = [f"config_sha256={meta['config_sha256']}", f"entrance={meta.get('entrance', '')}"]
    eh = np.array([kelvin_to_hartree(x) for x in e])
    if style == "xsec":
        sl = langevin_sigma(eh, c4)
        data = [[f"{e[i]:.10e}"] + [f"{cols[p][i]:.10e}" for p in procs] + [f"{sl[i]:.10e}"] for i in range(len(e))]
        p = plot / "xsec.csv"
        _write_csv(p, head, ["energy_K"] + [f"sigma_{p}" for p in procs] + ["sigma_langevin"], data)
        return [p]
    if style == "rates":
        rm = out / "rates.csv"
        if rm.exists():
            _check_hash(read_table(rm)[0], meta["config_sha256"], rm)
        au = CONSTANTS.au_rate_in_cm3_per_s
        kl = langevin_rate(c4, mu) * au
        K = {p: rate_from_cross_section(cols[p], eh, mu) * au for p in procs}
        data = [[f"{e[i]:.10e}"] + [f"{K[p][i]:.10e}" for p in procs] + [f"{kl:.10e}"] for i in range(len(e))]
        p1 = plot / "rates.csv"
        _write_csv(p1, head, ["energy_K"] + [f"K_{p}" for p in procs] + ["K_langevin"], data)
        paths = [p1]
        t_lo, t_hi = e[0] * 300.0 * (1 + 1e-9), e[-1] / 300.0 * (1 - 1e-9)
        if t_hi > t_lo:
            T = np.logspace(math.log10(t_lo), math.log10(t_hi), 41)
            th = {p: [thermal_rate(t, eh, K[p]) for t in T] for p in procs}
            data = [[f"{T[i]:.10e}"] + [f"{th[p][i]:.10e}" for p in procs] + [f"{kl:.10e}"] for i in range(len(T))]
            p2 = plot / "rates_thermal.csv"
            _write_csv(p2, head, ["T_K"] + [f"K_{p}" for p in procs] + ["K_langevin"], data)
            paths.append(p2)
        return paths
    raise ValueError(f"unknown style {style!r}; use xsec, rates, pecs or adiabats")
