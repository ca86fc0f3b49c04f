"""Seeded ensembles, single-instance verification and figure-data emission."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError, BudgetError, FormatError, SupportViolation
from .infomeasures import run_scenario
from .instance import load_instance
from .qcore import Layout
from .qstates import (
    RNG_ALGORITHM,
    STATE_MEASURE,
    RngSpec,
    UnitaryGate,
    identity_gate,
    random_density,
    random_unitary,
    swap_gate,
)
from .theorems import FTReport, Tolerances, evaluate_passes, verify_scenario
from .trajectories import backward_classical, backward_quasi, dump_jsonl, forward_classical, forward_quasi

log = logging.getLogger(__name__)

SCENARIOS = ("random", "swap", "identity")
DEFAULT_BUDGET = 10**8
QUANTITIES = ("cl", "q", "c")


@dataclass(frozen=True)
class EnsembleConfig:
    sites: int = 3
    local_dim: int = 2
    env_dim: int = 2
    samples: int = 1000
    scenario: str = "random"
    seed: int = 42
    compute_quasi: bool = True
    dump_distributions: bool = False
    budget: int = DEFAULT_BUDGET
    out: str | None = None

    def __post_init__(self):
        if self.sites < 1:
            raise ArgumentError(f"sites must be >= 1, got {self.sites}")
        if self.local_dim < 2 or self.env_dim < 2:
            raise ArgumentError("local and environment dimensions must be >= 2")
        if self.samples < 1:
            raise ArgumentError(f"samples must be >= 1, got {self.samples}")
        if self.scenario not in SCENARIOS:
            raise ArgumentError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.scenario == "swap" and self.local_dim != self.env_dim:
            raise ArgumentError("the swap scenario needs local_dim == env_dim")
        RngSpec(self.seed)

    def term_count(self) -> int:
        """Exact number of enumerated terms per instance."""
        ds = self.local_dim**self.sites
        de = self.env_dim**self.sites
        classical = ds * de * ds * de
        return ds**4 * de**2 if self.compute_quasi else classical

    def check_budget(self) -> int:
        need = self.term_count()
        if need > self.budget:
            raise BudgetError(need, self.budget)
        return need

    def fingerprint(self) -> str:
        """Hash of every field that affects the numbers written."""
        keys = ("sites", "local_dim", "env_dim", "samples", "scenario", "seed", "compute_quasi")
        blob = json.dumps({k: getattr(self, k) for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EnsembleRecord:
    sample_id: int
    failed: bool = False
    error: str = ""
    report: FTReport | None = None
    elapsed: float = 0.0


def draw_instance(cfg: EnsembleConfig, sample_id: int):
    """ρ_S, then each ρ_E_j, then each gate, all from the (seed, sample_id) stream."""
    gen = RngSpec(cfg.seed, sample_id).generator()
    n, d, e = cfg.sites, cfg.local_dim, cfg.env_dim
    rho_S = random_density(d**n, rng=gen, layout=Layout.from_dims("S", [d] * n))
    rho_E = [random_density(e, rng=gen, layout=Layout(((f"E{j + 1}", e),))) for j in range(n)]
    pairs = [(f"S{j + 1}", f"E{j + 1}") for j in range(n)]
    if cfg.scenario == "random":
        gates = [UnitaryGate(random_unitary(d * e, gen), p) for p in pairs]
    elif cfg.scenario == "swap":
        gates = [swap_gate(d, e, p) for p in pairs]
    else:
        gates = [identity_gate(d, e, p) for p in pairs]
    return rho_S, rho_E, gates


def _dump(sc, cfg: EnsembleConfig, sample_id: int) -> None:
    base = Path(cfg.out or "results.csv")
    folder = base.with_name(base.stem + "_dist")
    folder.mkdir(parents=True, exist_ok=True)
    dists = {"PF": forward_classical(sc), "PB": backward_classical(sc)}
    if cfg.compute_quasi:
        dists.update(QF=forward_quasi(sc), QB=backward_quasi(sc))
    for name, dist in dists.items():
        with open(folder / f"sample_{sample_id:06d}_{name}.jsonl", "w") as fh:
            dump_jsonl(dist, fh)


def run_sample(cfg: EnsembleConfig, sample_id: int) -> EnsembleRecord:
    t0 = time.perf_counter()
    rec = EnsembleRecord(sample_id)
    try:
        sc = run_scenario(*draw_instance(cfg, sample_id))
        rec.report = verify_scenario(sc, instance_id=str(sample_id), compute_quasi=cfg.compute_quasi)
        if cfg.dump_distributions:
            _dump(sc, cfg, sample_id)
    except SupportViolation as exc:
        rec.failed = True
        rec.error = str(exc)
        log.warning("sample %d failed: %s", sample_id, exc)
    rec.elapsed = time.perf_counter() - t0
    return rec


def _run_chunk(args) -> list[EnsembleRecord]:
    cfg, ids = args
    return [run_sample(cfg, i) for i in ids]


def worker_count() -> int:
    env = os.environ.get("FTLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ArgumentError(f"FTLAB_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_ensemble(cfg: EnsembleConfig, workers: int | None = None) -> list[EnsembleRecord]:
    """All samples of ``cfg``, sorted by sample_id whatever the execution order."""
    cfg.check_budget()
    workers = workers or worker_count()
    ids = list(range(cfg.samples))
    if workers == 1 or cfg.samples == 1:
        records = _run_chunk((cfg, ids))
    else:
        chunks = [(cfg, ids[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]
    return sorted(records, key=lambda r: r.sample_id)


# ------------------------------------------------------------------ CSV

PASS_NAMES = (
    "ift_cl", "exp_cl", "moment_cl", "detailed_cl", "nonneg_dI_cl", "nonneg_dI",
    "ift_q", "exp_q", "moment_q", "detailed_q",
    "ift_c", "exp_c", "moment_c", "detailed_c", "nonneg_dC",
)
NUMERIC_COLUMNS = ["dI", "dI_cl", "dC"] + [
    f"{name}_{q}" for q in QUANTITIES
    for name in ("ift_re", "ift_im", "m1_re", "m1_im", "m2", "bound", "detailed")
] + ["dephasing_deviation"]
COLUMNS = ["sample_id", "failed", "error"] + NUMERIC_COLUMNS + [f"pass_{p}" for p in PASS_NAMES] + ["all_pass"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def record_row(rec: EnsembleRecord) -> dict:
    row = {c: "" for c in COLUMNS}
    row["sample_id"] = str(rec.sample_id)
    row["failed"] = _fmt(rec.failed)
    row["error"] = rec.error
    r = rec.report
    if r is None:
        row["all_pass"] = "0"
        return row
    row.update(dI=_fmt(r.info["dI"]), dI_cl=_fmt(r.info["dI_cl"]), dC=_fmt(r.info["dC"]))
    for q in QUANTITIES:
        ift, m1 = getattr(r, f"ift_{q}"), getattr(r, f"exp_{q}")
        if ift is None:
            continue
        row[f"ift_re_{q}"], row[f"ift_im_{q}"] = _fmt(ift.real), _fmt(ift.imag)
        row[f"m1_re_{q}"], row[f"m1_im_{q}"] = _fmt(m1.real), _fmt(m1.imag)
        row[f"m2_{q}"] = _fmt(getattr(r, f"m2_{q}"))
        row[f"bound_{q}"] = _fmt(getattr(r, f"bound_{q}"))
        row[f"detailed_{q}"] = _fmt(getattr(r, f"detailed_residual_{q}"))
    row["dephasing_deviation"] = _fmt(r.dephasing_deviation)
    for name, ok in r.passes.items():
        row[f"pass_{name}"] = _fmt(ok)
    row["all_pass"] = _fmt(r.all_pass)
    return row


def header_lines(cfg: EnsembleConfig, tol: Tolerances) -> list[str]:
    meta = {
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("out",)},
        "config_hash": cfg.fingerprint(),
        "tolerances": asdict(tol),
        "rng": RNG_ALGORITHM,
        "state_measure": STATE_MEASURE,
        "final_basis_interpretation": "product of local final eigenbases",
        "version": __version__,
    }
    return [f"# ftlab {json.dumps(meta, sort_keys=True)}"]


def write_csv(records: list[EnsembleRecord], cfg: EnsembleConfig, fh, tol: Tolerances | None = None) -> None:
    for line in header_lines(cfg, tol or Tolerances()):
        fh.write(line + "\n")
    writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in sorted(records, key=lambda r: r.sample_id):
        writer.writerow(record_row(rec))


def ensemble_csv(records, cfg: EnsembleConfig) -> str:
    buf = io.StringIO()
    write_csv(records, cfg, buf)
    return buf.getvalue()


def read_results(path) -> tuple[dict, list[dict]]:
    """Metadata from the ``# ftlab`` header line and the data rows."""
    text = Path(path).read_text()
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# ftlab "):
            meta = json.loads(line[len("# ftlab "):])
        elif not line.startswith("#"):
            body.append(line)
    if not body:
        raise FormatError(f"{path}: no CSV header or rows")
    reader = csv.DictReader(body)
    rows = list(reader)
    missing = [c for c in ("sample_id", "failed") + tuple(NUMERIC_COLUMNS) if c not in (reader.fieldnames or [])]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return meta, rows


def _num(row: dict, key: str) -> float | None:
    v = row.get(key, "")
    return float(v) if v not in ("", None) else None


def report_from_row(row: dict, tol: Tolerances) -> FTReport:
    """Rebuild the pass-relevant part of an FTReport from a CSV row."""
    kwargs = {}
    for q in QUANTITIES:
        re_ = _num(row, f"ift_re_{q}")
        if re_ is None:
            continue
        kwargs[f"ift_{q}"] = complex(re_, _num(row, f"ift_im_{q}"))
        kwargs[f"exp_{q}"] = complex(_num(row, f"m1_re_{q}"), _num(row, f"m1_im_{q}"))
        kwargs[f"m2_{q}"] = _num(row, f"m2_{q}")
        kwargs[f"bound_{q}"] = _num(row, f"bound_{q}")
        kwargs[f"detailed_residual_{q}"] = _num(row, f"detailed_{q}")
    info = {"dI": _num(row, "dI"), "dI_cl": _num(row, "dI_cl"), "dC": _num(row, "dC")}
    return FTReport(instance_id=row["sample_id"], info=info, tolerances=tol, **kwargs)


def recompute_passes(row: dict, tol: Tolerances) -> dict:
    return evaluate_passes(report_from_row(row, tol))


# ------------------------------------------------------------ verify / figures


def verify_instance(path, report_path=None, compute_quasi: bool = True) -> FTReport:
    rho_S, rho_E, gates = load_instance(path)
    sc = run_scenario(rho_S, rho_E, gates)
    report = verify_scenario(sc, instance_id=Path(path).stem, compute_quasi=compute_quasi)
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report.to_dict(), indent=2))
    return report


def emit_fig(results, which: str, out) -> dict:
    """Turn an ensemble CSV into plot-ready rows.

    ``ift``: one row per (sample, quantity) with the real and imaginary parts
    of <e^{-x}>. ``moments``: one row per (sample, quantity) with (m1, m2);
    the reference line m2 = 2 m1 goes into the header.
    """
    if which not in ("ift", "moments"):
        raise ArgumentError(f"which must be 'ift' or 'moments', got {which!r}")
    meta, rows = read_results(results)
    out_rows = []
    summary: dict = {"which": which, "rows": 0, "quantities": {}}
    for row in rows:
        if row["failed"] == "1":
            continue
        for q in QUANTITIES:
            if which == "ift":
                re_, im_ = _num(row, f"ift_re_{q}"), _num(row, f"ift_im_{q}")
                if re_ is None:
                    continue
                out_rows.append([row["sample_id"], q, repr(re_), repr(im_)])
                s = summary["quantities"].setdefault(q, {"count": 0, "max_dev": 0.0})
                s["count"] += 1
                s["max_dev"] = max(s["max_dev"], abs(complex(re_, im_) - 1))
            else:
                m1, m2 = _num(row, f"m1_re_{q}"), _num(row, f"m2_{q}")
                if m1 is None:
                    continue
                out_rows.append([repr(m1), repr(m2), q])
                s = summary["quantities"].setdefault(
                    q, {"count": 0, "max_excess_small": None, "max_gap_over_bound_small": None})
                s["count"] += 1
                if abs(m1) <= 0.1:
                    gap = m2 - 2 * m1
                    bound = _num(row, f"bound_{q}") or 0.0
                    s["max_excess_small"] = gap if s["max_excess_small"] is None else max(s["max_excess_small"], gap)
                    ratio = abs(gap) / bound if bound > 0 else (0.0 if gap == 0 else float("inf"))
                    prev = s["max_gap_over_bound_small"]
                    s["max_gap_over_bound_small"] = ratio if prev is None else max(prev, ratio)
    with open(out, "w", newline="") as fh:
        source = {"results": str(results), "config_hash": meta.get("config_hash")}
        if which == "ift":
            fh.write(f"# ftlab-fig {json.dumps({**source, 'reference': 'ift = 1 + 0i'})}\n")
            header = ["sample_id", "quantity", "re", "im"]
        else:
            fh.write(f"# ftlab-fig {json.dumps({**source, 'reference': 'y = 2x'})}\n")
            header = ["m1", "m2", "quantity"]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(out_rows)
    summary["rows"] = len(out_rows)
    return summary
