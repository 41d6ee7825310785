"""Ideal-GEA analysis of single pairs and batch benchmark reports.

"Ideal GEA" fits the per-image optimal anchor matrix against the ground truth
and applies it to the low-light input: an upper bound on what any predictor
of a single global affine matrix can achieve.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .anchoring import Family, diagnostics, fit_residual, ideal_gea
from .energy import (DEFAULT_BINS, DEFAULT_RANGE, TEXTURE_INPUT_RANGE, decompose_energy,
                     luminance_error_ratio, residual_histogram)
from .errors import GEAError, InvalidInputError
from .imgcore import COLOR_CONVENTION, as_rgb, check_same_shape, rgb_to_yuv
from .io import IMAGE_SUFFIXES, load_image
from .metrics import METRIC_CONVENTION, pair_score
from .registration import DEFAULT_MARGIN, register_pair
from .serialize import csv_text
from .wavelet import DEFAULT_GAMMA_L, dwt_haar, hf_freq_loss, lum_preservation_loss

log = logging.getLogger(__name__)


class ReportInvariantError(GEAError, AssertionError):
    """A benchmark row violates a guaranteed property."""


@dataclass(frozen=True)
class PairRecord:
    id: str
    low_path: Path
    gt_path: Path | None


@dataclass(frozen=True)
class BenchmarkConfig:
    families: tuple[Family, ...] = (Family.AFFINE12,)
    register: bool = False
    gamma_l: float = DEFAULT_GAMMA_L
    margin: int = DEFAULT_MARGIN
    model: str = "affine"
    bins: int = DEFAULT_BINS
    hist_range: tuple[float, float] = DEFAULT_RANGE

    def __post_init__(self):
        fams = tuple(dict.fromkeys(Family.parse(f) for f in self.families))
        if not fams:
            raise InvalidInputError("at least one matrix family is required")
        object.__setattr__(self, "families", fams)

    @property
    def primary_family(self) -> Family:
        return Family.AFFINE12 if Family.AFFINE12 in self.families else self.families[0]

    def to_dict(self) -> dict:
        return {
            "families": [f.value for f in self.families],
            "register": self.register,
            "registration_model": self.model,
            "margin": self.margin,
            "gamma_l": self.gamma_l,
            "histogram_bins": self.bins,
            "histogram_range": list(self.hist_range),
            "histogram_channel": "Y",
            "color_convention": COLOR_CONVENTION,
            "metric_convention": METRIC_CONVENTION,
            "texture_input_range": TEXTURE_INPUT_RANGE,
            "energy_normalization": "per-pixel mean",
            "seeds": None,
            "version": __version__,
        }


def wavelet_terms(aligned: np.ndarray, gt: np.ndarray, gamma_l: float) -> dict:
    """Luminance-band diagnostics of an aligned image against ``gt``.

    ``clu_reachable`` is the fraction of LL coefficients whose residual a
    constrained update with amplitude ``gamma_l`` could close.
    """
    y_al = rgb_to_yuv(aligned).y
    y_gt = rgb_to_yuv(gt).y
    ll_al = dwt_haar(y_al).ll
    ll_gt = dwt_haar(y_gt).ll
    return {
        "l_lum": lum_preservation_loss(ll_al, ll_gt),
        "l_freq": hf_freq_loss(y_al, y_gt),
        "clu_reachable": float(np.mean(np.abs(ll_gt - ll_al) < gamma_l)),
    }


def family_result(low: np.ndarray, gt: np.ndarray, family: Family,
                  gamma_l: float = DEFAULT_GAMMA_L) -> tuple[dict, np.ndarray]:
    m, aligned = ideal_gea(low, gt, family)
    out = {
        "matrix": m.to_dict(),
        "fit_residual": fit_residual(m, low, gt),
        "diagnostics": diagnostics(m, low).to_dict(),
        "score": pair_score(aligned, gt).to_dict(),
        "energy_post": decompose_energy(aligned, gt).to_dict(),
        "luminance_error_ratio": luminance_error_ratio(low, aligned, gt),
        "wavelet": wavelet_terms(aligned, gt, gamma_l),
    }
    return out, aligned


def analyze_pair(low, gt, family=Family.AFFINE12, gamma_l: float = DEFAULT_GAMMA_L,
                 bins: int = DEFAULT_BINS, hist_range=DEFAULT_RANGE) -> dict:
    """Full ideal-GEA analysis of one pair, as written by ``gea analyze``."""
    low = as_rgb(low, "low")
    gt = as_rgb(gt, "gt")
    check_same_shape(low, gt, names=("low", "gt"))
    family = Family.parse(family)
    res, aligned = family_result(low, gt, family, gamma_l)
    return {
        "config": {
            "family": family.value,
            "gamma_l": gamma_l,
            "histogram_bins": bins,
            "histogram_range": list(hist_range),
            "histogram_channel": "Y",
            "color_convention": COLOR_CONVENTION,
            "metric_convention": METRIC_CONVENTION,
            "texture_input_range": TEXTURE_INPUT_RANGE,
        },
        "matrix": res["matrix"],
        "fit_residual": res["fit_residual"],
        "diagnostics": res["diagnostics"],
        "energy_pre": decompose_energy(low, gt).to_dict(),
        "energy_post": res["energy_post"],
        "histogram_pre": residual_histogram(low, gt, "Y", bins, hist_range).to_dict(),
        "histogram_post": residual_histogram(aligned, gt, "Y", bins, hist_range).to_dict(),
        "luminance_error_ratio": res["luminance_error_ratio"],
        "score_pre": pair_score(low, gt).to_dict(),
        "score_post": res["score"],
        "wavelet_pre": wavelet_terms(low, gt, gamma_l),
        "wavelet_post": res["wavelet"],
    }


# --- dataset discovery ---------------------------------------------------------

def _image_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        return []
    # For a repeated stem the first suffix in IMAGE_SUFFIXES wins.
    files = [p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    return sorted(files, key=lambda p: (p.stem, IMAGE_SUFFIXES.index(p.suffix.lower()), p.name))


def discover_pairs(dataset_dir, manifest=None) -> tuple[list[PairRecord], list[dict]]:
    """Find ``(low, gt)`` pairs.

    Uses ``manifest`` (CSV with columns ``id,low,gt``; paths relative to the
    dataset directory) when given or when ``<dir>/manifest.csv`` exists,
    otherwise pairs ``<dir>/low/<id>.*`` with ``<dir>/high/<id>.*``.
    Returns the usable records and the list of pairs skipped at discovery.
    """
    root = Path(dataset_dir)
    if manifest is None and (root / "manifest.csv").is_file():
        manifest = root / "manifest.csv"
    records: list[PairRecord] = []
    skipped: list[dict] = []
    seen: set[str] = set()
    if manifest is not None:
        with open(manifest, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                try:
                    pid, low, gt = row["id"].strip(), row["low"].strip(), row["gt"].strip()
                except (KeyError, AttributeError):
                    raise InvalidInputError(f"manifest {manifest} needs columns id,low,gt") from None
                if pid in seen:
                    skipped.append({"id": pid, "reason": "duplicate id"})
                    continue
                seen.add(pid)
                records.append(PairRecord(pid, root / low, root / gt))
    else:
        high = {}
        for p in _image_files(root / "high"):
            high.setdefault(p.stem, p)
        for p in _image_files(root / "low"):
            if p.stem in seen:
                skipped.append({"id": p.stem, "reason": "duplicate id"})
                continue
            seen.add(p.stem)
            records.append(PairRecord(p.stem, p, high.get(p.stem)))
    records.sort(key=lambda r: r.id)
    return records, skipped


# --- benchmark ------------------------------------------------------------------

@dataclass
class _PairOutcome:
    row: dict | None = None
    reason: str | None = None
    hist_pre: object = None
    hist_post: object = None


def _evaluate(record: PairRecord, config: BenchmarkConfig) -> _PairOutcome:
    if record.gt_path is None:
        return _PairOutcome(reason="no matching ground-truth image")
    try:
        low = load_image(record.low_path)
        gt = load_image(record.gt_path)
        check_same_shape(low, gt, names=("low", "gt"))
        row: dict = {"id": record.id}
        if config.register:
            reg = register_pair(low, gt, margin=config.margin, model=config.model)
            low, gt = reg.low, reg.gt
            row["registration"] = {
                "warp": reg.warp.to_dict(),
                "crop": reg.crop.to_dict(),
                "final_ecc": reg.ecc.final_ecc,
                "iterations": reg.ecc.iterations,
                "converged": reg.ecc.converged,
            }
        row["score_pre"] = pair_score(low, gt).to_dict()
        row["energy_pre"] = decompose_energy(low, gt).to_dict()
        row["families"] = {}
        out = _PairOutcome(row=row)
        out.hist_pre = residual_histogram(low, gt, "Y", config.bins, config.hist_range)
        for fam in config.families:
            res, aligned = family_result(low, gt, fam, config.gamma_l)
            row["families"][fam.value] = res
            if fam is config.primary_family:
                out.hist_post = residual_histogram(aligned, gt, "Y", config.bins,
                                                   config.hist_range)
        return out
    except (GEAError, OSError) as exc:
        return _PairOutcome(reason=f"{type(exc).__name__}: {exc}")


def _flatten(d: dict, prefix: str = "") -> dict[str, float]:
    out: dict[str, float] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = float(v)
    return out


def row_columns(row: dict) -> dict[str, float]:
    """Numeric scalar columns of a report row, keyed by dotted path."""
    return _flatten({k: v for k, v in row.items() if k != "id"})


def compute_aggregates(rows: list[dict]) -> dict:
    """Mean and median of every numeric column plus energy-share summaries."""
    cols: dict[str, list[float]] = {}
    for row in rows:
        for k, v in row_columns(row).items():
            cols.setdefault(k, []).append(v)
    columns = {}
    for k in sorted(cols):
        vals = cols[k]
        finite = [v for v in vals if not math.isnan(v)]
        columns[k] = {
            "mean": math.fsum(finite) / len(finite) if finite else 0.0,
            "median": float(statistics.median(finite)) if finite else 0.0,
            "n": len(finite),
        }
    return {"columns": columns, "energy": _energy_summary(rows)}


def _shares(reports: list[dict]) -> dict:
    n = len(reports)
    mean_fractions = {f: math.fsum(r[f] for r in reports) / n for f in ("f_lum", "f_chr", "f_tex")}
    pooled = {e: math.fsum(r[e] for r in reports) for e in ("e_lum", "e_chr", "e_tex")}
    total = math.fsum(pooled.values())
    pooled_fractions = {
        "f_" + e[2:]: (pooled[e] / total if total > 0 else 0.0) for e in pooled
    }
    return {"mean_of_fractions": mean_fractions, "pooled_fractions": pooled_fractions}


def _energy_summary(rows: list[dict]) -> dict:
    if not rows:
        return {}
    out = {"pre": _shares([r["energy_pre"] for r in rows]), "post": {}}
    for fam in rows[0]["families"]:
        out["post"][fam] = _shares([r["families"][fam]["energy_post"] for r in rows])
    return out


def check_row(row: dict) -> None:
    fam = row["families"].get(Family.AFFINE12.value)
    if fam is None:
        return
    pre = row["score_pre"]["psnr_db"]
    post = fam["score"]["psnr_db"]
    if not post >= pre:
        raise ReportInvariantError(
            f"pair {row['id']}: post-anchor PSNR {post} is below pre-anchor PSNR {pre}"
        )


def run_benchmark(records: list[PairRecord], config: BenchmarkConfig, threads: int | None = None,
                  discovery_skipped: list[dict] | None = None) -> dict:
    """Evaluate every record and assemble the report dictionary.

    Work is spread over ``threads`` workers; rows are assembled in id order so
    the report does not depend on scheduling.
    """
    threads = max(1, int(threads or os.cpu_count() or 1))
    records = sorted(records, key=lambda r: r.id)
    if threads == 1:
        outcomes = [_evaluate(r, config) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda r: _evaluate(r, config), records))

    skipped = list(discovery_skipped or [])
    rows = []
    hist_pre = hist_post = None
    for rec, out in zip(records, outcomes):
        if out.row is None:
            log.warning("skipping pair %s: %s", rec.id, out.reason)
            skipped.append({"id": rec.id, "reason": out.reason})
            continue
        check_row(out.row)
        rows.append(out.row)
        hist_pre = out.hist_pre if hist_pre is None else hist_pre.merge(out.hist_pre)
        hist_post = out.hist_post if hist_post is None else hist_post.merge(out.hist_post)
    skipped.sort(key=lambda s: s["id"])

    return {
        "config": config.to_dict(),
        "counts": {
            "discovered": len(records) + len(discovery_skipped or []),
            "rows": len(rows),
            "skipped": len(skipped),
        },
        "skipped": skipped,
        "rows": rows,
        "aggregates": compute_aggregates(rows),
        "histograms": {
            "family": config.primary_family.value,
            "pre": hist_pre.to_dict() if hist_pre is not None else None,
            "post": hist_post.to_dict() if hist_post is not None else None,
        },
    }


def report_csv(report: dict) -> str:
    rows = report["rows"]
    keys = sorted({k for r in rows for k in row_columns(r)})
    body = []
    for r in rows:
        cols = row_columns(r)
        body.append([r["id"]] + [cols.get(k, "") for k in keys])
    return csv_text(["id"] + keys, body)
