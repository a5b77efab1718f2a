"""Degradation pipeline (artifacts, then under-sampling) and the experiment
runner producing per-cell CSVs, a summary table and trend checks."""

import csv
import io
import logging
import math
import os
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .. import metrics
from ..artifacts import (OrderKind, acquisition_order, add_gaussian_noise, calibrate_sigma,
                         simulate_motion)
from ..core import ValidationError, fft2c, ifft2c
from ..phantom import brain_phantom_spec, estimate_foreground, generate_phantom
from ..recon import cascade_run, evaluate_external, reference_image, zero_filled
from ..sampling import MaskSpec, SamplingMask, apply_mask, make_mask
from .io import atomic_write, export_pgm, import_kcpx

log = logging.getLogger(__name__)

RAYLEIGH_STD = math.sqrt(2.0 - math.pi / 2.0)
TREND_R = (2.0, 5.0, 10.0)
MAX_RELATIVE_ARTIFACT_DROP = 0.25
MIN_WIN_FRACTION = 0.95


def derive_seed(seed, *tags):
    """Deterministic 63-bit sub-seed for a named random stream."""
    words = [int(seed)] + [zlib.crc32(str(t).encode()) for t in tags]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0] >> 1)


def image_seed(master_seed, index):
    return int(master_seed) ^ int(index)


@dataclass(frozen=True)
class NoiseSpec:
    """Either a fixed k-space ``sigma`` or an SNR scaling ``snr_factor``."""

    sigma: float = None
    snr_factor: float = None

    def __post_init__(self):
        if (self.sigma is None) == (self.snr_factor is None):
            raise ValidationError("NoiseSpec needs exactly one of sigma / snr_factor")
        if self.sigma is not None and self.sigma < 0:
            raise ValidationError("noise sigma must be non-negative")
        if self.snr_factor is not None and not 0 < self.snr_factor <= 1:
            raise ValidationError("snr_factor must lie in (0, 1]")


@dataclass(frozen=True)
class DegradationSpec:
    mask: object = None  # MaskSpec, SamplingMask or None (fully sampled)
    noise: NoiseSpec = None
    motion: tuple = ()
    order: OrderKind = OrderKind.LINEAR
    seed: int = 0


def resolve_noise_sigma(k_full, noise, masks, seed):
    if noise.sigma is not None:
        return noise.sigma
    if masks is None:
        masks = estimate_foreground(reference_image(ifft2c(k_full)))
    return calibrate_sigma(k_full, masks, noise.snr_factor, seed=derive_seed(seed, "calibrate"))


def degrade(k_full, spec, masks=None, sigma=None):
    """Apply motion, then noise, then the line mask to fully sampled k-space.

    ``sigma`` overrides the noise calibration when already known (the
    runner calibrates once per image). Returns ``(k_degraded, mask)``.
    """
    k = np.asarray(k_full, dtype=np.complex128)
    H = k.shape[0]
    if spec.motion:
        k = simulate_motion(ifft2c(k), spec.motion, acquisition_order(H, spec.order))
    if spec.noise is not None:
        if sigma is None:
            sigma = resolve_noise_sigma(k_full, spec.noise, masks, spec.seed)
        k = add_gaussian_noise(k, sigma, derive_seed(spec.seed, "noise"))
    if spec.mask is None:
        mask = SamplingMask.full(H)
    elif isinstance(spec.mask, MaskSpec):
        mask = make_mask(spec.mask)
    else:
        mask = spec.mask
    return apply_mask(k, mask), mask


@dataclass
class Subject:
    image_id: str
    seed: int
    k_full: np.ndarray
    reference: np.ndarray
    masks: object


def phantom_subject(index, master_seed, size=256, texture=0.02, baseline_snr=40.0):
    """Fully sampled phantom acquisition with a thermal noise floor.

    The floor sigma is set so that the magnitude image has the requested
    SNR, using the Rayleigh standard deviation of pure-noise background.
    """
    seed = image_seed(master_seed, index)
    img, masks = generate_phantom(brain_phantom_spec(size, seed=seed, texture=texture))
    k = fft2c(img)
    if baseline_snr:
        fg_mean = float(np.mean(np.abs(img)[masks.foreground]))
        sigma0 = fg_mean / (baseline_snr * RAYLEIGH_STD)
        k = add_gaussian_noise(k, sigma0, derive_seed(seed, "baseline"))
    return Subject(f"phantom{index:03d}", seed, k, reference_image(ifft2c(k)), masks)


def load_subjects(cfg):
    src = cfg.source
    if src.kind == "phantom":
        return [phantom_subject(i, cfg.seed, src.size, src.texture, src.baseline_snr)
                for i in range(src.count)]
    subjects = []
    for i, path in enumerate(src.paths):
        x, domain = import_kcpx(path)
        k = x if domain == "kspace" else fft2c(x)
        ref = reference_image(ifft2c(k))
        name = os.path.splitext(os.path.basename(path))[0]
        subjects.append(Subject(name, image_seed(cfg.seed, i), k, ref, estimate_foreground(ref)))
    return subjects


def _reconstruct(recon_spec, k_deg, mask):
    if recon_spec.kind == "zero_filled":
        return zero_filled(k_deg, mask)
    return cascade_run(k_deg, mask, recon_spec.cascade).image


@dataclass
class CellResult:
    cell: object
    recon: str
    report: metrics.MetricsReport = field(default_factory=metrics.MetricsReport)
    errors: list = field(default_factory=list)

    @property
    def cell_id(self):
        return f"{self.cell.cell_id}-{self.recon}"


def _cell_mask_spec(cfg, cell, H, seed):
    return MaskSpec(cell.strategy, cell.acceleration, cfg.acs_fraction(cell.acceleration), H,
                    seed=derive_seed(seed, "mask", cell.strategy.value, cell.acceleration),
                    gradient_alpha=cfg.gradient_alpha)


def run_cells(cfg, subjects=None):
    """Degrade, reconstruct and score every matrix cell; returns CellResults."""
    subjects = load_subjects(cfg) if subjects is None else subjects
    sigmas = {}
    results = []
    for cell, recon_names in cfg.cells():
        cell_results = [CellResult(cell, n) for n in recon_names]
        shared_mask = None
        for subj in subjects:
            try:
                H = subj.k_full.shape[0]
                if cfg.per_image_masks:
                    mask = make_mask(_cell_mask_spec(cfg, cell, H, subj.seed))
                else:
                    if shared_mask is None or len(shared_mask) != H:
                        shared_mask = make_mask(_cell_mask_spec(cfg, cell, H, cfg.seed))
                    mask = shared_mask
                noise = motion = None
                sigma = None
                if "noise" in cell.artifact:
                    noise = NoiseSpec(cfg.noise.sigma, cfg.noise.snr_factor)
                    if subj.image_id not in sigmas:
                        sigmas[subj.image_id] = resolve_noise_sigma(
                            subj.k_full, noise, subj.masks, subj.seed)
                    sigma = sigmas[subj.image_id]
                if "motion" in cell.artifact:
                    motion = cfg.motion.events
                spec = DegradationSpec(mask, noise, motion or (), cfg.motion.order, subj.seed)
                k_deg, mask = degrade(subj.k_full, spec, subj.masks, sigma)
            except Exception as exc:  # recorded, run continues
                log.warning("cell %s image %s: degradation failed: %s", cell.cell_id,
                            subj.image_id, exc)
                for cr in cell_results:
                    cr.errors.append((subj.image_id, f"{type(exc).__name__}: {exc}"))
                continue
            for cr in cell_results:
                try:
                    image = _reconstruct(cfg.recon_by_name(cr.recon), k_deg, mask)
                    rep = evaluate_external([image], [subj.reference], [subj.masks],
                                            ids=[subj.image_id])
                    cr.report.rows.extend(rep.rows)
                    if cfg.write_images:
                        d = os.path.join(cfg.out_dir, "images", cr.cell_id)
                        export_pgm(subj.reference, os.path.join(d, f"{subj.image_id}_original.pgm"))
                        export_pgm(reference_image(ifft2c(k_deg)),
                                   os.path.join(d, f"{subj.image_id}_degraded.pgm"))
                        export_pgm(reference_image(image),
                                   os.path.join(d, f"{subj.image_id}_recon.pgm"))
                except Exception as exc:
                    log.warning("cell %s image %s: %s", cr.cell_id, subj.image_id, exc)
                    cr.errors.append((subj.image_id, f"{type(exc).__name__}: {exc}"))
        for cr in cell_results:
            log.info("cell %s: %d images, %d errors, ssimf %.4f", cr.cell_id,
                     len(cr.report.rows), len(cr.errors), cr.report.mean("ssimf"))
        results.extend(cell_results)
    return results


def original_report(subjects):
    """Reference-free metrics of the fully sampled originals."""
    rows = []
    for s in subjects:
        try:
            snr = metrics.snr_rf(s.reference, s.masks)
        except ValidationError:
            snr = math.nan
        rows.append(metrics.ImageMetrics(s.image_id, 1.0, metrics.PSNR_CAP, 1.0, snr,
                                         metrics.contrast(s.reference, s.masks)))
    return metrics.MetricsReport(rows)


SUMMARY_FIELDS = ("cell", "acceleration", "mask", "artifact", "recon", "n", "n_errors") + tuple(
    f"{m}_{s}" for m in metrics.METRIC_NAMES for s in ("mean", "std")) + ("error",)


def summary_rows(results, original=None):
    rows = []
    if original is not None:
        row = {"cell": "original", "acceleration": "", "mask": "original", "artifact": "none",
               "recon": "", "n": len(original.rows), "n_errors": 0, "error": ""}
        for m in metrics.METRIC_NAMES:
            keep = m in ("snr", "contrast")
            row[f"{m}_mean"] = repr(original.mean(m)) if keep else ""
            row[f"{m}_std"] = repr(original.std(m)) if keep else ""
        rows.append(row)
    for cr in results:
        row = {"cell": cr.cell_id, "acceleration": f"{cr.cell.acceleration:g}",
               "mask": cr.cell.strategy.value, "artifact": cr.cell.artifact, "recon": cr.recon,
               "n": len(cr.report.rows), "n_errors": len(cr.errors),
               "error": "; ".join(f"{i}: {e}" for i, e in cr.errors)}
        for m in metrics.METRIC_NAMES:
            row[f"{m}_mean"] = repr(cr.report.mean(m))
            row[f"{m}_std"] = repr(cr.report.std(m))
        rows.append(row)
    return rows


def summary_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def summary_markdown(rows):
    """Markdown table: one row per cell, mean ± std per metric."""
    head = "| Acc. | US mask | Artifact | Recon | SSIMf | PSNR (dB) | MS-SSIM | SNR | Contrast |"
    lines = [head, "|" + "---|" * 9]
    for r in rows:
        cells = []
        for m in metrics.METRIC_NAMES:
            mean, std = r[f"{m}_mean"], r[f"{m}_std"]
            cells.append("" if mean == "" else f"{float(mean):.3f} ± {float(std):.3f}")
        acc = f"{r['acceleration']}x" if r["acceleration"] else ""
        lines.append(f"| {acc} | {r['mask']} | {r['artifact']} | {r['recon']} | "
                     + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrendCheck:
    name: str
    passed: bool
    detail: str
    deviation: bool = False

    def line(self):
        status = "PASS" if self.passed else ("DEVIATION" if self.deviation else "FAIL")
        return f"[{status}] {self.name}: {self.detail}"


def _find(results, strategy, acc, artifact, recon):
    for cr in results:
        c = cr.cell
        if (c.strategy.value == strategy and c.acceleration == acc and c.artifact == artifact
                and cr.recon == recon and cr.report.rows):
            return cr
    return None


def check_trends(results, recon="cascade", baseline="zero_filled"):
    """Check the expected qualitative orderings of a run.

    Checks whose cells are missing from the run are skipped. Strategy
    ordering inversions are reported as deviations, not failures.
    """
    checks = []
    grad = [_find(results, "gradient", r, "none", recon) for r in TREND_R]
    if all(grad):
        v = [g.report.mean("ssimf") for g in grad]
        ok = v[0] > v[1] > v[2]
        checks.append(TrendCheck(
            "ssimf decreases with acceleration (gradient)", ok,
            " > ".join(f"R{r:g}={x:.4f}" for r, x in zip(TREND_R, v))))
    strat = [_find(results, s, 5.0, "none", recon) for s in ("gradient", "random", "uniform")]
    if all(strat):
        ms = [(c.report.mean("ssimf"), c.report.std("ssimf")) for c in strat]
        ok = all(a[0] >= b[0] - max(a[1], b[1]) for a, b in zip(ms, ms[1:]))
        strict = ms[0][0] >= ms[1][0] >= ms[2][0]
        detail = "gradient %.4f±%.4f, random %.4f±%.4f, uniform %.4f±%.4f" % (
            ms[0] + ms[1] + ms[2])
        if ok and not strict:
            detail += " (ordering holds only within std)"
        checks.append(TrendCheck("strategy ordering at R5: gradient >= random >= uniform",
                                 ok, detail, deviation=not ok))
    clean = _find(results, "gradient", 5.0, "none", recon)
    dirty = _find(results, "gradient", 5.0, "noise+motion", recon)
    dirty_base = _find(results, "gradient", 5.0, "noise+motion", baseline)
    if clean and dirty:
        a, b = clean.report.mean("ssimf"), dirty.report.mean("ssimf")
        drop = (a - b) / a if a > 0 else math.nan
        ok = 0 < drop <= MAX_RELATIVE_ARTIFACT_DROP
        checks.append(TrendCheck(
            "noise+motion lowers ssimf by a bounded amount", ok,
            f"{a:.4f} -> {b:.4f} (relative drop {drop:.2%}, bound {MAX_RELATIVE_ARTIFACT_DROP:.0%})"))
    if dirty and dirty_base:
        ours = {r.image_id: r.ssimf for r in dirty.report.rows}
        base = {r.image_id: r.ssimf for r in dirty_base.report.rows}
        common = sorted(set(ours) & set(base))
        wins = sum(ours[i] > base[i] for i in common)
        frac = wins / len(common) if common else 0.0
        checks.append(TrendCheck(
            f"{recon} beats {baseline} under noise+motion", frac >= MIN_WIN_FRACTION,
            f"{wins}/{len(common)} images ({frac:.0%}, need {MIN_WIN_FRACTION:.0%})"))
    return checks


@dataclass
class ExperimentOutput:
    results: list
    original: metrics.MetricsReport
    summary: list
    trends: list


def run_experiment(cfg, out_dir=None):
    """Run the full matrix and write all report files under ``out_dir``."""
    out_dir = cfg.out_dir if out_dir is None else out_dir
    if out_dir != cfg.out_dir:
        cfg = replace(cfg, out_dir=out_dir)
    subjects = load_subjects(cfg)
    results = run_cells(cfg, subjects)
    original = original_report(subjects)
    rows = summary_rows(results, original)
    recon_names = [r.name for r in cfg.recon]
    cascade_name = next((r.name for r in cfg.recon if r.kind == "cascade"), None)
    base_name = next((r.name for r in cfg.recon if r.kind == "zero_filled"), None)
    trends = check_trends(results, cascade_name, base_name) if cascade_name else []
    for cr in results:
        atomic_write(os.path.join(out_dir, "cells", f"{cr.cell_id}.csv"), cr.report.to_csv())
    atomic_write(os.path.join(out_dir, "original.csv"), original.to_csv())
    atomic_write(os.path.join(out_dir, "summary.csv"), summary_csv(rows))
    atomic_write(os.path.join(out_dir, "summary.md"), summary_markdown(rows))
    errors = [(cr.cell_id, i, e) for cr in results for i, e in cr.errors]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("cell", "image_id", "error"))
    w.writerows(errors)
    atomic_write(os.path.join(out_dir, "errors.csv"), buf.getvalue())
    text = "".join(t.line() + "\n" for t in trends) or "no trend checks applicable\n"
    atomic_write(os.path.join(out_dir, "trends.txt"), text)
    log.info("wrote %d cells (%s) to %s", len(results), ", ".join(recon_names), out_dir)
    return ExperimentOutput(results, original, rows, trends)
