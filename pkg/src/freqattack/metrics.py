"""Perturbation and quality metrics: Lp norms, SSIM, per-band cosine
similarity, the normalized-disturbance-visibility (NDV) index, and the
aggregation of per-example attack outcomes into ASR/ANQ/MNQ reports.
"""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

# number formatting for CSV/JSON artifacts; chosen so reruns are
# byte-identical and values round-trip through float64
_FMT = "%.12g"


def _fmt(v):
    if isinstance(v, float):
        return _FMT % v
    return str(v)


@dataclass(frozen=True)
class NdvConfig:
    """Constants of the NDV index: scale C, denominator epsilon, and the
    |diff| threshold above which an element counts as perturbed (L0)."""

    c: float = 1000.0
    eps: float = 1e-8
    zero_threshold: float = 1e-9

    def __post_init__(self):
        if self.c <= 0 or self.eps <= 0 or self.zero_threshold < 0:
            raise ValueError("invalid NdvConfig")


def cosine_similarity(f, f_adv):
    """|<f, f'>| / (||f|| ||f'||) over flattened coefficients, in [0, 1].

    Conventions: both zero -> 1.0 (identical), exactly one zero -> 0.0.
    """
    a = np.asarray(f, dtype=np.float64).ravel()
    b = np.asarray(f_adv, dtype=np.float64).ravel()
    if np.asarray(f).shape != np.asarray(f_adv).shape:
        raise ValueError("shape mismatch")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(abs(float(np.dot(a, b))) / (na * nb), 1.0)


def lp_metrics(x, x_adv, zero_threshold=1e-9):
    """(l2, linf, l0) of the difference; l0 counts |diff| > zero_threshold
    so reconstruction dust (~1e-12) never registers as a perturbed point."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_adv, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    diff = (a - b).ravel()
    l2 = float(np.linalg.norm(diff))
    linf = float(np.max(np.abs(diff))) if diff.size else 0.0
    l0 = int(np.count_nonzero(np.abs(diff) > zero_threshold))
    return l2, linf, l0


def ndv(x, x_adv, cfg=NdvConfig()):
    """Normalized disturbance visibility: C * L2 / (L0 + eps)."""
    l2, _, l0 = lp_metrics(x, x_adv, cfg.zero_threshold)
    return cfg.c * l2 / (l0 + cfg.eps)


def _gaussian_kernel(radius=5, sigma=1.5):
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def ssim(x, x_adv, k1=0.01, k2=0.03, sigma=1.5, window=11, data_range=1.0):
    """Mean local SSIM with a Gaussian window (11x11, sigma 1.5 by
    default), averaged over valid window positions and channels."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_adv, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    h, w = a.shape[:2]
    if h < window or w < window:
        raise ValueError(f"image {h}x{w} smaller than the {window}x{window} SSIM window")
    radius = window // 2
    kern = _gaussian_kernel(radius, sigma)

    def smooth(img):
        out = correlate1d(img, kern, axis=0, mode="constant")
        out = correlate1d(out, kern, axis=1, mode="constant")
        return out[radius:-radius, radius:-radius]

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    for ch in range(a.shape[2]):
        xa, xb = a[:, :, ch], b[:, :, ch]
        mu_a = smooth(xa)
        mu_b = smooth(xb)
        var_a = smooth(xa * xa) - mu_a * mu_a
        var_b = smooth(xb * xb) - mu_b * mu_b
        cov = smooth(xa * xb) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


@dataclass
class PairMetrics:
    """Distance/quality numbers for one (clean, adversarial) pair."""

    l2: float
    linf: float
    l0: int
    ssim: float
    ndv: float


def compute_pair_metrics(x, x_adv, cfg=NdvConfig()):
    l2, linf, l0 = lp_metrics(x, x_adv, cfg.zero_threshold)
    return PairMetrics(
        l2=l2,
        linf=linf,
        l0=l0,
        ssim=ssim(x, x_adv),
        ndv=cfg.c * l2 / (l0 + cfg.eps),
    )


@dataclass
class ExampleOutcome:
    """Minimal per-example record the aggregator consumes."""

    success: bool
    queries: int
    metrics: PairMetrics | None = None


@dataclass
class AggregateReport:
    """ASR plus query statistics in both counting conventions
    (successes-only and all-attempted) and mean PairMetrics over
    successes."""

    attempted: int
    succeeded: int
    asr: float
    mode: str
    anq: float
    mnq: float
    anq_successes: float
    mnq_successes: float
    anq_all: float
    mnq_all: float
    mean_l2: float = float("nan")
    mean_linf: float = float("nan")
    mean_l0: float = float("nan")
    mean_ssim: float = float("nan")
    mean_ndv: float = float("nan")


AGG_MODES = ("successes-only", "all-attempted")


def aggregate(outcomes, mode="successes-only"):
    """Fold per-example outcomes into an AggregateReport.

    ASR is over all attempted examples; ANQ/MNQ are computed in both
    conventions and `mode` picks which pair the headline fields carry.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes to aggregate")
    if mode not in AGG_MODES:
        raise ValueError(f"mode must be one of {AGG_MODES}")
    succ_q = [o.queries for o in outcomes if o.success]
    all_q = [o.queries for o in outcomes]
    anq_s = float(np.mean(succ_q)) if succ_q else float("nan")
    mnq_s = float(np.median(succ_q)) if succ_q else float("nan")
    anq_a = float(np.mean(all_q))
    mnq_a = float(np.median(all_q))
    report = AggregateReport(
        attempted=len(outcomes),
        succeeded=len(succ_q),
        asr=len(succ_q) / len(outcomes),
        mode=mode,
        anq=anq_s if mode == "successes-only" else anq_a,
        mnq=mnq_s if mode == "successes-only" else mnq_a,
        anq_successes=anq_s,
        mnq_successes=mnq_s,
        anq_all=anq_a,
        mnq_all=mnq_a,
    )
    withm = [o.metrics for o in outcomes if o.success and o.metrics is not None]
    if withm:
        report.mean_l2 = float(np.mean([m.l2 for m in withm]))
        report.mean_linf = float(np.mean([m.linf for m in withm]))
        report.mean_l0 = float(np.mean([m.l0 for m in withm]))
        report.mean_ssim = float(np.mean([m.ssim for m in withm]))
        report.mean_ndv = float(np.mean([m.ndv for m in withm]))
    return report


REPORT_COLUMNS = (
    "row",
    "index",
    "label",
    "status",
    "queries",
    "l2",
    "linf",
    "l0",
    "ssim",
    "ndv",
)


def report_rows_to_csv(path, rows, report):
    """One CSV row per example plus one trailing summary row (omitted when
    no example was actually attempted, e.g. a flush of misclassified-only
    partial results)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    "example",
                    r["index"],
                    r["label"],
                    r["status"],
                    r["queries"],
                    _fmt(r["l2"]),
                    _fmt(r["linf"]),
                    r["l0"],
                    _fmt(r["ssim"]),
                    _fmt(r["ndv"]),
                ]
            )
        if report is not None:
            writer.writerow(
                [
                    "summary",
                    report.attempted,
                    "",
                    f"asr={_fmt(report.asr)}",
                    _fmt(report.anq),
                    _fmt(report.mean_l2),
                    _fmt(report.mean_linf),
                    _fmt(report.mean_l0),
                    _fmt(report.mean_ssim),
                    _fmt(report.mean_ndv),
                ]
            )


def _jsonable(value):
    if isinstance(value, float) and value != value:  # NaN -> null
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def report_to_json(path, rows, report):
    summary = asdict(report) if report is not None else None
    payload = _jsonable({"examples": rows, "summary": summary})
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
