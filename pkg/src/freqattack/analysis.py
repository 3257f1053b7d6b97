"""Frequency-similarity study and the attack evaluation harness: runs the
generators/attack over a dataset and emits CSV/JSON reports plus
queries-vs-ASR curve data.
"""

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .attack import run_attack
from .core import spawn_rng
from .metrics import (
    ExampleOutcome,
    aggregate,
    cosine_similarity,
    report_rows_to_csv,
    report_to_json,
)
from .oracle import predicted_label
from .wavelet import all_band_paths, decompose_image, get_filter
from .whitebox import fgsm, pgd

ATTACK_METHODS = ("fgsm", "pgd")


def similarity_columns(depth):
    """Band columns for layers 1..depth, lexicographic within each layer
    (14 columns at depth 3)."""
    cols = []
    for level in range(1, depth + 1):
        cols.extend(all_band_paths(level))
    return cols


@dataclass
class SimilarityRow:
    """One study row: mean per-band cosine similarity between clean and
    adversarial examples."""

    dataset: str
    model: str
    attack: str
    columns: list
    values: dict  # band path -> mean cosine
    per_image: np.ndarray  # (n_images, n_bands) underlying samples


def band_similarity_study(
    dataset,
    model,
    attack_method,
    filter_name="haar",
    depth=3,
    attack_cfg=None,
    dataset_name="dataset",
    model_name="builtin-mlp",
):
    """For every image: generate the whitebox adversarial example, then
    for each layer 1..depth decompose both images and record the cosine
    similarity of each band's pooled (all-channel) coefficients."""
    if attack_method not in ATTACK_METHODS:
        raise ValueError(f"attack_method must be one of {ATTACK_METHODS}")
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    filt = get_filter(filter_name)
    cols = similarity_columns(depth)
    per_image = np.empty((len(dataset), len(cols)))
    for i in range(len(dataset)):
        x = dataset.images[i]
        y = int(dataset.labels[i])
        if attack_method == "fgsm":
            x_adv = fgsm(model, x, y) if attack_cfg is None else fgsm(model, x, y, attack_cfg)
        else:
            x_adv = pgd(model, x, y) if attack_cfg is None else pgd(model, x, y, attack_cfg)
        j = 0
        for level in range(1, depth + 1):
            tree = decompose_image(x, filt, level)
            tree_adv = decompose_image(x_adv, filt, level)
            for path in all_band_paths(level):
                per_image[i, j] = cosine_similarity(tree.bands[path], tree_adv.bands[path])
                j += 1
    values = {c: float(np.mean(per_image[:, j])) for j, c in enumerate(cols)}
    return SimilarityRow(dataset_name, model_name, attack_method, cols, values, per_image)


def similarity_rows_to_csv(path, rows):
    if not rows:
        raise ValueError("no rows")
    cols = rows[0].columns
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "model", "attack"] + cols)
        for r in rows:
            writer.writerow(
                [r.dataset, r.model, r.attack] + ["%.12g" % r.values[c] for c in cols]
            )


def qualitative_ordering_flags(row):
    """Informational Table-1-shape ordering checks (not a hard gate)."""
    v = row.values
    depth3 = [p for p in row.columns if len(p) == 3]
    flags = {"depth1_d_below_a": bool(v["d"] < v["a"])}
    if depth3:
        detail = {p: v[p] for p in depth3 if p != "aaa"}
        lowest_two = sorted(detail, key=detail.get)[:2]
        flags["depth3_lowest_two"] = lowest_two
    return flags


@dataclass
class AblationSpec:
    """Band subsets to compare; default: all nonempty subsets of the
    configured search bands."""

    subsets: tuple = None

    def resolve(self, bands):
        if self.subsets is not None:
            subs = tuple(tuple(s) for s in self.subsets)
        else:
            subs = tuple(
                tuple(c)
                for k in range(1, len(bands) + 1)
                for c in combinations(bands, k)
            )
        if not subs or any(len(s) == 0 for s in subs):
            raise ValueError("subsets must be nonempty")
        return subs


def _attack_one(args):
    idx, x, y, oracle, cfg, seed = args
    rng = spawn_rng(seed, idx)
    precheck = oracle.query(x)
    if predicted_label(precheck) != int(y):
        return idx, None
    return idx, run_attack(x, int(y), oracle, cfg, rng)


def evaluate_attack(
    dataset,
    oracle,
    cfg,
    seed,
    mode="successes-only",
    workers=1,
    oracle_factory=None,
    out_dir=None,
    return_results=False,
):
    """Run the attack over a dataset and aggregate the outcome.

    Each image costs one correctness pre-check query plus the attack's own
    budget (never more than max_queries + 1 oracle calls per image).
    Initially misclassified images are recorded but excluded from ASR.
    Per-image rng streams depend only on (seed, index), so band-subset
    ablations with the same seed are paired and worker scheduling cannot
    change results.  Returns (report, rows, curve); with out_dir set, also
    writes report.csv/report.json/curve.csv, flushing partial rows if the
    run dies halfway.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    jobs = [
        (i, dataset.images[i], int(dataset.labels[i]), oracle, cfg, seed)
        for i in range(len(dataset))
    ]
    results = {}
    try:
        if workers > 1:
            if oracle_factory is None:
                raise ValueError("workers > 1 needs an oracle_factory")
            import threading

            local = threading.local()

            def job_with_local_oracle(args):
                if not hasattr(local, "oracle"):
                    local.oracle = oracle_factory()
                i, x, y, _, c, s = args
                return _attack_one((i, x, y, local.oracle, c, s))

            with ThreadPoolExecutor(max_workers=workers) as pool:
                for idx, res in pool.map(job_with_local_oracle, jobs):
                    results[idx] = res
        else:
            for args in jobs:
                idx, res = _attack_one(args)
                results[idx] = res
    finally:
        rows, report, curve = _collect(dataset, results, cfg, mode)
        if out_dir is not None and rows:
            _write_artifacts(out_dir, rows, report, curve)
    if return_results:
        return report, rows, curve, results
    return report, rows, curve


def _collect(dataset, results, cfg, mode):
    rows = []
    outcomes = []
    for idx in sorted(results):
        res = results[idx]
        label = int(dataset.labels[idx])
        if res is None:
            rows.append(
                {
                    "index": idx,
                    "label": label,
                    "status": "misclassified",
                    "queries": 1,
                    "l2": float("nan"),
                    "linf": float("nan"),
                    "l0": 0,
                    "ssim": float("nan"),
                    "ndv": float("nan"),
                }
            )
            continue
        m = res.metrics
        rows.append(
            {
                "index": idx,
                "label": label,
                "status": "success" if res.success else res.status,
                "queries": res.queries,
                "l2": m.l2 if m else float("nan"),
                "linf": m.linf if m else float("nan"),
                "l0": m.l0 if m else 0,
                "ssim": m.ssim if m else float("nan"),
                "ndv": m.ndv if m else float("nan"),
            }
        )
        outcomes.append(ExampleOutcome(res.success, res.queries, m))
    report = aggregate(outcomes, mode) if outcomes else None
    curve = queries_asr_curve(outcomes, cfg.max_queries) if outcomes else []
    return rows, report, curve


def queries_asr_curve(outcomes, max_queries):
    """(query budget, cumulative ASR) pairs; nondecreasing by
    construction."""
    attempted = len(outcomes)
    succ = sorted(o.queries for o in outcomes if o.success)
    curve = []
    seen = 0
    for q in succ:
        seen += 1
        if curve and curve[-1][0] == q:
            curve[-1] = (q, seen / attempted)
        else:
            curve.append((q, seen / attempted))
    if not curve or curve[-1][0] != max_queries:
        curve.append((max_queries, seen / attempted))
    return curve


def curve_to_csv(path, curve):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["queries", "asr"])
        for q, asr in curve:
            writer.writerow([q, "%.12g" % asr])


def _write_artifacts(out_dir, rows, report, curve):
    os.makedirs(out_dir, exist_ok=True)
    report_rows_to_csv(os.path.join(out_dir, "report.csv"), rows, report)
    report_to_json(os.path.join(out_dir, "report.json"), rows, report)
    curve_to_csv(os.path.join(out_dir, "curve.csv"), curve)


def ablation_run(dataset, oracle, cfg, spec, seed, mode="successes-only", out_dir=None):
    """One evaluation per band subset with identical per-image seeds, so
    subset comparisons are paired."""
    from dataclasses import replace

    subsets = spec.resolve(cfg.bands)
    results = {}
    for subset in subsets:
        sub_cfg = replace(cfg, bands=subset)
        sub_dir = None
        if out_dir is not None:
            sub_dir = os.path.join(out_dir, "subset_" + "+".join(subset))
        report, rows, curve = evaluate_attack(
            dataset, oracle, sub_cfg, seed, mode=mode, out_dir=sub_dir
        )
        results[subset] = (report, rows, curve)
    if out_dir is not None:
        _write_ablation_summary(os.path.join(out_dir, "ablation.csv"), results)
    return results


def _write_ablation_summary(path, results):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["bands", "attempted", "succeeded", "asr", "anq", "mnq", "mean_l2", "mean_ndv"]
        )
        for subset, (report, _, _) in results.items():
            writer.writerow(
                [
                    "+".join(subset),
                    report.attempted,
                    report.succeeded,
                    "%.12g" % report.asr,
                    "%.12g" % report.anq,
                    "%.12g" % report.mnq,
                    "%.12g" % report.mean_l2,
                    "%.12g" % report.mean_ndv,
                ]
            )


def write_run_manifest(out_dir, command, config, seed):
    """run.json: resolved config echo, seed, component versions."""
    from . import __version__
    from ._kernels import backend_name

    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "freqattack": __version__,
            "numpy": np.__version__,
            "kernel_backend": backend_name(),
        },
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
