#!/usr/bin/env python3
"""Regenerate the committed reference-run fixtures.

Run from the repo root after intentional behavior changes:

    python3 scripts/regen_fixtures.py

Rewrites tests/fixtures/* and modelserver/test/fixtures/*.  Values are
deterministic (seeded), so reruns without code changes are no-ops.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

import freqattack as fa  # noqa: E402
from freqattack import cli, whitebox  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
SERVER_FIXTURES = ROOT / "modelserver" / "test" / "fixtures"

TRAIN_SEED = 11
MODEL_SEED = 7
TRAIN_RNG_SEED = 12


def trained_model():
    ds = fa.synthetic_dataset(600, seed=TRAIN_SEED)
    model = fa.init_model(ds.images.shape[1:], ds.num_classes, seed=MODEL_SEED)
    model, history = fa.train(model, ds, epochs=20, lr=0.05, rng=fa.make_rng(TRAIN_RNG_SEED))
    return model, history


def reference_runs():
    model, history = trained_model()
    ref = {
        "train": {
            "dataset_seed": TRAIN_SEED,
            "model_seed": MODEL_SEED,
            "rng_seed": TRAIN_RNG_SEED,
            "epochs": 20,
            "lr": 0.05,
            "final_accuracy": history[-1],
        }
    }

    ds = fa.synthetic_dataset(100, seed=13)
    wins = 0
    for i in range(len(ds)):
        x, y = ds.images[i], int(ds.labels[i])
        conf_f = fa.forward(model, fa.fgsm(model, x, y))[y]
        conf_p = fa.forward(model, fa.pgd(model, x, y))[y]
        wins += conf_p <= conf_f
    ref["pgd_vs_fgsm"] = {"dataset_seed": 13, "count": 100, "fraction": wins / len(ds)}

    eval_ds = fa.synthetic_dataset(90, seed=21)
    probs = whitebox.forward_batch(model, eval_ds.images)
    correct = np.flatnonzero(np.argmax(probs, axis=1) == eval_ds.labels)
    idx = int(correct[0])
    oracle = fa.BuiltinOracle(model)
    res = fa.run_attack(
        eval_ds.images[idx], int(eval_ds.labels[idx]), oracle, fa.AttackConfig(), fa.make_rng(7)
    )
    ref["attack_seed7"] = {
        "eval_dataset_seed": 21,
        "image_index": idx,
        "success": bool(res.success),
        "queries": int(res.queries),
        "accepted_steps": len(res.accepted),
        "final_confidence": res.final_confidence,
    }

    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "reference_runs.json").write_text(json.dumps(ref, indent=2) + "\n")
    print("wrote", FIXTURES / "reference_runs.json")
    return model


EVALUATE_PIPELINE = {
    "dataset": ["make-dataset", "--count", "50", "--seed", "1234"],
    "train": ["train", "--count", "300", "--seed", "7", "--epochs", "15", "--lr", "0.05"],
    "evaluate": [
        "evaluate",
        "--oracle",
        "builtin",
        "--seed",
        "99",
        "--max-queries",
        "3000",
    ],
    "ablate": [
        "ablate",
        "--oracle",
        "builtin",
        "--count",
        "12",
        "--seed",
        "55",
        "--subsets",
        "aaa",
        "--max-queries",
        "2000",
    ],
}


def run_evaluate_pipeline(workdir):
    """The exact command sequence the CLI regression tests replay."""
    ds = workdir / "ds"
    ckpt = workdir / "ckpt"
    out = workdir / "out"
    ablate_out = workdir / "ablate"
    assert cli.main(EVALUATE_PIPELINE["dataset"] + ["--out", str(ds)]) == 0
    assert cli.main(EVALUATE_PIPELINE["train"] + ["--out", str(ckpt)]) == 0
    assert (
        cli.main(
            EVALUATE_PIPELINE["evaluate"]
            + ["--dataset", str(ds), "--checkpoint", str(ckpt), "--out", str(out)]
        )
        == 0
    )
    assert (
        cli.main(
            EVALUATE_PIPELINE["ablate"]
            + ["--dataset", str(ds), "--checkpoint", str(ckpt), "--out", str(ablate_out)]
        )
        == 0
    )
    return out


def evaluate_fixture():
    with tempfile.TemporaryDirectory() as tmp:
        out = run_evaluate_pipeline(Path(tmp))
        shutil.copy(out / "report.csv", FIXTURES / "evaluate_50_report.csv")
        shutil.copy(out / "curve.csv", FIXTURES / "evaluate_50_curve.csv")
        shutil.copy(
            out.parent / "ablate" / "subset_aaa" / "report.csv",
            FIXTURES / "ablate_aaa_report.csv",
        )
    print("wrote", FIXTURES / "evaluate_50_report.csv")


def server_fixtures():
    """Small checkpoint + pinned forward outputs for the model server's
    own test suite (no Python needed on that side)."""
    SERVER_FIXTURES.mkdir(parents=True, exist_ok=True)
    model = fa.init_model((4, 4, 3), 3, seed=42)
    ckpt = SERVER_FIXTURES / "checkpoint"
    if ckpt.exists():
        shutil.rmtree(ckpt)
    fa.save_checkpoint(ckpt, model)
    rng = fa.make_rng(1000)
    cases = []
    for _ in range(3):
        x = rng.random((4, 4, 3))
        probs = fa.forward(model, x)
        cases.append({"pixels": x.ravel().tolist(), "shape": [4, 4, 3], "probs": probs.tolist()})
    (SERVER_FIXTURES / "forward_cases.json").write_text(json.dumps(cases, indent=2) + "\n")
    print("wrote", SERVER_FIXTURES / "forward_cases.json")


def main():
    reference_runs()
    evaluate_fixture()
    server_fixtures()


if __name__ == "__main__":
    main()
