"""Acceptance criteria 1-9, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or directly with ``python3 tests/test_acceptance.py``. Criteria 7 and
8 train 9 models on the synthetic Epinions stand-in and take 10-20 minutes;
deselect them with ``-m "not slow"``.
"""
from __future__ import annotations

import math
import sys
import time
import warnings
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES, SMALL_RATIO  # noqa: E402

from socgcf import checks  # noqa: E402
from socgcf.cli import main  # noqa: E402
from socgcf.data import dedup_interactions, load_dataset, load_interactions  # noqa: E402
from socgcf.graph import classify_f  # noqa: E402
from socgcf.metrics import ndcg_at_k, precision_recall, topk_from_scores  # noqa: E402
from socgcf.synthetic import EPINIONS_LIKE, write_raw_files  # noqa: E402

SEEDS = (0, 1, 2)
ABLATION_ARGS = ["--lr", "0.002", "--max_epochs", "200", "--eval_every", "5", "--patience", "6",
                 "--runs", "lightgcn,w_interact,model_all"]


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} [{number}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# ---------------------------------------------------------------- 1

def _pipeline_properties(raw_path: Path, out: Path, ratio: float) -> list[str]:
    """Violations of the preprocessing invariants in ``out`` (empty when all hold)."""
    d = load_dataset(out)
    problems = []
    counts = Counter(i for _, i in d.train + d.test)
    if len(counts) != d.n_items or min(counts.values()) < 10:
        problems.append(f"item with {min(counts.values())} interactions")
    raw = dedup_interactions(load_interactions(raw_path))
    available = {r.user for r in raw if r.item in d.item_id_map}
    expected = min(math.floor(d.n_items / ratio + 0.5), len(available))
    if d.n_users != expected:
        problems.append(f"|users|={d.n_users}, expected {expected}")
    if set(d.train) & set(d.test):
        problems.append("train/test overlap")
    stamp = {(d.user_id_map[r.user], d.item_id_map[r.item]): r.timestamp for r in raw
             if r.user in d.user_id_map and r.item in d.item_id_map}
    if set(stamp) != set(d.train) | set(d.test):
        problems.append("split does not cover the filtered interactions")
    latest_train: dict[int, int] = {}
    for u, i in d.train:
        latest_train[u] = max(latest_train.get(u, -1), stamp[(u, i)])
    if any(stamp[(u, i)] < latest_train.get(u, -1) for u, i in d.test):
        problems.append("a test interaction predates its user's training interactions")
    return problems


def test_1_pipeline_properties(tmp_path, small_files):
    inter, social = small_files
    epi_inter, epi_social = write_raw_files(tmp_path / "epi_raw", EPINIONS_LIKE)
    # more users requested than exist: |users| falls back to all available
    few = tmp_path / "few.txt"
    few.write_text("".join(f"u{u} i{i} {u * 100 + i}\n" for u in range(12) for i in range(12)))
    cases = [
        ("small", inter, ["--social", str(social), "--ratio", str(SMALL_RATIO)], SMALL_RATIO),
        ("epinions-like", epi_inter, ["--social", str(epi_social), "--dataset", "epinions"], 11.95),
        ("q>available", few, ["--use_social", "false", "--ratio", "0.5"], 0.5),
    ]
    tic = time.perf_counter()
    problems = []
    for name, raw_path, extra, ratio in cases:
        out = tmp_path / name
        assert main(["preprocess", "--interactions", str(raw_path), "--out", str(out), *extra]) == 0
        problems += [f"{name}: {p}" for p in _pipeline_properties(raw_path, out, ratio)]
    elapsed = time.perf_counter() - tic
    record(1, "pipeline properties", not problems,
           f"{len(cases)} datasets in {elapsed:.1f}s" + (f"; {problems}" if problems else ""))
    assert not problems


# ---------------------------------------------------------------- 2-4

def test_2_dense_oracle():
    tic = time.perf_counter()
    err = checks.dense_oracle_check(n_graphs=24)
    elapsed = time.perf_counter() - tic
    ok = err < 1e-10 and elapsed < 10.0
    record(2, "dense-oracle propagation", ok,
           f"24 graphs, max |diff| {err:.2e} (tol 1e-10), {elapsed:.2f}s (limit 10s)")
    assert ok


def test_3_gradient_check():
    tic = time.perf_counter()
    errs = checks.gradient_check(eps=1e-4)
    elapsed = time.perf_counter() - tic
    worst = max(errs.values())
    ok = len(errs) == 4 and worst < 1e-4 and elapsed < 30.0
    detail = ", ".join(f"s={int(s)}c={int(c)}:{e:.1e}" for (s, c), e in errs.items())
    record(3, "gradient check", ok, f"{detail} (tol 1e-4), {elapsed:.2f}s (limit 30s)")
    assert ok


def test_4_lightgcn_reduction():
    err = checks.lightgcn_reduction_check(n_graphs=10)
    record(4, "lightgcn reduction", err < 1e-12, f"max |diff| {err:.2e} (tol 1e-12)")
    assert err < 1e-12


# ---------------------------------------------------------------- 5

def test_5_metric_oracles():
    rows = checks.metric_oracle_check()
    worst = max(abs(a - b) for _, a, b in rows)
    rank2 = ndcg_at_k([7, 3], {3}, 2)
    rank2_err = abs(rank2 - 0.6309297535714574)

    rng = np.random.default_rng(2024)
    identity_failures = 0
    for _ in range(1000):
        n_items = int(rng.integers(5, 60))
        k = int(rng.integers(1, n_items + 1))
        scores = rng.integers(0, 5, n_items).astype(float)  # coarse scores force ties
        test = set(rng.choice(n_items, size=int(rng.integers(1, n_items + 1)), replace=False).tolist())
        top = topk_from_scores(scores, k)
        p, _ = precision_recall(top, test)
        tp = len(set(top.tolist()) & test)
        identity_failures += abs(p * k - tp) > 1e-9
    ok = worst <= 1e-9 and rank2_err <= 1e-9 and identity_failures == 0
    record(5, "metric oracles", ok,
           f"fixture max |diff| {worst:.1e}, ndcg rank-2 {rank2:.10f}, "
           f"precision*k=TP failures {identity_failures}/1000")
    assert ok


# ---------------------------------------------------------------- 6

def test_6_classify_f_boundaries():
    probes = {0.0: 0.0, 0.0999: 0.0, 0.1: 0.005, 0.3999: 0.005, 0.4: 0.05, 0.5999: 0.05,
              0.6: 0.5, 0.8999: 0.5, 0.9: 1.0, 1.0: 1.0}
    wrong = {j: classify_f(j) for j, want in probes.items() if classify_f(j) != want}
    record(6, "classify_f boundaries", not wrong, f"{len(probes) - len(wrong)}/{len(probes)} exact")
    assert not wrong


# ---------------------------------------------------------------- 7-8

@pytest.fixture(scope="module")
def ablation_runs(tmp_path_factory):
    """Run cmd_ablate for each seed; returns (recall by run, epochs_to_best by run, seconds)."""
    root = tmp_path_factory.mktemp("ablation")
    inter, social = write_raw_files(root / "raw", EPINIONS_LIKE)
    data = root / "data"
    assert main(["preprocess", "--interactions", str(inter), "--social", str(social),
                 "--dataset", "epinions", "--out", str(data)]) == 0
    recall: dict[str, list[float]] = {}
    epochs: dict[str, list[int]] = {}
    tic = time.perf_counter()
    for seed in SEEDS:
        out = root / f"seed{seed}"
        assert main(["ablate", "--data", str(data), "--out", str(out), "--seed", str(seed),
                     *ABLATION_ARGS]) == 0
        for row in (out / "ablation.csv").read_text().splitlines()[1:]:
            name, _, _, rec, *_ = row.split(",")
            recall.setdefault(name, []).append(float(rec))
            timing = dict(l.split("=") for l in (out / name / "timing.txt").read_text().split())
            epochs.setdefault(name, []).append(int(timing["epochs_to_best"]))
    return recall, epochs, time.perf_counter() - tic


@pytest.mark.slow
def test_7_ablation_trend(ablation_runs):
    recall, _, elapsed = ablation_runs
    full, interact = float(np.mean(recall["model_all"])), float(np.mean(recall["w_interact"]))
    ok = full > interact and elapsed < 45 * 60
    record(7, "ablation trend (synthetic Epinions stand-in)", ok,
           f"mean recall@20 model_all {full:.4f} vs w_interact {interact:.4f} "
           f"(lightgcn {np.mean(recall['lightgcn']):.4f}); per seed model_all "
           f"{[round(r, 4) for r in recall['model_all']]} w_interact "
           f"{[round(r, 4) for r in recall['w_interact']]}; {elapsed / 60:.1f} min (limit 45)")
    assert ok


@pytest.mark.slow
def test_8_convergence_trend(ablation_runs):
    _, epochs, _ = ablation_runs
    wins = sum(a < b for a, b in zip(epochs["model_all"], epochs["lightgcn"]))
    ok = wins >= 2
    record(8, "convergence trend (report only)", ok,
           f"epochs to best model_all {epochs['model_all']} vs lightgcn {epochs['lightgcn']}, "
           f"faster in {wins}/3 seeds")
    if not ok:
        warnings.warn("convergence trend not reproduced; documented deviation, not a failure")


# ---------------------------------------------------------------- 9

def test_9_train_determinism(tmp_path, small_files):
    inter, social = small_files
    data = tmp_path / "data"
    assert main(["preprocess", "--interactions", str(inter), "--social", str(social),
                 "--ratio", str(SMALL_RATIO), "--out", str(data)]) == 0
    args = ["--data", str(data), "--embed_dim", "16", "--max_epochs", "20", "--eval_every", "2",
            "--batch_size", "512", "--lr", "0.005", "--seed", "3"]
    for run in ("a", "b"):
        assert main(["train", *args, "--out", str(tmp_path / run)]) == 0
    files = ("metrics.csv", "history.csv", "metrics.txt", "checkpoint.bin")
    same = {f: (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files}
    ok = all(same.values())
    record(9, "cmd_train determinism", ok,
           ", ".join(f"{f} {'identical' if s else 'DIFFERS'}" for f, s in same.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
