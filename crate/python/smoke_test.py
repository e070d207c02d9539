"""End-to-end smoke test of the bnsvp_py extension module.

Builds the cdylib with cargo, stages it under the importable module name,
then walks the pipeline: synthetic data, partitioning, representative
selection, training, scoring, and ROC evaluation.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def build_and_import():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "bnsvp-py"], cwd=ROOT, check=True
    )
    for name in ("libbnsvp_py.so", "libbnsvp_py.dylib"):
        built = ROOT / "target" / "release" / name
        if built.is_file():
            break
    else:
        raise FileNotFoundError("cargo did not produce the bnsvp_py library")
    staging = Path(tempfile.mkdtemp(prefix="bnsvp-py-"))
    shutil.copy2(built, staging / "bnsvp_py.so")
    sys.path.insert(0, str(staging))
    import bnsvp_py

    return bnsvp_py


def main():
    mod = build_and_import()
    print(f"imported bnsvp_py {mod.__version__}")

    bags = mod.generate_scenario(
        n_bags_pos=6,
        n_bags_neg=6,
        n_segments=24,
        dim=6,
        mean_separation=5.0,
        anomaly_fraction=0.25,
        seed=7,
    )
    assert len(bags) == 12, f"expected 12 bags, got {len(bags)}"
    for bag_id, features, abnormal, segment_labels in bags:
        assert len(features) == 24 and len(features[0]) == 6
        if abnormal:
            assert segment_labels is not None and any(segment_labels)
        else:
            assert segment_labels is None or not any(segment_labels)
    n_abnormal = sum(1 for _, _, abnormal, _ in bags if abnormal)
    assert n_abnormal == 6, f"expected 6 abnormal bags, got {n_abnormal}"
    print(f"generated {len(bags)} bags ({n_abnormal} abnormal)")

    features = next(f for _, f, abnormal, _ in bags if not abnormal)
    part = mod.partition(features, n_iters=60, burn_in=20, seed=3)
    assert len(part) == 24
    assert len(part.z) == 24 and len(part.s) == 24
    assert part.kappa >= 1
    assert len(part.log_likelihood_trace) == 60
    assert all(len(row) == len(part.pi()) for row in part.pi())
    assert len(part.components()) == part.kappa
    wire = json.loads(part.to_json())
    assert wire["z"] == part.z and wire["kappa"] == part.kappa
    rerun = mod.partition(features, n_iters=60, burn_in=20, seed=3)
    assert rerun.z == part.z and rerun.s == part.s, "same seed must reproduce"
    print(f"partitioned one bag: {part!r}")

    n = len(features)
    ramp = [i / (n - 1) for i in range(n)]
    reps = mod.representatives(part, ramp, epsilon_percentile=35.0)
    assert reps.indices, "kept set must never be empty"
    assert reps.indices == sorted(set(reps.indices))
    assert all(0 <= i < n for i in reps.indices)
    assert len(reps.winners()) == part.kappa
    assert all(ramp[i] >= reps.epsilon for i in reps.indices)
    covered = mod.facility_location(features, part, reps.indices)
    partial = mod.facility_location(features, part, reps.indices[:1])
    assert covered >= partial - 1e-12, "coverage must grow with the set"
    wire = json.loads(reps.to_json())
    assert wire["indices"] == reps.indices
    print(f"selected representatives: {reps!r}")

    train_bags = [(f, abnormal) for _, f, abnormal, _ in bags]
    scorer, losses = mod.train(
        train_bags,
        loss="bnsvp",
        epochs=8,
        partition_iters=40,
        seed=5,
    )
    assert len(losses) == 8
    assert all(l >= 0.0 for l in losses)
    print(f"trained {scorer!r}; first/last epoch loss {losses[0]:.4f}/{losses[-1]:.4f}")

    scores, labels = [], []
    for _, feats, abnormal, segment_labels in bags:
        bag_scores = scorer.score(feats)
        assert len(bag_scores) == len(feats)
        assert all(0.0 <= s <= 1.0 for s in bag_scores)
        scores.extend(bag_scores)
        labels.extend(segment_labels if abnormal else [False] * len(feats))
    auc, points = mod.roc_auc(scores, labels)
    assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
    assert auc > 0.8, f"scorer should separate planted anomalies, auc={auc:.3f}"
    print(f"segment-level auc {auc:.3f} over {len(scores)} segments")

    clone = mod.Scorer.from_json(scorer.to_json())
    assert clone.score(features) == scorer.score(features)
    assert clone.weights == scorer.weights and clone.bias == scorer.bias

    try:
        mod.partition(features, n_iters=10, burn_in=10)
    except ValueError:
        pass
    else:
        raise AssertionError("burn_in >= n_iters must raise ValueError")
    try:
        mod.train(train_bags, loss="hinge")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown loss must raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
