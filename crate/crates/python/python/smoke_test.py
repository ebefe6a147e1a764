"""Smoke test for the pdtw extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
then run:
    python crates/python/python/smoke_test.py
"""

import math
import random
import tempfile
from pathlib import Path

import pdtw


def check_numerics():
    p = pdtw.fit_normal([1.0, 2.0, 3.0, 4.0])
    assert abs(p.mu - 2.5) < 1e-12 and abs(p.sigma - math.sqrt(1.25)) < 1e-12
    assert abs(pdtw.standard_normal_cdf(0.0) - 0.5) < 1e-15
    assert abs(pdtw.normal_cdf(2.5, p) - 0.5) < 1e-12

    rng = random.Random(0)
    xs = [rng.gauss(-5, 1) for _ in range(3000)] + [rng.gauss(5, 1) for _ in range(7000)]
    g = pdtw.fit_gmm2(xs, seed=1)
    assert abs(g.means[0] + 5) < 0.2 and abs(g.means[1] - 5) < 0.2, g
    assert abs(g.weights[1] - 0.7) < 0.02, g

    assert pdtw.cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    steps, cost = pdtw.dtw_min_cost_path([[0.1, 0.9], [0.9, 0.1]])
    assert steps == [(0, 0), (1, 1)] and abs(cost - 0.2) < 1e-15
    start, end, lr = pdtw.best_subpath_lr([0.5, 1e-6, 1e-7, 0.5], 0.001)
    assert (start, end) == (1, 2) and lr < 0
    assert pdtw.levenshtein(["k", "ae", "t"], ["k", "ae"]) == 1
    assert abs(pdtw.m_score(57.6, 79.6) - 55.3) < 0.05

    tone = [0.3 * math.sin(2 * math.pi * 440 * n / 16000) for n in range(16000)]
    mfcc = pdtw.compute_mfcc(tone)
    assert len(mfcc) == 98 and len(mfcc[0]) == 39

    try:
        pdtw.NormalParams(0.0, -1.0)
    except pdtw.PdtwError:
        pass
    else:
        raise AssertionError("negative sigma accepted")


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        corpus = pdtw.synth(str(tmp / "corpus"), words=4, instances=5, background_s=60.0, files=3, seed=2)
        stats = pdtw.discover(
            corpus["manifest"], str(tmp / "run"), {"features": "files", "seed": 1, "calib_samples": 100000}
        )
        assert stats["accepted"] > 0
        assert stats["accepted"] + stats["rejected_too_short"] + stats["rejected_self_overlap"] == stats["candidates"]
        report = pdtw.evaluate(stats["pairs_file"], corpus["phones"], corpus["words"], stats["masks_file"])
        assert report["pairs"] == stats["accepted"] and report["ned"] < 30.0, report
        print(f"discover: {stats['accepted']} pairs; eval: NED {report['ned']:.1f} Cov {report['cov']:.1f}")

    rng = random.Random(3)
    word = [[rng.gauss(0, 1) for _ in range(39)] for _ in range(30)]
    files = []
    for _ in range(2):
        noise = lambda n: [[rng.gauss(0, 1) for _ in range(39)] for _ in range(n)]
        files.append(noise(150) + [[v + rng.gauss(0, 0.1) for v in f] for f in word] + noise(150))
    pairs = pdtw.discover_features(files, ["x", "y"], options={"vad": False, "calib_samples": 20000})
    assert any(p["file_a"] != p["file_b"] for p in pairs), pairs


if __name__ == "__main__":
    check_numerics()
    check_pipeline()
    print("python smoke test passed")
