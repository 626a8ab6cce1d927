"""Smoke test for the pytada extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
or put a built `pytada.so` on PYTHONPATH.
"""

import math
import os
import tempfile

import pytada

# Minimal training budget: enough to exercise every stage, not to denoise well.
TINY = """\
models.lc = lc.txt
models.ae = ae.txt
models.calibration = cal.txt
data.per_level = 2
meta.per_level = 30
meta.epochs = 1
meta.meta_epochs = 1
train.train_size = 90
train.pretrain_epochs = 1
"""


def main():
    pairs = pytada.synth_corpus(3, 2)
    assert len(pairs) == 6
    for p, want in zip(pairs, [-7.0, -2.5, 2.0] * 2):
        assert abs(p.realized_snr_db() - want) < 1e-6, p
        assert len(p.mixture) == 512

    p = pytada.mix_at_snr(pairs[0].clean, pairs[0].artifact, 0.0)
    assert abs(p.realized_snr_db()) < 1e-6

    cc, tr, sr = pytada.metrics(p.clean, p.clean)
    assert abs(cc - 1.0) < 1e-12 and tr == 0.0 and sr == 0.0

    spec = pytada.power_spectrum([1.0] * 8)
    assert len(spec) == 5 and abs(spec[0] - 64.0) < 1e-9

    cal = pytada.Calibration.uniform(0.0, 1.0)
    b = pairs[2].mixture
    a = [2.0 * v + 0.5 for v in b]
    y, method = pytada.scale_targeting(a, b, cal, "high")
    assert method == "targeted", method
    assert max(abs(u - v) for u, v in zip(y, b)) < 1e-9

    try:
        pytada.scale_targeting(a, b, cal, "extreme")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown level accepted")

    assert pytada.default_param_count(0) < 400_000

    with tempfile.TemporaryDirectory() as d:
        cfg = os.path.join(d, "run.cfg")
        with open(cfg, "w") as f:
            f.write(TINY)
        j = lambda name: os.path.join(d, name)
        assert pytada.cli(["--config", cfg, "train-meta", "--out", j("lc.txt")]) == 0
        assert pytada.cli(["--config", cfg, "train-ae", "--out", j("ae.txt")]) == 0
        assert pytada.cli(["--config", cfg, "calibrate", "--ae", j("ae.txt"), "--out", j("cal.txt")]) == 0
        loaded = pytada.Calibration.load(j("cal.txt"))
        mu, rho = loaded.level("mid")
        assert math.isfinite(mu) and rho > 0
        pipe = pytada.Pipeline(cfg)
        assert pipe.param_count == pytada.default_param_count(0)
        out, level, method = pipe.denoise(pairs[0].mixture)
        assert len(out) == 512 and all(math.isfinite(v) for v in out)
        assert level in ("low", "mid", "high")
        summary = pipe.bench(os.path.join(d, "bench"))
        assert summary.startswith("metric,")
        assert os.path.exists(os.path.join(d, "bench", "segments.csv"))
        assert pytada.cli(["params"]) == 0
        assert pytada.cli(["frobnicate"]) == 1

    try:
        pytada.Calibration.load("/nonexistent/cal.txt")
    except OSError:
        pass
    else:
        raise AssertionError("missing file accepted")

    print("pytada smoke OK")


if __name__ == "__main__":
    main()
