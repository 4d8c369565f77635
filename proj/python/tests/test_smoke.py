import csv
import math
import pathlib

import pytest

import turntaking as tt

try:
    from scipy import stats as scipy_stats
except ImportError:  # pragma: no cover
    scipy_stats = None


TINY_CONFIG = """
[data]
dir = {corpus}

[generator]
duration_s = 12
n_train = 3
n_test = 1
seed = 6

[network]
arrangement = two_subnets
master_hidden = 8

[modality.acoustic]
kind = features
source = acoustic
clock = 10
subnet_hidden = 5

[modality.linguistic]
kind = words
source = words
clock = 50
subnet_hidden = 4
embed_dim = 4

[training]
epochs = 1
t_bptt = 60
learning_rate = 0.002
seeds = 1, 2
"""


def test_constants():
    assert tt.FRAME_MS == 50
    assert tt.HORIZON == 60
    assert tt.HIDDEN_BUDGET == 150


def test_weighted_f1_and_majority():
    pairs = [(1, 1), (1, 0), (0, 0), (0, 0), (1, 1), (0, 1)]
    f1 = tt.weighted_f1(pairs)
    assert 0.0 < f1 < 1.0

    p = 0.6447
    labels = [0] * 6447 + [1] * 3553
    assert tt.majority_f1(labels) == pytest.approx(2 * p * p / (1 + p), abs=1e-12)


@pytest.mark.skipif(scipy_stats is None, reason="scipy not available")
def test_welch_ttest_matches_scipy():
    a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1]
    b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2]
    expected = scipy_stats.ttest_ind(a, b, equal_var=False).pvalue
    assert tt.welch_ttest(a, b) == pytest.approx(expected, abs=1e-9)
    assert tt.welch_ttest(a, a) == pytest.approx(1.0)


def test_event_extraction():
    active = [1] * 12 + [0] * 10 + [1] * 12 + [0] * 76
    silent = [0] * len(active)
    pauses = tt.find_pauses(active, silent, min_len_frames=1)
    assert len(pauses) == 1
    assert pauses[0]["decision_frame"] == 12
    assert pauses[0]["holder"] == 0
    assert not pauses[0]["is_shift"]

    a = [0] * 40 + [1] * 60 + [0] * 132
    b = [0] * 120 + [1] * 12 + [0] * 100
    onsets = tt.find_onsets(a, b)
    assert [(o["speaker"], o["is_long"]) for o in onsets] == [(0, True), (1, False)]
    assert onsets[1]["length_frames"] == 12


def test_gradient_check_passes():
    cases = tt.gradient_check()
    assert len(cases) == 8
    assert all(c["pass"] for c in cases)
    assert max(c["max_rel_err"] for c in cases) < 1e-4


def test_generate_train_evaluate(tmp_path: pathlib.Path):
    corpus = tmp_path / "corpus"
    config = tmp_path / "exp.ini"
    config.write_text(TINY_CONFIG.format(corpus=corpus))

    tt.generate(str(config), str(corpus))
    assert (corpus / "manifest.csv").exists()
    assert (corpus / "vocabulary.txt").exists()

    out = tt.train(str(config), str(tmp_path / "run"), jobs=2)
    assert len(out["per_seed"]) == 2
    assert {m["seed"] for m in out["per_seed"]} == {1, 2}
    best = out["per_seed"][out["best_index"]]
    assert best["bce"] == min(m["bce"] for m in out["per_seed"])
    assert 0.0 < out["mean"]["bce"] < 1.0

    report = tmp_path / "run" / "report.csv"
    with report.open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["run"] for r in rows] == ["seed_1", "seed_2", "mean"]
    assert float(rows[out["best_index"]]["bce_loss"]) == pytest.approx(best["bce"], abs=5e-7)

    restored = tt.evaluate(str(config), str(tmp_path / "eval"),
                           checkpoint=str(tmp_path / "run" / "model.ckpt"))
    assert restored["bce"] == best["bce"]
    assert restored["onset_threshold"] == best["onset_threshold"]
    assert restored["counts"]["pauses_50ms"] >= restored["counts"]["pauses_500ms"]

    single = tt.train(str(config), str(tmp_path / "run_single"), seed=9)
    assert [m["seed"] for m in single["per_seed"]] == [9]


def test_errors_surface_as_python_exceptions(tmp_path: pathlib.Path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[network]\narrangement = rings\nmaster_hidden = 4\n")
    with pytest.raises(ValueError):
        tt.train(str(bad), str(tmp_path / "out"))

    empty = tmp_path / "empty.ini"
    empty.write_text("[data]\ndir = " + str(tmp_path / "nowhere") + "\n")
    with pytest.raises(ValueError):
        tt.evaluate(str(empty), str(tmp_path / "out"), checkpoint="missing.ckpt")

    assert not math.isnan(tt.welch_ttest([1.0, 2.0], [1.0, 2.0]))
    with pytest.raises(ValueError):
        tt.welch_ttest([1.0], [1.0, 2.0])
