import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ligocr.alphabet import default_styles
from ligocr.dataset import generate_corpus, split_corpus
from ligocr.dataset import AugmentParams
from ligocr.hierarchy import (HierarchicalModel, HierarchyError, HierarchySettings, ModelSettings, classification_report,
                              confusion_matrix, evaluate, load_hierarchy, predict, predict_batch, report_from_confusion,
                              desk_settings, resample, save_hierarchy, train_hierarchy, train_model, write_reports)
from ligocr.nn import Dense, Model, Softmax
from ligocr.nn.train import TrainedModel


def tally(pairs, n):
    """Brute-force macro metrics from (true, pred) pairs."""
    acc = sum(t == p for t, p in pairs) / len(pairs)
    precs, recs, f1s = [], [], []
    for c in range(n):
        tp = sum(1 for t, p in pairs if t == c and p == c)
        npred = sum(1 for _, p in pairs if p == c)
        ntrue = sum(1 for t, _ in pairs if t == c)
        pr = tp / npred if npred else 0.0
        rc = tp / ntrue if ntrue else 0.0
        precs.append(pr)
        recs.append(rc)
        f1s.append(2 * pr * rc / (pr + rc) if pr + rc else 0.0)
    return acc, sum(precs) / n, sum(recs) / n, sum(f1s) / n


CRAFTED = [[5, 0, 0], [0, 4, 1], [0, 2, 3]]


def crafted_pairs():
    return [(t, p) for t, row in enumerate(CRAFTED) for p, k in enumerate(row) for _ in range(k)]


def test_crafted_confusion_against_tally():
    r = report_from_confusion(np.array(CRAFTED))
    want = tally(crafted_pairs(), 3)
    for got, ref in zip((r.accuracy, r.precision, r.recall, r.f1), want):
        assert abs(got - ref) <= 1e-12
    # hand values for the same matrix
    assert r.accuracy == pytest.approx(12 / 15, abs=1e-12)
    assert r.precision == pytest.approx((1 + 4 / 6 + 3 / 4) / 3, abs=1e-12)
    assert r.recall == pytest.approx((1 + 4 / 5 + 3 / 5) / 3, abs=1e-12)


def test_confusion_from_pairs():
    t, p = zip(*crafted_pairs())
    assert confusion_matrix(t, p, 3).tolist() == CRAFTED


@given(st.integers(1, 5).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=1,
                                              max_size=40))))
def test_metrics_match_tally(case):
    n, pairs = case
    t, p = zip(*pairs)
    r = classification_report(t, p, n)
    for got, ref in zip((r.accuracy, r.precision, r.recall, r.f1), tally(pairs, n)):
        assert abs(got - ref) <= 1e-12
        assert 0.0 <= got <= 1.0
    assert r.confusion.sum() == len(pairs)


def test_perfect_and_constant_predictors():
    y = [0, 1, 2, 2, 1, 0]
    perfect = classification_report(y, y, 3)
    assert (perfect.accuracy, perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0, 1.0)
    const = classification_report(y, [0] * 6, 3)
    assert const.accuracy == pytest.approx(1 / 3)
    assert const.recall == pytest.approx(1 / 3)
    # classes 1 and 2 are never predicted: precision 0 for them
    assert const.precision == pytest.approx((2 / 6) / 3)


def test_empty_evaluation_rejected():
    with pytest.raises(HierarchyError):
        report_from_confusion(np.zeros((2, 2), int))


# --------------------------------------------------------------------------
# routing with hand-built models
#
# 4x4 inputs. Inking pixel (0, k) selects degree index k; inking (1, c)
# selects class c inside the level-1 model.


def _dense(rows_cols, n, name, labels, keys=None):
    m = Model([Dense(n), Softmax()], (4, 4, 1))
    w = np.zeros((16, n))
    for pix, cls in rows_cols:
        w[pix, cls] = 20.0
    m.set_params([w, np.zeros(n)])
    return TrainedModel(m, labels, class_keys=keys, name=name)


@pytest.fixture
def crafted():
    level0 = _dense([(k, k) for k in range(3)], 3, "level0", [1, 2, 3])
    level1 = {d: _dense([(4 + c, c) for c in range(n)], n, f"degree{d}", list(range(n)),
                        [tuple(range(c, c + d)) for c in range(n)])
              for d, n in ((1, 2), (2, 3), (3, 4))}
    return HierarchicalModel(level0, level1)


def image(k, c):
    r = np.zeros((4, 4), np.uint8)
    r[0, k] = 255
    r[1, c] = 255
    return r


def test_routes_to_argmax_degree(crafted):
    p = predict(crafted, image(1, 2))
    assert (p.degree, p.class_id, p.class_key) == (2, 2, (2, 3))
    assert p.level0_probs.argmax() == 1 and len(p.level1_probs) == 3
    p = predict(crafted, image(2, 3))
    assert (p.degree, p.class_id) == (3, 3)


def test_batch_routing_and_path_validity(crafted):
    cases = [(0, 1), (1, 0), (2, 3), (1, 2), (0, 0)]
    rasters = np.stack([image(k, c) for k, c in cases])
    deg, cls, p0, p1 = predict_batch(crafted, rasters)
    assert deg.tolist() == [1, 2, 3, 2, 1] and cls.tolist() == [1, 0, 3, 2, 0]
    assert sorted(p1) == [1, 2, 3] and len(p1[2]) == 2
    rep = evaluate(crafted, rasters, [1, 2, 3, 2, 1], [1, 0, 3, 2, 0])
    assert rep.path_valid and rep.joint_accuracy == 1.0
    assert rep.level0.accuracy == 1.0


def test_evaluate_conditions_level1_on_true_degree(crafted):
    # level 0 says degree 1 but the truth is degree 2 with class 2
    rep = evaluate(crafted, image(0, 2)[None], [2], [2])
    assert rep.level0.accuracy == 0.0
    assert rep.level1[2].accuracy == 1.0
    assert rep.joint_accuracy == 0.0
    assert rep.path_valid


def test_resample_and_warning(crafted):
    big = np.kron(image(1, 1), np.ones((2, 2), np.uint8))
    assert np.array_equal(resample(big, 4), image(1, 1))
    with pytest.warns(UserWarning, match="resampling"):
        p = predict(crafted, big)
    assert (p.degree, p.class_id) == (2, 1)


def test_model_validation(crafted):
    with pytest.raises(HierarchyError, match="degree"):
        HierarchicalModel(crafted.level0, {1: crafted.level1[1]})
    odd = TrainedModel(Model([Dense(2), Softmax()], (8, 8, 1)), [0, 1], name="degree1")
    with pytest.raises(HierarchyError, match="input size"):
        HierarchicalModel(crafted.level0, {**crafted.level1, 1: odd})


def test_save_load_and_reports(crafted, tmp_path):
    written = save_hierarchy(crafted, tmp_path)
    assert {p.name for p in written} >= {"level0.ucnn", "degree3.ucnn", "degree2_history.csv"}
    back = load_hierarchy(tmp_path)
    r = image(2, 1)
    assert predict(back, r).class_key == predict(crafted, r).class_key
    rep = evaluate(back, np.stack([image(0, 0), image(2, 1)]), [1, 3], [0, 1])
    paths = write_reports(rep, tmp_path / "eval")
    rows = list(csv.reader(open(paths[0])))
    assert rows[0] == ["dataset", "accuracy", "precision", "recall", "f1"]
    assert [r[0] for r in rows[1:]] == ["level0", "degree1", "degree3", "joint"]
    conf = list(csv.reader(open(tmp_path / "eval" / "confusion_level0.csv")))
    assert conf[0] == ["true\\pred", "1", "2", "3"]


def test_load_missing_model(crafted, tmp_path):
    save_hierarchy(crafted, tmp_path)
    (tmp_path / "degree2.ucnn").unlink()
    with pytest.raises(HierarchyError, match="degree2.ucnn"):
        load_hierarchy(tmp_path)


# --------------------------------------------------------------------------
# training on a real (tiny) corpus


@pytest.fixture(scope="module")
def corpus(alphabet):
    return split_corpus(generate_corpus(alphabet, default_styles(2), max_degree=2, image_px=16), 0.5, seed=0)


def test_missing_degree_is_reported(corpus):
    with pytest.raises(HierarchyError, match="missing degree 3"):
        train_hierarchy(corpus)
    with pytest.raises(HierarchyError, match="degree"):
        train_model(corpus, 1)


def test_train_model_shapes(corpus):
    tm = train_model(corpus, 0, settings=ModelSettings("level0", epochs=1, filters=4), batch_size=64)
    assert tm.labels == [1, 2] and tm.class_keys is None and tm.input_px == 16
    tm1 = train_model(corpus, 1, 2, ModelSettings("degree3", epochs=1, filters=2), batch_size=64)
    assert tm1.n_classes == 216 and tm1.class_keys == corpus.manifest.class_keys(2)
    assert tm1.name == "degree2"


def test_small_hierarchy_path_validity(alphabet):
    c = split_corpus(generate_corpus(alphabet, default_styles(2), max_degree=3, image_px=16), 0.5, seed=0)
    small = {d: ModelSettings("degree3", epochs=1, filters=2) for d in (1, 2, 3)}
    hm = train_hierarchy(c, HierarchySettings(ModelSettings("level0", epochs=1, filters=2), small, batch_size=256))
    x, y = c.arrays(None, "val")
    ids = np.array([s.class_id for s in c.manifest.samples if s.split == "val"])
    rep = evaluate(hm, x, y, ids)
    assert rep.path_valid


def test_per_model_overrides(corpus):
    aug = AugmentParams(seed=1)
    tm = train_model(corpus, 1, 1, ModelSettings("degree3", epochs=2, filters=2, batch_size=5, augment=aug),
                     batch_size=64)
    assert len(tm.history) == 2


def test_desk_settings_shape():
    s = desk_settings(7)
    assert s.seed == 7 and sorted(s.level1) == [1, 2, 3]
    assert s.level0.epochs <= 10 and s.level1[1].epochs <= 25
    assert s.level1[1].augment == AugmentParams(seed=7)
