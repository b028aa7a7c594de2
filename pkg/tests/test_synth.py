import numpy as np
import pytest

from stocknews.features import labels
from stocknews.lexicon import build_lexicon
from stocknews.synth import SynthParams, synth


def _follow_rate(data):
    hits = total = 0
    for s in data.prices:
        c = np.asarray(s.closes)
        moves = np.sign(c[1:] - c[:-1])
        planted = data.planted[s.stock_id][1:]
        mask = planted != 0
        hits += int(np.sum(moves[mask] == planted[mask]))
        total += int(mask.sum())
    return hits / total


def test_null_signal_is_balanced():
    data = synth(SynthParams(days=400, stocks=10, signal=0.0, seed=1))
    ups = np.concatenate([labels(s.closes) for s in data.prices])
    assert abs(ups.mean() - 0.5) < 0.03  # ~4 standard errors at n = 3990


def test_planted_follow_rate_and_bayes_formula():
    p = SynthParams(days=600, stocks=10, signal=0.4, news_rate=0.5, seed=2)
    assert p.bayes_accuracy == pytest.approx(0.7)
    data = synth(p)
    assert abs(_follow_rate(data) - 0.9) < 0.02
    covered = np.mean([np.mean(d[1:] != 0) for d in data.planted.values()])
    assert abs(covered - 0.5) < 0.02


def test_persistence_extends_coverage():
    p = SynthParams(days=600, stocks=10, persistence=2, seed=3)
    assert p.bayes_accuracy == pytest.approx(0.75 * 0.9 + 0.25 * 0.5)
    data = synth(p)
    covered = np.mean([np.mean(d[2:] != 0) for d in data.planted.values()])
    assert abs(covered - 0.75) < 0.02
    assert abs(_follow_rate(data) - 0.9) < 0.02


def test_lexicon_recovers_clusters():
    data = synth(SynthParams(days=300, stocks=6, seed=4))
    lex = build_lexicon([d.tokens for d in data.docs], data.seeds, K=10, min_df=5)
    pos_share = np.mean([lex.polarity[t] > 0 for t in data.pos_tokens])
    neg_share = np.mean([lex.polarity[t] < 0 for t in data.neg_tokens])
    assert pos_share >= 0.9 and neg_share >= 0.9


def test_deterministic_files(tmp_path):
    a = synth(SynthParams(days=50, stocks=2, seed=9)).write(tmp_path / "a")
    b = synth(SynthParams(days=50, stocks=2, seed=9)).write(tmp_path / "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    assert a["seeds"].read_text(encoding="utf-8") == "POS:\npos00\npos01\nNEG:\nneg00\nneg01\n"


@pytest.mark.parametrize("kw", [{"signal": 0.6}, {"news_rate": 1.5}, {"days": 2}, {"n_pos": 1}])
def test_bad_params(kw):
    with pytest.raises(ValueError):
        SynthParams(**kw)
