import math

import numpy as np
import pytest

from absatag.align import project, whole_word_segmenter
from absatag.emit import FeatureEmitter
from absatag.errors import EmptySplit
from absatag.labels import LabelSpace, Tag
from absatag.train import AdamW, EpochRecord, TrainConfig, history_csv_lines, lr_at_step, train


def test_config_defaults_match_training_setup():
    config = TrainConfig()
    assert config.learning_rate == 1e-4
    assert config.weight_decay == 1e-2
    assert config.batch_size == 32
    assert config.warmup_fraction == 0.5
    config.validate()


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0).validate()
    with pytest.raises(ValueError):
        TrainConfig(warmup_fraction=1.5).validate()
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0).validate()


def test_config_from_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(
        "learning_rate = 0.01\nepochs=7\nmask_in_decoding = true\n# comment\n",
        encoding="utf-8",
    )
    config = TrainConfig.from_file(str(path))
    assert config.learning_rate == 0.01
    assert config.epochs == 7
    assert config.mask_in_decoding is True
    config = TrainConfig.from_file(str(path), epochs=2)
    assert config.epochs == 2


def test_config_from_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("learningrate=1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        TrainConfig.from_file(str(path))


def test_lr_schedule_endpoints_and_peak():
    config = TrainConfig(learning_rate=1e-4, warmup_fraction=0.5)
    total = 1000
    assert lr_at_step(config, 0, total) == 0.0
    assert lr_at_step(config, 500, total) == pytest.approx(1e-4)
    # Independent evaluation of the piecewise-linear form at 75% of total:
    # decay side, halfway between peak and zero.
    assert lr_at_step(config, 750, total) == pytest.approx(0.5e-4)
    assert lr_at_step(config, 999, total) == pytest.approx(1e-4 * 1 / 500)


def test_lr_schedule_monotone_up_then_down():
    config = TrainConfig(learning_rate=3e-3, warmup_fraction=0.25)
    total = 200
    values = [lr_at_step(config, s, total) for s in range(total)]
    peak = int(0.25 * total)
    assert all(a < b for a, b in zip(values[:peak], values[1 : peak + 1]))
    assert all(a > b for a, b in zip(values[peak:], values[peak + 1 :]))
    assert max(values) == pytest.approx(3e-3)


def test_lr_schedule_no_warmup():
    config = TrainConfig(learning_rate=1e-2, warmup_fraction=0.0)
    assert lr_at_step(config, 0, 10) == pytest.approx(1e-2)
    assert lr_at_step(config, 5, 10) == pytest.approx(0.5e-2)


def test_lr_schedule_rejects_out_of_range():
    config = TrainConfig()
    with pytest.raises(ValueError):
        lr_at_step(config, 10, 10)
    with pytest.raises(ValueError):
        lr_at_step(config, -1, 10)


def test_adamw_decoupled_decay_on_untouched_parameters():
    """A parameter with zero gradient and no moment history shrinks by
    exactly (1 - lr * weight_decay) each step."""
    config = TrainConfig(weight_decay=1e-2)
    p = np.array([2.0, -3.0, 0.5])
    opt = AdamW({"p": p}, config)
    lr = 0.1
    opt.step({"p": np.zeros(3)}, lr)
    np.testing.assert_allclose(p, np.array([2.0, -3.0, 0.5]) * (1 - lr * 1e-2))
    opt.step({}, lr)  # missing gradient behaves the same
    np.testing.assert_allclose(
        p, np.array([2.0, -3.0, 0.5]) * (1 - lr * 1e-2) ** 2
    )


def test_adamw_moves_against_gradient():
    config = TrainConfig(weight_decay=0.0)
    p = np.zeros(2)
    opt = AdamW({"p": p}, config)
    for _ in range(10):
        opt.step({"p": np.array([1.0, -1.0])}, lr=0.1)
    assert p[0] < 0 < p[1]


def _toy_data(n=10):
    """Separable corpus: each token string maps to a unique label."""
    space = LabelSpace()
    mapping = [
        (("kamar", "bersih"), (Tag.B_ASPECT, Tag.B_SENTIMENT)),
        (("kamar", "mandi", "kotor"), (Tag.B_ASPECT, Tag.I_ASPECT, Tag.B_SENTIMENT)),
        (("utk", "kamar"), (Tag.O, Tag.B_ASPECT)),
        (("wifi", "cepat", "sekali"), (Tag.B_ASPECT, Tag.B_SENTIMENT, Tag.I_SENTIMENT)),
        (("utk", "wifi", "bersih"), (Tag.O, Tag.B_ASPECT, Tag.B_SENTIMENT)),
    ]
    sentences = []
    for i in range(n):
        words, labels = mapping[i % len(mapping)]
        sentences.append(
            project(list(words), list(labels), whole_word_segmenter, sid=str(i))
        )
    return space, sentences


def test_train_separable_toy_reaches_perfect_f1():
    space, sentences = _toy_data(10)
    config = TrainConfig(learning_rate=0.05, epochs=50, batch_size=4, seed=0)
    result = train(config, sentences, sentences, space, emitter=FeatureEmitter())
    nlls = [r.train_nll for r in result.history]
    assert all(b < a for a, b in zip(nlls[1:], nlls[2:]))  # monotone after epoch 1
    assert result.history[-1].val_token_f1 == 1.0
    assert all(math.isfinite(r.train_nll) for r in result.history)


def test_train_zero_epochs_returns_initialization():
    space, sentences = _toy_data(4)
    config = TrainConfig(epochs=0, seed=3)
    emitter = FeatureEmitter()
    result = train(config, sentences, sentences, space, emitter=emitter)
    assert result.history == []
    init = np.random.default_rng(3)
    from absatag.crf import CrfParams

    expected = CrfParams.init_random(init)
    np.testing.assert_array_equal(result.model.params.transitions, expected.transitions)
    np.testing.assert_array_equal(result.model.params.start, expected.start)
    np.testing.assert_array_equal(result.model.params.end, expected.end)
    assert np.all(result.model.emitter.weights == 0.0)


def test_train_same_seed_bit_identical():
    space, sentences = _toy_data(8)
    config = TrainConfig(epochs=3, batch_size=3, seed=11, learning_rate=0.01)
    a = train(config, sentences, sentences, space, emitter=FeatureEmitter())
    b = train(config, sentences, sentences, space, emitter=FeatureEmitter())
    np.testing.assert_array_equal(a.model.params.transitions, b.model.params.transitions)
    np.testing.assert_array_equal(a.model.emitter.weights, b.model.emitter.weights)
    assert [r.val_token_f1 for r in a.history] == [r.val_token_f1 for r in b.history]
    assert history_csv_lines(a.history) == history_csv_lines(b.history)


def test_train_threads_match_sequential():
    space, sentences = _toy_data(8)
    base = dict(epochs=2, batch_size=4, seed=5, learning_rate=0.01)
    a = train(TrainConfig(**base), sentences, sentences, space, emitter=FeatureEmitter())
    b = train(
        TrainConfig(**base, threads=4), sentences, sentences, space,
        emitter=FeatureEmitter(),
    )
    np.testing.assert_array_equal(a.model.params.transitions, b.model.params.transitions)
    np.testing.assert_array_equal(a.model.emitter.weights, b.model.emitter.weights)


def test_train_history_length_equals_epochs():
    space, sentences = _toy_data(6)
    config = TrainConfig(epochs=4, seed=0)
    result = train(config, sentences, sentences, space, emitter=FeatureEmitter())
    assert len(result.history) == 4
    assert [r.epoch for r in result.history] == [0, 1, 2, 3]


def test_train_empty_splits_rejected():
    space, sentences = _toy_data(4)
    with pytest.raises(EmptySplit):
        train(TrainConfig(), [], sentences, space, emitter=FeatureEmitter())
    with pytest.raises(EmptySplit):
        train(TrainConfig(), sentences, [], space, emitter=FeatureEmitter())


def test_train_external_logits_crf_only():
    rng = np.random.default_rng(21)
    space, sentences = _toy_data(6)
    external = {
        s.sid: rng.normal(size=(len(s), 10)) for s in sentences
    }
    config = TrainConfig(epochs=2, seed=1, learning_rate=0.01)
    result = train(config, sentences, sentences, space, external=external)
    assert result.model.emitter is None
    assert len(result.history) == 2
    assert all(math.isfinite(r.train_nll) for r in result.history)


def test_train_untouched_feature_rows_stay_zero():
    space, sentences = _toy_data(4)
    config = TrainConfig(epochs=2, seed=2, learning_rate=0.05)
    emitter = FeatureEmitter()
    result = train(config, sentences, sentences, space, emitter=emitter)
    ids = set()
    for s in sentences:
        for pos_ids in emitter.sentence_feature_ids(s):
            ids.update(int(i) for i in pos_ids)
    untouched = np.ones(emitter.hash_dim, dtype=bool)
    untouched[sorted(ids)] = False
    assert np.all(result.model.emitter.weights[untouched] == 0.0)


def test_best_model_selection():
    space, sentences = _toy_data(10)
    config = TrainConfig(learning_rate=0.05, epochs=12, batch_size=4, seed=4)
    result = train(config, sentences, sentences, space, emitter=FeatureEmitter())
    best = max(result.history, key=lambda r: r.val_token_f1)
    assert result.history[result.best_epoch].val_token_f1 == best.val_token_f1


def test_history_csv_round_trips_floats():
    records = [EpochRecord(epoch=0, step=10, train_nll=1 / 3, val_token_f1=2 / 3)]
    lines = history_csv_lines(records)
    assert lines[0] == "epoch,step,train_nll,val_f1"
    _, _, nll, f1 = lines[1].split(",")
    assert float(nll) == 1 / 3
    assert float(f1) == 2 / 3
