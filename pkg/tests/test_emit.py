import json

import numpy as np
import pytest

from absatag.align import project, whole_word_segmenter
from absatag.crf import CrfParams, batch_nll, nll_and_grad, viterbi
from absatag.emit import (
    FeatureEmitter,
    expand_scores,
    featurize,
    hash_feature,
    load_external,
    read_logits,
    write_logits,
)
from absatag.errors import (
    MalformedRecord,
    MissingSentence,
    SubwordMismatch,
)
from absatag.labels import ALL_TAGS, NUM_TAGS, ORIGINAL_TAGS, LabelSpace, Tag

from helpers import brute_viterbi


def two_word_sentence():
    return project(
        ["tempatnya", "oke"],
        [Tag.B_ASPECT, Tag.B_SENTIMENT],
        lambda w: ["tempat", "##nya"] if w == "tempatnya" else [w],
    )


def test_featurize_marker_indicators():
    aligned = two_word_sentence()
    assert "cls" in featurize(aligned, 0)
    assert "sep" in featurize(aligned, len(aligned) - 1)


def test_featurize_continuation_indicator():
    aligned = two_word_sentence()
    feats = featurize(aligned, 2)  # ##nya
    assert "cont" in feats
    assert "first" not in feats
    assert "w=tempatnya" in feats
    assert "sw=##nya" in feats


def test_featurize_first_of_word_and_neighbors():
    aligned = two_word_sentence()
    feats = featurize(aligned, 1)
    assert "first" in feats
    assert "sw[-1]=[CLS]" in feats
    assert "sw[+1]=##nya" in feats
    assert "wp3=tem" in feats and "ws3=nya" in feats


def test_featurize_deterministic():
    a = two_word_sentence()
    b = two_word_sentence()
    for t in range(len(a)):
        assert featurize(a, t) == featurize(b, t)


def test_hash_feature_stable_and_in_range():
    assert hash_feature("sw=oke", 1 << 16, 7) == hash_feature("sw=oke", 1 << 16, 7)
    assert hash_feature("sw=oke", 1 << 16, 7) != hash_feature("sw=oke", 1 << 16, 8)
    for name in ("a", "b", "cont", "w=tempatnya"):
        assert 0 <= hash_feature(name, 1 << 16, 7) < (1 << 16)


def test_emitter_rejects_bad_hash_dim():
    with pytest.raises(ValueError):
        FeatureEmitter(hash_dim=1000)
    with pytest.raises(ValueError):
        FeatureEmitter(hash_dim=1 << 8)


def test_emit_zero_weights_zero_matrix():
    emitter = FeatureEmitter()
    matrix = emitter.emit(two_word_sentence())
    assert matrix.shape == (5, NUM_TAGS)
    assert np.all(matrix == 0.0)


def test_emit_single_feature_row():
    emitter = FeatureEmitter()
    fid = hash_feature("cont", emitter.hash_dim, emitter.hash_seed)
    emitter.weights[fid, 3] = 2.5
    matrix = emitter.emit(two_word_sentence())
    np.testing.assert_array_equal(matrix[2], np.eye(NUM_TAGS)[3] * 2.5)


def test_emit_linear_in_weights():
    rng = np.random.default_rng(0)
    aligned = two_word_sentence()
    w1 = FeatureEmitter()
    w2 = FeatureEmitter()
    w1.weights = rng.normal(size=w1.weights.shape) * (rng.random(w1.weights.shape) < 0.001)
    w2.weights = rng.normal(size=w2.weights.shape) * (rng.random(w2.weights.shape) < 0.001)
    both = FeatureEmitter()
    both.weights = w1.weights + w2.weights
    np.testing.assert_allclose(
        both.emit(aligned), w1.emit(aligned) + w2.emit(aligned), atol=1e-12
    )


def test_emitter_gradient_matches_finite_differences():
    """Chain rule through emit + CRF NLL against central differences."""
    rng = np.random.default_rng(1)
    space = LabelSpace()
    sentences = [
        project(["kamar", "bersih"], [Tag.B_ASPECT, Tag.B_SENTIMENT],
                whole_word_segmenter, sid="0"),
        project(["utk", "transit"], [Tag.O, Tag.O],
                lambda w: [w[:2], "##" + w[2:]], sid="1"),
    ]
    emitter = FeatureEmitter()
    params = CrfParams.init_random(rng)
    ids = [emitter.sentence_feature_ids(s) for s in sentences]
    gold = [space.encode(list(s.subword_labels)) for s in sentences]

    # Give the touched rows nonzero values so the check is not at a flat point.
    touched = sorted({int(i) for sent in ids for pos in sent for i in pos})
    for i in touched:
        emitter.weights[i] = rng.normal(size=NUM_TAGS) * 0.3

    def loss() -> float:
        batch = [(emitter.emit_from_ids(ids[s]), gold[s]) for s in range(2)]
        return batch_nll(params, batch)

    batch = [(emitter.emit_from_ids(ids[s]), gold[s]) for s in range(2)]
    _, grads = nll_and_grad(params, batch)
    grad_w = np.zeros_like(emitter.weights)
    for s in range(2):
        emitter.accumulate_gradient(grad_w, ids[s], grads.emissions[s])

    h = 1e-5
    for i in touched:
        for j in range(NUM_TAGS):
            orig = emitter.weights[i, j]
            emitter.weights[i, j] = orig + h
            up = loss()
            emitter.weights[i, j] = orig - h
            down = loss()
            emitter.weights[i, j] = orig
            assert grad_w[i, j] == pytest.approx((up - down) / (2 * h), abs=1e-6)


def test_expand_scores_five_to_ten():
    row = np.array([[1.0, 2.0, 3.0, 4.0, 5.0]])
    out = expand_scores(row, list(ORIGINAL_TAGS))
    np.testing.assert_array_equal(
        out[0], [1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 3.0, 5.0, 1.0]
    )


def test_expand_scores_respects_declared_order():
    row = np.array([[5.0, 4.0, 3.0, 2.0, 1.0]])
    order = list(reversed(ORIGINAL_TAGS))
    out = expand_scores(row, order)
    np.testing.assert_array_equal(
        out[0], [1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 3.0, 5.0, 1.0]
    )


def _write_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def test_load_external_accepts_matching_record(tmp_path):
    aligned = project(
        ["tempatnya"], [Tag.B_ASPECT],
        lambda w: ["tempat", "##nya"], sid="s0",
    )
    path = tmp_path / "logits.jsonl"
    scores = [[float(i + j) for j in range(10)] for i in range(4)]
    _write_records(path, [{
        "id": "s0",
        "subwords": ["[CLS]", "tempat", "##nya", "[SEP]"],
        "tag_order": [t.value for t in ALL_TAGS],
        "scores": scores,
    }])
    out = load_external(str(path), [aligned])
    np.testing.assert_array_equal(out["s0"], np.asarray(scores))


def test_load_external_subword_mismatch_position(tmp_path):
    aligned = project(
        ["tempatnya"], [Tag.B_ASPECT],
        lambda w: ["tempat", "##nya"], sid="s0",
    )
    path = tmp_path / "logits.jsonl"
    _write_records(path, [{
        "id": "s0",
        "subwords": ["[CLS]", "tempat", "[SEP]"],
        "tag_order": [t.value for t in ALL_TAGS],
        "scores": [[0.0] * 10] * 3,
    }])
    with pytest.raises(SubwordMismatch) as info:
        load_external(str(path), [aligned])
    assert info.value.position == 2


def test_load_external_missing_sentence(tmp_path):
    aligned = project(["a"], [Tag.O], whole_word_segmenter, sid="s1")
    path = tmp_path / "logits.jsonl"
    _write_records(path, [{
        "id": "s0",
        "subwords": ["[CLS]", "a", "[SEP]"],
        "tag_order": [t.value for t in ALL_TAGS],
        "scores": [[0.0] * 10] * 3,
    }])
    with pytest.raises(MissingSentence):
        load_external(str(path), [aligned])


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r.pop("id"),
        lambda r: r.pop("tag_order"),
        lambda r: r.update(scores=[[0.0] * 9] * 3),
        lambda r: r.update(tag_order=["O", "B-ASPECT"]),
        lambda r: r.update(tag_order=["O"] * 5),
        lambda r: r.update(scores=[[float("nan")] * 10] * 3),
    ],
)
def test_load_external_malformed_records(tmp_path, mutate):
    record = {
        "id": "s0",
        "subwords": ["[CLS]", "a", "[SEP]"],
        "tag_order": [t.value for t in ALL_TAGS],
        "scores": [[0.0] * 10] * 3,
    }
    mutate(record)
    path = tmp_path / "logits.jsonl"
    _write_records(path, [record])
    with pytest.raises(MalformedRecord):
        read_logits(str(path))


def test_load_external_rejects_garbage_line(tmp_path):
    path = tmp_path / "logits.jsonl"
    path.write_text("not json\n", encoding="utf-8")
    with pytest.raises(MalformedRecord):
        read_logits(str(path))


def test_write_read_logits_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    path = tmp_path / "logits.jsonl"
    scores = rng.normal(size=(4, 10)) * 1e3
    write_logits(str(path), [("s0", ["[CLS]", "a", "##b", "[SEP]"], scores)])
    back = read_logits(str(path))["s0"].scores
    np.testing.assert_array_equal(back, scores)  # exact, not approx


def test_five_column_decode_matches_original_tag_decode(tmp_path):
    """Expanded auxiliary columns never change masked decoding on
    single-subword sentences: ties between X/Y columns and the original
    columns they copy resolve toward the original tag."""
    rng = np.random.default_rng(3)
    space = LabelSpace()
    params = CrfParams.zeros()
    for _ in range(50):
        T = int(rng.integers(1, 5))
        words = [f"w{i}" for i in range(T)]
        aligned = project(words, [Tag.O] * T, whole_word_segmenter, sid="s")
        five = rng.normal(size=(T + 2, 5))
        ten = expand_scores(five, list(ORIGINAL_TAGS))
        path, _ = viterbi(params, ten, space.mask)
        collapsed = [space.tags[i] for i in (path[t + 1] for t in range(T))]
        collapsed = [
            t if t.is_original else {Tag.X_ASPECT: Tag.I_ASPECT,
                                     Tag.X_SENTIMENT: Tag.I_SENTIMENT,
                                     Tag.Y: Tag.O}[t]
            for t in collapsed
        ]
        # Oracle: brute-force over the 5 original tags with BIO validity.
        want, _ = brute_viterbi_bio(five[1:-1])
        assert collapsed == want


def brute_viterbi_bio(scores):
    """Exhaustive argmax over well-formed five-tag sequences."""
    import itertools

    from absatag.metrics import audit_bio

    T = scores.shape[0]
    best = None
    best_score = -np.inf
    for seq in itertools.product(range(5), repeat=T):
        tags = [ORIGINAL_TAGS[i] for i in seq]
        if audit_bio([tags]):
            continue
        value = sum(scores[t, seq[t]] for t in range(T))
        if value > best_score + 1e-12:
            best = tags
            best_score = value
    return best, best_score
