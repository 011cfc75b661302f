import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evorat.data import Example, SequenceData, Vocab
from evorat.datagen import (ToyConfig, count_occurrences, find_occurrences, generate_toy_dataset,
                            load_jsonl, load_text_embeddings, majority_vote_mask, one_hot_embeddings,
                            save_jsonl)
from evorat.exceptions import ConfigurationError, GenerationError, IngestionError, InvalidInputError


@pytest.fixture(scope="module")
def toy():
    return generate_toy_dataset(ToyConfig(), 0)


def test_default_split_sizes(toy):
    assert (len(toy.train), len(toy.validation), len(toy.test)) == (6400, 1600, 2000)
    assert toy.num_classes == 3
    assert list(toy.vocab.itos) == ["a", "b", "c"]


def test_every_string_has_exactly_its_own_highlight(toy):
    hls = ToyConfig().class_highlights
    strings = set()
    for _, part in toy.items():
        for ex in part:
            s = "".join(toy.vocab.decode(ex.tokens))
            assert len(s) == 20
            assert count_occurrences(s, hls[ex.label]) == 1
            for j, other in enumerate(hls):
                if j != ex.label:
                    assert count_occurrences(s, other) == 0
            pos = find_occurrences(s, hls[ex.label])[0]
            want = [0] * 20
            want[pos:pos + 3] = [1, 1, 1]
            assert list(ex.gold_mask) == want
            strings.add(s)
    assert len(strings) == 10000


def test_classes_balanced(toy):
    labels = [ex.label for _, part in toy.items() for ex in part]
    counts = np.bincount(labels)
    assert counts.max() - counts.min() <= 1


def test_generation_deterministic_and_seed_sensitive():
    cfg = ToyConfig(total=200)
    a, b, c = (generate_toy_dataset(cfg, s) for s in (5, 5, 6))
    assert [e.tokens for e in a.train] == [e.tokens for e in b.train]
    assert [e.tokens for e in a.train] != [e.tokens for e in c.train]


def test_occurrences_count_overlaps():
    assert count_occurrences("aaaa", "aa") == 3
    assert find_occurrences("abaaba", "aba") == [0, 3]


@pytest.mark.parametrize("kwargs", [
    {"class_highlights": []},
    {"class_highlights": ["aba", "aba"]},
    {"class_highlights": ["abd"]},
    {"split_fractions": (0.5, 0.5, 0.5)},
    {"chunk_len": 3},
    {"min_chunks": 4, "max_chunks": 2},
    {"total": 0},
    {"string_len": 2},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        generate_toy_dataset(ToyConfig(**kwargs), 0)


def test_unsatisfiable_config_raises_generation_error():
    # 3-character strings over "ab" with one "ab" and no "ba": too few to fill 50 unique slots
    cfg = ToyConfig(class_highlights=["ab", "ba"], alphabet="ab", string_len=3, total=50,
                    chunk_len=1, max_attempts=200)
    with pytest.raises(GenerationError):
        generate_toy_dataset(cfg, 0)


def test_jsonl_roundtrip(tmp_path):
    splits = generate_toy_dataset(ToyConfig(total=120), 1)
    save_jsonl(splits, tmp_path)
    back = load_jsonl(tmp_path)
    assert back.vocab == splits.vocab
    for (_, x), (_, y) in zip(splits.items(), back.items()):
        assert [(e.tokens, e.label, e.gold_mask) for e in x] == [(e.tokens, e.label, e.gold_mask) for e in y]
    first = (tmp_path / "train.jsonl").read_bytes()
    save_jsonl(splits, tmp_path)
    assert (tmp_path / "train.jsonl").read_bytes() == first


def test_jsonl_without_vocab_builds_one(tmp_path):
    for name in ("train", "validation", "test"):
        (tmp_path / f"{name}.jsonl").write_text('{"tokens": ["x", "y"], "label": 0}\n')
    back = load_jsonl(tmp_path)
    assert list(back.vocab.itos) == ["x", "y"]
    assert back.train[0].gold_mask is None


@pytest.mark.parametrize("line", [
    "not json",
    '{"tokens": [], "label": 0}',
    '{"tokens": ["a"], "label": -1}',
    '{"tokens": ["a", "b"], "label": 0, "rationale": [1]}',
    '{"tokens": ["a", "zz"], "label": 0}',
    '{"label": 0}',
])
def test_jsonl_bad_records(tmp_path, line):
    save_jsonl(generate_toy_dataset(ToyConfig(total=30), 0), tmp_path)
    (tmp_path / "test.jsonl").write_text(line + "\n")
    with pytest.raises(IngestionError):
        load_jsonl(tmp_path)


def test_missing_split_file(tmp_path):
    with pytest.raises(IngestionError):
        load_jsonl(tmp_path)


def test_one_hot_embeddings():
    e = one_hot_embeddings(3, 25)
    assert e.shape == (3, 25)
    np.testing.assert_array_equal(e[:, :3], np.eye(3))
    assert not e[:, 3:].any()
    with pytest.raises(ConfigurationError):
        one_hot_embeddings(30, 25)


def test_text_embeddings(tmp_path):
    f = tmp_path / "emb.txt"
    f.write_text("a 1 2\nq 5 5\nb 3 4\n")
    e = load_text_embeddings(f, Vocab("abc"))
    np.testing.assert_array_equal(e, [[1, 2], [3, 4], [0, 0]])
    f.write_text("a 1 x\n")
    with pytest.raises(IngestionError):
        load_text_embeddings(f, Vocab("ab"))
    f.write_text("a 1 2\nb 1\n")
    with pytest.raises(IngestionError):
        load_text_embeddings(f, Vocab("ab"))


def test_majority_vote():
    assert majority_vote_mask([[1, 0, 1], [1, 1, 0], [0, 0, 1]]) == [1, 0, 1]
    assert majority_vote_mask([[1, 0], [0, 1]]) == [0, 0]
    with pytest.raises(InvalidInputError):
        majority_vote_mask([])
    with pytest.raises(InvalidInputError):
        majority_vote_mask([[1], [1, 0]])


@given(st.lists(st.lists(st.integers(0, 1), min_size=4, max_size=4), min_size=1, max_size=7))
@settings(max_examples=100, deadline=None)
def test_majority_vote_property(anns):
    got = majority_vote_mask(anns)
    for j, v in enumerate(got):
        assert v == int(2 * sum(a[j] for a in anns) > len(anns))


def test_example_validation():
    with pytest.raises(InvalidInputError):
        Example((0, 1), 0, (1,))
    with pytest.raises(InvalidInputError):
        Example((0, 1), 0, (1, 2))
    with pytest.raises(InvalidInputError):
        SequenceData.from_examples([])


def test_sequence_data_padding():
    d = SequenceData.from_examples([Example((1, 2), 0, (0, 1)), Example((2, 1, 0), 1, (1, 0, 0))])
    np.testing.assert_array_equal(d.tokens, [[1, 2, 0], [2, 1, 0]])
    np.testing.assert_array_equal(d.lengths, [2, 3])
    np.testing.assert_array_equal(d.valid, [[1, 1, 0], [1, 1, 1]])
    np.testing.assert_array_equal(d.gold, [[0, 1, 0], [1, 0, 0]])
