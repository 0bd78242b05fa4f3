import pytest

from logit_tap.dump import dump_contexts, dump_run
from logit_tap.errors import ModelLoadError, TokenizationError
from logit_tap.providers import TINY_TOKENS, TinyModel, resolve
from logit_tap.wire import read_dump_file


class _Scripted:
    """Provider that plays back a fixed list of probability rows."""

    emits = "probs"
    model_id = "scripted"

    def __init__(self, rows, vocab=("a", "b", ";")):
        self.rows = list(rows)
        self.vocab = tuple(vocab)
        self.calls = 0

    def tokens(self):
        return self.vocab

    def scores(self, context):
        row = self.rows[min(self.calls, len(self.rows) - 1)]
        self.calls += 1
        return row


def test_resolve_builds_the_tiny_backend():
    model = resolve("tiny:7")
    assert model.model_id == "tiny-7"
    assert model.tokens() == TINY_TOKENS
    assert resolve("tiny").seed == 0


@pytest.mark.parametrize("ref", ["tiny:x", "mystery:thing", "transformers:"])
def test_unresolvable_refs_raise_model_load_error(ref):
    with pytest.raises(ModelLoadError):
        resolve(ref)


def test_transformers_ref_without_runtime_or_weights_fails_as_load_error():
    with pytest.raises(ModelLoadError):
        resolve("transformers:not/a-real-model")


def test_full_vocabulary_dump_has_no_residual_mass(tmp_path):
    result = dump_run(TinyModel(seed=1), ["ab "], tmp_path, k=len(TINY_TOKENS), max_steps=4)
    header, records = read_dump_file(result.dump_paths[0])
    assert header.k == len(TINY_TOKENS)
    for record in records:
        assert len(record.topk) == len(TINY_TOKENS)
        assert abs(record.rest) <= 1e-6


def test_k1_residual_is_one_minus_the_top_probability(tmp_path):
    result = dump_run(TinyModel(seed=1, sharpness=40.0), ["ab "], tmp_path, k=1, max_steps=3)
    _, records = read_dump_file(result.dump_paths[0])
    for record in records:
        assert len(record.topk) == 1
        assert abs(record.rest - (1.0 - record.topk[0][2])) <= 1e-12
    # sharpness 40 makes the hash model near-deterministic
    assert records[0].topk[0][2] > 0.9


def test_rerunning_the_same_walk_writes_identical_files(tmp_path):
    a = dump_run("tiny:5", ["ab 12 ", "cd "], tmp_path / "a", k=6)
    b = dump_run("tiny:5", ["ab 12 ", "cd "], tmp_path / "b", k=6)
    assert a.vocab_path.read_bytes() == b.vocab_path.read_bytes()
    for left, right in zip(a.dump_paths, b.dump_paths):
        assert left.read_bytes() == right.read_bytes()


def test_topk_is_sorted_by_descending_probability(tmp_path):
    result = dump_run("tiny:2", ["ab "], tmp_path, k=8, max_steps=2)
    _, records = read_dump_file(result.dump_paths[0])
    for record in records:
        probs = [p for _, _, p in record.topk]
        assert probs == sorted(probs, reverse=True)


def test_greedy_walk_stops_at_the_stop_token(tmp_path):
    one_hot_b = [0.0, 1.0, 0.0]
    one_hot_stop = [0.0, 0.0, 1.0]
    model = _Scripted([one_hot_b, one_hot_stop])
    result = dump_run(model, ["x"], tmp_path, k=3, max_steps=10, stop_token=";")
    _, records = read_dump_file(result.dump_paths[0])
    assert len(records) == 2  # prompt step, then the stop emission
    assert [r.step for r in records] == [0, 1]


def test_greedy_walk_respects_max_steps(tmp_path):
    model = _Scripted([[1.0, 0.0, 0.0]])  # never emits the stop token
    result = dump_run(model, ["x"], tmp_path, k=3, max_steps=4)
    _, records = read_dump_file(result.dump_paths[0])
    assert len(records) == 4


def test_one_dump_file_per_prompt_plus_one_vocab(tmp_path):
    result = dump_run("tiny:9", ["a", "b", "c"], tmp_path, k=4, max_steps=2)
    assert len(result.dump_paths) == 3
    assert result.vocab_path.exists()
    names = {p.name for p in result.dump_paths}
    assert names == {f"tiny-9__prompt{i:03d}.jsonl" for i in range(3)}


def test_dump_contexts_collapses_duplicates(tmp_path):
    path = dump_contexts(TinyModel(), ["same", "same", "other"], tmp_path / "d.jsonl", k=4)
    _, records = read_dump_file(path)
    assert len(records) == 2


def test_k_below_one_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        dump_run(TinyModel(), ["a"], tmp_path, k=0)
    with pytest.raises(ValueError):
        dump_contexts(TinyModel(), ["a"], tmp_path / "d.jsonl", k=0)


def test_tokenization_errors_propagate(tmp_path):
    class _Broken(_Scripted):
        def scores(self, context):
            raise TokenizationError("no ids")

    with pytest.raises(TokenizationError):
        dump_run(_Broken([]), ["a"], tmp_path, k=2)
