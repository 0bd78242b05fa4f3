import json

import pytest

from chorus.decoding import DecodeSession, ModelEndpoint, decode
from chorus.errors import EndpointFailure, FingerprintMismatch, ParseError, SchemaVersionMismatch
from chorus.experiment import build_bundle
from chorus.fixtures import fixture_config
from chorus.fusion import EnsembleConfig
from chorus.replay import (
    ReplaySpec,
    context_hash,
    load_recorded_models,
    read_dump,
    replay,
    replay_transcript,
    visited_contexts,
    write_dump,
)
from chorus.vocab import save_vocabulary


@pytest.fixture(scope="module")
def bundle():
    return build_bundle(fixture_config(seeds=(1,)))


def _live_session(bundle, mode="core"):
    from chorus.experiment import _cell_session

    session = _cell_session(bundle, mode, 0.0, 0.0, 1)
    session.record = True  # sweeps drop transcripts; the dump helper needs them
    return session


def _dump_ensemble_run(bundle, tmp_path, prompts, mode="core"):
    """Dump every model at the contexts a live ensemble visits on `prompts`."""
    contexts = []
    live = []
    session = _live_session(bundle, mode)
    for prompt in prompts:
        generated, transcript = decode(session, prompt)
        live.append(generated)
        contexts.extend(visited_contexts(prompt, transcript))
    dump_paths, vocab_paths = [], []
    for built in bundle.models:
        vocab = built.tokenizer.vocabulary
        vocab_path = tmp_path / f"{built.spec.id}.vocab"
        save_vocabulary(vocab, vocab_path)
        vocab_paths.append(vocab_path)
        dump_path = tmp_path / f"{built.spec.id}.jsonl"
        write_dump(dump_path, built.spec.id, vocab, built.model.step, contexts)
        dump_paths.append(dump_path)
    return dump_paths, vocab_paths, live


def test_replayed_transcript_matches_live_run(bundle, tmp_path):
    prompts = [inst.prompt for inst in bundle.suite[:5]]
    dumps, vocabs, live = _dump_ensemble_run(bundle, tmp_path, prompts)
    recorded = load_recorded_models(dumps, vocabs)
    spec = ReplaySpec(main="scribe", modes=("core",))
    for prompt, live_text in zip(prompts, live):
        replayed, transcript = replay_transcript(recorded, spec, prompt)
        assert replayed == live_text
        assert transcript, "replay should keep the scalar transcript"


def test_topk_truncation_changes_little_on_peaked_steps(bundle, tmp_path):
    # Not an equality claim: k=8 drops real mass. The replayed walk must
    # still be a valid decode that terminates and uses only recorded steps.
    prompts = [inst.prompt for inst in bundle.suite[:2]]
    contexts = []
    session = _live_session(bundle)
    for prompt in prompts:
        _, transcript = decode(session, prompt)
        contexts.extend(visited_contexts(prompt, transcript))
    built = bundle.main
    vocab = built.tokenizer.vocabulary
    save_vocabulary(vocab, tmp_path / "m.vocab")
    write_dump(tmp_path / "m.jsonl", built.spec.id, vocab, built.model.step, contexts, k=8)
    header, records = read_dump(tmp_path / "m.jsonl")
    assert header.k == 8
    assert all(len(r.topk) <= 8 for r in records)
    assert all(r.rest >= 0 for r in records)


def test_replay_metrics_rows(bundle, tmp_path):
    instances = bundle.suite[:5]
    prompts = [inst.prompt for inst in instances]
    contexts = []
    session = _live_session(bundle)
    for prompt in prompts:
        _, transcript = decode(session, prompt)
        contexts.extend(visited_contexts(prompt, transcript))
    # Cover each model's solo walk too, so baselines are replayable.
    for built in bundle.models:
        joiner = " " if built.tokenizer.scheme == "whitespace-word" else ""
        solo = DecodeSession(
            config=EnsembleConfig(bundle.config.kernel, mode="vanilla"),
            main=ModelEndpoint(built.spec.id, built.tokenizer, built.model.step, "main"),
            stop_token=";",
            max_steps=12,
            token_joiner=joiner,
        )
        for prompt in prompts:
            _, transcript = decode(solo, prompt)
            contexts.extend(visited_contexts(prompt, transcript))
    dump_paths, vocab_paths = [], []
    for built in bundle.models:
        vocab = built.tokenizer.vocabulary
        vocab_path = tmp_path / f"{built.spec.id}.vocab"
        save_vocabulary(vocab, vocab_path)
        vocab_paths.append(vocab_path)
        dump_path = tmp_path / f"{built.spec.id}.jsonl"
        write_dump(dump_path, built.spec.id, vocab, built.model.step, contexts)
        dump_paths.append(dump_path)
    spec = ReplaySpec(main="scribe", modes=("core",), joiners={"lexica": " "})
    rows = replay(dump_paths, vocab_paths, instances, spec)
    singles = [r for r in rows if r.method.startswith("single:")]
    ensembles = [r for r in rows if r.method == "replay"]
    assert {r.method for r in singles} == {"single:abacus", "single:lexica", "single:scribe"}
    assert len(ensembles) == 1
    best = max(r.accuracy for r in singles)
    assert ensembles[0].negative_ensemble == (ensembles[0].accuracy < best)


def test_empty_dump_set_gives_empty_metrics():
    assert replay([], [], [], ReplaySpec(main="scribe")) == []


def test_lexica_words_survive_the_wire(bundle, tmp_path):
    # Word tokens contain spaces-adjacent text and non-ASCII never appears,
    # but the JSON round-trip must preserve tokens exactly either way.
    built = next(b for b in bundle.models if b.spec.id == "lexica")
    vocab = built.tokenizer.vocabulary
    save_vocabulary(vocab, tmp_path / "lex.vocab")
    prompt = bundle.suite[0].prompt
    write_dump(tmp_path / "lex.jsonl", "lexica", vocab, built.model.step, [prompt])
    recorded = load_recorded_models([tmp_path / "lex.jsonl"], [tmp_path / "lex.vocab"])
    dist = recorded["lexica"].step(prompt)
    assert dist.probs.sum() == pytest.approx(1.0)


def test_truncated_line_reports_its_number(tmp_path):
    path = tmp_path / "cut.jsonl"
    good_header = json.dumps({"v": 1, "k": 4, "vocab_fp": "f" * 16})
    good_line = json.dumps(
        {"v": 1, "model": "m", "step": 0, "ctx": "0" * 16, "topk": [["a", 0, 1.0]], "rest": 0.0}
    )
    path.write_text(good_header + "\n" + good_line + "\n" + good_line[: len(good_line) // 2] + "\n")
    with pytest.raises(ParseError) as err:
        read_dump(path)
    assert err.value.line == 3


def test_wrong_schema_version_is_refused(tmp_path):
    path = tmp_path / "v2.jsonl"
    path.write_text(json.dumps({"v": 2, "k": 4, "vocab_fp": "f" * 16}) + "\n")
    with pytest.raises(SchemaVersionMismatch) as err:
        read_dump(path)
    assert err.value.line == 1


def test_unresolvable_fingerprint_is_refused(bundle, tmp_path):
    built = bundle.main
    vocab = built.tokenizer.vocabulary
    dump = tmp_path / "m.jsonl"
    write_dump(dump, "scribe", vocab, built.model.step, ["k37 : "])
    with pytest.raises(FingerprintMismatch):
        load_recorded_models([dump], [])


def test_missing_context_fails_the_main_endpoint(bundle, tmp_path):
    built = bundle.main
    vocab = built.tokenizer.vocabulary
    save_vocabulary(vocab, tmp_path / "m.vocab")
    dump = tmp_path / "m.jsonl"
    write_dump(dump, "scribe", vocab, built.model.step, ["k37 : "])
    recorded = load_recorded_models([dump], [tmp_path / "m.vocab"])
    with pytest.raises(EndpointFailure):
        recorded["scribe"].step("never dumped")


def test_context_hash_is_stable():
    assert context_hash("abc") == context_hash("abc")
    assert len(context_hash("abc")) == 16
    assert context_hash("abc") != context_hash("abd")
