import pytest

from chorus.errors import InvalidTokenId, ParseError
from chorus.vocab import FINGERPRINT_HEX_LEN, Vocabulary, fingerprint_tokens, load_vocabulary, save_vocabulary


def test_id_of_inverts_token_order():
    v = Vocabulary(("a", "b", "cd"))
    for k, tok in enumerate(v.tokens):
        assert v.id_of(tok) == k
        assert v.token(k) == tok


def test_duplicate_tokens_rejected():
    with pytest.raises(ValueError):
        Vocabulary(("a", "a"))


def test_empty_token_rejected():
    with pytest.raises(ValueError):
        Vocabulary(("a", ""))


def test_invalid_id():
    v = Vocabulary(("a",))
    with pytest.raises(InvalidTokenId):
        v.token(1)
    with pytest.raises(InvalidTokenId):
        v.token(-1)


def test_fingerprint_tracks_content_and_order():
    base = fingerprint_tokens(("a", "b"))
    assert len(base) == FINGERPRINT_HEX_LEN
    assert fingerprint_tokens(("a", "b")) == base
    assert fingerprint_tokens(("b", "a")) != base
    assert fingerprint_tokens(("a", "b", "c")) != base
    # Length prefixing: ("ab", "c") and ("a", "bc") concatenate identically.
    assert fingerprint_tokens(("ab", "c")) != fingerprint_tokens(("a", "bc"))


def test_save_load_round_trip(tmp_path):
    v = Vocabulary(("a", "b", "hello", "#vocab", " "))
    p = tmp_path / "v.vocab"
    save_vocabulary(v, p)
    loaded = load_vocabulary(p)
    assert loaded.tokens == v.tokens
    assert loaded.fingerprint == v.fingerprint


def test_save_rejects_newline_tokens(tmp_path):
    with pytest.raises(ValueError):
        save_vocabulary(Vocabulary(("a\nb",)), tmp_path / "v.vocab")


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "v.vocab"
    p.write_text("#vocab v2 deadbeefdeadbeef\na\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_vocabulary(p)


def test_load_rejects_fingerprint_mismatch(tmp_path):
    v = Vocabulary(("a", "b"))
    p = tmp_path / "v.vocab"
    save_vocabulary(v, p)
    tampered = p.read_text(encoding="utf-8").replace("\na\n", "\nz\n")
    p.write_text(tampered, encoding="utf-8")
    with pytest.raises(ParseError):
        load_vocabulary(p)


def test_line_number_equals_token_id(tmp_path):
    v = Vocabulary(("x", "y", "z"))
    p = tmp_path / "v.vocab"
    save_vocabulary(v, p)
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("#vocab v1 ")
    for k in range(3):
        assert lines[1 + k] == v.token(k)
