"""Token inventories with content fingerprints and a line-based file format."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidTokenId, ParseError

FINGERPRINT_HEX_LEN = 16


def fingerprint_tokens(tokens: tuple[str, ...]) -> str:
    """Content hash of an ordered token list.

    Length-prefixed UTF-8 hashing, so no separator can collide with token
    content. Truncated sha256; stable across platforms.
    """
    h = hashlib.sha256()
    for tok in tokens:
        raw = tok.encode("utf-8")
        h.update(len(raw).to_bytes(4, "big"))
        h.update(raw)
    return h.hexdigest()[:FINGERPRINT_HEX_LEN]


@dataclass(frozen=True)
class Vocabulary:
    """An ordered inventory of unique token strings.

    The fingerprint identifies the exact ordered content; two vocabularies
    with the same fingerprint are interchangeable everywhere.
    """

    tokens: tuple[str, ...]
    _id_of: dict[str, int] = field(init=False, repr=False, compare=False)
    fingerprint: str = field(init=False, compare=False)

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("vocabulary must contain at least one token")
        ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(ids) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if "" in ids:
            raise ValueError("vocabulary tokens must be non-empty")
        object.__setattr__(self, "_id_of", ids)
        object.__setattr__(self, "fingerprint", fingerprint_tokens(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._id_of

    def id_of(self, token: str) -> int:
        return self._id_of[token]

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise InvalidTokenId(f"id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write one token per line; line number = token id; header carries the fingerprint."""
    for tok in vocab.tokens:
        if "\n" in tok or "\r" in tok:
            raise ValueError(f"token {tok!r} contains a newline; not representable in the vocab file format")
    lines = [f"#vocab v1 {vocab.fingerprint}"]
    lines.extend(vocab.tokens)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty vocabulary file", line=1)
    header = lines[0].split(" ")
    if len(header) != 3 or header[0] != "#vocab" or header[1] != "v1":
        raise ParseError(f"bad vocabulary header {lines[0]!r}", line=1)
    try:
        vocab = Vocabulary(tuple(lines[1:]))
    except ValueError as err:
        raise ParseError(str(err), line=2) from err
    if vocab.fingerprint != header[2]:
        raise ParseError(
            f"fingerprint {header[2]} does not match content fingerprint {vocab.fingerprint}",
            line=1,
        )
    return vocab
