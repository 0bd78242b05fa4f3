"""Toy tokenizers with deliberately different segmentation schemes.

Three schemes are provided so that the same text tokenizes differently per
model: per-character, whitespace-separated words, and greedy longest-match
over a merge-trained inventory. The mismatches between them (one model's
"ab" vs another's "a","b") are what the alignment and consistency machinery
downstream has to cope with.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import EmptyCorpus, UnknownCharacter
from .vocab import Vocabulary

CHARACTER = "character"
WHITESPACE = "whitespace-word"
GREEDY_MERGE = "greedy-longest-match-merge"


@dataclass(frozen=True)
class Tokenizer:
    """A vocabulary plus a deterministic text <-> id-sequence codec.

    decode(encode(text)) == text on every text the scheme can encode; for
    the whitespace scheme that domain is single-space-separated known words,
    for the other two it is any string over the base character inventory.
    """

    scheme: str
    vocabulary: Vocabulary

    def encode(self, text: str) -> list[int]:
        if self.scheme == CHARACTER:
            return self._encode_chars(text)
        if self.scheme == WHITESPACE:
            return self._encode_words(text)
        if self.scheme == GREEDY_MERGE:
            return self._encode_greedy(text)
        raise ValueError(f"unknown scheme {self.scheme!r}")

    def decode(self, ids: list[int]) -> str:
        tokens = [self.vocabulary.token(i) for i in ids]
        if self.scheme == WHITESPACE:
            return " ".join(tokens)
        return "".join(tokens)

    def _encode_chars(self, text: str) -> list[int]:
        ids = []
        for pos, ch in enumerate(text):
            if ch not in self.vocabulary:
                raise UnknownCharacter(text, pos)
            ids.append(self.vocabulary.id_of(ch))
        return ids

    def _encode_words(self, text: str) -> list[int]:
        if text == "":
            return []
        ids = []
        pos = 0
        for word in text.split(" "):
            if word == "" or word not in self.vocabulary:
                raise UnknownCharacter(text, pos)
            ids.append(self.vocabulary.id_of(word))
            pos += len(word) + 1
        return ids

    def _encode_greedy(self, text: str) -> list[int]:
        max_len = max((len(t) for t in self.vocabulary.tokens), default=0)
        ids = []
        pos = 0
        while pos < len(text):
            for length in range(min(max_len, len(text) - pos), 0, -1):
                piece = text[pos : pos + length]
                if piece in self.vocabulary:
                    ids.append(self.vocabulary.id_of(piece))
                    pos += length
                    break
            else:
                raise UnknownCharacter(text, pos)
        return ids


def character_tokenizer(corpus: list[str]) -> Tokenizer:
    """One token per distinct character of the corpus, sorted."""
    chars = sorted({ch for doc in corpus for ch in doc})
    if not chars:
        raise EmptyCorpus("corpus contains no characters")
    return Tokenizer(CHARACTER, Vocabulary(tuple(chars)))


def whitespace_tokenizer(corpus: list[str]) -> Tokenizer:
    """One token per distinct single-space-separated word of the corpus."""
    words = sorted({w for doc in corpus for w in doc.split(" ") if w})
    if not words:
        raise EmptyCorpus("corpus contains no words")
    return Tokenizer(WHITESPACE, Vocabulary(tuple(words)))


def build_greedy_merge_vocab(corpus: list[str], merges: int) -> Tokenizer:
    """Grow a character inventory by `merges` most-frequent adjacent pairs.

    Each round re-encodes the corpus greedily with the current inventory,
    counts adjacent token pairs, and adds the concatenation of the most
    frequent pair. Ties break on the lexicographically smallest merged
    string, which keeps the result platform-independent. Stops early only
    when no unseen pair remains to merge.
    """
    if merges < 0:
        raise ValueError("merges must be >= 0")
    chars = sorted({ch for doc in corpus for ch in doc})
    if not chars:
        raise EmptyCorpus("corpus contains no characters")
    tokens = list(chars)
    for _ in range(merges):
        tok = Tokenizer(GREEDY_MERGE, Vocabulary(tuple(tokens)))
        pairs: Counter[str] = Counter()
        for doc in corpus:
            ids = tok.encode(doc)
            for a, b in zip(ids, ids[1:]):
                pairs[tok.vocabulary.token(a) + tok.vocabulary.token(b)] += 1
        candidates = [m for m in pairs if m not in tok.vocabulary]
        if not candidates:
            break
        best = min(candidates, key=lambda m: (-pairs[m], m))
        tokens.append(best)
    return Tokenizer(GREEDY_MERGE, Vocabulary(tuple(tokens)))
