"""Token alignment between an assistant vocabulary and the main vocabulary.

An alignment map is row-functional: each assistant token maps to at most one
main token. Builders cover the usual baselines (exact string match, minimum
edit distance, longest prefix, shared union space); maps can be perturbed
for robustness studies, and serialized to a line-based text format so that
externally trained alignments can be imported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FingerprintMismatch, ParseError
from .fusion import Distribution
from .vocab import Vocabulary


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insert/delete/substitute."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class AlignmentMap:
    """Sparse assist-token -> main-token mapping between two vocabularies."""

    assist_fingerprint: str
    main_fingerprint: str
    assist_size: int
    main_size: int
    pairs: tuple[tuple[int, int], ...]
    _assist_idx: np.ndarray = field(init=False, repr=False, compare=False)
    _main_idx: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        for assist_id, main_id in self.pairs:
            if assist_id in seen:
                raise ValueError(f"assist id {assist_id} mapped twice")
            seen.add(assist_id)
            if not 0 <= assist_id < self.assist_size:
                raise ValueError(f"assist id {assist_id} outside vocabulary of size {self.assist_size}")
            if not 0 <= main_id < self.main_size:
                raise ValueError(f"main id {main_id} outside vocabulary of size {self.main_size}")
        ordered = tuple(sorted(self.pairs))
        object.__setattr__(self, "pairs", ordered)
        assist_idx = np.array([p[0] for p in ordered], dtype=np.intp)
        main_idx = np.array([p[1] for p in ordered], dtype=np.intp)
        object.__setattr__(self, "_assist_idx", assist_idx)
        object.__setattr__(self, "_main_idx", main_idx)

    @property
    def coverage(self) -> float:
        return len(self.pairs) / self.assist_size

    def target_of(self, assist_id: int) -> int | None:
        pos = int(np.searchsorted(self._assist_idx, assist_id))
        if pos < len(self.pairs) and self.pairs[pos][0] == assist_id:
            return self.pairs[pos][1]
        return None


def align_exact(assist: Vocabulary, main: Vocabulary) -> AlignmentMap:
    """Map exactly the tokens whose strings appear verbatim in both vocabularies."""
    pairs = tuple(
        (assist_id, main.id_of(tok))
        for assist_id, tok in enumerate(assist.tokens)
        if tok in main
    )
    return AlignmentMap(assist.fingerprint, main.fingerprint, len(assist), len(main), pairs)


def align_min_edit(assist: Vocabulary, main: Vocabulary) -> AlignmentMap:
    """Map every assist token to its nearest main token by edit distance.

    Ties break toward the shorter main token, then lexicographically, so the
    result is deterministic and leans on less specific tokens.
    """
    pairs = []
    for assist_id, tok in enumerate(assist.tokens):
        best = min(main.tokens, key=lambda m: (levenshtein(tok, m), len(m), m))
        pairs.append((assist_id, main.id_of(best)))
    return AlignmentMap(assist.fingerprint, main.fingerprint, len(assist), len(main), tuple(pairs))


def align_prefix(assist: Vocabulary, main: Vocabulary) -> AlignmentMap:
    """Map each assist token to the longest main token that prefixes it."""
    pairs = []
    for assist_id, tok in enumerate(assist.tokens):
        candidates = [m for m in main.tokens if tok.startswith(m)]
        if candidates:
            best = max(candidates, key=len)
            pairs.append((assist_id, main.id_of(best)))
    return AlignmentMap(assist.fingerprint, main.fingerprint, len(assist), len(main), tuple(pairs))


def build_union_space(vocabs: list[Vocabulary]) -> tuple[Vocabulary, list[AlignmentMap]]:
    """Merge vocabularies into one sorted union space with full-coverage maps."""
    if not vocabs:
        raise ValueError("at least one vocabulary required")
    union = Vocabulary(tuple(sorted({tok for v in vocabs for tok in v.tokens})))
    return union, [align_exact(v, union) for v in vocabs]


@dataclass(frozen=True)
class Projection:
    """Result of pushing an assistant distribution into the main space.

    raw_mass is the mapped probability mass before renormalization; when it
    is zero there is nothing meaningful to emit and the projection abstains
    (dist is None).
    """

    dist: Distribution | None
    raw_mass: float
    abstain: bool


def project(dist: Distribution, amap: AlignmentMap) -> Projection:
    """Sum mapped assist masses per main token, drop the rest, renormalize."""
    if dist.vocab_fingerprint != amap.assist_fingerprint:
        raise FingerprintMismatch(
            f"distribution fingerprint {dist.vocab_fingerprint} != map assist fingerprint {amap.assist_fingerprint}"
        )
    out = np.zeros(amap.main_size)
    np.add.at(out, amap._main_idx, dist.probs[amap._assist_idx])
    raw_mass = float(out.sum())
    if raw_mass <= 0.0:
        return Projection(None, 0.0, True)
    return Projection(Distribution(amap.main_fingerprint, out / raw_mass), raw_mass, False)


def perturb_alignment(amap: AlignmentMap, rho: float, seed: int) -> AlignmentMap:
    """Re-target floor(rho * |pairs|) randomly chosen rows to wrong main tokens.

    Each chosen row's target becomes a uniformly random *different* main id;
    untouched rows are preserved. Deterministic per seed.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    count = int(rho * len(amap.pairs))
    if count == 0:
        return amap
    if amap.main_size < 2:
        raise ValueError("cannot re-target rows when the main vocabulary has a single token")
    rng = np.random.default_rng(seed)
    rows = rng.choice(len(amap.pairs), size=count, replace=False)
    pairs = list(amap.pairs)
    for row in sorted(int(r) for r in rows):
        assist_id, old = pairs[row]
        shifted = int(rng.integers(0, amap.main_size - 1))
        pairs[row] = (assist_id, shifted + 1 if shifted >= old else shifted)
    return AlignmentMap(
        amap.assist_fingerprint, amap.main_fingerprint, amap.assist_size, amap.main_size, tuple(pairs)
    )


def thin_alignment(amap: AlignmentMap, rho: float, seed: int) -> AlignmentMap:
    """Deletion-style noise: drop floor(rho * |pairs|) randomly chosen rows."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    count = int(rho * len(amap.pairs))
    if count == 0:
        return amap
    rng = np.random.default_rng(seed)
    doomed = {int(r) for r in rng.choice(len(amap.pairs), size=count, replace=False)}
    pairs = tuple(p for row, p in enumerate(amap.pairs) if row not in doomed)
    return AlignmentMap(
        amap.assist_fingerprint, amap.main_fingerprint, amap.assist_size, amap.main_size, pairs
    )


def export_alignment(amap: AlignmentMap, path: str | Path) -> None:
    lines = [f"#align v1 {amap.assist_fingerprint} {amap.main_fingerprint}"]
    lines.extend(f"{assist_id}\t{main_id}" for assist_id, main_id in amap.pairs)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_alignment(path: str | Path, assist: Vocabulary, main: Vocabulary) -> AlignmentMap:
    """Load a map and bind it to the supplied vocabularies.

    The file stores only fingerprints; the vocabularies provide sizes and a
    guarantee the map is applied to the inventories it was built for.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty alignment file", line=1)
    header = lines[0].split(" ")
    if len(header) != 4 or header[0] != "#align" or header[1] != "v1":
        raise ParseError(f"bad alignment header {lines[0]!r}", line=1)
    if header[2] != assist.fingerprint:
        raise FingerprintMismatch(f"assist fingerprint {header[2]} != vocabulary {assist.fingerprint}")
    if header[3] != main.fingerprint:
        raise FingerprintMismatch(f"main fingerprint {header[3]} != vocabulary {main.fingerprint}")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != 2:
            raise ParseError(f"expected 'assist_id<TAB>main_id', got {line!r}", line=lineno)
        try:
            pairs.append((int(cells[0]), int(cells[1])))
        except ValueError as err:
            raise ParseError(f"non-integer id in {line!r}", line=lineno) from err
    try:
        return AlignmentMap(assist.fingerprint, main.fingerprint, len(assist), len(main), tuple(pairs))
    except ValueError as err:
        raise ParseError(str(err), line=2) from err
