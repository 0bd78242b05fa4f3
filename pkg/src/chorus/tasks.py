"""Answer-checkable task families and the synthetic corpora behind them.

A World is a fixed table of facts: modular single-digit sums, key-value
bindings, and a pseudo-word lexicon. Tasks quiz those facts; training
corpora spell them out, with per-model expertise controlling which facts a
model gets to see (and, for deliberately bad models, which it sees wrong).
Everything is seeded and deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

ARITH = "arith"
RECALL = "recall"
COMPLETE = "complete"
FAMILIES = (ARITH, RECALL, COMPLETE)

STOP = ";"

_CONSONANTS = "bcdfghj"
_VOWELS = "aei"
_VALUE_LETTERS = "abcdefghijklmnopqrst"


@dataclass(frozen=True)
class World:
    """Ground-truth fact tables shared by corpora and task prompts.

    arith: (a, b, answer) with answer = (a+b) mod 10, both operands digits.
    recall: (key, value) bindings like ("k37", "m"), one letter per key.
    lexicon: pseudo-words with unique 3-character prefixes.

    Each family also carries a table of plausible-but-wrong variants plus a
    fixed "flaw order" over its facts.  A model built with corruption rate c
    states the first c share of that order using the variant answers, so two
    flawed models are wrong about the same facts in the same way, like
    copies of one bad reference.
    """

    arith: tuple[tuple[str, str, str], ...]
    recall: tuple[tuple[str, str], ...]
    lexicon: tuple[str, ...]
    arith_alt: tuple[tuple[str, str, str], ...]
    recall_alt: tuple[tuple[str, str], ...]
    lexicon_alt: tuple[str, ...]
    arith_flaws: tuple[int, ...]
    recall_flaws: tuple[int, ...]
    lexicon_flaws: tuple[int, ...]


def _recall_value(key: str) -> str:
    # Letter chosen so that any single-digit slice of the key space maps to
    # all-distinct letters: a model that only matched part of the key backs
    # off to a flat guess instead of a confident wrong one (mirroring how
    # mod-10 sums spread evenly when one addend is unknown).
    d1, d2 = int(key[1]), int(key[2])
    return _VALUE_LETTERS[(3 * d1 + 7 * d2) % len(_VALUE_LETTERS)]


def build_world(seed: int = 0, recall_keys: int = 100, lexicon_size: int = 40) -> World:
    rng = np.random.default_rng(seed)
    arith = tuple(
        (str(a), str(b), str((a + b) % 10)) for a in range(10) for b in range(10)
    )
    arith_alt = tuple((a, b, str((int(c) + 3) % 10)) for a, b, c in arith)
    keys = [f"k{i:02d}" for i in rng.choice(100, size=recall_keys, replace=False)]
    recall = tuple((k, _recall_value(k)) for k in sorted(keys))
    recall_alt = tuple(
        (k, _VALUE_LETTERS[(_VALUE_LETTERS.index(v) + 7) % len(_VALUE_LETTERS)])
        for k, v in recall
    )
    prefixes = [c + v + c2 for c in _CONSONANTS for v in _VOWELS for c2 in _CONSONANTS]
    order = rng.permutation(len(prefixes))
    words: list[str] = []
    for i in order:
        word = (
            prefixes[i]
            + _VOWELS[int(rng.integers(0, len(_VOWELS)))]
            + _CONSONANTS[int(rng.integers(0, len(_CONSONANTS)))]
        )
        # A word may not contain any other word's 3-char prompt prefix (nor
        # contribute such a prefix to others): completion prompts must pin
        # down exactly one word, including against suffix-window matches.
        if any(w[:3] in word or word[:3] in w for w in words):
            continue
        words.append(word)
        if len(words) == lexicon_size:
            break
    if len(words) < lexicon_size:
        raise ValueError(f"could not draw {lexicon_size} prefix-disjoint words")
    lexicon = tuple(sorted(words))
    lexicon_alt = tuple(
        w[:3]
        + _VOWELS[(_VOWELS.index(w[3]) + 1) % len(_VOWELS)]
        + _CONSONANTS[(_CONSONANTS.index(w[4]) + 1) % len(_CONSONANTS)]
        for w in lexicon
    )
    return World(
        arith,
        recall,
        lexicon,
        arith_alt,
        recall_alt,
        lexicon_alt,
        tuple(int(i) for i in rng.permutation(len(arith))),
        tuple(int(i) for i in rng.permutation(len(recall))),
        tuple(int(i) for i in rng.permutation(len(lexicon))),
    )


def fact_line(family: str, fact) -> str:
    """The corpus sentence that states one fact."""
    if family == ARITH:
        a, b, c = fact
        return f"{a} + {b} = {c} {STOP}"
    if family == RECALL:
        # ':' rather than '=': n-gram backoff must not confuse the
        # answer-position context of one family with another's.
        key, value = fact
        return f"{key} : {value} {STOP}"
    if family == COMPLETE:
        return f"{fact} {STOP}"
    raise ValueError(f"unknown family {family!r}")


def world_facts(world: World, family: str) -> tuple:
    if family == ARITH:
        return world.arith
    if family == RECALL:
        return world.recall
    if family == COMPLETE:
        return world.lexicon
    raise ValueError(f"unknown family {family!r}")


def world_alts(world: World, family: str) -> tuple:
    """Wrong-answer variants, index-aligned with world_facts."""
    if family == ARITH:
        return world.arith_alt
    if family == RECALL:
        return world.recall_alt
    if family == COMPLETE:
        return world.lexicon_alt
    raise ValueError(f"unknown family {family!r}")


def world_flaw_order(world: World, family: str) -> tuple[int, ...]:
    """Fact indices in the order corruption claims them."""
    if family == ARITH:
        return world.arith_flaws
    if family == RECALL:
        return world.recall_flaws
    if family == COMPLETE:
        return world.lexicon_flaws
    raise ValueError(f"unknown family {family!r}")


def alphabet_primer(world: World) -> str:
    """One corpus line covering every character any fact can use.

    Keeps all models encodable on all reachable contexts regardless of which
    facts their corpora omit.
    """
    chars = {
        ch
        for fam in FAMILIES
        for table in (world_facts(world, fam), world_alts(world, fam))
        for fact in table
        for ch in fact_line(fam, fact)
    }
    return " ".join(sorted(chars - {" "}))


@dataclass(frozen=True)
class TaskInstance:
    prompt: str
    gold: str
    checker: str  # "exact" | "contain"
    family: str

    def __post_init__(self):
        if not self.gold:
            raise ValueError("gold answer must be non-empty")
        if self.checker not in ("exact", "contain"):
            raise ValueError(f"unknown checker {self.checker!r}")


def task_for_fact(family: str, fact) -> TaskInstance:
    if family == ARITH:
        a, b, c = fact
        return TaskInstance(f"{a} + {b} =", c, "exact", ARITH)
    if family == RECALL:
        key, value = fact
        return TaskInstance(f"{key} :", value, "exact", RECALL)
    if family == COMPLETE:
        return TaskInstance(fact[:3], fact[3:], "exact", COMPLETE)
    raise ValueError(f"unknown family {family!r}")


def generate_task_suite(
    world: World, families: tuple[str, ...], count: int, seed: int
) -> list[TaskInstance]:
    """Evenly split `count` tasks across families, sampling facts with replacement."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    per_family = count // len(families)
    remainder = count - per_family * len(families)
    suite = []
    for fam_idx, family in enumerate(families):
        quota = per_family + (1 if fam_idx < remainder else 0)
        facts = world_facts(world, family)
        for pick in rng.integers(0, len(facts), size=quota):
            suite.append(task_for_fact(family, facts[int(pick)]))
    return suite


def _normalize(text: str) -> str:
    return " ".join(text.split())


def score(generated: str, instance: TaskInstance) -> int:
    """1 if the generation answers the task, else 0. Stop token and spacing ignored."""
    answer = _normalize(generated.split(STOP, 1)[0])
    gold = _normalize(instance.gold)
    if instance.checker == "exact":
        return int(answer == gold)
    return int(gold in answer)


@dataclass(frozen=True)
class FamilySkill:
    """How a model's corpus treats one family's facts.

    corruption: share of the family claimed by the world's flaw order and
    stated confidently wrong (every model sharing the flaw states the same
    wrong answer). coverage: probability each remaining fact is stated
    correctly; the rest are omitted, leaving the model to guess.
    """

    coverage: float
    corruption: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        if not 0.0 <= self.corruption <= 1.0:
            raise ValueError("corruption must lie in [0, 1]")


@dataclass(frozen=True)
class ExpertiseProfile:
    skills: dict[str, FamilySkill] = field(default_factory=dict)

    def skill(self, family: str) -> FamilySkill:
        return self.skills.get(family, FamilySkill(1.0))


def build_corpus(
    world: World,
    profile: ExpertiseProfile,
    seed: int,
    repetition: int = 12,
) -> list[str]:
    """Synthesize one model's training documents from its expertise profile.

    Facts the profile covers appear `repetition` times so the trained model
    is confident about them; corrupted facts appear just as confidently with
    the world's wrong variant; omitted facts leave the model guessing from
    structure.
    """
    if repetition < 1:
        raise ValueError("repetition must be >= 1")
    rng = np.random.default_rng(seed)
    docs = [alphabet_primer(world)]
    for family in FAMILIES:
        skill = profile.skill(family)
        facts = world_facts(world, family)
        alts = world_alts(world, family)
        n_flawed = int(round(skill.corruption * len(facts)))
        flawed = set(world_flaw_order(world, family)[:n_flawed])
        for idx, fact in enumerate(facts):
            if idx in flawed:
                docs.extend([fact_line(family, alts[idx])] * repetition)
            elif rng.random() < skill.coverage:
                docs.extend([fact_line(family, fact)] * repetition)
    order = rng.permutation(len(docs))
    return [docs[i] for i in order]


def save_suite(suite: list[TaskInstance], path) -> None:
    """One task per line as JSON: prompt, gold, checker, family."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in suite:
            fh.write(
                json.dumps(
                    {
                        "prompt": inst.prompt,
                        "gold": inst.gold,
                        "checker": inst.checker,
                        "family": inst.family,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_suite(path) -> list[TaskInstance]:
    suite = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                suite.append(
                    TaskInstance(obj["prompt"], obj["gold"], obj["checker"], obj["family"])
                )
            except (KeyError, TypeError, ValueError) as err:
                raise ParseError(f"bad task record: {err}", line=number) from err
    return suite
