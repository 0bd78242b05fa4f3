"""Robustness sweeps: toy ensembles vs. alignment and probability noise.

A sweep measures suite accuracy over a grid of cells (fusion mode x
alignment corruption rate x probability noise level x seed), next to
unperturbed single-model baselines. Every cell derives its own RNG seeds by
hashing the cell coordinates, so enlarging one grid axis never shifts the
random draws of another cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .alignment import AlignmentMap, align_exact, align_min_edit, align_prefix, perturb_alignment, thin_alignment
from .decoding import ASSISTANT, MAIN, DecodeSession, ModelEndpoint, decode
from .errors import ConfigError
from .fusion import ConsistencyKernel, Distribution, EnsembleConfig, MODES, VANILLA
from .noise import add_probability_noise, stable_seed
from .tasks import (
    FAMILIES,
    ExpertiseProfile,
    FamilySkill,
    TaskInstance,
    build_corpus,
    build_world,
    generate_task_suite,
    load_suite,
    score,
)
from .tokenizers import (
    CHARACTER,
    GREEDY_MERGE,
    WHITESPACE,
    Tokenizer,
    build_greedy_merge_vocab,
    character_tokenizer,
    whitespace_tokenizer,
)
from .toymodels import NGramModel, train_ngram

SCHEMES = (CHARACTER, WHITESPACE, GREEDY_MERGE)
ALIGNERS = ("exact", "prefix", "min_edit")
NOISE_SCOPES = ("assistants", "all")
INJECTIONS = ("pre_projection", "post_projection")
NOISE_STYLES = ("retarget", "drop")

METRICS_COLUMNS = (
    "method",
    "mode",
    "kernel",
    "rho",
    "noise_std",
    "seed",
    "accuracy",
    "delta_vs_best_single",
    "negative_ensemble",
)


@dataclass
class ModelSpec:
    """One toy model: tokenizer scheme, n-gram shape, and where its corpus comes from.

    The corpus is either a file (one document per line) or generated from
    the shared world using `skills`: family -> (coverage, corruption).
    """

    id: str
    role: str = ASSISTANT
    scheme: str = CHARACTER
    corpus: str | None = None
    skills: dict[str, tuple[float, float]] = field(default_factory=dict)
    order: int = 5
    smoothing: float = 0.1
    merges: int = 120
    repetition: int = 12
    corpus_seed: int = 0
    aligner: str = "prefix"


@dataclass
class SuiteSpec:
    path: str | None = None
    families: tuple[str, ...] = FAMILIES
    count: int = 300
    seed: int = 11


@dataclass
class NoiseSpec:
    alignment_rho: tuple[float, ...] = (0.0,)
    prob_noise_std: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] = (1,)
    scope: str = "assistants"
    injection: str = "pre_projection"
    style: str = "retarget"


@dataclass
class ExperimentConfig:
    models: list[ModelSpec]
    modes: tuple[str, ...] = (VANILLA,)
    kernel: ConsistencyKernel = field(default_factory=ConsistencyKernel)
    main_weight_floor: float = 0.5
    entropy_floor: float = 1e-3
    world_seed: int = 0
    suite: SuiteSpec = field(default_factory=SuiteSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    stop_token: str = ";"
    max_steps: int = 12
    base_dir: str = "."


@dataclass(frozen=True)
class MetricsRow:
    method: str
    mode: str
    kernel: str
    rho: float
    noise_std: float
    seed: int
    accuracy: float
    delta_vs_best_single: float
    negative_ensemble: bool


def validate_config(config: ExperimentConfig) -> None:
    """Reject malformed configs with the offending field path in the message."""
    if not config.models:
        raise ConfigError("models", "at least one model is required")
    mains = [m for m in config.models if m.role == MAIN]
    if len(mains) != 1:
        raise ConfigError("models", f"exactly one model must have role 'main', got {len(mains)}")
    seen: set[str] = set()
    for i, spec in enumerate(config.models):
        prefix = f"models[{i}]"
        if not spec.id:
            raise ConfigError(f"{prefix}.id", "model id must be non-empty")
        if spec.id in seen:
            raise ConfigError(f"{prefix}.id", f"duplicate model id {spec.id!r}")
        seen.add(spec.id)
        if spec.role not in (MAIN, ASSISTANT):
            raise ConfigError(f"{prefix}.role", f"unknown role {spec.role!r}")
        if spec.scheme not in SCHEMES:
            raise ConfigError(f"{prefix}.scheme", f"unknown scheme {spec.scheme!r}")
        if spec.aligner not in ALIGNERS:
            raise ConfigError(f"{prefix}.aligner", f"unknown aligner {spec.aligner!r}")
        if spec.order < 1:
            raise ConfigError(f"{prefix}.order", "order must be >= 1")
        if spec.smoothing <= 0:
            raise ConfigError(f"{prefix}.smoothing", "smoothing must be > 0")
        if spec.merges < 0:
            raise ConfigError(f"{prefix}.merges", "merges must be >= 0")
        if spec.repetition < 1:
            raise ConfigError(f"{prefix}.repetition", "repetition must be >= 1")
        if spec.corpus is None:
            for family, skill in spec.skills.items():
                if family not in FAMILIES:
                    raise ConfigError(f"{prefix}.skills.{family}", "unknown task family")
                coverage, corruption = skill
                if not 0 <= coverage <= 1 or not 0 <= corruption <= 1:
                    raise ConfigError(
                        f"{prefix}.skills.{family}",
                        "coverage and corruption must lie in [0, 1]",
                    )
    for j, mode in enumerate(config.modes):
        if mode not in MODES:
            raise ConfigError(f"modes[{j}]", f"unknown fusion mode {mode!r}")
    if not config.modes:
        raise ConfigError("modes", "at least one fusion mode is required")
    if not 0 <= config.main_weight_floor <= 1:
        raise ConfigError("main_weight_floor", "must lie in [0, 1]")
    if config.entropy_floor <= 0:
        raise ConfigError("entropy_floor", "must be > 0")
    if config.suite.path is None:
        if config.suite.count < 1:
            raise ConfigError("suite.count", "must be >= 1")
        for family in config.suite.families:
            if family not in FAMILIES:
                raise ConfigError("suite.families", f"unknown task family {family!r}")
    noise = config.noise
    for k, value in enumerate(noise.alignment_rho):
        if not 0 <= value <= 1:
            raise ConfigError(f"noise.alignment_rho[{k}]", "must lie in [0, 1]")
    for k, value in enumerate(noise.prob_noise_std):
        if value < 0:
            raise ConfigError(f"noise.prob_noise_std[{k}]", "must be >= 0")
    if not noise.seeds:
        raise ConfigError("noise.seeds", "at least one seed is required")
    if noise.scope not in NOISE_SCOPES:
        raise ConfigError("noise.scope", f"unknown scope {noise.scope!r}")
    if noise.injection not in INJECTIONS:
        raise ConfigError("noise.injection", f"unknown injection point {noise.injection!r}")
    if noise.style not in NOISE_STYLES:
        raise ConfigError("noise.style", f"unknown style {noise.style!r}")
    if config.max_steps < 1:
        raise ConfigError("max_steps", "must be >= 1")


@dataclass
class BuiltModel:
    spec: ModelSpec
    tokenizer: Tokenizer
    model: NGramModel


@dataclass
class ExperimentBundle:
    """Everything a sweep reuses across cells: models, clean maps, the suite."""

    config: ExperimentConfig
    models: list[BuiltModel]
    main: BuiltModel
    assistants: list[BuiltModel]
    clean_maps: dict[str, AlignmentMap]
    suite: list[TaskInstance]


def _read_corpus(path: Path) -> list[str]:
    lines = [line.rstrip("\n") for line in path.read_text(encoding="utf-8").splitlines()]
    return [line for line in lines if line]


def _build_tokenizer(spec: ModelSpec, corpus: list[str]) -> Tokenizer:
    if spec.scheme == CHARACTER:
        return character_tokenizer(corpus)
    if spec.scheme == WHITESPACE:
        return whitespace_tokenizer(corpus)
    return build_greedy_merge_vocab(corpus, spec.merges)


def _profile(spec: ModelSpec) -> ExpertiseProfile:
    skills = {
        family: FamilySkill(coverage=cov, corruption=cor)
        for family, (cov, cor) in spec.skills.items()
    }
    return ExpertiseProfile(skills)


_ALIGN_FNS = {"exact": align_exact, "prefix": align_prefix, "min_edit": align_min_edit}


def build_bundle(config: ExperimentConfig) -> ExperimentBundle:
    validate_config(config)
    world = build_world(config.world_seed)
    base = Path(config.base_dir)
    built: list[BuiltModel] = []
    for spec in config.models:
        if spec.corpus is not None:
            corpus = _read_corpus(base / spec.corpus)
        else:
            corpus = build_corpus(world, _profile(spec), spec.corpus_seed, spec.repetition)
        tokenizer = _build_tokenizer(spec, corpus)
        built.append(BuiltModel(spec, tokenizer, train_ngram(corpus, tokenizer, spec.order, spec.smoothing)))
    main = next(b for b in built if b.spec.role == MAIN)
    assistants = [b for b in built if b.spec.role == ASSISTANT]
    clean_maps = {
        b.spec.id: _ALIGN_FNS[b.spec.aligner](
            b.tokenizer.vocabulary, main.tokenizer.vocabulary
        )
        for b in assistants
    }
    if config.suite.path is not None:
        suite = load_suite(base / config.suite.path)
    else:
        suite = generate_task_suite(
            world, tuple(config.suite.families), config.suite.count, config.suite.seed
        )
    return ExperimentBundle(config, built, main, assistants, clean_maps, suite)


def _endpoint(built: BuiltModel, role: str) -> ModelEndpoint:
    return ModelEndpoint(built.spec.id, built.tokenizer, built.model.step, role)


def _joiner(tokenizer: Tokenizer) -> str:
    return " " if tokenizer.scheme == WHITESPACE else ""


def _suite_accuracy(session: DecodeSession, suite: list[TaskInstance]) -> float:
    hits = 0
    for instance in suite:
        generated, _ = decode(session, instance.prompt)
        hits += score(generated, instance)
    return hits / len(suite)


def single_model_accuracy(bundle: ExperimentBundle, built: BuiltModel) -> float:
    """Decode the suite with one model alone (vanilla fusion of a single endpoint)."""
    session = DecodeSession(
        config=EnsembleConfig(bundle.config.kernel, mode=VANILLA),
        main=_endpoint(built, MAIN),
        stop_token=bundle.config.stop_token,
        max_steps=bundle.config.max_steps,
        record=False,
        token_joiner=_joiner(built.tokenizer),
    )
    return _suite_accuracy(session, bundle.suite)


def _cell_maps(bundle: ExperimentBundle, rho: float, seed: int) -> dict[str, AlignmentMap]:
    """Perturb each assistant's alignment for one cell, deterministically.

    The perturbation seed hashes the cell's noise coordinates but not the
    fusion mode, so mode ablations at equal (rho, std, seed) face the very
    same corrupted rows.
    """
    if rho == 0:
        return bundle.clean_maps
    corrupt = perturb_alignment if bundle.config.noise.style == "retarget" else thin_alignment
    return {
        model_id: corrupt(amap, rho, stable_seed("align", rho, seed, model_id))
        for model_id, amap in bundle.clean_maps.items()
    }


def _noisy_step(built: BuiltModel, std: float, rho: float, seed: int):
    """Wrap a model's step fn with pre-projection probability noise.

    The per-call seed hashes the context so repeated queries in one cell are
    reproducible, keeping the whole sweep deterministic.
    """

    def step(context: str) -> Distribution:
        base = built.model.step(context)
        return add_probability_noise(
            base, std, stable_seed("prob", rho, seed, built.spec.id, context)
        )

    return step


def _cell_session(
    bundle: ExperimentBundle, mode: str, rho: float, std: float, seed: int
) -> DecodeSession:
    config = bundle.config
    noise = config.noise
    noisy_ids = {b.spec.id for b in bundle.assistants}
    if noise.scope == "all":
        noisy_ids.add(bundle.main.spec.id)

    def endpoint_for(built: BuiltModel, role: str) -> ModelEndpoint:
        if std > 0 and noise.injection == "pre_projection" and built.spec.id in noisy_ids:
            return ModelEndpoint(built.spec.id, built.tokenizer, _noisy_step(built, std, rho, seed), role)
        return _endpoint(built, role)

    transforms = {}
    if std > 0 and noise.injection == "post_projection":
        for model_id in sorted(noisy_ids):

            def transform(context: str, dist: Distribution, _id=model_id) -> Distribution:
                return add_probability_noise(
                    dist, std, stable_seed("prob", rho, seed, _id, context)
                )

            transforms[model_id] = transform
    return DecodeSession(
        config=EnsembleConfig(
            config.kernel,
            mode=mode,
            main_weight_floor=config.main_weight_floor,
            entropy_floor=config.entropy_floor,
        ),
        main=endpoint_for(bundle.main, MAIN),
        assistants=[endpoint_for(b, ASSISTANT) for b in bundle.assistants],
        maps=_cell_maps(bundle, rho, seed),
        stop_token=config.stop_token,
        max_steps=config.max_steps,
        record=False,
        token_joiner=_joiner(bundle.main.tokenizer),
        transforms=transforms,
    )


def run_experiment(
    config: ExperimentConfig, csv_path: str | Path | None = None
) -> list[MetricsRow]:
    """Run the full sweep; returns baseline rows then one row per grid cell.

    When csv_path is given, rows computed so far are flushed there even if a
    cell dies mid-suite, then the failure propagates.
    """
    bundle = build_bundle(config)
    kernel_name = config.kernel.kind
    rows: list[MetricsRow] = []
    try:
        singles = {b.spec.id: single_model_accuracy(bundle, b) for b in bundle.models}
        best_single = max(singles.values())
        for model_id, accuracy in singles.items():
            rows.append(
                MetricsRow(
                    method=f"single:{model_id}",
                    mode="-",
                    kernel="-",
                    rho=0.0,
                    noise_std=0.0,
                    seed=0,
                    accuracy=accuracy,
                    delta_vs_best_single=accuracy - best_single,
                    negative_ensemble=accuracy < best_single,
                )
            )
        for mode in config.modes:
            for rho in config.noise.alignment_rho:
                for std in config.noise.prob_noise_std:
                    for seed in config.noise.seeds:
                        session = _cell_session(bundle, mode, rho, std, seed)
                        accuracy = _suite_accuracy(session, bundle.suite)
                        rows.append(
                            MetricsRow(
                                method="ensemble",
                                mode=mode,
                                kernel=kernel_name,
                                rho=rho,
                                noise_std=std,
                                seed=seed,
                                accuracy=accuracy,
                                delta_vs_best_single=accuracy - best_single,
                                negative_ensemble=accuracy < best_single,
                            )
                        )
    finally:
        if csv_path is not None:
            write_metrics_csv(rows, csv_path)
    return rows


def write_metrics_csv(rows: list[MetricsRow], path: str | Path) -> None:
    """Fixed column order and float formatting, so equal runs are byte-equal."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    row.mode,
                    row.kernel,
                    f"{row.rho:g}",
                    f"{row.noise_std:g}",
                    row.seed,
                    f"{row.accuracy:.6f}",
                    f"{row.delta_vs_best_single:.6f}",
                    "true" if row.negative_ensemble else "false",
                ]
            )


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                MetricsRow(
                    method=rec["method"],
                    mode=rec["mode"],
                    kernel=rec["kernel"],
                    rho=float(rec["rho"]),
                    noise_std=float(rec["noise_std"]),
                    seed=int(rec["seed"]),
                    accuracy=float(rec["accuracy"]),
                    delta_vs_best_single=float(rec["delta_vs_best_single"]),
                    negative_ensemble=rec["negative_ensemble"] == "true",
                )
            )
    return rows
