"""The shipped desk-scale fixture: three toy models plus a saboteur.

scribe is the trusted generalist that fusion anchors on; abacus and lexica
are stronger specialists with different tokenizations, both copying the
same flawed reference for a slice of the recall facts; mimic is a
deliberately weak add-on that states only wrong answers, used to probe
whether an ensemble can be dragged below its best member.

Profiles here are frozen: the robustness guarantees in the acceptance
tests were measured against exactly these settings.
"""

from __future__ import annotations

from pathlib import Path

from .experiment import ExperimentConfig, ModelSpec, NoiseSpec, SuiteSpec, build_bundle, _profile
from .tasks import build_corpus, build_world, generate_task_suite, save_suite

WORLD_SEED = 0
SUITE_SEED = 11
SUITE_COUNT = 300
SWEEP_SEEDS = (1, 2, 3, 4, 5)
RHO_GRID = (0.0, 0.05, 0.1, 0.15, 0.2)
STD_GRID = (0.0, 0.05, 0.1, 0.15, 0.2)


def fixture_models() -> list[ModelSpec]:
    return [
        ModelSpec(
            id="scribe",
            role="main",
            scheme="character",
            order=9,
            smoothing=0.1,
            repetition=20,
            skills={"arith": (0.80, 0.0), "recall": (0.70, 0.0), "complete": (0.90, 0.0)},
            corpus_seed=101,
        ),
        ModelSpec(
            id="abacus",
            role="assistant",
            scheme="greedy-longest-match-merge",
            merges=40,
            order=5,
            smoothing=0.02,
            repetition=30,
            skills={"arith": (1.0, 0.0), "recall": (1.0, 0.20), "complete": (0.85, 0.0)},
            corpus_seed=202,
        ),
        ModelSpec(
            id="lexica",
            role="assistant",
            scheme="whitespace-word",
            order=5,
            smoothing=0.02,
            repetition=12,
            skills={"arith": (1.0, 0.0), "recall": (1.0, 0.20), "complete": (0.05, 0.0)},
            corpus_seed=303,
        ),
    ]


def saboteur_model() -> ModelSpec:
    # Conviction sits between scribe's and the specialists': loud enough to
    # outvote the unweighted main model, not loud enough to out-score the
    # consistent experts.
    return ModelSpec(
        id="mimic",
        role="assistant",
        scheme="character",
        order=9,
        smoothing=0.05,
        repetition=12,
        skills={"arith": (0.0, 1.0), "recall": (0.0, 1.0), "complete": (0.0, 1.0)},
        corpus_seed=404,
    )


def fixture_config(
    modes: tuple[str, ...] = ("vanilla", "token_only", "model_only", "core"),
    alignment_rho: tuple[float, ...] = (0.0,),
    prob_noise_std: tuple[float, ...] = (0.0,),
    seeds: tuple[int, ...] = SWEEP_SEEDS,
    with_saboteur: bool = False,
) -> ExperimentConfig:
    models = fixture_models()
    if with_saboteur:
        models.append(saboteur_model())
    return ExperimentConfig(
        models=models,
        modes=modes,
        world_seed=WORLD_SEED,
        suite=SuiteSpec(count=SUITE_COUNT, seed=SUITE_SEED),
        noise=NoiseSpec(
            alignment_rho=alignment_rho,
            prob_noise_std=prob_noise_std,
            seeds=seeds,
            scope="all",
        ),
    )


_CONFIG_TEMPLATE = """\
# {title}
world_seed = {world_seed}
modes = [{modes}]

[suite]
path = "suite300.jsonl"

[noise]
alignment_rho = [{rho}]
prob_noise_std = [{std}]
seeds = [{seeds}]
scope = "all"
{models}"""

def _fmt(values) -> str:
    return ", ".join(f"{v:g}" if isinstance(v, float) else str(v) for v in values)


def _model_block(spec: ModelSpec) -> str:
    lines = [
        "",
        "[[models]]",
        f'id = "{spec.id}"',
        f'role = "{spec.role}"',
        f'scheme = "{spec.scheme}"',
        f'corpus = "{spec.id}.txt"',
        f"order = {spec.order}",
        f"smoothing = {spec.smoothing:g}",
    ]
    if spec.scheme == "greedy-longest-match-merge":
        lines.append(f"merges = {spec.merges}")
    return "\n".join(lines) + "\n"


def _config_text(title: str, modes, rho, std, models: list[ModelSpec]) -> str:
    blocks = "".join(_model_block(m) for m in models)
    return _CONFIG_TEMPLATE.format(
        title=title,
        world_seed=WORLD_SEED,
        modes=", ".join(f'"{m}"' for m in modes),
        rho=_fmt(rho),
        std=_fmt(std),
        seeds=_fmt(SWEEP_SEEDS),
        models=blocks,
    )


def write_fixture_files(directory: str | Path) -> list[Path]:
    """Materialize the fixture: corpora, task suite, and sweep configs.

    Corpus files pin the exact training documents (one per line) so sweeps
    loaded from these configs cannot drift from the tested profiles even if
    generation defaults change.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    world = build_world(WORLD_SEED)
    written: list[Path] = []
    models = fixture_models() + [saboteur_model()]
    for spec in models:
        corpus = build_corpus(world, _profile(spec), spec.corpus_seed, spec.repetition)
        path = directory / f"{spec.id}.txt"
        path.write_text("\n".join(corpus) + "\n", encoding="utf-8")
        written.append(path)
    suite = generate_task_suite(world, ("arith", "recall", "complete"), SUITE_COUNT, SUITE_SEED)
    suite_path = directory / "suite300.jsonl"
    save_suite(suite, suite_path)
    written.append(suite_path)
    core_three = [m for m in models if m.id != "mimic"]
    configs = {
        "sweep_alignment.toml": (
            "Alignment-noise robustness sweep",
            ("vanilla", "token_only", "model_only", "core"),
            RHO_GRID,
            (0.0,),
            core_three,
        ),
        "sweep_noise.toml": (
            "Probability-noise robustness sweep",
            ("vanilla", "token_only", "model_only", "core"),
            (0.0,),
            STD_GRID,
            core_three,
        ),
        "sweep_saboteur.toml": (
            "Weak-model probe: does a confident liar sink the ensemble?",
            ("vanilla", "core"),
            (0.0,),
            (0.0,),
            models,
        ),
    }
    for name, args in configs.items():
        path = directory / name
        path.write_text(_config_text(*args), encoding="utf-8")
        written.append(path)
    return written
