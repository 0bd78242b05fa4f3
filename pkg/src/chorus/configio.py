"""Load sweep configurations from TOML files.

The file mirrors ExperimentConfig: top-level scalars, a [kernel] table,
a [suite] table, a [noise] table, and one [[models]] entry per model.
Unknown keys are rejected so typos fail loudly instead of silently running
a default.
"""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, InvalidKernelParam
from .experiment import ExperimentConfig, ModelSpec, NoiseSpec, SuiteSpec, validate_config
from .fusion import ConsistencyKernel

_MODEL_KEYS = {
    "id",
    "role",
    "scheme",
    "corpus",
    "skills",
    "order",
    "smoothing",
    "merges",
    "repetition",
    "corpus_seed",
    "aligner",
}
_KERNEL_KEYS = {"kind", "sigma", "alpha", "beta", "gamma"}
_SUITE_KEYS = {"path", "families", "count", "seed"}
_NOISE_KEYS = {"alignment_rho", "prob_noise_std", "seeds", "scope", "injection", "style"}
_TOP_KEYS = {
    "models",
    "modes",
    "kernel",
    "main_weight_floor",
    "entropy_floor",
    "world_seed",
    "suite",
    "noise",
    "stop_token",
    "max_steps",
}


def _check_keys(table: dict, allowed: set[str], where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def _model_spec(table: dict, index: int) -> ModelSpec:
    where = f"models[{index}]"
    _check_keys(table, _MODEL_KEYS, where)
    if "id" not in table:
        raise ConfigError(f"{where}.id", "required")
    skills = {}
    for family, pair in table.get("skills", {}).items():
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(
                f"{where}.skills.{family}", "expected [coverage, corruption]"
            )
        skills[family] = (float(pair[0]), float(pair[1]))
    fields = {k: v for k, v in table.items() if k != "skills"}
    return ModelSpec(skills=skills, **fields)


def parse_config(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed TOML mapping."""
    _check_keys(raw, _TOP_KEYS, "")
    models_raw = raw.get("models")
    if not isinstance(models_raw, list) or not models_raw:
        raise ConfigError("models", "at least one [[models]] entry is required")
    models = [_model_spec(entry, i) for i, entry in enumerate(models_raw)]

    kernel_raw = raw.get("kernel", {})
    _check_keys(kernel_raw, _KERNEL_KEYS, "kernel")
    try:
        kernel = ConsistencyKernel(**kernel_raw)
    except InvalidKernelParam as exc:
        raise ConfigError("kernel", str(exc)) from exc

    suite_raw = dict(raw.get("suite", {}))
    _check_keys(suite_raw, _SUITE_KEYS, "suite")
    if "families" in suite_raw:
        suite_raw["families"] = tuple(suite_raw["families"])
    suite = SuiteSpec(**suite_raw)

    noise_raw = dict(raw.get("noise", {}))
    _check_keys(noise_raw, _NOISE_KEYS, "noise")
    # Noise levels hash into per-cell seeds via their repr, so TOML integers
    # like 0 must become 0.0 to reproduce runs configured in code.
    for key in ("alignment_rho", "prob_noise_std"):
        if key in noise_raw:
            noise_raw[key] = tuple(float(v) for v in noise_raw[key])
    if "seeds" in noise_raw:
        noise_raw["seeds"] = tuple(int(v) for v in noise_raw["seeds"])
    noise = NoiseSpec(**noise_raw)

    config = ExperimentConfig(
        models=models,
        modes=tuple(raw.get("modes", ("vanilla",))),
        kernel=kernel,
        main_weight_floor=float(raw.get("main_weight_floor", 0.5)),
        entropy_floor=float(raw.get("entropy_floor", 1e-3)),
        world_seed=int(raw.get("world_seed", 0)),
        suite=suite,
        noise=noise,
        stop_token=raw.get("stop_token", ";"),
        max_steps=int(raw.get("max_steps", 12)),
        base_dir=base_dir,
    )
    validate_config(config)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML sweep config; relative paths resolve next to the file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML: {exc}") from exc
    return parse_config(raw, base_dir=str(path.parent))
