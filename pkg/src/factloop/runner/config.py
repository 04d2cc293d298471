"""Run configuration: one YAML file drives every CLI subcommand.

Backends can be live HTTP endpoints or scripted mocks (offline, deterministic);
scorers can be live scoring services or precomputed score files. Everything a
run needs must resolve at startup so configuration mistakes fail fast instead
of mid-experiment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..dataset import PreprocessConfig
from ..exceptions import ConfigurationError
from ..feedback import ORACLE, SELF_REFLECTION, SOURCES, VERIFIER
from ..lm_client import Backend, BackendConfig, HttpBackend, register_mock
from ..prompts import ENTIRE_CONTENT, SINGLE_POINT

GENERATION_BACKEND = "generation"
SELF_REFLECTION_BACKEND = "self_reflection"
FINETUNED_BACKEND = "finetuned_slm"


@dataclass
class BackendSpec:
    kind: str  # "http" | "mock" | "alias"
    http: Optional[BackendConfig] = None
    mock_script: Optional[Path] = None
    alias_of: Optional[str] = None


@dataclass
class ScorerSpec:
    kind: str  # "http" | "file"
    base_url: Optional[str] = None
    path: Optional[Path] = None


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8777
    token: Optional[str] = None
    static_dir: Optional[Path] = None
    display_arm: Optional[str] = None


@dataclass
class RunConfig:
    run_id: str
    dataset_path: Path
    preprocess: PreprocessConfig
    backends: dict[str, BackendSpec]
    scorers: list[ScorerSpec] = field(default_factory=list)
    fold_k: int = 3
    fold_seed: int = 0
    sources: list[str] = field(default_factory=lambda: [ORACLE])
    granularity: str = SINGLE_POINT
    rounds: int = 3
    rounds_source: str = SELF_REFLECTION
    density_bins: int = 10
    seed: int = 0
    api: ApiConfig = field(default_factory=ApiConfig)
    raw: dict = field(default_factory=dict)

    def model_label(self) -> str:
        spec = self.backends.get(GENERATION_BACKEND)
        if spec and spec.kind == "http" and spec.http and spec.http.model_name:
            return spec.http.model_name
        if spec and spec.kind == "mock" and spec.mock_script is not None:
            return spec.mock_script.stem
        return "model"


def _parse_backend(name: str, obj: dict, base_dir: Path) -> BackendSpec:
    kind = obj.get("kind", "http")
    if kind == "http":
        fields = {
            k: obj[k]
            for k in (
                "base_url",
                "model_name",
                "temperature",
                "max_tokens",
                "max_parallel",
                "retry_limit",
                "timeout",
                "completions_path",
                "bearer_token",
                "retry_base_delay",
            )
            if k in obj
        }
        return BackendSpec(kind="http", http=BackendConfig(**fields))
    if kind == "mock":
        if "script" not in obj:
            raise ConfigurationError(f"backend {name!r}: mock backends need a 'script' path")
        script = Path(obj["script"])
        if not script.is_absolute():
            script = base_dir / script
        return BackendSpec(kind="mock", mock_script=script)
    if kind == "alias":
        target = obj.get("target")
        if not target:
            raise ConfigurationError(f"backend {name!r}: alias backends need a 'target'")
        return BackendSpec(kind="alias", alias_of=target)
    raise ConfigurationError(f"backend {name!r}: unknown kind {kind!r}")


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    base_dir = path.parent
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")

    dataset = raw.get("dataset")
    if not isinstance(dataset, dict) or "path" not in dataset:
        raise ConfigurationError(f"{path}: a dataset section with a 'path' is required")
    dataset_path = Path(dataset["path"])
    if not dataset_path.is_absolute():
        dataset_path = base_dir / dataset_path
    preprocess = PreprocessConfig(
        label_column=dataset.get("label_column", "label"),
        label_mapping={str(k): int(v) for k, v in dataset.get("label_mapping", {"1": 1, "0": 0}).items()},
        numeric_columns=list(dataset.get("numeric_columns", [])),
        excluded_features=list(dataset.get("excluded_features", [])),
        seed=int(dataset.get("seed", raw.get("seed", 0))),
        cases_per_class=dataset.get("cases_per_class", "all"),
        delimiter=dataset.get("delimiter", ","),
    )

    backends: dict[str, BackendSpec] = {}
    for name, obj in (raw.get("backends") or {}).items():
        if name not in (GENERATION_BACKEND, SELF_REFLECTION_BACKEND, FINETUNED_BACKEND):
            raise ConfigurationError(f"{path}: unknown backend role {name!r}")
        backends[name] = _parse_backend(name, obj or {}, base_dir)
    if GENERATION_BACKEND not in backends:
        raise ConfigurationError(f"{path}: a 'generation' backend is required")

    scorers: list[ScorerSpec] = []
    for obj in raw.get("scorers") or []:
        kind = obj.get("kind", "http")
        if kind == "http":
            if "base_url" not in obj:
                raise ConfigurationError(f"{path}: http scorers need a base_url")
            scorers.append(ScorerSpec(kind="http", base_url=obj["base_url"]))
        elif kind == "file":
            score_path = Path(obj["path"])
            if not score_path.is_absolute():
                score_path = base_dir / score_path
            scorers.append(ScorerSpec(kind="file", path=score_path))
        else:
            raise ConfigurationError(f"{path}: unknown scorer kind {kind!r}")

    feedback = raw.get("feedback") or {}
    sources = list(feedback.get("sources", [ORACLE]))
    for source in sources:
        if source not in SOURCES:
            raise ConfigurationError(f"{path}: unknown feedback source {source!r}")
    granularity = feedback.get("granularity", SINGLE_POINT)
    if granularity not in (SINGLE_POINT, ENTIRE_CONTENT):
        raise ConfigurationError(f"{path}: unknown granularity {granularity!r}")

    folds = raw.get("folds") or {}
    api_raw = raw.get("api") or {}
    static_dir = api_raw.get("static_dir")
    if static_dir:
        static_dir = Path(static_dir)
        if not static_dir.is_absolute():
            static_dir = base_dir / static_dir

    rounds_raw = raw.get("multi_round") or {}

    return RunConfig(
        run_id=str(raw.get("run_id", path.stem)),
        dataset_path=dataset_path,
        preprocess=preprocess,
        backends=backends,
        scorers=scorers,
        fold_k=int(folds.get("k", 3)),
        fold_seed=int(folds.get("seed", raw.get("seed", 0))),
        sources=sources,
        granularity=granularity,
        rounds=int(rounds_raw.get("rounds", raw.get("rounds", 3))),
        rounds_source=rounds_raw.get("source", SELF_REFLECTION),
        density_bins=int(raw.get("density_bins", 10)),
        seed=int(raw.get("seed", 0)),
        api=ApiConfig(
            host=api_raw.get("host", "127.0.0.1"),
            port=int(api_raw.get("port", 8777)),
            token=api_raw.get("token"),
            static_dir=static_dir,
            display_arm=api_raw.get("display_arm"),
        ),
        raw=raw,
    )


def load_mock_script(path: Path) -> list[tuple[tuple[str, str], str]]:
    """Read an ordered mock script: entries of {match: {kind, pattern}, completion}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    entries_raw = raw.get("entries") if isinstance(raw, dict) else raw
    if not isinstance(entries_raw, list):
        raise ConfigurationError(f"{path}: expected a list of entries")
    entries: list[tuple[tuple[str, str], str]] = []
    for i, obj in enumerate(entries_raw):
        try:
            match = obj["match"]
            entries.append(((match["kind"], match["pattern"]), obj["completion"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"{path}: entry {i}: {exc}") from exc
    return entries


def resolve_backend(config: RunConfig, role: str,
                    cache: Optional[dict[str, Backend]] = None) -> Backend:
    """Instantiate (or reuse) the backend for a role; fails fast on bad config."""
    cache = cache if cache is not None else {}
    if role in cache:
        return cache[role]
    spec = config.backends.get(role)
    if spec is None:
        if role == SELF_REFLECTION_BACKEND:
            # self-reflection defaults to the generating model
            backend = resolve_backend(config, GENERATION_BACKEND, cache)
            cache[role] = backend
            return backend
        raise ConfigurationError(f"no backend configured for role {role!r}")
    if spec.kind == "alias":
        backend = resolve_backend(config, spec.alias_of, cache)
    elif spec.kind == "mock":
        if not spec.mock_script.exists():
            raise ConfigurationError(f"mock script {spec.mock_script} does not exist")
        backend = register_mock(load_mock_script(spec.mock_script), name=spec.mock_script.stem)
    else:
        backend = HttpBackend(spec.http)
    cache[role] = backend
    return backend
