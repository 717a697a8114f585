"""Run configuration: one JSON file, schema-validated, hashable.

The schema below is the single source of truth for every knob; unknown keys
are rejected so typos fail loudly. A fully resolved copy (defaults filled)
is written next to every output so a run can be reproduced from its
artifacts alone. The config hash stamped into output headers is the SHA-256
of the canonical JSON of the resolved document.
"""

from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .forecaster import FeatureSpec, PipelineConfig

_SCHEMA = {
    "seed": 0,
    "inputs": {
        "cases": None,
        "search": None,
        "media": None,
        "mechanistic": None,
    },
    "features": {
        "n_lags": 4,
        "use_search": True,
        "use_media": True,
        "use_deaths": True,
        "use_cumulative": True,
        "use_mechanistic": True,
        "combine_search_terms": False,
    },
    "clustering": {
        "enabled": True,
        "k_min": 2,
        "k_max": 10,
        "ch_features": "correlation_rows",
    },
    "augmentation": {
        "enabled": True,
        "n_bootstrap": 100,
        "noise_sd": 0.01,
        "noise_on_target": True,
    },
    "lasso": {
        "n_lambda": 50,
        "lambda_ratio": 1e-3,
        "cv_folds": 10,
        "cv_shuffle": True,
        "tol": 1e-7,
        "max_iter": 10000,
    },
    "ensemble": {"runs": 20},
    "ar": {"lags": 3},
    "models": ["persistence", "ar", "argo", "argonet", "augmented"],
    "backtest": {"start": None, "end": None},
    "mechanistic_scenario": {
        "regions": None,
        "population": 1000000,
        "r0": 2.0,
        "latent_period": 4.0,
        "infectious_period": 3.0,
        "steps_per_day": 4,
        "seed_subpop": 0,
        "seed_latent": 100,
        "horizon": 60,
        "runs": 100,
        "start_date": None,
        "hub_strength": 0.02,
        "local_strength": 0.005,
        "infectious_travel": True,
    },
    "output": {"dir": "out"},
}

_NUMERIC = (int, float)


def _merge(schema, user, path):
    if isinstance(schema, dict):
        if user is None or user is ...:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        unknown = set(user) - set(schema) - ({"_meta"} if not path else set())
        if unknown:
            raise ConfigError(
                f"{path or 'config'}: unknown key(s) {', '.join(sorted(unknown))}"
            )
        return {
            key: _merge(default, user.get(key, ...), f"{path}.{key}" if path else key)
            for key, default in schema.items()
        }
    if user is ...:
        return copy.deepcopy(schema)
    if schema is None or user is None:
        return user if user is not ... else None
    if isinstance(schema, bool):
        if not isinstance(user, bool):
            raise ConfigError(f"{path}: expected true/false")
        return user
    if isinstance(schema, _NUMERIC):
        if isinstance(user, bool) or not isinstance(user, _NUMERIC):
            raise ConfigError(f"{path}: expected a number")
        return user
    if isinstance(schema, str):
        if not isinstance(user, str):
            raise ConfigError(f"{path}: expected a string")
        return user
    if isinstance(schema, list):
        if not isinstance(user, list):
            raise ConfigError(f"{path}: expected a list")
        return list(user)
    raise ConfigError(f"{path}: unsupported schema node")


def _parse_date(value, path):
    if value is None:
        return None
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected an ISO date, got {value!r}") from None


class RunConfig:
    """Resolved run configuration with typed accessors."""

    def __init__(self, raw: dict | None = None, base_dir: Path | None = None):
        self.data = _merge(_SCHEMA, raw or {}, "")
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self._validate()

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {path}: {exc}") from None
        raw.pop("_meta", None)
        return cls(raw, base_dir=path.parent)

    def _validate(self):
        d = self.data
        if d["features"]["n_lags"] < 1:
            raise ConfigError("features.n_lags: must be >= 1")
        if d["augmentation"]["n_bootstrap"] < 1:
            raise ConfigError("augmentation.n_bootstrap: must be >= 1")
        if d["augmentation"]["noise_sd"] < 0:
            raise ConfigError("augmentation.noise_sd: must be non-negative")
        if d["ensemble"]["runs"] < 1:
            raise ConfigError("ensemble.runs: must be >= 1")
        if not 2 <= d["clustering"]["k_min"] <= d["clustering"]["k_max"]:
            raise ConfigError("clustering: need 2 <= k_min <= k_max")
        from .baselines import MODEL_KINDS

        for m in d["models"]:
            if m not in MODEL_KINDS:
                raise ConfigError(
                    f"models: unknown model {m!r} (choose from {', '.join(MODEL_KINDS)})"
                )
        _parse_date(d["backtest"]["start"], "backtest.start")
        _parse_date(d["backtest"]["end"], "backtest.end")
        _parse_date(d["mechanistic_scenario"]["start_date"], "mechanistic_scenario.start_date")

    # ---- typed accessors -------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def input_path(self, name: str) -> Path | None:
        value = self.data["inputs"][name]
        if value is None:
            return None
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    @property
    def models(self) -> tuple[str, ...]:
        return tuple(self.data["models"])

    @property
    def backtest_range(self) -> tuple[dt.date | None, dt.date | None]:
        b = self.data["backtest"]
        return _parse_date(b["start"], "backtest.start"), _parse_date(b["end"], "backtest.end")

    def feature_spec(self, use_mechanistic: bool | None = None) -> FeatureSpec:
        f = self.data["features"]
        return FeatureSpec(
            n_lags=int(f["n_lags"]),
            use_search=f["use_search"],
            use_media=f["use_media"],
            use_deaths=f["use_deaths"],
            use_cumulative=f["use_cumulative"],
            use_mechanistic=(
                f["use_mechanistic"] if use_mechanistic is None else use_mechanistic
            ),
        )

    def pipeline_config(self) -> PipelineConfig:
        d = self.data
        return PipelineConfig(
            clustering_enabled=d["clustering"]["enabled"],
            k_range=(int(d["clustering"]["k_min"]), int(d["clustering"]["k_max"])),
            ch_features=d["clustering"]["ch_features"],
            augment_enabled=d["augmentation"]["enabled"],
            n_bootstrap=int(d["augmentation"]["n_bootstrap"]),
            noise_sd=float(d["augmentation"]["noise_sd"]),
            noise_on_target=d["augmentation"]["noise_on_target"],
            cv_folds=int(d["lasso"]["cv_folds"]),
            cv_shuffle=d["lasso"]["cv_shuffle"],
            n_lambda=int(d["lasso"]["n_lambda"]),
            lambda_ratio=float(d["lasso"]["lambda_ratio"]),
            tol=float(d["lasso"]["tol"]),
            max_iter=int(d["lasso"]["max_iter"]),
            ensemble_runs=int(d["ensemble"]["runs"]),
            ar_lags=int(d["ar"]["lags"]),
        )

    # ---- reproducibility -------------------------------------------------

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def write_resolved(self, out_dir: str | Path) -> Path:
        out = Path(out_dir) / "resolved_config.json"
        doc = dict(self.data)
        doc["_meta"] = {"config_hash": self.config_hash, "seed": self.seed}
        out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out
