# config.py
"""
Central configuration for experiments.
Output file names and defaults live in CONFIG; a run is described by a JSON
document validated into ExperimentConfig (unknown keys are rejected).
"""

import copy
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .exact_oracle import DiscreteModel
from .fk_model import ModelSpec, TestFunction, identity, indicator, state_indicator
from .helpers import Lag, parse_lag
from .models import LinearGaussianParams, StochasticVolatilityParams
from .registry import MODEL_REGISTRY

CONFIG = {
    "output_dir": Path("results"),
    "outputs": {
        "simulate": ("observations.csv", "simulate.json"),
        "run": ("run.csv", "run.json"),
        "sweep-lag": ("sweep.csv", "sweep.json"),
        "long-run": ("long_run.csv", "long_run.json"),
        "ci-failure": ("ci_failure.csv", "ci_failure.json"),
        "oracle-exact": (None, "oracle_exact.json"),
        "oracle-replicate": (None, "oracle_replicate.json"),
    },
    "defaults": {
        "level": 0.95,
        "thin": 1,
        "flow": "predictor",
        "reference_replicates": 0,
        "threads": 1,
    },
}

_STRICT = ConfigDict(extra="forbid", frozen=True)


# =====================================================================
# Model sections
# =====================================================================

class LinearGaussianConfig(BaseModel):
    model_config = _STRICT

    kind: Literal["linear_gaussian"]
    phi: float
    sigma_u: float
    sigma_v: float

    @model_validator(mode="after")
    def _valid(self):
        self.params()
        return self

    def params(self) -> LinearGaussianParams:
        return LinearGaussianParams(phi=self.phi, sigma_u=self.sigma_u, sigma_v=self.sigma_v)


class StochasticVolatilityConfig(BaseModel):
    model_config = _STRICT

    kind: Literal["stochastic_volatility"]
    beta: float
    phi: float
    sigma: float

    @model_validator(mode="after")
    def _valid(self):
        self.params()
        return self

    def params(self) -> StochasticVolatilityParams:
        return StochasticVolatilityParams(beta=self.beta, phi=self.phi, sigma=self.sigma)


class DiscreteConfig(BaseModel):
    """Either a path to a DiscreteModel JSON document or the same fields inline."""

    model_config = _STRICT

    kind: Literal["discrete"]
    path: Optional[str] = None
    chi: Optional[List[float]] = None
    M: Optional[List[List[float]]] = None
    potentials: Optional[Dict[str, List[float]]] = None
    observations: Optional[List[str]] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.chi is not None or self.M is not None or self.potentials is not None
        if self.path is None and not inline:
            raise ValueError("give either 'path' or inline 'chi', 'M' and 'potentials'")
        if self.path is not None and inline:
            raise ValueError("'path' and inline model fields are mutually exclusive")
        try:
            self.params()
        except OSError as e:
            raise ValueError(f"cannot read model document: {e}") from None
        return self

    def params(self) -> DiscreteModel:
        if self.path is not None:
            dm = DiscreteModel.from_json(self.path)
            if self.observations is not None:
                dm = DiscreteModel(dm.chi, dm.M, dm.potentials, self.observations)
            return dm
        return DiscreteModel.from_dict(
            {
                "chi": self.chi,
                "M": self.M,
                "potentials": self.potentials,
                "observations": self.observations or [],
            }
        )


ModelConfig = Annotated[
    Union[LinearGaussianConfig, StochasticVolatilityConfig, DiscreteConfig],
    Field(discriminator="kind"),
]


class TestFunctionConfig(BaseModel):
    __test__ = False
    model_config = _STRICT

    kind: Literal["identity", "indicator", "state"] = "identity"
    a: Optional[float] = None
    b: Optional[float] = None
    state: Optional[int] = None

    @model_validator(mode="after")
    def _arguments(self):
        if self.kind == "indicator" and (self.a is None or self.b is None or self.b < self.a):
            raise ValueError("indicator needs bounds a <= b")
        if self.kind == "state" and (self.state is None or self.state < 0):
            raise ValueError("state indicator needs a state index >= 0")
        return self

    def build(self) -> TestFunction:
        if self.kind == "indicator":
            return indicator(self.a, self.b)
        if self.kind == "state":
            return state_indicator(self.state)
        return identity()


# =====================================================================
# Experiment config
# =====================================================================

class ExperimentConfig(BaseModel):
    model_config = _STRICT

    model: ModelConfig
    N: int = Field(ge=1)
    n: int = Field(ge=0)
    lags: List[Any]
    replicates: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    test_function: TestFunctionConfig = TestFunctionConfig()
    output_path: Optional[str] = None
    thin: int = Field(default=CONFIG["defaults"]["thin"], ge=1)
    flow: Literal["predictor", "filter"] = CONFIG["defaults"]["flow"]
    reference_replicates: int = Field(default=CONFIG["defaults"]["reference_replicates"], ge=0)
    level: float = Field(default=CONFIG["defaults"]["level"], gt=0.0, lt=1.0)
    student_t_df: Optional[float] = Field(default=None, gt=0.0)
    observations_path: Optional[str] = None
    threads: int = Field(default=CONFIG["defaults"]["threads"], ge=1)

    @field_validator("lags")
    @classmethod
    def _parse_lags(cls, value: List[Any]) -> List[Lag]:
        if not value:
            raise ValueError("at least one lag is required")
        return [parse_lag(v) for v in value]

    # ---------- derived objects ----------

    @property
    def model_kind(self) -> str:
        return self.model.kind

    def model_params(self):
        return self.model.params()

    def build_model(self) -> ModelSpec:
        return MODEL_REGISTRY[self.model_kind](self.model_params())

    def build_test_function(self) -> TestFunction:
        return self.test_function.build()

    @property
    def finite_lags(self) -> List[int]:
        return [lag for lag in self.lags if lag != float("inf")]

    @property
    def tracked_lag(self) -> Lag:
        """Window width for a single pass that serves every requested lag."""
        finite = self.finite_lags
        return max(finite) if finite else float("inf")

    def echo(self) -> Dict[str, Any]:
        """JSON-safe copy of the config (infinite lags written as 'inf')."""
        data = self.model_dump(mode="python")
        data["lags"] = ["inf" if lag == float("inf") else int(lag) for lag in self.lags]
        return data


# =====================================================================
# Parsing
# =====================================================================

def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply KEY=VALUE overrides; dotted keys reach into nested sections."""
    data = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like KEY=VALUE, got {item!r}", field="--set")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"empty key in override {item!r}", field="--set")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into non-object key '{part}'", field=key)
        node[parts[-1]] = _parse_value(raw)
    return data


def _resolve_paths(data: Dict[str, Any], base: Path) -> None:
    model = data.get("model")
    if isinstance(model, dict) and isinstance(model.get("path"), str):
        candidate = base / model["path"]
        if not Path(model["path"]).is_absolute() and candidate.exists():
            model["path"] = str(candidate)
    obs = data.get("observations_path")
    if isinstance(obs, str):
        candidate = base / obs
        if not Path(obs).is_absolute() and candidate.exists():
            data["observations_path"] = str(candidate)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "config"
            messages.append(f"{loc}: {err['msg']}")
        raise ConfigError("; ".join(messages)) from None


def parse_config(path, overrides: Sequence[str] = ()) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="--config")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e})", field=str(path)) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", field=str(path))

    data = apply_overrides(data, overrides)
    _resolve_paths(data, path.parent)
    return config_from_dict(data)
