# registry.py

from typing import Callable, Dict

from .exact_oracle import discrete_model_spec
from .fk_model import ModelSpec
from .models import make_linear_gaussian, make_stochastic_volatility

# model kind (as written in configs) -> ModelSpec constructor taking the parsed parameters
MODEL_REGISTRY: Dict[str, Callable[..., ModelSpec]] = {
    "linear_gaussian": make_linear_gaussian,
    "stochastic_volatility": make_stochastic_volatility,
    "discrete": discrete_model_spec,
}
