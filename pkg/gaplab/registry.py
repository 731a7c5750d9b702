"""Model registry mapping model tags to builders of expansion/exact-model bundles."""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from .errors import UnknownModelError
from .expansions import ExpansionSpec
from .types import ExactModel

# (n, x) -> (exact E[Q], leading term, correction term, flags)
QueueTerms = Callable[[float, float], Tuple[float, float, float, Tuple[str, ...]]]


@dataclass(frozen=True)
class ModelBundle:
    """Everything an experiment needs for one model at fixed parameters."""
    spec: ExpansionSpec
    exact: Optional[ExactModel]
    queue_terms: Optional[QueueTerms] = None


class ModelEntry:
    """A registered model builder."""

    def __init__(self, name: str, builder: Callable, description: Optional[str] = None):
        self.name = name
        self.builder = builder
        self.description = description or builder.__doc__ or f"Model: {name}"

    def build(self, config) -> ModelBundle:
        """Build the bundle for an ExperimentConfig."""
        return self.builder(config)

    def summary(self) -> Dict[str, str]:
        first_line = self.description.strip().splitlines()[0] if self.description.strip() else ""
        return {"name": self.name, "description": first_line}


class ModelRegistry:
    """Registry of model builders keyed by model tag."""

    def __init__(self):
        self.models: Dict[str, ModelEntry] = {}

    def register(self, name: str, *, description: Optional[str] = None):
        """
        Register a builder under a model tag.

        Used as a decorator:
            @registry.register("mmn-hw")
            def build(config): ...
        """
        def decorator(func: Callable) -> Callable:
            self.models[name] = ModelEntry(name, func, description=description)
            return func
        return decorator

    def get(self, name: str) -> ModelEntry:
        """Get a model by tag, raises UnknownModelError if not found."""
        if name not in self.models:
            raise UnknownModelError(name, available=self.list_models())
        return self.models[name]

    def list_models(self) -> list:
        """List all registered model tags."""
        return list(self.models.keys())

    def summaries(self) -> list:
        return [entry.summary() for entry in self.models.values()]
