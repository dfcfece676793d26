"""Command registry and the context handed to every command handler."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from app.models.domain import PointCloudSpace, RegionSet
from app.models.schemas import ExperimentConfig, Record, Tolerances
from app.services.errors import InputError
from app.services.regions import RegionParser, standard_candidates
from app.services.separating_service import SeparatingService

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class Job:
    """One handler invocation: a command, its merged parameters and an optional pole pair."""
    index: int
    command: str
    params: Dict[str, Any]
    pair: Optional[Pair] = None
    seed: int = 0

    def param(self, name: str, default: Any = None) -> Any:
        return self.params.get(name, default)

    def record(self, outputs: Dict[str, Any], passed: Optional[bool] = None,
               tolerances: Optional[Dict[str, Any]] = None, **extra_params) -> Record:
        return Record(
            command=self.command,
            pair=list(self.pair) if self.pair else None,
            params={**self.params, **extra_params},
            outputs=outputs,
            tolerances=tolerances or {},
            passed=passed,
        )

    def failure(self, detail: str, **extra_params) -> Record:
        return Record(
            command=self.command,
            pair=list(self.pair) if self.pair else None,
            params={**self.params, **extra_params},
            error=detail,
        )


@dataclass
class RunContext:
    """Everything a handler may read. Shared across worker threads; read-only after setup."""
    space: PointCloudSpace
    config: ExperimentConfig
    pairs: List[Pair]
    base_dir: Path = field(default_factory=Path.cwd)
    out_dir: Optional[Path] = None
    plots: bool = False

    @property
    def tolerances(self) -> Tolerances:
        return self.config.tolerances

    def separating(self, pair: Pair, L: float) -> SeparatingService:
        return SeparatingService(self.space, pair[0], pair[1], L)

    def named_regions(self, separating: Optional[SeparatingService] = None) -> Dict[str, RegionSet]:
        parser = RegionParser(self.space, separating=separating, base_dir=self.base_dir)
        return parser.parse_all(self.config.regions)

    def region(self, name: str, separating: Optional[SeparatingService] = None) -> RegionSet:
        regions = self.named_regions(separating)
        if name not in regions:
            # allow inline expressions in place of names
            parser = RegionParser(self.space, separating=separating, named=regions, base_dir=self.base_dir)
            return parser.parse(name)
        return regions[name]

    def candidates(self, separating: SeparatingService, seed: int) -> List[RegionSet]:
        """Named regions (all, or the included ones) plus the standard families."""
        spec = self.config.candidates
        named = self.named_regions(separating)
        chosen = spec.include or list(named)
        missing = [name for name in chosen if name not in named]
        if missing:
            raise InputError(f"unknown candidate regions: {missing}")
        regions = [named[name] for name in chosen]
        if spec.standard:
            regions += standard_candidates(separating, seed, n_blobs=spec.n_blobs, offsets=spec.offsets)
        return regions

    def test_function(self, name: str, pair: Optional[Pair], seed: int) -> np.ndarray:
        """Named scalar fields: ``coordinate-<axis>``, ``distance-x`` or ``random``."""
        space = self.space
        if name.startswith("coordinate-"):
            axis = int(name.split("-", 1)[1])
            if not 0 <= axis < space.dim:
                raise InputError(f"no coordinate axis {axis} in dimension {space.dim}")
            return space.coords[:, axis].astype(float)
        if name == "distance-x":
            if pair is None:
                raise InputError("distance-x needs a pole pair")
            return np.asarray(space.distances_from(pair[0]), dtype=float)
        if name == "random":
            return np.random.default_rng(seed).random(space.n)
        raise InputError(f"unknown test function '{name}'")

    def plot_path(self, name: str) -> Optional[Path]:
        if not self.plots or self.out_dir is None:
            return None
        path = self.out_dir / "plots" / f"{name}.svg"
        path.parent.mkdir(parents=True, exist_ok=True)
        return path


Handler = Callable[[RunContext, Job], List[Record]]


@dataclass(frozen=True)
class Command:
    name: str
    handler: Handler
    per_pair: bool = True
    description: str = ""


class CommandRouter:
    """Registry of named commands; routers can include each other."""

    def __init__(self):
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, per_pair: bool = True):
        def decorator(func: Handler) -> Handler:
            doc = (func.__doc__ or "").strip().splitlines()
            self.commands[name] = Command(name, func, per_pair, doc[0] if doc else "")
            return func
        return decorator

    def include_router(self, other: "CommandRouter"):
        clash = set(self.commands) & set(other.commands)
        if clash:
            raise ValueError(f"duplicate commands: {sorted(clash)}")
        self.commands.update(other.commands)

    def get(self, name: str) -> Command:
        if name not in self.commands:
            raise InputError(f"unknown command '{name}'; known: {', '.join(sorted(self.commands))}")
        return self.commands[name]


def build_router() -> CommandRouter:
    """Main router that includes all command modules."""
    from app.commands import flow, minkowski, modulus, oracle, riesz, separating

    command_router = CommandRouter()
    command_router.include_router(riesz.router)
    command_router.include_router(flow.router)
    command_router.include_router(modulus.router)
    command_router.include_router(separating.router)
    command_router.include_router(minkowski.router)
    command_router.include_router(oracle.router)
    return command_router
