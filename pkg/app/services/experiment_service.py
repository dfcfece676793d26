"""Batch experiment runner: builds the space, fans out command jobs and assembles the report."""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from app.commands.router import CommandRouter, Job, Pair, RunContext, build_router
from app.config import settings
from app.models.domain import PointCloudSpace
from app.models.schemas import ExperimentConfig, PolePair, Provenance, Record, Report
from app.services.errors import InputError, LabError
from app.services.gallery_service import GalleryService
from app.services.space_service import MetricSpaceService
from app.storage.pointcloud_io import read_pointcloud

logger = logging.getLogger(__name__)

_VERSIONED = ("numpy", "scipy", "networkx", "pydantic")


def space_hash(space: PointCloudSpace) -> str:
    digest = hashlib.sha256()
    for arr in (space.coords, space.weights, space.edges, space.lengths):
        digest.update(np.ascontiguousarray(arr).tobytes())
    digest.update(f"{space.metric_kind.value}|{space.h!r}".encode())
    return digest.hexdigest()


def _versions() -> dict:
    found = {settings.APP_NAME: settings.APP_VERSION}
    for name in _VERSIONED:
        try:
            found[name] = version(name)
        except PackageNotFoundError:
            found[name] = "unknown"
    return found


class ExperimentService:
    """Service for running an ExperimentConfig end to end."""

    def __init__(self, config: ExperimentConfig, base_dir: Optional[Path] = None,
                 router: Optional[CommandRouter] = None):
        """
        Initialize ExperimentService.

        Args:
            config: Validated experiment configuration
            base_dir: Directory that relative paths in the config refer to
            router: Command registry (all commands by default)
        """
        self.config = config
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.router = router or build_router()

    def load_space(self) -> PointCloudSpace:
        source = self.config.space
        if source.gallery is not None:
            return GalleryService.build(source.gallery)
        return read_pointcloud(self.base_dir / source.file)

    @staticmethod
    def resolve_pair(space: PointCloudSpace, pair: PolePair) -> Pair:
        ends = []
        for end in (pair.x, pair.y):
            ends.append(space.check_vertex(end) if isinstance(end, int)
                        else MetricSpaceService.nearest_vertex(space, end))
        if ends[0] == ends[1]:
            raise InputError(f"pole pair {pair.x}, {pair.y} resolves to a single vertex {ends[0]}")
        return ends[0], ends[1]

    def jobs(self, pairs: List[Pair], only: Optional[Sequence[str]] = None) -> List[Job]:
        """One job per (command, pair), or per command for pair-free commands, in config order."""
        base = self.config.parameters.model_dump()
        jobs: List[Job] = []
        for position, spec in enumerate(self.config.commands):
            if only and spec.command not in only:
                continue
            command = self.router.get(spec.command)
            params = {**base, **spec.params}
            targets = pairs if command.per_pair else [None]
            for k, pair in enumerate(targets):
                seed = int(np.random.SeedSequence([self.config.seed, position, k]).generate_state(1)[0])
                jobs.append(Job(index=len(jobs), command=spec.command, params=params, pair=pair, seed=seed))
        return jobs

    def _execute(self, ctx: RunContext, job: Job) -> List[Record]:
        handler = self.router.get(job.command).handler
        logger.info(f"[{job.index}] {job.command} pair={job.pair}")
        try:
            return handler(ctx, job)
        except LabError as exc:
            logger.error(f"[{job.index}] {job.command} failed: {exc.detail}")
            return [job.failure(exc.detail)]
        except Exception as exc:  # noqa: BLE001 - every failure becomes a record
            logger.exception(f"[{job.index}] {job.command} crashed")
            return [job.failure(f"{type(exc).__name__}: {exc}")]

    def run(self, only: Optional[Sequence[str]] = None, jobs: Optional[int] = None,
            out_dir: Optional[Path] = None) -> Report:
        config = self.config
        unknown = [name for name in (only or ()) if name not in self.router.commands]
        if unknown:
            raise InputError(f"unknown commands in --only: {unknown}")

        space = self.load_space()
        pairs = [self.resolve_pair(space, p) for p in config.pairs]
        work = self.jobs(pairs, only)
        workers = jobs or config.jobs or settings.DEFAULT_JOBS
        ctx = RunContext(
            space=space,
            config=config,
            pairs=pairs,
            base_dir=self.base_dir,
            out_dir=out_dir,
            plots=config.plots and settings.PLOTS_ENABLED and out_dir is not None,
        )
        logger.info(f"running {len(work)} jobs on '{space.name}' ({space.n} vertices) with {workers} workers")

        if workers > 1 and len(work) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda job: self._execute(ctx, job), work))
        else:
            results = [self._execute(ctx, job) for job in work]

        # merge in job order so the report does not depend on scheduling
        records = [record for batch in results for record in batch]
        provenance = Provenance(
            app_name=settings.APP_NAME,
            app_version=settings.APP_VERSION,
            space_name=space.name,
            space_hash=space_hash(space),
            vertices=space.n,
            config_hash=hashlib.sha256(config.model_dump_json().encode()).hexdigest(),
            seed=config.seed,
            versions=_versions(),
        )
        report = Report(provenance=provenance, config=config.model_dump(mode="json"), records=records)
        failed = sum(r.failed for r in records)
        logger.info(f"finished: {len(records)} records, {failed} failed")
        return report
