"""Minkowski content and relative isoperimetric commands."""
import logging
from typing import List

from app.commands.router import CommandRouter, Job, RunContext
from app.commands.separating import job_regions
from app.models.domain import EuclideanConfig, MetricKind
from app.models.schemas import Record
from app.services.minkowski_service import MinkowskiService
from app.services.oracle_service import OracleService
from app.services.space_service import MetricSpaceService

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("minkowski")
def minkowski(ctx: RunContext, job: Job) -> List[Record]:
    """Riesz-weighted Minkowski content per region; ``oracle`` compares with the bisector energy."""
    x, y = job.pair
    sep = ctx.separating(job.pair, job.param("L"))
    analytic = None
    if job.param("oracle", False):
        if ctx.space.metric_kind != MetricKind.AMBIENT_EUCLIDEAN or ctx.space.dim < 2:
            logger.warning("oracle comparison needs an ambient Euclidean cloud of dimension >= 2")
        else:
            config = EuclideanConfig(d=ctx.space.dim, x=tuple(ctx.space.coords[x]),
                                     y=tuple(ctx.space.coords[y]), L=job.param("L"))
            analytic = OracleService.halfspace_separator_energy(config)
    tol = ctx.tolerances.halfspace

    records = []
    for A in job_regions(ctx, job, sep):
        result = MinkowskiService.minkowski_content(ctx.space, A.mask, sep.riesz, job.param("radii"))
        outputs = {
            "estimate": result.estimate,
            "argmin_radius": result.argmin_radius,
            "profile": [list(p) for p in result.profile],
            "diagnostic": result.diagnostic,
        }
        if analytic is None:
            records.append(job.record(outputs, region=A.label))
            continue
        outputs["analytic"] = analytic
        passed = abs(result.estimate - analytic) <= tol * analytic and result.estimate >= ctx.space.dim / 2
        records.append(job.record(outputs, passed=bool(passed), tolerances={"halfspace": tol}, region=A.label))
    return records


@router.command("iso")
def iso(ctx: RunContext, job: Job) -> List[Record]:
    """Relative isoperimetric ratios per region and radius; the summary holds their maximum."""
    center = job.pair[0]
    if job.param("center") is not None:
        center = MetricSpaceService.nearest_vertex(ctx.space, job.param("center"))
    sep = ctx.separating(job.pair, job.param("L"))
    expected = job.param("expected")
    rtol = float(job.param("rtol", 0.2))

    records, ratios = [], []
    for A in job_regions(ctx, job, sep):
        for r in job.param("r", [0.2]):
            result = MinkowskiService.relative_isoperimetric_check(
                ctx.space, A.mask, center, r, job.param("lam"), job.param("radii")
            )
            outputs = {
                "ratio": result.ratio,
                "lhs": result.lhs,
                "surface": result.surface,
                "surface_term": result.surface_term,
                "boundary_contaminated": result.boundary_contaminated,
            }
            ratios.append(result.ratio)
            if expected is None:
                records.append(job.record(outputs, region=A.label, r=r, center=center))
                continue
            outputs["expected"] = expected
            passed = abs(result.ratio - expected) <= rtol * expected
            records.append(job.record(outputs, passed=bool(passed), tolerances={"rtol": rtol},
                                      region=A.label, r=r, center=center))
    if len(ratios) > 1:
        records.append(job.record({"constant": max(ratios)}, summary="isoperimetric-constant", center=center))
    return records
