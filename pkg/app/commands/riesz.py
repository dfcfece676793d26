"""Riesz measure and Poincaré ratio commands."""
import logging
from typing import List

import numpy as np

from app.commands.router import CommandRouter, Job, RunContext
from app.models.domain import SpaceStats
from app.models.schemas import Record
from app.services.minkowski_service import radius_schedule
from app.services.riesz_service import RieszService
from app.services.space_service import MetricSpaceService
from app.storage import plots

logger = logging.getLogger(__name__)

router = CommandRouter()


def doubling_stats(ctx: RunContext, job: Job) -> SpaceStats:
    """Doubling estimate over sampled interior centers and a dyadic radius schedule."""
    space = ctx.space
    span = float(np.linalg.norm(space.coords.max(axis=0) - space.coords.min(axis=0)))
    radii = job.param("doubling_radii") or radius_schedule(space.h, span / 8)
    margin = 2.0 * max(radii)
    centers = MetricSpaceService.sample_vertices(space, int(job.param("samples", 20)), job.seed, margin=margin)
    return MetricSpaceService.doubling_estimate(space, centers, radii)


@router.command("riesz")
def riesz_measure(ctx: RunContext, job: Job) -> List[Record]:
    """Riesz measure mass against 8 C_D L d(x,y)."""
    x, y = job.pair
    L = job.param("L")
    stats = doubling_stats(ctx, job)
    check = RieszService.riesz_mass_bound_check(ctx.space, x, y, L, stats)
    riesz = RieszService.riesz_measure(ctx.space, x, y, L)
    path = ctx.plot_path(f"riesz-{x}-{y}-L{L:g}")
    if path is not None:
        plots.scalar_field(ctx.space, np.log10(np.where(riesz.weights > 0, riesz.weights, np.nan)),
                           path, title=f"log10 Riesz weights, L={L:g}", poles=(x, y))
    outputs = {
        "mass": check.mass,
        "bound": check.bound,
        "doubling_estimate": stats.doubling_estimate,
        "support_size": int(riesz.support.size),
        "radius": riesz.radius,
        "distance": ctx.space.distance(x, y),
    }
    if job.param("dump_weights", False):
        support = riesz.support
        outputs["weights"] = [[int(v), float(riesz.weights[v])] for v in support]
    return [job.record(outputs, passed=check.passed)]


@router.command("doubling", per_pair=False)
def doubling(ctx: RunContext, job: Job) -> List[Record]:
    """Empirical doubling constant; optionally compared with an expected value."""
    stats = doubling_stats(ctx, job)
    outputs = {
        "estimate": stats.doubling_estimate,
        "argmax_center": stats.doubling_argmax[0] if stats.doubling_argmax else None,
        "argmax_radius": stats.doubling_argmax[1] if stats.doubling_argmax else None,
        "centers": len(stats.centers),
    }
    expected = job.param("expected")
    if expected is None:
        return [job.record(outputs)]
    rtol = float(job.param("rtol", 0.15))
    passed = abs(stats.doubling_estimate - expected) <= rtol * expected
    return [job.record(outputs, passed=passed, tolerances={"rtol": rtol})]


@router.command("ptpi")
def ptpi(ctx: RunContext, job: Job) -> List[Record]:
    """Pointwise Poincaré ratio |u(x) - u(y)| / sum lip u dm^L."""
    x, y = job.pair
    u = ctx.test_function(job.param("u", "coordinate-0"), job.pair, job.seed)
    ratio = RieszService.ptpi_check(ctx.space, u, x, y, job.param("L"))
    return [job.record({"ratio": ratio})]


@router.command("pi")
def pi(ctx: RunContext, job: Job) -> List[Record]:
    """Ball Poincaré ratios centered at x for each radius in ``r``."""
    x, _ = job.pair
    u = ctx.test_function(job.param("u", "coordinate-0"), job.pair, job.seed)
    records = []
    for r in job.param("r", [0.1]):
        result = RieszService.pi_check(ctx.space, u, x, r, job.param("lam"))
        outputs = {
            "ratio": result.ratio,
            "lhs": result.lhs,
            "rhs": result.rhs,
            "boundary_contaminated": result.boundary_contaminated,
        }
        records.append(job.record(outputs, r=r))
    return records
