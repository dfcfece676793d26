"""Width, separating ratio and position-function commands."""
import logging
from typing import List

import numpy as np

from app.commands.router import CommandRouter, Job, RunContext
from app.models.domain import RegionSet
from app.models.schemas import Record
from app.services.errors import InputError, LabError
from app.services.separating_service import SeparatingService
from app.storage import plots

logger = logging.getLogger(__name__)

router = CommandRouter()


def job_regions(ctx: RunContext, job: Job, separating: SeparatingService) -> List[RegionSet]:
    """Regions named in ``regions`` (names or inline expressions); all named ones by default."""
    names = job.param("regions") or list(ctx.config.regions)
    if not names:
        return [RegionSet(mask=np.ones(ctx.space.n, dtype=bool), label="X")]
    return [ctx.region(name, separating) for name in names]


@router.command("width")
def width(ctx: RunContext, job: Job) -> List[Record]:
    """Width and separating ratio of each region; optional comparison with expected widths."""
    sep = ctx.separating(job.pair, job.param("L"))
    over = job.param("over", "all-paths")
    expected = job.param("expected")
    regions = job_regions(ctx, job, sep)
    if expected is not None and len(expected) != len(regions):
        raise InputError("expected needs one width per region")
    allowed = ctx.tolerances.width_h * ctx.space.h

    records = []
    for k, A in enumerate(regions):
        w = sep.width(A, over)
        outputs = {"width": w, "mass": sep.riesz.mass_of(A.mask), "ratio": sep.separating_ratio(A, over)}
        if expected is None:
            records.append(job.record(outputs, region=A.label))
            continue
        outputs["expected"] = expected[k]
        records.append(job.record(outputs, passed=bool(abs(w - expected[k]) <= allowed),
                                  tolerances={"width": allowed}, region=A.label))
    return records


@router.command("sr-scan")
def sr_scan(ctx: RunContext, job: Job) -> List[Record]:
    """Infimum of the separating ratio over the candidate families."""
    sep = ctx.separating(job.pair, job.param("L"))
    candidates = ctx.candidates(sep, job.seed)
    scan = sep.set_connectedness_scan(candidates, job.param("over", "all-paths"))
    outputs = {"inf_ratio": scan.inf_ratio, "argmin_label": scan.label, "candidates": len(candidates)}
    if job.param("dump_ratios", False):
        outputs["ratios"] = [[c.label, r] for c, r in zip(candidates, scan.ratios)]
    return [job.record(outputs)]


@router.command("pos-field")
def pos_field(ctx: RunContext, job: Job) -> List[Record]:
    """Position functions: pos(y) equals the width and lip pos stays within lam_hat."""
    sep = ctx.separating(job.pair, job.param("L"))
    lam_hat = float(job.param("lam_hat", 1.0))
    records = []
    for A in job_regions(ctx, job, sep):
        field = sep.position_function(A)
        w = sep.width(A)
        lip = sep.lip_bound_check(field, lam_hat, ctx.tolerances.lip)
        exact = field.width == w
        outputs = {
            "width": w,
            "pos_y": field.width,
            "max_lip": lip.max_lip,
            "max_lip_outside": lip.max_lip_outside,
            "lip_bound": lip.bound,
            "unreached": int(np.count_nonzero(~np.isfinite(field.values))),
        }
        path = ctx.plot_path(f"pos-{job.pair[0]}-{job.pair[1]}-{A.label}")
        if path is not None:
            plots.position_contours(ctx.space, field.values, path, title=f"pos_{A.label}", poles=job.pair)
        records.append(job.record(outputs, passed=bool(exact and lip.passed),
                                  tolerances={"lip_bound": lip.bound}, region=A.label))
    return records


@router.command("sandwich")
def sandwich(ctx: RunContext, job: Job) -> List[Record]:
    """lam^-1 inf Minkowski <= inf SR <= inf Minkowski over the candidate suite."""
    sep = ctx.separating(job.pair, job.param("L"))
    regions = ctx.candidates(sep, job.seed)
    separators = [sep.separator(A.mask, A.label) for A in job_regions(ctx, job, sep) if A.label != "X"]
    result = sep.sandwich_check(
        float(job.param("lam_hat", 1.0)),
        regions,
        separators,
        levels=int(job.param("levels", 16)),
        radii=job.param("radii"),
        tol=ctx.tolerances.sandwich,
    )
    outputs = {
        "lhs": result.lhs,
        "mid": result.mid,
        "rhs": result.rhs,
        "mid_label": result.mid_label,
        "rhs_label": result.rhs_label,
        "relative_gap": result.gap,
        "separators_evaluated": result.separators_evaluated,
        "invalid_separators": result.invalid_separators,
    }
    return [job.record(outputs, passed=result.passed, tolerances={"sandwich": ctx.tolerances.sandwich})]


@router.command("coarea")
def coarea(ctx: RunContext, job: Job) -> List[Record]:
    """Discrete coarea inequality for the position field of each region."""
    sep = ctx.separating(job.pair, job.param("L"))
    records = []
    for A in job_regions(ctx, job, sep):
        result = sep.coarea_check(sep.position_function(A), job.param("radii"), ctx.tolerances.coarea)
        outputs = {"lhs": result.lhs, "rhs": result.rhs, "margin": result.margin, "levels": result.levels}
        records.append(job.record(outputs, passed=bool(result.passed),
                                  tolerances={"coarea": ctx.tolerances.coarea}, region=A.label))
    return records


@router.command("obstacle")
def obstacle(ctx: RunContext, job: Job) -> List[Record]:
    """Obstacle avoidance for regions, or the density form when ``g`` names a test function."""
    sep = ctx.separating(job.pair, job.param("L"))
    C = float(job.param("C", ctx.tolerances.obstacle_c))
    records = []
    g_name = job.param("g")
    if g_name is not None:
        g = np.abs(ctx.test_function(g_name, job.pair, job.seed))
        targets = [(g_name, lambda: sep.a1_connectedness_check(g, C))]
    else:
        targets = [(A.label, lambda A=A: sep.obstacle_avoidance_check(A, C)) for A in job_regions(ctx, job, sep)]
    for label, check in targets:
        try:
            result = check()
        except LabError as exc:
            logger.error(f"obstacle check '{label}' failed: {exc.detail}")
            records.append(job.failure(exc.detail, target=label))
            continue
        outputs = {
            "lhs": result.lhs,
            "rhs": result.rhs,
            "ratio": result.ratio,
            "maximal_x": result.maximal_x,
            "maximal_y": result.maximal_y,
        }
        records.append(job.record(outputs, passed=bool(result.lhs <= result.rhs), tolerances={"C": C},
                                  target=label))
    return records


@router.command("chop")
def chop(ctx: RunContext, job: Job) -> List[Record]:
    """Split each region into bands of equal position thickness and compare ratios."""
    sep = ctx.separating(job.pair, job.param("L"))
    n = int(job.param("n", 4))
    rtol = float(job.param("rtol", ctx.tolerances.sandwich))
    records = []
    for A in job_regions(ctx, job, sep):
        result = sep.chop_region(A, n)
        outputs = {
            "region_ratio": result.region_ratio,
            "band_ratios": list(result.band_ratios),
            "min_band_ratio": result.min_band_ratio,
        }
        passed = result.min_band_ratio <= result.region_ratio * (1 + rtol)
        records.append(job.record(outputs, passed=bool(passed), tolerances={"rtol": rtol}, region=A.label))
    return records
