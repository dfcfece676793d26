"""Capacity graph commands: min-cut and pencil."""
import logging
from typing import List

import numpy as np

from app.commands.router import CommandRouter, Job, RunContext
from app.models.schemas import Record
from app.services.errors import LabError
from app.services.flow_service import FlowService
from app.services.riesz_service import RieszService, safe_ratio
from app.storage import plots
from app.storage.pointcloud_io import write_net_graph

logger = logging.getLogger(__name__)

router = CommandRouter()


def _refinement(job: Job, name: str, deltas: List[float], values: List[float], factor: float) -> Record:
    """Spread max/min of a quantity across δ-refinement."""
    low, high = min(values), max(values)
    spread = safe_ratio(high, low)
    outputs = {name: values, "spread": spread}
    return job.record(outputs, passed=bool(spread <= factor), tolerances={"refinement_factor": factor},
                      delta=deltas, summary="refinement")


@router.command("mincut")
def mincut(ctx: RunContext, job: Job) -> List[Record]:
    """Minimum cut per δ; flow value must match and values must be stable under refinement."""
    x, y = job.pair
    L, algorithm = job.param("L"), job.param("algorithm")
    tol = ctx.tolerances.flow_cut
    records, deltas, values = [], [], []
    for delta in job.param("delta"):
        try:
            net = FlowService.build_net_graph(ctx.space, x, y, delta, L)
            cut = FlowService.min_cut(net, algorithm)
            flow = FlowService.max_flow(net, algorithm)
        except LabError as exc:
            logger.error(f"mincut δ={delta:g} failed: {exc.detail}")
            records.append(job.failure(exc.detail, delta=delta))
            continue
        gap = abs(flow.value - cut.value)
        outputs = {
            "value": cut.value,
            "flow_value": flow.value,
            "net_vertices": int(net.vertices.size),
            "net_edges": net.n_edges,
            "source_side": len(cut.side),
            "scale_flagged": net.scale_flagged,
        }
        if job.param("dump_net", False) and ctx.out_dir is not None:
            write_net_graph(ctx.space, net, ctx.out_dir / "nets" / f"net-{x}-{y}-d{delta:g}.txt")
        path = ctx.plot_path(f"cut-{x}-{y}-d{delta:g}")
        if path is not None:
            plots.cut_plot(ctx.space, net, cut.side, path, title=f"min cut δ={delta:g}: {cut.value:.4g}")
        records.append(job.record(outputs, passed=bool(gap <= tol * max(1.0, cut.value)),
                                  tolerances={"flow_cut": tol}, delta=delta))
        deltas.append(delta)
        values.append(cut.value)
    if len(values) > 1:
        records.append(_refinement(job, "values", deltas, values, ctx.tolerances.refinement_factor))
    return records


@router.command("pencil")
def pencil(ctx: RunContext, job: Job) -> List[Record]:
    """Path stripping per δ and the sampled pencil constant sup_g of the pencil ratio."""
    x, y = job.pair
    L, algorithm = job.param("L"), job.param("algorithm")
    riesz = RieszService.riesz_measure(ctx.space, x, y, L)
    rng = np.random.default_rng(job.seed)
    samples = [np.ones(ctx.space.n)] + [rng.random(ctx.space.n) for _ in range(int(job.param("samples", 20)))]

    records, deltas, constants = [], [], []
    for delta in job.param("delta"):
        try:
            net = FlowService.build_net_graph(ctx.space, x, y, delta, L)
            flow = FlowService.max_flow(net, algorithm)
            result = FlowService.flow_to_pencil(flow, net)
        except LabError as exc:
            logger.error(f"pencil δ={delta:g} failed: {exc.detail}")
            records.append(job.failure(exc.detail, delta=delta))
            continue
        loads = FlowService.edge_loads(result)
        arcs = set(loads) | set(flow.arcs)
        mismatch = max(abs(loads.get(a, 0.0) - flow.arcs.get(a, 0.0)) for a in arcs)
        ratios = [FlowService.pencil_inequality_ratio(result, net, ctx.space, g, riesz) for g in samples]
        c1 = max(ratios)
        outputs = {
            "flow_value": flow.value,
            "paths": len(result.paths),
            "stripping_mismatch": mismatch,
            "c1_estimate": c1,
            "cut_over_c1": safe_ratio(flow.value, c1),
        }
        exact = mismatch <= ctx.tolerances.flow_cut * max(1.0, flow.value)
        records.append(job.record(outputs, passed=bool(exact), tolerances={"flow_cut": ctx.tolerances.flow_cut},
                                  delta=delta))
        deltas.append(delta)
        constants.append(c1)
    if len(constants) > 1:
        records.append(_refinement(job, "c1_estimates", deltas, constants, ctx.tolerances.refinement_factor))
    return records
