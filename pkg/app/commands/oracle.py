"""Euclidean oracle validation command."""
import logging
from itertools import combinations
from typing import List

import numpy as np

from app.commands.router import CommandRouter, Job, RunContext
from app.models.domain import EuclideanConfig
from app.models.schemas import Record
from app.services.oracle_service import OracleService

logger = logging.getLogger(__name__)

router = CommandRouter()


def _sphere_energy_records(ctx: RunContext, job: Job, dims) -> List[Record]:
    tol = ctx.tolerances
    records = []
    for d in dims:
        values = []
        for r in job.param("sphere_radii", [0.5, 1.0, 2.0]):
            result = OracleService.sphere_energy(d, r)
            values.append(result.value)
            passed = abs(result.value - d) <= tol.sphere_energy * d
            records.append(job.record({"value": result.value, "nodes": result.nodes, "expected": d},
                                      passed=bool(passed), tolerances={"sphere_energy": tol.sphere_energy},
                                      check="sphere-energy", d=d, r=r))
        spread = max((abs(a - b) / max(abs(a), abs(b)) for a, b in combinations(values, 2)), default=0.0)
        records.append(job.record({"max_pairwise": spread}, passed=bool(spread <= tol.sphere_energy_pairwise),
                                  tolerances={"pairwise": tol.sphere_energy_pairwise},
                                  check="sphere-energy-scale", d=d))
    return records


def _gradient_records(ctx: RunContext, job: Job, dims) -> List[Record]:
    rng = np.random.default_rng(job.seed)
    step = float(job.param("step", 1e-4))
    records = []
    for d in dims:
        errors = []
        for _ in range(int(job.param("configs", 100))):
            x = rng.uniform(-1.0, 1.0, d)
            direction = rng.standard_normal(d)
            z = x + rng.uniform(0.5, 2.0) * direction / np.linalg.norm(direction)
            errors.append(OracleService.gradient_identity_check(d, x, z, step).rel_error)
        worst = max(errors)
        records.append(job.record({"max_rel_error": worst, "configs": len(errors)},
                                  passed=bool(worst <= ctx.tolerances.gradient),
                                  tolerances={"gradient": ctx.tolerances.gradient},
                                  check="gradient-identity", d=d, step=step))
    return records


def _separator_records(ctx: RunContext, job: Job, dims) -> List[Record]:
    records = []
    Ls = sorted(job.param("Ls", [1.0, 2.0, 4.0, 8.0]))
    for d in dims:
        x = tuple([0.0] * d)
        y = tuple([1.0] + [0.0] * (d - 1))
        c0 = OracleService.sphere_energy(d, 1.0).value
        deltas = []
        for L in Ls:
            config = EuclideanConfig(d=d, x=x, y=y, L=L)
            delta = OracleService.delta_L(config).value
            energy = OracleService.halfspace_separator_energy(config)
            deltas.append(delta)
            # chain: energy >= c0 - delta_L, and >= c0/2 once delta_L < c0/2
            passed = energy >= (c0 - delta) * (1 - 1e-8)
            if delta < c0 / 2:
                passed = passed and energy >= c0 / 2
            records.append(job.record({"energy": energy, "delta_L": delta, "c0": c0}, passed=bool(passed),
                                      check="halfspace-chain", d=d, L=L))
        monotone = all(b <= a * (1 + 1e-8) for a, b in zip(deltas, deltas[1:]))
        records.append(job.record({"delta_L": deltas}, passed=monotone, check="delta-L-monotone", d=d, Ls=Ls))
    return records


@router.command("euclid-validate", per_pair=False)
def euclid_validate(ctx: RunContext, job: Job) -> List[Record]:
    """Sphere energy, gradient identity and the bisector energy chain against closed forms."""
    dims = job.param("dims", [2, 3])
    return (
        _sphere_energy_records(ctx, job, dims)
        + _gradient_records(ctx, job, dims)
        + _separator_records(ctx, job, dims)
    )
