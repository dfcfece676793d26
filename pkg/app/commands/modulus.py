"""Curve family modulus command."""
import logging
from typing import List

import numpy as np

from app.commands.router import CommandRouter, Job, RunContext
from app.models.domain import DiscretePencil
from app.models.schemas import Record
from app.services.errors import LabError
from app.services.modulus_service import ModulusService
from app.services.riesz_service import RieszService

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("modulus")
def modulus(ctx: RunContext, job: Job) -> List[Record]:
    """Modulus of the first k L-quasigeodesics, admissibility of rho* and pencil duality."""
    x, y = job.pair
    L = job.param("L")
    ks = job.param("k")
    ks = sorted(ks) if isinstance(ks, list) else [ks]
    riesz = RieszService.riesz_measure(ctx.space, x, y, L)
    rng = np.random.default_rng(job.seed)
    tol = ctx.tolerances

    records, values = [], []
    for k in ks:
        try:
            family = ModulusService.enumerate_quasigeodesics(ctx.space, x, y, L, k)
            value, density = ModulusService.modulus(family, riesz)
        except LabError as exc:
            logger.error(f"modulus k={k} failed: {exc.detail}")
            records.append(job.failure(exc.detail, k=k))
            continue
        residual = ModulusService.admissibility_residual(family, density)
        outputs = {
            "modulus": value,
            "family_size": len(family.paths),
            "admissibility_residual": residual,
        }
        passed = residual >= -tol.admissibility
        if not family.is_empty:
            suite = [rng.random(len(density.edges)) for _ in range(int(job.param("samples", 20)))]
            duality = ModulusService.pencil_modulus_duality_check(
                DiscretePencil.from_family(family), family, riesz, suite, tol=tol.duality
            )
            outputs.update({
                "pencil_constant": duality.pencil_constant,
                "duality_margin": duality.margin,
                "duality_skipped": duality.skipped,
            })
            passed = passed and duality.passed
        if job.param("dump_family", False):
            outputs["paths"] = [list(p) for p in family.paths]
            outputs["density"] = [[a, b, float(v)] for (a, b), v in zip(density.edges, density.values)]
        records.append(job.record(outputs, passed=bool(passed),
                                  tolerances={"admissibility": tol.admissibility, "duality": tol.duality}, k=k))
        values.append(value)

    if len(values) > 1:
        # a larger family can only raise the modulus
        monotone = all(b >= a * (1 - 1e-12) for a, b in zip(values, values[1:]))
        records.append(job.record({"values": values, "monotone": monotone}, passed=monotone,
                                  k=ks, summary="family-monotonicity"))
    return records
