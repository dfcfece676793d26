"""Command-line entry point: ``python -m app.main --config <file> --out <dir>``."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from app.config import settings
from app.models.schemas import ExperimentConfig
from app.services.errors import LabError
from app.services.experiment_service import ExperimentService
from app.storage.report_io import export

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pi-lab",
        description=f"{settings.APP_NAME} - Poincaré inequality experiments on point clouds",
    )
    parser.add_argument("--config", required=True, type=Path, help="experiment configuration (JSON)")
    parser.add_argument("--out", type=Path, default=None, help=f"output directory (default: {settings.OUTPUT_DIR})")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads")
    parser.add_argument("--only", default=None, help="comma-separated subset of commands")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level")
    return parser


def load_config(path: Path, seed: Optional[int] = None) -> ExperimentConfig:
    try:
        config = ExperimentConfig.model_validate_json(path.read_text())
    except OSError as exc:
        raise LabError(f"cannot read config '{path}': {exc}") from None
    except ValidationError as exc:
        raise LabError(f"invalid config '{path}':\n{exc}") from None
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, args.seed)
        out_dir = args.out or Path(config.output_dir or settings.OUTPUT_DIR)
        only = [name.strip() for name in args.only.split(",") if name.strip()] if args.only else None
        service = ExperimentService(config, base_dir=args.config.resolve().parent)
        report = service.run(only=only, jobs=args.jobs, out_dir=out_dir)
        export(report, "structured-object", out_dir / "report.json")
        export(report, "tabular-text", out_dir / "report.tsv")
        if config.plots and settings.PLOTS_ENABLED:
            export(report, "vector-plot", out_dir / "report.svg")
    except LabError as exc:
        logger.error(exc.detail)
        return 2

    failed = [r for r in report.records if r.failed]
    for record in failed:
        logger.warning(f"FAILED {record.command} pair={record.pair}: {record.error or record.outputs}")
    logger.info(f"{len(report.records) - len(failed)}/{len(report.records)} records ok")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
