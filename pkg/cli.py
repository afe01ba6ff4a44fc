import argparse
import logging
import sys
from typing import Dict, List, Optional, Type

from constants import SOLVER_FAILURE_LIMIT, Command, FutureStrategy
from errors import SweepError, WifiDtError
from experiments.base_experiment import BaseExperiment
from experiments.curves import CurvesExperiment
from experiments.oracle import OracleExperiment
from experiments.spatial import SpatialExperiment
from experiments.spec import ExperimentSpec
from experiments.tc1 import Tc1Experiment
from experiments.traffic import TrafficExperiment
from logging_config import configure_logging

logger = logging.getLogger(name=__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SOLVER = 2

EXPERIMENTS: Dict[Command, Type[BaseExperiment]] = {
    Command.CURVES: CurvesExperiment,
    Command.SPATIAL: SpatialExperiment,
    Command.TRAFFIC: TrafficExperiment,
    Command.TC1: Tc1Experiment,
    Command.ORACLE: OracleExperiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wifi-dt", description="Wi-Fi digital twin experiments")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument(
        "--debug-logger",
        action="append",
        default=[],
        metavar="NAME",
        help="logger to run at DEBUG regardless of --log-level, e.g. mac.markov",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for command in Command:
        sub = commands.add_parser(str(command))
        sub.add_argument("--config", help="declarative config, absolute or relative to data/")
        sub.add_argument("--phy", help="PHY profile yaml")
        sub.add_argument("--edca", help="EDCA parameter yaml")
        sub.add_argument("--output", help="artifact root, defaults to $WIFI_DT_OUTPUT or output/")
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--threshold", type=float)
        sub.add_argument("--prediction-period", dest="prediction_period_minutes", type=int)
        sub.add_argument("--horizon", dest="horizon_minutes", type=int)
        sub.add_argument("--futures", type=int)
        sub.add_argument("--tilt", type=float)
        sub.add_argument("--strategy", choices=FutureStrategy.values())
        sub.add_argument("--weeks", type=int)
    return parser


def run(args: argparse.Namespace) -> int:
    spec = ExperimentSpec.build(
        Command(args.command),
        config=args.config,
        phy=args.phy,
        edca=args.edca,
        output=args.output,
        seed=args.seed,
        overrides={
            "threshold": args.threshold,
            "prediction_period_minutes": args.prediction_period_minutes,
            "horizon_minutes": args.horizon_minutes,
            "futures": args.futures,
            "tilt": args.tilt,
            "strategy": args.strategy,
            "weeks": args.weeks,
        },
    )
    experiment = EXPERIMENTS[spec.command](spec)
    artifacts = experiment.run()
    logger.info(f"{spec.command} wrote {len(artifacts)} artifacts to {spec.output_dir}")
    if experiment.failure_rate > SOLVER_FAILURE_LIMIT:
        logger.error(f"{experiment.failure_rate:.0%} of solver points did not converge")
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level, module_levels={name: "DEBUG" for name in args.debug_logger})
    try:
        return run(args)
    except SweepError as e:
        logger.error(f"Load sweep failed: {e}")
        return EXIT_SOLVER
    except WifiDtError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
