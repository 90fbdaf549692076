import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from src.version import __version__, __update_date__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="MQC cluster growth and localization simulator",
    )
    parser.add_argument("command", choices=["growth", "localize", "equilibrium", "fit", "all", "version"])
    parser.add_argument("--config", help="YAML config (default: $MQC_CONFIG or config/experiment.yaml)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="coupling seed (unsigned 64-bit)")
    parser.add_argument("--backend", choices=["eigen", "trotter"])
    parser.add_argument("--spins", type=int, help="number of spins N")
    parser.add_argument("--log-level", default=None,
                        help="DEBUG, INFO, WARNING or ERROR (default: $MQC_LOG_LEVEL or INFO)")
    return parser


def main(argv=None) -> int:
    # Load environment variables
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = (args.log_level or os.getenv("MQC_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(message)s")

    logging.info("=" * 60)
    logging.info(f"MQC Localization Simulator - Version {__version__}")
    logging.info(f"Last Updated: {__update_date__}")
    logging.info("=" * 60)

    if args.command == "version":
        from src.version import get_version_info
        print(get_version_info())
        return 0

    # 設定読み込みで失敗しても分類済みの終了コードを返す
    from src.utils.errors import SimulationError

    try:
        from src.experiments.orchestrator import Command, Orchestrator
        from src.utils.config_loader import apply_overrides, load_config

        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, backend=args.backend,
                              n_spins=args.spins, output_dir=args.out)
        Orchestrator(cfg).route(Command(args.command))
    except SimulationError as e:
        logging.error(f"[ERROR:{e.category}] {e}")
        return e.exit_code
    except Exception as e:
        logging.error(f"[ERROR:unexpected] {e}", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
