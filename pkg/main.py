# -*- coding: utf-8 -*-
"""
Lévy metastability lab - command line runner

用法:
  python main.py analyze --config configs/double_well_stable.toml
  python main.py exitlaw --config configs/double_well_stable.toml --paths 2000 --workers 8
  python main.py validate --config configs/three_well.toml

退出码: 0 = 全部检验通过, 2 = 统计检验失败, 1 = 错误 / 中断
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from app.config import get_settings
from app.core.errors import LevyLabError
from app.data.config_loader import TomlConfigLoader, violations_of
from app.services.experiment_service import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, ExperimentService
from app.utils.response import error_entry

COMMANDS = ("analyze", "exitlaw", "transitions", "meta", "shorttime", "gauss", "saddle", "tube", "validate")

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Monte Carlo laboratory for Lévy-driven gradient dynamics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="TOML experiment config")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--paths", type=int, default=None, help="override run.n_paths")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--workers", type=int, default=None)
        cmd.add_argument("--quiet", action="store_true", help="no progress banners")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    解析参数并执行实验

    Returns:
        int: 进程退出码
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()

    try:
        loader = TomlConfigLoader(args.config)
        if args.command == "validate":
            violations = violations_of(loader)
            print(json.dumps({"violations": violations}, indent=2, ensure_ascii=False))
            return EXIT_PASS if not violations else EXIT_ERROR

        overrides = {
            "experiment.kind": args.command,
            "run.seed": args.seed,
            "run.n_paths": args.paths,
        }
        config = loader.load(overrides=overrides)
        out_dir = args.out or config.experiment.output or settings.output_root
        service = ExperimentService(config, out_dir, workers=args.workers or settings.workers,
                                    verbose=not args.quiet)
        report = service.run()
    except KeyboardInterrupt:
        print("\n⚠️  Interrupted: partial report flushed")
        return EXIT_ERROR
    except LevyLabError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        print(json.dumps(error_entry(e), indent=2, ensure_ascii=False, default=str))
        return EXIT_ERROR

    if not args.quiet:
        print(f"\n{'='*100}")
        print("📊 TEST SUMMARY")
        print(f"{'='*100}")
        for entry in report["tests"]:
            icon = "✅" if entry["pass"] else "❌"
            print(f"{icon} {entry['test']:<45} statistic={entry['statistic']} p={entry['p_value']} n={entry['n']}")
        print(f"\n📄 Report: {out_dir}/report.json")
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def main():
    load_dotenv()
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
