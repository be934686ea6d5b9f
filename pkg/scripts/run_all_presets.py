"""Run every preset through the CLI and print the worst violation of each check."""

import argparse
import json
import time
from pathlib import Path

from gdaflow import cli


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--output-dir", default="gdaflow-out", help="parent directory for the runs")
    args = p.parse_args()
    for name, _ in cli.list_scenarios():
        out = Path(args.output_dir) / name
        start = time.perf_counter()
        cfg = cli.load_config(name)
        runner = cli.run_refinement_ladder if cfg.ladder else cli.run_experiment
        code = runner(cfg, str(out), quiet=True)
        elapsed = time.perf_counter() - start
        report = json.loads((out / "report.json").read_text())
        viol = report.get("violations", {})
        worst = ", ".join(f"{k}={v:.2e}" for k, v in sorted(viol.items()) if isinstance(v, float))
        extra = f"fitted slope {report['fitted_slope']:.3f}" if "fitted_slope" in report else worst
        print(f"{name:30s} exit={code} {elapsed:6.2f}s  {extra}")


if __name__ == "__main__":
    main()
