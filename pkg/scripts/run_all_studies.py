"""Run every study from configs/ and write CSVs plus an order summary.

    python3 scripts/run_all_studies.py [--out results] [--only poisson saddle]
"""
import argparse
import dataclasses
import logging
import time
from pathlib import Path

from diracfem.harness import check_reports, load_config, reports_to_csv, run_study

ROOT = Path(__file__).resolve().parent.parent
ORDER = ["oned", "lemma1", "trace", "saddle", "poisson"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--only", nargs="*", choices=ORDER, default=ORDER)
    ap.add_argument("--no-timing", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for study in args.only:
        cfg = load_config(ROOT / "configs" / f"{study}.cfg")
        if args.no_timing:
            cfg = dataclasses.replace(cfg, timing=False)
        t0 = time.perf_counter()
        reports = run_study(cfg)
        (out / f"{study}.csv").write_text(reports_to_csv(reports))
        print(f"{study}: {time.perf_counter() - t0:.1f} s")
        for rep in reports:
            pair = ", ".join(f"{p:.3f}" for p in rep.pairwise_orders)
            label = "" if rep.s is None else f" s={rep.s}"
            print(f"  {study}{label}: fitted {rep.fitted_order:.3f}  pairwise [{pair}]")
        for msg in check_reports(cfg, reports):
            print(f"  threshold miss: {msg}")


if __name__ == "__main__":
    main()
