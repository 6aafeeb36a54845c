"""Poisson ladder toward the original experiment scale, one rung at a time.

Each rung is appended to the CSV as soon as it finishes, so a long run can be
stopped and its partial ladder inspected:

    python3 scripts/full_scale.py --h-min 2^-9 --s 1.0 --out results/full_scale.csv
"""
import argparse
import dataclasses
import logging
from pathlib import Path

from diracfem.harness import (CSV_HEADER, ConvergenceReport, _finish, _fmt, coerce, load_config,
                              poisson_row)

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "full_scale.cfg"))
    ap.add_argument("--h-max")
    ap.add_argument("--h-min")
    ap.add_argument("--s")
    ap.add_argument("--out", default=str(ROOT / "results" / "full_scale.csv"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config)
    over = {k: coerce(k, v) for k, v in
            (("h_max", args.h_max), ("h_min", args.h_min), ("s", args.s)) if v is not None}
    cfg = dataclasses.replace(cfg, **over)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cols = CSV_HEADER.split(",")
    with out.open("w") as fh:
        fh.write(CSV_HEADER + "\n")
        for s in cfg.s:
            rep = ConvergenceReport("poisson", s)
            for h in cfg.h_list:
                row = poisson_row(cfg, s, h)
                rep.rows.append(row)
                fh.write(",".join(row["study"] if c == "study" else _fmt(row.get(c))
                                  for c in cols) + "\n")
                fh.flush()
                logging.info("s=%g h=%g error %.4g", s, h, row["error_h1"])
            _finish(rep)
            pair = ";".join(_fmt(p) for p in rep.pairwise_orders)
            fh.write(f"#order,poisson,{_fmt(s)},{_fmt(rep.fitted_order)},{pair}\n")
            print(f"s={s}: fitted {rep.fitted_order:.3f}, pairwise {rep.pairwise_orders}")


if __name__ == "__main__":
    main()
