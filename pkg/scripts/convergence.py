"""Space and time self-convergence studies for several s; writes CSV reports.

    python scripts/convergence.py --out results --kernel fractional
"""
import argparse
import pathlib
import time

from fracfd.kernel import make_kernel
from fracfd.study import spatial_study, temporal_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--kernel", default="fractional",
                    choices=["fractional", "truncated_fractional"])
    ap.add_argument("--s", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ap.add_argument("--m", type=float, default=0.5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truncated = args.kernel == "truncated_fractional"
    for s in args.s:
        k = make_kernel(args.kernel, s, 0.25 if truncated else None)
        t0 = time.perf_counter()
        res = spatial_study(k, args.m, 1e-4, 500, [16, 32, 64, 128],
                            collar_width=0.25 if truncated else 0.0, threads=args.threads)
        (out / f"space_{args.kernel}_s{s}.csv").write_text(res.report.to_csv())
        print(f"s={s} space eoc_h={[round(e, 3) for e in res.eoc()]} "
              f"pairing={[round(r, 3) for r in res.pairing_ratios]} "
              f"apriori={[round(d['ratio'], 3) for d in res.surrogate]} "
              f"({time.perf_counter() - t0:.1f}s)")
        if truncated:
            continue
        t0 = time.perf_counter()
        res = temporal_study(k, args.m, [0.02, 0.01, 0.005, 0.0025], 0.1, 256,
                             threads=args.threads)
        (out / f"time_{args.kernel}_s{s}.csv").write_text(res.report.to_csv())
        print(f"s={s} time eoc_tau={[round(e, 3) for e in res.eoc()]} "
              f"({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
