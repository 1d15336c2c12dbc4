"""Success probability of exact graph recovery vs. beta for greedy and l1.

Writes results.csv, trials.csv, metadata.txt and plot.svg per topology under
--out. With --fixed-l1 the l1 baseline is also run at fixed penalty
constants, one extra curve each, next to the held-out pick.

    python scripts/phase_transition.py --topologies chain star --p 16 --trials 10
    python scripts/phase_transition.py --topologies grid4 --p 36 --betas 0.5,1,2,4
"""

import argparse
import time
from pathlib import Path

from greedy_ising.harness import DEFAULT_BETAS, ExperimentConfig, run_sweep
from greedy_ising.svgplot import write_svg


def parse_betas(text):
    return tuple(float(b) for b in text.split(",") if b.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--topologies", nargs="+", default=["chain"],
                    choices=["chain", "grid4", "star"])
    ap.add_argument("--p", type=int, default=16)
    ap.add_argument("--omega", type=float, default=0.5)
    ap.add_argument("--betas", type=parse_betas, default=DEFAULT_BETAS)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--fixed-l1", type=parse_betas, default=(),
                    help="comma-separated fixed l1 constants to add, e.g. 1,2")
    ap.add_argument("--out", default="phase-out")
    args = ap.parse_args()

    for topology in args.topologies:
        out = Path(args.out) / f"{topology}-p{args.p}"
        cfg = ExperimentConfig(topology=topology, p=args.p, omega=args.omega,
                               betas=args.betas, trials=args.trials, seed=args.seed,
                               workers=args.workers, output_dir=str(out))
        t0 = time.time()
        result = run_sweep(cfg, progress=lambda recs: print(".", end="", flush=True))
        print(f"\n{topology} p={args.p} d={cfg.d} ({time.time() - t0:.0f}s)")
        print(result.results_csv(), end="")
        series = result.series()
        for const in args.fixed_l1:
            extra = run_sweep(ExperimentConfig(
                topology=topology, p=args.p, omega=args.omega, betas=args.betas,
                trials=args.trials, seed=args.seed, workers=args.workers,
                methods=("l1",), l1_constant=const,
            ))
            label = f"l1 c'={const:g}"
            series[label] = extra.series()["l1"]
            rows = extra.results_csv().splitlines()[1:]
            print("\n".join(r.replace("l1,", f"{label},", 1) for r in rows))
        if args.fixed_l1:
            write_svg(series, out / "plot.svg", f"{topology}, p={args.p}, d={cfg.d}")
        print(f"outputs in {out}")


if __name__ == "__main__":
    main()
