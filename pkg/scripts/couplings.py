"""Recompute the first six real magic and Dirac couplings and the angle ratio.

    python scripts/couplings.py --trunc 20 --out results/couplings.csv
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from tmgspec.operators import ModelConfig
from tmgspec.spectra import birman_schwinger_set, dirac_set


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trunc", type=int, default=20)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--theta-a", type=float, default=1.1)
    p.add_argument("--out", type=Path, default=None)
    args = p.parse_args(argv)

    t0 = time.perf_counter()
    A = birman_schwinger_set(ModelConfig(n=1, N=args.trunc), "A", with_deltas=True)
    B = dirac_set(ModelConfig(n=args.n, N=args.trunc), with_deltas=True, magic=A)
    a, b = A.first_positive_real(6), B.first_positive_real(6)
    rows = [(i + 1, a.values[i].real, a.deltas[i], b.values[i].real, b.deltas[i]) for i in range(min(len(a), len(b)))]

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["j", "alpha", "alpha_delta", "beta", "beta_delta"])
    for r in rows:
        w.writerow([r[0]] + [repr(float(x)) for x in r[1:]])
    if args.out:
        out.close()
    ratio = rows[0][1] / rows[0][3]
    print(f"alpha_1/beta_1 = {ratio:.5f}; theta_B = {args.theta_a * ratio:.3f} deg "
          f"for theta_A = {args.theta_a} deg ({time.perf_counter() - t0:.1f}s)", file=sys.stderr)


if __name__ == "__main__":
    main()
