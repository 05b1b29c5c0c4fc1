"""Band tables and coupling sets behind the three figures, written as CSV.

    python scripts/figures.py --out results/ --trunc 16

* cones_n2.csv, cones_n3.csv: bands at the first Dirac coupling (n = 2, 3)
* tangential_n2.csv: bands at alpha = 1 (order-n crossing)
* flat_n2.csv: bands at the first magic coupling
* coupling_sets.csv: complex members of A and B with |alpha| <= 10
"""
import argparse
import csv
import logging
from pathlib import Path

from tmgspec.bands import KPath, band_path
from tmgspec.operators import ModelConfig
from tmgspec.spectra import birman_schwinger_set, dirac_set

log = logging.getLogger("figures")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--trunc", type=int, default=16)
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--path", default="K,Gamma,M,K'")
    p.add_argument("--svg", action="store_true", help="also write SVG polylines")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)

    N = args.trunc
    A = birman_schwinger_set(ModelConfig(n=1, N=N), "A", residuals=False)
    B = dirac_set(ModelConfig(n=2, N=N), magic=A)
    alpha1, beta1 = float(A.positive_real(1)[0]), float(B.positive_real(1)[0])
    path = KPath.parse(args.path, args.samples)

    jobs = {
        "cones_n2": ModelConfig(n=2, alpha=beta1, N=N),
        "cones_n3": ModelConfig(n=3, alpha=beta1, N=N),
        "tangential_n2": ModelConfig(n=2, alpha=1.0, N=N),
        "flat_n2": ModelConfig(n=2, alpha=alpha1, N=N),
    }
    for name, cfg in jobs.items():
        table = band_path(cfg, path, 3)
        (args.out / f"{name}.csv").write_text(table.to_csv(), newline="\n")
        if args.svg:
            (args.out / f"{name}.svg").write_text(table.to_svg())
        log.info("%s: alpha=%.6f, max E1=%.3e", name, cfg.alpha.real, table.E[:, 0].max())

    with open(args.out / "coupling_sets.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set", "re", "im"])
        for label, S in (("A", A), ("B", B)):
            for v in S.values:
                if abs(v) <= 10:
                    w.writerow([label, repr(float(v.real)), repr(float(v.imag))])


if __name__ == "__main__":
    main()
