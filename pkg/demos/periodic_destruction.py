"""Bump the largest gap of a free-chain (3, 2) minimizer and re-minimize from many starts."""
from collections import Counter

from fklab.perturbation import destroy_periodic
from fklab.potentials import fk_nn


def main() -> None:
    rep = destroy_periodic(fk_nn(0), 3, 2, eps=0.01, k=2, n_starts=20, seed=0)
    print("gap", rep.gap.to_dict())
    print("run classes", dict(Counter(r["class"] for r in rep.reminimization)))
    print(f"max tau distance of minimal runs {rep.max_tau_distance:.3e}")
    for pr in rep.probes:
        print(f"probe sites {pr['sites']}: excess {pr['excess']:.4e} vs bound {pr['bound']:.4e}")


if __name__ == "__main__":
    main()
