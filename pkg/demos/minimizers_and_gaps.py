"""Periodic minimizers of the standard chain, their ordering and their orbit gaps."""
from fklab.birkhoff import extended_orbit, find_gaps, translate_U
from fklab.lattice import is_birkhoff, l1_period
from fklab.minimize import minimizer_set
from fklab.potentials import fk_nn


def main() -> None:
    for lam in (0.5, 1.0, 1.5):
        ms = minimizer_set(fk_nn(lam), 8, 5, n_starts=8, seed=0)
        x = min(ms.members, key=lambda m: m.action).config
        gaps = find_gaps(extended_orbit(x))
        print(f"lambda={lam}: action {_actions(ms)}, birkhoff {is_birkhoff(x)[0]}, "
              f"|Ux - x| = {l1_period(translate_U(8, 5, x), x):.12f}, "
              f"largest gap {float(gaps[0].length):.6f} (1/p = {1 / 8:.6f})")


def _actions(ms) -> str:
    return ", ".join(f"{m.action:.8f}" for m in ms.members)


if __name__ == "__main__":
    main()
