#!/usr/bin/env python3
"""Two-corner stochastic convergence certificate for a density trajectory.

The averages of a state are certified b.a.u. on the conservative corner and
in measure on the wandering corner; past the burn-in index the glued witness
projections control the cross term by sqrt(eps (eps + ||p xbar p||)).
"""

import argparse
import sys

import numpy as np

from neveukit import FolnerScheme, SemigroupAction, TracialAlgebra, from_kraus, stochastic_run


def damped_qubit(g):
    algebra = TracialAlgebra.full_matrix(2)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - g)]])
    k1 = np.array([[0.0, np.sqrt(g)], [0.0, 0.0]])
    obs = SemigroupAction(
        algebra, "heisenberg", FolnerScheme("zplus-box", d=1), [from_kraus(algebra, [[k0], [k1]])]
    )
    return obs.to_picture("schrodinger")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    action = damped_qubit(args.gamma)
    rng = np.random.default_rng(args.seed)
    x = action.algebra.random_density(rng)

    report = stochastic_run(action, x, eps=args.eps, delta=args.delta, seed=args.seed)
    with np.printoptions(precision=4, suppress=True):
        print("initial density:")
        print(x.block_mats[0])
        print("invariant compression xbar:")
        print(report.xbar.block_mats[0])

    print()
    print(f"burn-in index: {report.burn_in}")
    print("   a   tau(1-r_a)   cross norm   cross bound   counted")
    for row in report.rows:
        mark = "yes" if row["past_burn_in"] else "no"
        print(
            f"{row['a']:4d}   {row['tau_excluded']:-10.6f}   {row['cross_norm']:-10.3e}"
            f"   {row['cross_bound']:-11.3e}   {mark}"
        )
    print(f"verdicts: {report.verdicts}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
