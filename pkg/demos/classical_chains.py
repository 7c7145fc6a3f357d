#!/usr/bin/env python3
"""Conservative/dissipative splittings of classical Markov kernels.

A substochastic kernel on a finite state space decomposes the space into
recurrent states (supporting stationary distributions) and states whose
mass eventually leaks away.  On the diagonal algebra the Neveu projection
e1 is exactly the indicator of the recurrent states.
"""

import numpy as np

from neveukit import FolnerScheme, SemigroupAction, TracialAlgebra, from_classical, neveu_decompose

KERNELS = {
    "absorbing pair": np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.3, 0.2, 0.5, 0.0],
            [0.0, 0.0, 0.4, 0.6],
            [0.0, 0.0, 0.6, 0.4],
        ]
    ),
    "leaky cycle": np.array(
        [
            [0.0, 0.9, 0.0, 0.0],
            [0.0, 0.0, 0.9, 0.0],
            [0.0, 0.0, 0.0, 0.9],
            [0.9, 0.0, 0.0, 0.0],
        ]
    ),
    "permutation": np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    ),
}


def split(kernel):
    n = kernel.shape[0]
    algebra = TracialAlgebra.commutative([1.0 / n] * n)
    action = SemigroupAction(
        algebra, "heisenberg", FolnerScheme("zplus-box", d=1), [from_classical(algebra, kernel)]
    )
    dec = neveu_decompose(action)
    conservative = [i for i, m in enumerate(dec.e1.block_mats) if m[0, 0].real > 0.5]
    return dec, conservative


def main():
    for name, kernel in KERNELS.items():
        dec, conservative = split(kernel)
        row_sums = kernel.sum(axis=1)
        print(f"{name}:")
        print(f"  row sums         {np.round(row_sums, 3)}")
        print(f"  conservative     {conservative or 'none'}")
        if dec.invariant_density is not None:
            pi = np.array([m[0, 0].real for m in dec.invariant_density.block_mats])
            pi = pi / pi.sum()
            print(f"  stationary law   {np.round(pi, 4)}")
        else:
            print("  stationary law   none (all mass leaks)")
        tail = dec.decay[-1] if dec.decay else None
        if tail is not None:
            print(f"  ||A_a(e2)|| at a={tail[0]}: {tail[1]:.2e}")
        print(f"  verdicts         {dec.verdicts}")
        print()


if __name__ == "__main__":
    main()
