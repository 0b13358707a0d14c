"""Observed convergence orders of eta and the error under uniform refinement.

For the arctan source with beta = 1 both quantities should decay like h^(k+1).
"""
import sys

import numpy as np

from advest.experiments import convergence_block


def orders(values, sizes):
    v, n = np.asarray(values), np.asarray(sizes, dtype=float)
    return np.log(v[:-1] / v[1:]) / np.log(n[1:] / n[:-1])


def main(method: str = "dg") -> None:
    for k in range(0 if method != "dg" else 1, 4):
        blk = convergence_block(method, k, [4, 8, 16, 32, 64])
        cases = [row[0] for row in blk.cases]
        n = [c.mesh.n_elements for c in cases]
        eta = orders([c.report.eta for c in cases], n)
        err = orders([c.report.error for c in cases], n)
        print(f"{method} k={k}: eta orders {np.round(eta, 2)}, error orders {np.round(err, 2)}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
