"""Write the small synthetic panel used by the CLI examples and tests.

Five series from a stationary VAR(2) with strong own-lag persistence and a
few cross effects. The series are written as levels of exp(0.05 * y) so the
CSV can be read back with the ``log`` transform.
"""
import csv
import sys

import numpy as np

from largevar.simulation import simulate_var

B = np.zeros((2, 5, 5))
np.fill_diagonal(B[0], [0.7, 0.6, 0.5, 0.6, 0.0])
np.fill_diagonal(B[1], [0.1, 0.1, 0.0, -0.1, 0.0])
B[0, 0, 1] = 0.3
B[0, 2, 3] = -0.25
B[1, 1, 2] = 0.2


def main(path="tests/data/synthetic_panel.csv", T=240, seed=20240101):
    rng = np.random.default_rng(seed)
    y = simulate_var(B, T, 1.0, rng)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["output", "prices", "rates", "credit", "noise"])
        for row in np.exp(0.05 * y):
            w.writerow(["%.10g" % v for v in row])


if __name__ == "__main__":
    main(*sys.argv[1:2])
