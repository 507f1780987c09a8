"""Fitted versus predicted short-time decay exponents for every scenario.

For each scenario model and each block ``W_j`` of its filtration, a cat
coherence with ``Omega dz`` along the block is evolved, and the fitted
``(slope, coefficient)`` of ``-2 hbar ln`` of its coherence factor is
compared against ``(2j+1, d_j)``.

    python scripts/exponent_table.py [--window 1e-3,1e-2] [--csv table.csv]
"""

import argparse
import csv
import sys

import numpy as np

from gaussian_decoherence import decoherence as dc
from gaussian_decoherence import model as mdl
from gaussian_decoherence.hormander import filtration

SCENARIOS = {
    "free_particle": mdl.scenario_free_particle(),
    "quadratic_potential": mdl.scenario_quadratic_potential(),
    "damped_oscillator": mdl.scenario_damped_oscillator(),
    "pq": mdl.scenario_pq(),
    "chain3_end": mdl.scenario_chain([1, 1, 1], mdl.nearest_neighbour(3, 1.0), 1),
    "chain3_middle": mdl.scenario_chain([1, 1, 1], mdl.nearest_neighbour(3, 1.0), 2),
    "chain4_site2": mdl.scenario_chain([1, 1, 1, 1], mdl.nearest_neighbour(4, 1.0), 2),
}


def rows(window):
    grid = np.geomspace(window[0], window[1], 24)
    for name, m in SCENARIOS.items():
        f = filtration(m)
        blocks = [(j, B[:, 0]) for j, B in enumerate(f.W_blocks)]
        if f.W_DF.shape[1]:
            blocks.append(("DF", f.W_DF[:, 0]))
        for j, xi in blocks:
            dz = m.omega.T @ xi
            cat = mdl.CatCoherence(0.5 * dz, -0.5 * dz)
            pred = dc.predict(m, f, cat)
            fit = dc.fit_exponent(dc.decay_series(m, cat, grid), window)
            yield [name, j, "" if j == "DF" else 2 * j + 1, pred.d, fit.slope, fit.coefficient, fit.df_consistent]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--window", default="1e-3,1e-2")
    ap.add_argument("--csv", help="also write the table to this CSV file")
    args = ap.parse_args()
    window = tuple(float(x) for x in args.window.split(","))
    header = ["scenario", "j", "power", "d_j", "fit_slope", "fit_coeff", "df_consistent"]
    table = list(rows(window))
    print(f"{'scenario':<20}{'j':>4}{'2j+1':>6}{'d_j':>14}{'slope':>12}{'coeff':>14}  DF")
    for r in table:
        print(f"{r[0]:<20}{r[1]!s:>4}{r[2]!s:>6}{r[3]:>14.6g}{r[4]:>12.5f}{r[5]:>14.6g}  {r[6]}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(table)
    return 0


if __name__ == "__main__":
    sys.exit(main())
