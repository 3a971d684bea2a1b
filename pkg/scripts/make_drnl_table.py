"""Write the per-channel DRNL parameter table shipped with the package.

Each parameter p follows p = 10 ** (p0 + p1 * log10(fc)) with the
coefficients of the Lopez-Poveda & Meddis (2001) human DRNL fits as used
in CASP (Jepsen et al. 2008; Paulick et al. 2024).  The broken-stick gains
a and b are held at their 1500 Hz values above 1500 Hz; c is 10**-0.60206.

    python scripts/make_drnl_table.py src/nrhlc/auditory/data/drnl_params.csv
"""
import csv
import sys

import numpy as np

from nrhlc.dsp import erb_space

FITS = {
    "cf_lin": (-0.06762, 1.01679),
    "bw_lin": (0.03728, 0.75),
    "g_lin": (4.20405, -0.47909),
    "lp_lin": (-0.06762, 1.01679),
    "cf_nlin": (-0.05252, 1.01650),
    "bw_nlin": (-0.03193, 0.77),
    "lp_nlin": (-0.05252, 1.01650),
    "a": (1.40298, 0.81916),
    "b": (1.61912, -0.81867),
}
FROZEN_ABOVE = {"a": 1500.0, "b": 1500.0}
C_EXPONENT = 10 ** -0.60206
CASCADES = {"n_gt_lin": 2, "n_lp_lin": 4, "n_gt_nlin_before": 2, "n_gt_nlin_after": 2, "n_lp_nlin": 1}
SOURCE = "Lopez-Poveda & Meddis 2001 fits; CASP cascade counts (Paulick et al. 2024)"


def rows(n_channels=31, f_lo=80.0, f_hi=7643.0):
    for fc in erb_space(f_lo, f_hi, n_channels):
        row = {"fc": fc}
        for name, (p0, p1) in FITS.items():
            f = min(fc, FROZEN_ABOVE.get(name, np.inf))
            row[name] = 10 ** (p0 + p1 * np.log10(f))
        row["c"] = C_EXPONENT
        row.update(CASCADES)
        row["source"] = SOURCE
        yield row


def main(path):
    fields = ["fc", "cf_lin", "bw_lin", "g_lin", "lp_lin", "n_gt_lin", "n_lp_lin",
              "cf_nlin", "bw_nlin", "lp_nlin", "n_gt_nlin_before", "n_gt_nlin_after",
              "n_lp_nlin", "a", "b", "c", "source"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows():
            writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                             for k, v in row.items()})


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "drnl_params.csv")
