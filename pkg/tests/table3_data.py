"""Two-scene 3x3 reflectance stack (units of 1e-3) with its acquisition geometry."""

import numpy as np

BANDS = (443.0, 483.0, 561.0, 655.0)
SCENE_IDS = ("LC81150752018058", "LC81150752019253")
SUN_ELEVATION = (55.22, 50.68)

_ROWS = """
7.9768 9.6534 6.8729 1.7796 8.5987 9.9610 6.3355 1.6588
8.0830 9.8336 6.9159 1.9415 8.7791 9.9258 6.3835 1.6932
8.3104 9.9590 7.2173 2.1246 8.7831 9.9830 6.4267 1.6760
7.9996 9.7127 6.8662 1.7158 8.5305 10.0314 6.3499 1.7493
8.2061 9.8861 6.9027 1.8989 8.7230 9.9698 6.3835 1.7407
8.4108 10.0069 7.2339 2.0778 8.8393 10.0094 6.4747 1.6976
8.2990 9.9567 7.1643 1.9415 8.7070 10.0666 6.5420 1.8614
8.4620 10.1141 7.1974 2.1246 8.6949 10.0314 6.5612 1.8010
8.4260 10.0639 7.2140 2.0906 8.7992 10.0182 6.5660 1.7407
"""


def spectra():
    """(N_s=2, N_r=9, 4) surface reflectance, row-major 3x3 neighbourhood."""
    v = np.array([[float(t) for t in line.split()] for line in _ROWS.strip().splitlines()]) * 1e-3
    return np.ascontiguousarray(np.stack([v[:, :4], v[:, 4:]]))
