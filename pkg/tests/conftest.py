import numpy as np


def loglog_slope(xs, ys):
    """Least-squares slope of log ys against log xs (test-side fit)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
