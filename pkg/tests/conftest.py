import numpy as np
import pytest


def pava(y, w=None):
    """Weighted pool-adjacent-violators fit of a nondecreasing sequence."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            wt = wts[-2] + wts[-1]
            v = (wts[-2] * vals[-2] + wts[-1] * vals[-1]) / wt
            sz = sizes[-2] + sizes[-1]
            del vals[-1], wts[-1], sizes[-1]
            vals[-1], wts[-1], sizes[-1] = v, wt, sz
    return np.repeat(vals, sizes)


def pava_with_ties(x, y):
    """Isotonic fit in `x` where tied `x` share one fitted value."""
    levels, inv = np.unique(x, return_inverse=True)
    sums = np.bincount(inv, weights=y)
    counts = np.bincount(inv)
    fit_levels = pava(sums / counts, counts)
    return fit_levels[inv]


def divided_differences(x, f):
    order = np.argsort(x, kind="stable")
    xs, fs = x[order], f[order]
    keep = np.concatenate([[True], np.diff(xs) > 0])
    xs, fs = xs[keep], fs[keep]
    d1 = np.diff(fs) / np.diff(xs)
    d2 = np.diff(d1) / (0.5 * (xs[2:] - xs[:-2]))
    return xs, fs, d1, d2


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
