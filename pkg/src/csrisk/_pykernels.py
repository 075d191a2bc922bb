"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def lower_hull_indices(x, y):
    x = np.asarray(x, dtype=float).tolist()
    y = np.asarray(y, dtype=float).tolist()
    h = []
    for i in range(len(x)):
        xi, yi = x[i], y[i]
        while len(h) >= 2:
            o, a = h[-2], h[-1]
            if (x[a] - x[o]) * (yi - y[o]) - (y[a] - y[o]) * (xi - x[o]) <= 0.0:
                h.pop()
            else:
                break
        h.append(i)
    return np.array(h, dtype=np.intp)


def pava(y, w):
    levels, weights, sizes = [], [], []
    for yi, wi in zip(np.asarray(y, dtype=float).tolist(), np.asarray(w, dtype=float).tolist()):
        levels.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(levels) >= 2 and levels[-2] > levels[-1]:
            ww = weights[-2] + weights[-1]
            levels[-2] = (weights[-2] * levels[-2] + weights[-1] * levels[-1]) / ww
            weights[-2] = ww
            sizes[-2] += sizes[-1]
            del levels[-1], weights[-1], sizes[-1]
    return np.repeat(np.array(levels, dtype=float), sizes)
