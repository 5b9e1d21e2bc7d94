"""Pure numpy versions of the kernels in ``_core.pyx``.

Same signatures and conventions: 2-D input arrays, a 1-D grid passed as shape
``(1, N)`` with ``dim=1``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d


def _extent(s, dim):
    return (s if dim == 2 else 1, s)


def _windows(v, s, dim, torus):
    e = _extent(s, dim)
    if torus:
        pad = [(0, e[0] - 1), (0, e[1] - 1)]
        p = np.pad(v, pad, mode="wrap")
    else:
        p = np.pad(v, [(e[0] - 1, e[0] - 1), (e[1] - 1, e[1] - 1)])
    win = sliding_window_view(p, e)
    return win.reshape(win.shape[0], win.shape[1], -1)


def _cover(per_anchor, s, dim, torus):
    e = _extent(s, dim)
    if torus:
        p = np.pad(per_anchor, [(e[0] - 1, 0), (e[1] - 1, 0)], mode="wrap")
    else:
        p = per_anchor
    return sliding_window_view(p, e).max(axis=(2, 3))


def maximal_brute(a, dim, smax, torus, smin=1):
    out = np.zeros(a.shape)
    for s in range(smin, smax + 1):
        means = _windows(a, s, dim, torus).mean(axis=2)
        np.maximum(out, _cover(means, s, dim, torus), out=out)
    return out


def _roll_max(x, w, axis):
    # maximum_filter1d centres the window at i + origin; shift to [i-w+1, i]
    centred = maximum_filter1d(x, size=w, axis=axis, mode="wrap")
    # centred[i] = max(x[i - w//2 .. i - w//2 + w - 1])
    return np.roll(centred, (w - 1) - w // 2, axis=axis)


def maximal_fast(a, dim, smax):
    out = a.copy()
    box = a.copy()
    row = a.copy()
    col = a.copy()
    for s in range(2, smax + 1):
        if dim == 1:
            box += np.roll(a, -(s - 1), axis=1)
            area = s
        else:
            row += np.roll(a, -(s - 1), axis=1)
            box += np.roll(row, -(s - 1), axis=0) + np.roll(col, -(s - 1), axis=1)
            col += np.roll(a, -(s - 1), axis=0)
            area = s * s
        m = _roll_max(box / area, s, axis=1)
        if dim == 2:
            m = _roll_max(m, s, axis=0)
        np.maximum(out, m, out=out)
    return out


def sharp_maximal(re, im, is_complex, dim, smax, torus, smin=1):
    out = np.zeros(re.shape)
    v = re + 1j * im if is_complex else re
    for s in range(smin, smax + 1):
        win = _windows(v, s, dim, torus)
        mean = win.mean(axis=2, keepdims=True)
        osc = np.abs(win - mean).mean(axis=2)
        np.maximum(out, _cover(osc, s, dim, torus), out=out)
    return out


def local_sharp_maximal(v, dim, smax, torus, ranks, smin=1):
    out = np.zeros(v.shape)
    for s in range(smin, smax + 1):
        win = np.sort(_windows(v, s, dim, torus), axis=2)
        cnt = win.shape[2]
        m = cnt - int(ranks[s])
        widths = win[:, :, m - 1:] - win[:, :, :cnt - m + 1]
        val = 0.5 * widths.min(axis=2)
        np.maximum(out, _cover(val, s, dim, torus), out=out)
    return out


def min_exceedance(v, dim, smax, torus, lam):
    parts = []
    span = 2.0 * lam
    for s in range(1, smax + 1):
        win = np.sort(_windows(v, s, dim, torus), axis=2)
        flat = win.reshape(-1, win.shape[2])
        cnt = flat.shape[1]
        # for each start i, number of values in [x_i, x_i + 2 lam]
        upper = (flat[:, None, :] - flat[:, :, None] <= span).sum(axis=2)
        best = (upper - np.arange(cnt)).max(axis=1)
        parts.append(cnt - best)
    return np.concatenate(parts).astype(np.int_)


def gfamily_sup(zr, zi, tr, ti, dim, smax, torus, smin=1):
    out = np.zeros(zr.shape)
    ft = tr + 1j * ti
    for s in range(smin, smax + 1):
        wt = _windows(ft, s, dim, torus)
        dt = wt - wt.mean(axis=2, keepdims=True)
        mag = np.abs(dt)
        sign = np.divide(np.conj(dt), mag, out=np.zeros_like(dt), where=mag > 0)
        for q in range(zr.shape[0]):
            wz = _windows(zr[q] + 1j * zi[q], s, dim, torus)
            dz = wz - wz.mean(axis=2, keepdims=True)
            val = np.abs((dz * sign).mean(axis=2))
            np.maximum(out[q], _cover(val, s, dim, torus), out=out[q])
    return out
