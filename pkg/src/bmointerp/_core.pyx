# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cube-scan kernels.

All kernels take 2-D arrays; a 1-D grid is passed as shape ``(1, N)`` with
``dim=1`` so that cubes have extent 1 along the dummy axis.  Per-cube outputs
are flat and follow the cube-family order (side, then anchor row-major).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, floor
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    i = i % n
    if i < 0:
        i += n
    return i


cdef inline Py_ssize_t _lo(int side, Py_ssize_t n, bint torus) noexcept nogil:
    return 0 if torus else -(side - 1)


cdef inline double _sum(const double* b, Py_ssize_t n) noexcept nogil:
    # four independent accumulators; the order differs from a plain loop by rounding only
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t k = 0
    while k + 4 <= n:
        s0 = s0 + b[k]
        s1 = s1 + b[k + 1]
        s2 = s2 + b[k + 2]
        s3 = s3 + b[k + 3]
        k += 4
    while k < n:
        s0 = s0 + b[k]
        k += 1
    return (s0 + s1) + (s2 + s3)


cdef inline double _at1(const double[:, ::1] v, Py_ssize_t c, bint torus) noexcept nogil:
    cdef Py_ssize_t n1 = v.shape[1]
    if torus:
        return v[0, _wrap(c, n1)]
    if 0 <= c < n1:
        return v[0, c]
    return 0.0


cdef void _replace_sorted(double* buf, Py_ssize_t n, double old, double new) noexcept nogil:
    # buf sorted and containing old; swap old for new keeping buf sorted
    cdef Py_ssize_t lo = 0, hi = n, mid, i
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[mid] < old:
            lo = mid + 1
        else:
            hi = mid
    i = lo
    if new >= old:
        while i + 1 < n and buf[i + 1] < new:
            buf[i] = buf[i + 1]
            i += 1
    else:
        while i > 0 and buf[i - 1] > new:
            buf[i] = buf[i - 1]
            i -= 1
    buf[i] = new


cdef Py_ssize_t _gather(const double[:, ::1] v, double* buf, Py_ssize_t a0, Py_ssize_t a1,
                        int e0, int e1, bint torus) noexcept nogil:
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    cdef Py_ssize_t i, j, r, c, c0, k = 0
    if torus:
        c0 = _wrap(a1, n1)
        for i in range(e0):
            r = _wrap(a0 + i, n0)
            c = c0
            for j in range(e1):
                buf[k] = v[r, c]
                k += 1
                c += 1
                if c == n1:
                    c = 0
        return k
    for i in range(e0):
        r = a0 + i
        for j in range(e1):
            c = a1 + j
            if 0 <= r < n0 and 0 <= c < n1:
                buf[k] = v[r, c]
            else:
                buf[k] = 0.0
            k += 1
    return k


cdef void _slide_max(const double* src, Py_ssize_t sstride, double* dst, Py_ssize_t dstride,
                     Py_ssize_t n, int w, bint circular, Py_ssize_t* dq, double* ext) noexcept nogil:
    # dst[x] = max(ext[x .. x+w-1]) for x < n, where ext is src read circularly from
    # x-w+1 (circular) or src itself of length n+w-1 (not circular)
    cdef Py_ssize_t m = n + w - 1, i, head = 0, tail = 0
    for i in range(m):
        ext[i] = src[(_wrap(i - (w - 1), n) if circular else i) * sstride]
    for i in range(m):
        while tail > head and ext[dq[tail - 1]] <= ext[i]:
            tail -= 1
        dq[tail] = i
        tail += 1
        if dq[head] <= i - w:
            head += 1
        if i >= w - 1:
            dst[(i - w + 1) * dstride] = ext[dq[head]]


cdef class _Cover:
    """Per-side anchor values and the scratch space to spread them: each cell
    takes the max over the anchors of the cubes containing it."""
    cdef double[:, ::1] val
    cdef double[:, ::1] tmp
    cdef Py_ssize_t* dq
    cdef double* ext
    cdef double* col
    cdef Py_ssize_t n0, n1

    def __cinit__(self, Py_ssize_t n0, Py_ssize_t n1, int smax):
        cdef Py_ssize_t m = (n0 if n0 > n1 else n1) + smax
        self.n0 = n0
        self.n1 = n1
        self.val = np.zeros((n0 + smax, n1 + smax))
        self.tmp = np.zeros((n0 + smax, n1))
        self.dq = <Py_ssize_t*>malloc(m * sizeof(Py_ssize_t))
        self.ext = <double*>malloc(m * sizeof(double))
        self.col = <double*>malloc(m * sizeof(double))
        if not (self.dq and self.ext and self.col):
            raise MemoryError()

    def __dealloc__(self):
        free(self.dq)
        free(self.ext)
        free(self.col)

    cdef void spread(self, double[:, ::1] val, double[:, ::1] out, int e0, int e1,
                     bint torus) noexcept nogil:
        # val[a0 - lo0, a1 - lo1] holds the value of the cube anchored at (a0, a1)
        cdef Py_ssize_t n0 = self.n0, n1 = self.n1, r, c
        cdef Py_ssize_t m0 = n0 if torus else n0 + e0 - 1
        for r in range(m0):
            _slide_max(&val[r, 0], 1, &self.tmp[r, 0], 1, n1, e1, torus, self.dq, self.ext)
        for c in range(n1):
            _slide_max(&self.tmp[0, c], n1, self.col, 1, n0, e0, torus, self.dq, self.ext)
            for r in range(n0):
                if self.col[r] > out[r, c]:
                    out[r, c] = self.col[r]


def maximal_brute(double[:, ::1] a, int dim, int smax, bint torus, int smin=1):
    """Mf by direct summation over every cube, O(#cells * S^(2 dim))."""
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1]
    cdef double[:, ::1] out = np.zeros((n0, n1))
    cdef double* buf = <double*>malloc(smax * smax * sizeof(double))
    cdef int s, e0
    cdef Py_ssize_t a0, a1, k, cnt
    cdef double tot
    cdef _Cover cov = _Cover(n0, n1, smax)
    cdef Py_ssize_t lo0, lo1
    try:
        with nogil:
            for s in range(smin, smax + 1):
                e0 = s if dim == 2 else 1
                lo0 = _lo(e0, n0, torus)
                lo1 = _lo(s, n1, torus)
                for a0 in range(lo0, n0):
                    for a1 in range(lo1, n1):
                        if dim == 1:
                            # one or two contiguous runs; no copy
                            cnt = s
                            if torus:
                                k = s if a1 + s <= n1 else n1 - a1
                                tot = _sum(&a[0, a1], k) + _sum(&a[0, 0], s - k)
                            else:
                                k = a1 if a1 > 0 else 0
                                tot = _sum(&a[0, k], (a1 + s if a1 + s < n1 else n1) - k)
                        else:
                            cnt = _gather(a, buf, a0, a1, e0, s, torus)
                            tot = _sum(buf, cnt)
                        cov.val[a0 - lo0, a1 - lo1] = tot / cnt
                cov.spread(cov.val, out, e0, s, torus)
    finally:
        free(buf)
    return np.asarray(out)


cdef void _window_max_circular(const double* src, double* dst, Py_ssize_t n, Py_ssize_t stride,
                               int w, Py_ssize_t* dq, double* ext) noexcept nogil:
    # dst[x] = max(src[x-w+1 .. x]) with circular indexing; src/dst strided
    cdef Py_ssize_t m = n + w - 1, i, head = 0, tail = 0, x
    for i in range(m):
        ext[i] = src[_wrap(i - (w - 1), n) * stride]
    for i in range(m):
        while tail > head and ext[dq[tail - 1]] <= ext[i]:
            tail -= 1
        dq[tail] = i
        tail += 1
        if dq[head] <= i - w:
            head += 1
        if i >= w - 1:
            x = i - (w - 1)
            dst[x * stride] = ext[dq[head]]


def maximal_fast(double[:, ::1] a, int dim, int smax):
    """Mf on the torus: window sums grown one side at a time plus monotone-deque
    sliding maxima, O(#cells * S)."""
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1]
    cdef Py_ssize_t i, j, nmax = n0 if n0 > n1 else n1
    cdef int s
    cdef double area
    cdef double[:, ::1] out = np.array(a, copy=True)
    cdef double[:, ::1] box = np.array(a, copy=True)
    cdef double[:, ::1] row = np.array(a, copy=True)     # row strip sums, length s
    cdef double[:, ::1] col = np.array(a, copy=True)     # column strip sums, length s - 1 before update
    cdef double[:, ::1] mean = np.empty((n0, n1))
    cdef double[:, ::1] tmp = np.empty((n0, n1))
    cdef Py_ssize_t* dq = <Py_ssize_t*>malloc(2 * nmax * sizeof(Py_ssize_t))
    cdef double* ext = <double*>malloc(2 * nmax * sizeof(double))
    try:
        with nogil:
            for s in range(2, smax + 1):
                if dim == 1:
                    for j in range(n1):
                        box[0, j] = box[0, j] + a[0, _wrap(j + s - 1, n1)]
                    area = s
                else:
                    for i in range(n0):
                        for j in range(n1):
                            row[i, j] = row[i, j] + a[i, _wrap(j + s - 1, n1)]
                    for i in range(n0):
                        for j in range(n1):
                            box[i, j] = (box[i, j] + row[_wrap(i + s - 1, n0), j]
                                         + col[i, _wrap(j + s - 1, n1)])
                    for i in range(n0):
                        for j in range(n1):
                            col[i, j] = col[i, j] + a[_wrap(i + s - 1, n0), j]
                    area = <double>s * s
                for i in range(n0):
                    for j in range(n1):
                        mean[i, j] = box[i, j] / area
                for i in range(n0):
                    _window_max_circular(&mean[i, 0], &tmp[i, 0], n1, 1, s, dq, ext)
                if dim == 2:
                    for j in range(n1):
                        _window_max_circular(&tmp[0, j], &mean[0, j], n0, n1, s, dq, ext)
                    for i in range(n0):
                        for j in range(n1):
                            if mean[i, j] > out[i, j]:
                                out[i, j] = mean[i, j]
                else:
                    for j in range(n1):
                        if tmp[0, j] > out[0, j]:
                            out[0, j] = tmp[0, j]
    finally:
        free(dq)
        free(ext)
    return np.asarray(out)


def sharp_maximal(double[:, ::1] re, double[:, ::1] im, bint is_complex, int dim, int smax, bint torus,
                  int smin=1):
    """f#: per-cell supremum of the mean oscillation over the cubes containing it."""
    cdef Py_ssize_t n0 = re.shape[0], n1 = re.shape[1]
    cdef double[:, ::1] out = np.zeros((n0, n1))
    cdef double* br = <double*>malloc(smax * smax * sizeof(double))
    cdef double* bi = <double*>malloc(smax * smax * sizeof(double))
    cdef int s, e0
    cdef Py_ssize_t a0, a1, k, cnt
    cdef double mr, mi, osc, dr, di
    cdef _Cover cov = _Cover(n0, n1, smax)
    cdef Py_ssize_t lo0, lo1
    try:
        with nogil:
            for s in range(smin, smax + 1):
                e0 = s if dim == 2 else 1
                lo0 = _lo(e0, n0, torus)
                lo1 = _lo(s, n1, torus)
                for a0 in range(lo0, n0):
                    for a1 in range(lo1, n1):
                        cnt = _gather(re, br, a0, a1, e0, s, torus)
                        mr = _sum(br, cnt) / cnt
                        osc = 0.0
                        if is_complex:
                            _gather(im, bi, a0, a1, e0, s, torus)
                            mi = _sum(bi, cnt) / cnt
                            for k in range(cnt):
                                dr = br[k] - mr
                                di = bi[k] - mi
                                osc = osc + sqrt(dr * dr + di * di)
                        else:
                            for k in range(cnt):
                                osc = osc + fabs(br[k] - mr)
                        cov.val[a0 - lo0, a1 - lo1] = osc / cnt
                cov.spread(cov.val, out, e0, s, torus)
    finally:
        free(br)
        free(bi)
    return np.asarray(out)


def local_sharp_maximal(double[:, ::1] v, int dim, int smax, bint torus, const long[::1] ranks,
                        int smin=1):
    """Per-cell sup over cubes of min_c of the ranks[s]-th largest |f - c| (0-based)."""
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    cdef double[:, ::1] out = np.zeros((n0, n1))
    cdef double* buf = <double*>malloc(smax * smax * sizeof(double))
    cdef int s, e0
    cdef Py_ssize_t a0, a1, i, cnt = 0, m
    cdef double best, width
    cdef _Cover cov = _Cover(n0, n1, smax)
    cdef Py_ssize_t lo0, lo1
    try:
        with nogil:
            for s in range(smin, smax + 1):
                e0 = s if dim == 2 else 1
                lo0 = _lo(e0, n0, torus)
                lo1 = _lo(s, n1, torus)
                for a0 in range(lo0, n0):
                    for a1 in range(lo1, n1):
                        if dim == 1 and a1 > lo1:
                            _replace_sorted(buf, cnt, _at1(v, a1 - 1, torus), _at1(v, a1 + s - 1, torus))
                        else:
                            cnt = _gather(v, buf, a0, a1, e0, s, torus)
                            qsort(buf, cnt, sizeof(double), _cmp_double)
                        # at least m = cnt - rank values must sit within distance r of c
                        m = cnt - ranks[s]
                        best = buf[m - 1] - buf[0]
                        for i in range(1, cnt - m + 1):
                            width = buf[i + m - 1] - buf[i]
                            if width < best:
                                best = width
                        cov.val[a0 - lo0, a1 - lo1] = 0.5 * best
                cov.spread(cov.val, out, e0, s, torus)
    finally:
        free(buf)
    return np.asarray(out)


def min_exceedance(double[:, ::1] v, int dim, int smax, bint torus, double lam):
    """Per cube (family order): min over c of #{cells : |f - c| > lam}."""
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    cdef Py_ssize_t total = 0
    cdef int s, e0
    for s in range(1, smax + 1):
        e0 = s if dim == 2 else 1
        total += (n0 - _lo(e0, n0, torus)) * (n1 - _lo(s, n1, torus))
    cdef long[::1] out = np.empty(total, dtype=np.int_)
    cdef double* buf = <double*>malloc(smax * smax * sizeof(double))
    cdef Py_ssize_t a0, a1, i, j, cnt = 0, best, pos = 0, lo1
    cdef double span = 2.0 * lam
    try:
        with nogil:
            for s in range(1, smax + 1):
                e0 = s if dim == 2 else 1
                lo1 = _lo(s, n1, torus)
                for a0 in range(_lo(e0, n0, torus), n0):
                    for a1 in range(lo1, n1):
                        if dim == 1 and a1 > lo1:
                            _replace_sorted(buf, cnt, _at1(v, a1 - 1, torus), _at1(v, a1 + s - 1, torus))
                        else:
                            cnt = _gather(v, buf, a0, a1, e0, s, torus)
                            qsort(buf, cnt, sizeof(double), _cmp_double)
                        best = 0
                        j = 0
                        for i in range(cnt):
                            if j < i:
                                j = i
                            while j + 1 < cnt and buf[j + 1] - buf[i] <= span:
                                j += 1
                            if j - i + 1 > best:
                                best = j - i + 1
                        out[pos] = cnt - best
                        pos += 1
    finally:
        free(buf)
    return np.asarray(out)


def gfamily_sup(const double[:, :, ::1] zr, const double[:, :, ::1] zi,
                const double[:, ::1] tr, const double[:, ::1] ti, int dim, int smax, bint torus, int smin=1):
    """For each slice k, per cell, sup over cubes Q containing it of
    |avg_Q (f_k - avg_Q f_k) conj(s_Q)|, s_Q the unit sign of f_t - avg_Q f_t
    (zero where f_t equals its average).  Slices share the sign field."""
    cdef Py_ssize_t nk = zr.shape[0], n0 = zr.shape[1], n1 = zr.shape[2]
    cdef double[:, :, ::1] out = np.zeros((nk, n0, n1))
    cdef Py_ssize_t sz = smax * smax
    cdef double* bzr = <double*>malloc(sz * sizeof(double))
    cdef double* bzi = <double*>malloc(sz * sizeof(double))
    cdef double* pr = <double*>malloc(sz * sizeof(double))
    cdef double* pi = <double*>malloc(sz * sizeof(double))
    cdef int s, e0
    cdef Py_ssize_t a0, a1, k, q, cnt
    cdef double mzr, mzi, mtr, mti, dr, di, nrm, accr, acci
    cdef _Cover cov = _Cover(n0, n1, smax)
    cdef double[:, :, ::1] vals = np.zeros((nk, n0 + smax, n1 + smax))
    cdef Py_ssize_t lo0, lo1
    try:
        with nogil:
            for s in range(smin, smax + 1):
                e0 = s if dim == 2 else 1
                lo0 = _lo(e0, n0, torus)
                lo1 = _lo(s, n1, torus)
                for a0 in range(lo0, n0):
                    for a1 in range(lo1, n1):
                        cnt = _gather(tr, pr, a0, a1, e0, s, torus)
                        _gather(ti, pi, a0, a1, e0, s, torus)
                        mtr = 0.0
                        mti = 0.0
                        for k in range(cnt):
                            mtr = mtr + pr[k]
                            mti = mti + pi[k]
                        mtr = mtr / cnt
                        mti = mti / cnt
                        for k in range(cnt):
                            dr = pr[k] - mtr
                            di = pi[k] - mti
                            nrm = sqrt(dr * dr + di * di)
                            if nrm == 0.0:
                                pr[k] = 0.0
                                pi[k] = 0.0
                            else:
                                pr[k] = dr / nrm
                                pi[k] = di / nrm
                        for q in range(nk):
                            _gather(zr[q], bzr, a0, a1, e0, s, torus)
                            _gather(zi[q], bzi, a0, a1, e0, s, torus)
                            mzr = 0.0
                            mzi = 0.0
                            for k in range(cnt):
                                mzr = mzr + bzr[k]
                                mzi = mzi + bzi[k]
                            mzr = mzr / cnt
                            mzi = mzi / cnt
                            accr = 0.0
                            acci = 0.0
                            for k in range(cnt):
                                dr = bzr[k] - mzr
                                di = bzi[k] - mzi
                                # (dr + i di) * (pr - i pi)
                                accr = accr + dr * pr[k] + di * pi[k]
                                acci = acci + di * pr[k] - dr * pi[k]
                            vals[q, a0 - lo0, a1 - lo1] = sqrt(accr * accr + acci * acci) / cnt
                for q in range(nk):
                    cov.spread(vals[q], out[q], e0, s, torus)
    finally:
        free(bzr)
        free(bzi)
        free(pr)
        free(pi)
    return np.asarray(out)
