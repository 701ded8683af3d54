# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled partition-sum kernels.

Operation-for-operation twin of ``_ref.py``: ascending cell order, Kahan
compensated accumulation, IEEE binary64 throughout.  Keep the loop bodies in
sync with the reference implementation; the parity tests compare outputs
bit for bit.
"""


def qv_sum(const double[::1] x, const double[::1] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0, term, t1, t2
    for k in range(1, n):
        term = (x[k] - x[k - 1]) * (y[k] - y[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def masked_qv_sum(const double[::1] x, const double[::1] y, const unsigned char[::1] mask):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0, term, t1, t2
    for k in range(1, n):
        if not mask[k - 1]:
            continue
        term = (x[k] - x[k - 1]) * (y[k] - y[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def masked_abs_sum(const double[::1] x, const double[::1] y, const unsigned char[::1] mask):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0, term, t1, t2
    for k in range(1, n):
        if not mask[k - 1]:
            continue
        term = (x[k] - x[k - 1]) * (y[k] - y[k - 1])
        if term < 0.0:
            term = -term
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def ito_cumsum(const double[::1] eta, const double[::1] y, double[::1] out):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0, term, t1, t2
    out[0] = 0.0
    for k in range(1, n):
        term = eta[k - 1] * (y[k] - y[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
        out[k] = s
    return out
