"""Pure-Python partition-sum kernels.

Reference implementation of the hot loops: every sum is accumulated in
ascending cell order with Kahan compensation, exactly mirroring the compiled
twin in ``_core.pyx``.  Both backends must produce bit-identical doubles
(Python floats and C doubles share IEEE-754 binary64 semantics and the loops
perform the same operation sequence), which the test suite asserts.
"""


def qv_sum(x, y):
    """Sum of (x[k]-x[k-1])*(y[k]-y[k-1]) over k = 1..n-1."""
    xs = x.tolist()
    ys = y.tolist()
    s = 0.0
    c = 0.0
    for k in range(1, len(xs)):
        term = (xs[k] - xs[k - 1]) * (ys[k] - ys[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def masked_qv_sum(x, y, mask):
    """As qv_sum but only over cells k with mask[k-1] nonzero."""
    xs = x.tolist()
    ys = y.tolist()
    ms = mask.tolist()
    s = 0.0
    c = 0.0
    for k in range(1, len(xs)):
        if not ms[k - 1]:
            continue
        term = (xs[k] - xs[k - 1]) * (ys[k] - ys[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def masked_abs_sum(x, y, mask):
    """Sum of |dx_k * dy_k| over cells with mask[k-1] nonzero."""
    xs = x.tolist()
    ys = y.tolist()
    ms = mask.tolist()
    s = 0.0
    c = 0.0
    for k in range(1, len(xs)):
        if not ms[k - 1]:
            continue
        term = abs((xs[k] - xs[k - 1]) * (ys[k] - ys[k - 1]))
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def ito_cumsum(eta, y, out):
    """Left-point Riemann sums: out[k] = sum_{j<=k} eta[j-1]*(y[j]-y[j-1]).

    ``out`` has length len(y); out[0] = 0.  The Kahan carry persists across
    cells so the final entry equals the scalar compensated sum.
    """
    es = eta.tolist()
    ys = y.tolist()
    s = 0.0
    c = 0.0
    out[0] = 0.0
    for k in range(1, len(ys)):
        term = es[k - 1] * (ys[k] - ys[k - 1])
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
        out[k] = s
    return out
