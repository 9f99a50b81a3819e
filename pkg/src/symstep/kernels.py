"""Numeric kernels shared by both backends.

Everything here is written once, as plain loops over contiguous float64
arrays, and decorated with :func:`symstep.backend.jit_kernel`.  Under the
numba backend these compile to machine code; under the numpy backend the
same functions run interpreted.  Keeping a single source guarantees the two
backends are bit-identical.

Deliberate restrictions for nopython compatibility:

* no exceptions -- singular configurations are signalled with NaN fills and
  step/solver failures with integer status codes (the Python wrappers in
  :mod:`symstep.models` / :mod:`symstep.integrators` translate these into
  proper errors);
* no ``np.linalg`` / BLAS calls -- reductions and the dense linear solve are
  explicit loops, so evaluation order (and therefore rounding) is fixed and
  independent of the host BLAS;
* models are dispatched by an integer ``kind`` with a flat float parameter
  array, see the KIND_* constants.

Status codes returned by the implicit-step kernels:
0 converged, 1 max iterations, 2 singular Jacobian, 3 non-finite value.
"""

import numpy as np

from .backend import jit_kernel

KIND_FREE = 0
KIND_HARMONIC = 1  # params = [omega]
KIND_KEPLER = 2    # params = []
KIND_LJ = 3        # params = [epsilon, sigma]; coordinates flat 3N

STATUS_OK = 0
STATUS_MAX_ITERATIONS = 1
STATUS_SINGULAR_JACOBIAN = 2
STATUS_NON_FINITE = 3


@jit_kernel
def _all_finite(v):
    for i in range(v.size):
        if not np.isfinite(v[i]):
            return False
    return True


@jit_kernel
def _max_abs(v):
    m = 0.0
    for i in range(v.size):
        a = abs(v[i])
        if a > m:
            m = a
    return m


@jit_kernel
def model_value(kind, params, q):
    if kind == KIND_FREE:
        return 0.0
    if kind == KIND_HARMONIC:
        w = params[0]
        s = 0.0
        for i in range(q.size):
            s += q[i] * q[i]
        return 0.5 * w * w * s
    if kind == KIND_KEPLER:
        r2 = 0.0
        for i in range(q.size):
            r2 += q[i] * q[i]
        if r2 == 0.0:
            return np.nan
        return -1.0 / np.sqrt(r2)
    # Lennard-Jones cluster, flat 3N coordinates
    eps = params[0]
    sig = params[1]
    n = q.size // 3
    v = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = q[3 * i] - q[3 * j]
            dy = q[3 * i + 1] - q[3 * j + 1]
            dz = q[3 * i + 2] - q[3 * j + 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                return np.nan
            inv2 = sig * sig / r2
            inv6 = inv2 * inv2 * inv2
            v += 4.0 * eps * (inv6 * inv6 - inv6)
    return v


@jit_kernel
def model_gradient(kind, params, q):
    d = q.size
    g = np.zeros(d)
    if kind == KIND_FREE:
        return g
    if kind == KIND_HARMONIC:
        w2 = params[0] * params[0]
        for i in range(d):
            g[i] = w2 * q[i]
        return g
    if kind == KIND_KEPLER:
        r2 = 0.0
        for i in range(d):
            r2 += q[i] * q[i]
        if r2 == 0.0:
            for i in range(d):
                g[i] = np.nan
            return g
        r3 = r2 * np.sqrt(r2)
        for i in range(d):
            g[i] = q[i] / r3
        return g
    eps = params[0]
    sig = params[1]
    n = d // 3
    for i in range(n):
        for j in range(i + 1, n):
            dx = q[3 * i] - q[3 * j]
            dy = q[3 * i + 1] - q[3 * j + 1]
            dz = q[3 * i + 2] - q[3 * j + 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                for k in range(d):
                    g[k] = np.nan
                return g
            inv2 = sig * sig / r2
            inv6 = inv2 * inv2 * inv2
            # dV/dr / r = -(24 eps / r^2) (2 (s/r)^12 - (s/r)^6)
            c = -(24.0 * eps / r2) * (2.0 * inv6 * inv6 - inv6)
            g[3 * i] += c * dx
            g[3 * i + 1] += c * dy
            g[3 * i + 2] += c * dz
            g[3 * j] -= c * dx
            g[3 * j + 1] -= c * dy
            g[3 * j + 2] -= c * dz
    return g


@jit_kernel
def model_hessian(kind, params, q):
    d = q.size
    H = np.zeros((d, d))
    if kind == KIND_FREE:
        return H
    if kind == KIND_HARMONIC:
        w2 = params[0] * params[0]
        for i in range(d):
            H[i, i] = w2
        return H
    if kind == KIND_KEPLER:
        r2 = 0.0
        for i in range(d):
            r2 += q[i] * q[i]
        if r2 == 0.0:
            for i in range(d):
                for j in range(d):
                    H[i, j] = np.nan
            return H
        r = np.sqrt(r2)
        r3 = r2 * r
        r5 = r3 * r2
        for i in range(d):
            for j in range(d):
                H[i, j] = -3.0 * q[i] * q[j] / r5
            H[i, i] += 1.0 / r3
        return H
    eps = params[0]
    sig = params[1]
    n = d // 3
    dv = np.empty(3)
    for i in range(n):
        for j in range(i + 1, n):
            dv[0] = q[3 * i] - q[3 * j]
            dv[1] = q[3 * i + 1] - q[3 * j + 1]
            dv[2] = q[3 * i + 2] - q[3 * j + 2]
            r2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]
            if r2 == 0.0:
                for a in range(d):
                    for b in range(d):
                        H[a, b] = np.nan
                return H
            inv2 = sig * sig / r2
            inv6 = inv2 * inv2 * inv2
            inv12 = inv6 * inv6
            upr = -(24.0 * eps / r2) * (2.0 * inv12 - inv6)   # u'(r)/r
            upp = (24.0 * eps / r2) * (26.0 * inv12 - 7.0 * inv6)  # u''(r)
            # pair block B = u'' rr^T/r^2 + (u'/r)(I - rr^T/r^2)
            for a in range(3):
                for b in range(3):
                    bab = (upp - upr) * dv[a] * dv[b] / r2
                    if a == b:
                        bab += upr
                    H[3 * i + a, 3 * i + b] += bab
                    H[3 * j + a, 3 * j + b] += bab
                    H[3 * i + a, 3 * j + b] -= bab
                    H[3 * j + a, 3 * i + b] -= bab
    return H


@jit_kernel
def gauss_solve(A, b):
    """Dense solve of A x = b by Gaussian elimination with partial pivoting.

    Returns (x, ok); ok is False when a pivot is exactly zero (singular
    matrix).  A and b are not modified.
    """
    n = b.size
    U = A.copy()
    y = b.copy()
    x = np.zeros(n)
    for col in range(n):
        piv = col
        best = abs(U[col, col])
        for r in range(col + 1, n):
            v = abs(U[r, col])
            if v > best:
                best = v
                piv = r
        if best == 0.0:
            return x, False
        if piv != col:
            for c in range(col, n):
                t = U[col, c]
                U[col, c] = U[piv, c]
                U[piv, c] = t
            t = y[col]
            y[col] = y[piv]
            y[piv] = t
        inv = 1.0 / U[col, col]
        for r in range(col + 1, n):
            f = U[r, col] * inv
            if f != 0.0:
                U[r, col] = 0.0
                for c in range(col + 1, n):
                    U[r, c] -= f * U[col, c]
                y[r] -= f * y[col]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for j in range(i + 1, n):
            s -= U[i, j] * x[j]
        x[i] = s / U[i, i]
    return x, True


@jit_kernel
def verlet_step_kernel(kind, params, mass, q, p, h):
    d = q.size
    ga = model_gradient(kind, params, q)
    x = np.empty(d)
    ph = np.empty(d)
    for i in range(d):
        ph[i] = p[i] - 0.5 * h * ga[i]
        x[i] = q[i] + h * ph[i] / mass[i]
    gx = model_gradient(kind, params, x)
    pn = np.empty(d)
    for i in range(d):
        pn[i] = ph[i] - 0.5 * h * gx[i]
    return x, pn


@jit_kernel
def s3_residual_kernel(kind, params, mass, a, p, h, ca, cx, cb, ga, Ha, x):
    """Residual of the implicit position equation at candidate x.

    R(x) = M(x-a)/h + (h/12)(ca g(a) + cx g(x)) + (h/12) cb Hs(a)(x-a) - p
    with the variant fixed by the coefficient triple (ca, cx, cb).
    """
    d = a.size
    gx = model_gradient(kind, params, x)
    c = h / 12.0
    r = np.empty(d)
    for i in range(d):
        hv = 0.0
        for j in range(d):
            hv += Ha[i, j] * (x[j] - a[j])
        r[i] = (mass[i] * (x[i] - a[i]) / h
                + c * (ca * ga[i] + cx * gx[i])
                + c * cb * hv
                - p[i])
    return r


@jit_kernel
def s3_momentum_kernel(kind, params, mass, a, x, h, ca, cx, cb):
    """New momentum once the position equation is solved.

    p' = M(x-a)/h + (h/12)(-cx g(a) - ca g(x)) + (h/12) cb Hs(x)(x-a).
    The coefficient swap (ca, cx) -> (-cx, -ca) relative to the residual is
    exactly what makes each variant self-adjoint.
    """
    d = a.size
    ga = model_gradient(kind, params, a)
    gx = model_gradient(kind, params, x)
    Hx = model_hessian(kind, params, x)
    c = h / 12.0
    pn = np.empty(d)
    for i in range(d):
        hv = 0.0
        for j in range(d):
            hv += Hx[i, j] * (x[j] - a[j])
        pn[i] = (mass[i] * (x[i] - a[i]) / h
                 + c * (-cx * ga[i] - ca * gx[i])
                 + c * cb * hv)
    return pn


@jit_kernel
def s3_step_kernel(kind, params, mass, a, p, h, ca, cx, cb, tol, maxit):
    """One implicit step: Newton on the position residual, then the momentum
    relation.  Returns (x, p_new, status, iterations, residual_norm) where
    x is the best iterate found and residual_norm its residual.
    """
    d = a.size
    ga = model_gradient(kind, params, a)
    Ha = model_hessian(kind, params, a)
    x = np.empty(d)
    pnan = np.full(d, np.nan)
    if not (_all_finite(ga) and _all_finite(Ha.ravel())):
        return a.copy(), pnan, STATUS_NON_FINITE, 0, np.inf
    # Verlet predictor keeps Newton in its quadratic basin at moderate h.
    for i in range(d):
        x[i] = a[i] + h * p[i] / mass[i] - 0.5 * h * h * ga[i] / mass[i]
    r = s3_residual_kernel(kind, params, mass, a, p, h, ca, cx, cb, ga, Ha, x)
    if not _all_finite(r):
        return x, pnan, STATUS_NON_FINITE, 0, np.inf
    rnorm = _max_abs(r)
    best_x = x.copy()
    best_norm = rnorm
    status = STATUS_MAX_ITERATIONS
    iters = 0
    if rnorm <= tol:
        status = STATUS_OK
    else:
        c = h / 12.0
        J = np.empty((d, d))
        for it in range(1, maxit + 1):
            Hx = model_hessian(kind, params, x)
            for i in range(d):
                for j in range(d):
                    J[i, j] = c * (cx * Hx[i, j] + cb * Ha[i, j])
                J[i, i] += mass[i] / h
            rhs = np.empty(d)
            for i in range(d):
                rhs[i] = -r[i]
            delta, ok = gauss_solve(J, rhs)
            if not ok:
                status = STATUS_SINGULAR_JACOBIAN
                break
            for i in range(d):
                x[i] = x[i] + delta[i]
            r = s3_residual_kernel(kind, params, mass, a, p, h,
                                   ca, cx, cb, ga, Ha, x)
            if not _all_finite(r):
                status = STATUS_NON_FINITE
                iters = it
                break
            rnorm = _max_abs(r)
            if rnorm < best_norm:
                best_norm = rnorm
                for i in range(d):
                    best_x[i] = x[i]
            if rnorm <= tol:
                status = STATUS_OK
                iters = it
                break
            iters = it
    if status != STATUS_OK:
        pn = s3_momentum_kernel(kind, params, mass, a, best_x, h, ca, cx, cb)
        return best_x, pn, status, iters, best_norm
    pn = s3_momentum_kernel(kind, params, mass, a, x, h, ca, cx, cb)
    if not (_all_finite(x) and _all_finite(pn)):
        return x, pnan, STATUS_NON_FINITE, iters, rnorm
    return x, pn, STATUS_OK, iters, rnorm


@jit_kernel
def run_verlet_kernel(kind, params, mass, q0, p0, h, n_steps, stride):
    """Fused velocity-Verlet trajectory.

    Returns (Q, P, n_recorded, failed_step, status, 0, 0.0).  Q/P hold the
    initial state plus every stride-th state; on failure at step k (1-based)
    recording stops and failed_step = k, otherwise failed_step = 0.
    """
    d = q0.size
    n_rec = n_steps // stride
    Q = np.empty((n_rec + 1, d))
    P = np.empty((n_rec + 1, d))
    Q[0, :] = q0
    P[0, :] = p0
    q = q0.copy()
    p = p0.copy()
    rec = 0
    for k in range(1, n_steps + 1):
        x, pn = verlet_step_kernel(kind, params, mass, q, p, h)
        if not (_all_finite(x) and _all_finite(pn)):
            return Q, P, rec, k, STATUS_NON_FINITE, 0, np.inf
        q = x
        p = pn
        if k % stride == 0:
            rec += 1
            Q[rec, :] = q
            P[rec, :] = p
    return Q, P, rec, 0, STATUS_OK, 0, 0.0


@jit_kernel
def run_s3_kernel(kind, params, mass, q0, p0, h, n_steps, stride,
                  ca, cx, cb, tol, maxit):
    """Fused implicit-scheme trajectory; same record/return layout as
    run_verlet_kernel plus the failing (or final) step's iteration count and
    residual norm."""
    d = q0.size
    n_rec = n_steps // stride
    Q = np.empty((n_rec + 1, d))
    P = np.empty((n_rec + 1, d))
    Q[0, :] = q0
    P[0, :] = p0
    q = q0.copy()
    p = p0.copy()
    rec = 0
    iters = 0
    rnorm = 0.0
    for k in range(1, n_steps + 1):
        x, pn, status, iters, rnorm = s3_step_kernel(
            kind, params, mass, q, p, h, ca, cx, cb, tol, maxit)
        if status != STATUS_OK:
            return Q, P, rec, k, status, iters, rnorm
        q = x
        p = pn
        if k % stride == 0:
            rec += 1
            Q[rec, :] = q
            P[rec, :] = p
    return Q, P, rec, 0, STATUS_OK, iters, rnorm
