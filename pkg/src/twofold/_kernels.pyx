# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled port of ``twofold._integrator`` for polynomial fields.

Every function mirrors its Python counterpart; see that module for the
algorithmic description.
"""
import numpy as np

from libc.math cimport atan, sqrt, fabs, isfinite, pow, M_PI

DEF MAXDEG = 32
DEF KORD = 4

cdef int EVENT = 0
cdef int T_END = 1
cdef int ESCAPED = 2
cdef int UNDERFLOW = 3
cdef int MAX_STEPS = 4

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double EXPLICIT_STAB = 3.3


cdef struct Sys:
    const long long* exps
    const double* coefs
    long long off[5]
    double eps2
    double inv_eps2
    int code
    double s_max
    int mode
    double direction
    int deg


cdef inline void _phi(int code, double s, double s_max, double* phi, double* dphi) nogil:
    cdef double q, r
    if s > s_max:
        phi[0] = 1.0
        dphi[0] = 0.0
        return
    if s < -s_max:
        phi[0] = 0.0
        dphi[0] = 0.0
        return
    if code == 0:
        phi[0] = 0.5 + atan(s) / M_PI
        dphi[0] = 1.0 / (M_PI * (1.0 + s * s))
        return
    q = 1.0 + s * s
    r = sqrt(q)
    phi[0] = 0.5 + 0.5 * s / r
    dphi[0] = 0.5 / (q * r)


cdef void _components(const Sys* S, double x, double y, double* v, double* vx, double* vy) nogil:
    cdef double xp[MAXDEG + 1]
    cdef double yp[MAXDEG + 1]
    cdef int k, comp
    cdef long long t, i, j
    cdef double a, acc, accx, accy
    xp[0] = 1.0
    yp[0] = 1.0
    for k in range(1, S.deg + 1):
        xp[k] = xp[k - 1] * x
        yp[k] = yp[k - 1] * y
    for comp in range(4):
        acc = 0.0
        accx = 0.0
        accy = 0.0
        for t in range(S.off[comp], S.off[comp + 1]):
            i = S.exps[2 * t]
            j = S.exps[2 * t + 1]
            a = S.coefs[t]
            acc += a * xp[i] * yp[j]
            if i:
                accx += a * i * xp[i - 1] * yp[j]
            if j:
                accy += a * j * xp[i] * yp[j - 1]
        v[comp] = acc
        vx[comp] = accx
        vy[comp] = accy


cdef void _blend(const Sys* S, double x, double yphys, double s, double* out, double* J) nogil:
    # out = (X, Y, div); J (may be NULL) = (j00, j01, j10, j11) of the original field
    cdef double phi, dphi, om, k, j00, j11
    cdef double v[4]
    cdef double vx[4]
    cdef double vy[4]
    _phi(S.code, s, S.s_max, &phi, &dphi)
    _components(S, x, yphys, v, vx, vy)
    om = 1.0 - phi
    out[0] = v[0] * phi + v[2] * om
    out[1] = v[1] * phi + v[3] * om
    j00 = vx[0] * phi + vx[2] * om
    k = dphi * S.inv_eps2
    j11 = vy[1] * phi + vy[3] * om + (v[1] - v[3]) * k
    out[2] = j00 + j11
    if J != NULL:
        J[0] = j00
        J[1] = vy[0] * phi + vy[2] * om + (v[0] - v[2]) * k
        J[2] = vx[1] * phi + vx[3] * om
        J[3] = j11


cdef void _rhs(const Sys* S, double x, double y, double* f) nogil:
    cdef double d = S.direction
    cdef double e2 = S.eps2
    if S.mode == 0:
        _blend(S, x, y, y * S.inv_eps2, f, NULL)
        f[0] *= d
        f[1] *= d
        f[2] *= d
    else:
        _blend(S, x, e2 * y, y, f, NULL)
        f[0] *= d * e2
        f[1] *= d
        f[2] *= d * e2


cdef void _jac(const Sys* S, double x, double y, double* J) nogil:
    cdef double d = S.direction
    cdef double e2 = S.eps2
    cdef double out[3]
    if S.mode == 0:
        _blend(S, x, y, y * S.inv_eps2, out, J)
        J[0] *= d
        J[1] *= d
        J[2] *= d
        J[3] *= d
    else:
        _blend(S, x, e2 * y, y, out, J)
        J[0] *= d * e2
        J[1] *= d * e2 * e2
        J[2] *= d
        J[3] *= d * e2


cdef inline double _physical_y(const Sys* S, double y) nogil:
    if S.mode == 1:
        return y * S.eps2
    return y


# ----------------------------------------------------------------------------
# one-step methods


cdef void _dopri_step(const Sys* S, double* u, double* k1, double h, double* un, double* k7, double* err) nogil:
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double k5[3]
    cdef double k6[3]
    cdef int c
    _rhs(S, u[0] + h * A21 * k1[0], u[1] + h * A21 * k1[1], k2)
    _rhs(S, u[0] + h * (A31 * k1[0] + A32 * k2[0]), u[1] + h * (A31 * k1[1] + A32 * k2[1]), k3)
    _rhs(S,
         u[0] + h * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
         u[1] + h * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]), k4)
    _rhs(S,
         u[0] + h * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
         u[1] + h * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]), k5)
    _rhs(S,
         u[0] + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
         u[1] + h * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]), k6)
    for c in range(3):
        un[c] = u[c] + h * (B1 * k1[c] + B3 * k3[c] + B4 * k4[c] + B5 * k5[c] + B6 * k6[c])
    _rhs(S, un[0], un[1], k7)
    for c in range(3):
        err[c] = h * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c])


cdef int _limp_euler(const Sys* S, double* u, double* f0, double* J, double h, int n, double* out) nogil:
    cdef double hs = h / n
    cdef double a = 1.0 - hs * J[0]
    cdef double b = -hs * J[1]
    cdef double c = -hs * J[2]
    cdef double d = 1.0 - hs * J[3]
    cdef double det = a * d - b * c
    cdef double x, y, D, r0, r1
    cdef double f[3]
    cdef int m
    if det == 0.0 or not isfinite(det):
        return 0
    x = u[0]
    y = u[1]
    D = u[2]
    f[0] = f0[0]
    f[1] = f0[1]
    f[2] = f0[2]
    for m in range(n):
        if m:
            _rhs(S, x, y, f)
        r0 = hs * f[0]
        r1 = hs * f[1]
        x += (d * r0 - b * r1) / det
        y += (a * r1 - c * r0) / det
        D += hs * f[2]
    out[0] = x
    out[1] = y
    out[2] = D
    return 1


cdef int _extrap_step(const Sys* S, double* u, double* f0, double* J, double h, double* un, double* err) nogil:
    cdef double T[KORD][KORD][3]
    cdef int j, m, c
    cdef double ratio
    for j in range(KORD):
        if not _limp_euler(S, u, f0, J, h, j + 1, T[j][0]):
            return 0
        for m in range(1, j + 1):
            ratio = (j + 1.0) / (j + 1.0 - m) - 1.0
            for c in range(3):
                T[j][m][c] = T[j][m - 1][c] + (T[j][m - 1][c] - T[j - 1][m - 1][c]) / ratio
    for c in range(3):
        un[c] = T[KORD - 1][KORD - 1][c]
        err[c] = un[c] - T[KORD - 1][KORD - 2][c]
    return 1


cdef double _err_norm(double* err, double* u, double* un, double rtol, double atol) nogil:
    cdef double acc = 0.0, sc, q
    cdef int c
    for c in range(3):
        sc = atol + rtol * max(fabs(u[c]), fabs(un[c]))
        q = err[c] / sc
        acc += q * q
    return sqrt(acc / 3.0)


cdef void _stiffness(double* J, double* rho, double* growth) nogil:
    cdef double tr = J[0] + J[3]
    cdef double det = J[0] * J[3] - J[1] * J[2]
    cdef double disc = tr * tr / 4.0 - det
    cdef double r, l1, l2, re
    if disc >= 0.0:
        r = sqrt(disc)
        l1 = tr / 2.0 + r
        l2 = tr / 2.0 - r
        rho[0] = max(fabs(l1) if l1 < 0.0 else 0.0, fabs(l2) if l2 < 0.0 else 0.0)
        growth[0] = max(max(l1, l2), 0.0)
        return
    re = tr / 2.0
    if re < 0.0:
        rho[0] = sqrt(max(det, 0.0))
        growth[0] = 0.0
    else:
        rho[0] = 0.0
        growth[0] = re


# ----------------------------------------------------------------------------
# events


cdef inline double _hermite(double* u0, double* u1, double* f0, double* f1, double h, double theta, int c) nogil:
    cdef double t2 = theta * theta
    cdef double t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * u0[c] + (t3 - 2 * t2 + theta) * h * f0[c]
            + (-2 * t3 + 3 * t2) * u1[c] + (t3 - t2) * h * f1[c])


cdef inline bint _crossed(double g0, double g1, double direction) nogil:
    if g0 == 0.0:
        return False
    if direction > 0:
        return g0 < 0.0 and 0.0 <= g1
    if direction < 0:
        return g0 > 0.0 and 0.0 >= g1
    return g0 * g1 < 0.0 or g1 == 0.0


cdef int _step_to(const Sys* S, double* u, double* f0, double* J, double h, bint implicit, double* out) nogil:
    cdef double k7[3]
    cdef double err[3]
    if implicit:
        return _extrap_step(S, u, f0, J, h, out, err)
    _dopri_step(S, u, f0, h, out, k7, err)
    return 1


cdef double _locate(const Sys* S, double* u0, double* u1, double* f0, double* f1, double* J, double h,
                    bint implicit, int coord, double value, double event_tol, double* ut) nogil:
    cdef double g0 = u0[coord] - value
    cdef double g1 = u1[coord] - value
    cdef double lo = 0.0, hi = 1.0, glo = g0, mid, gm, theta
    cdef double a, ga, b, gb, gt
    cdef double best_theta = -1.0
    cdef double best[3]
    cdef int it, side = 0, c
    for it in range(60):
        mid = 0.5 * (lo + hi)
        gm = _hermite(u0, u1, f0, f1, h, mid, coord) - value
        if ((gm < 0.0) == (glo < 0.0)) and gm != 0.0:
            lo = mid
            glo = gm
        else:
            hi = mid
    theta = 0.5 * (lo + hi)

    a = 0.0
    ga = g0
    b = 1.0
    gb = g1
    for it in range(60):
        if not _step_to(S, u0, f0, J, theta * h, implicit, ut):
            break
        gt = ut[coord] - value
        best_theta = theta
        for c in range(3):
            best[c] = ut[c]
        if fabs(gt) < event_tol:
            ut[coord] = value
            return theta
        if (gt < 0.0) == (ga < 0.0):
            a = theta
            ga = gt
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b = theta
            gb = gt
            if side == 1:
                ga *= 0.5
            side = 1
        if b - a < 1e-16:
            break
        theta = (a * gb - b * ga) / (gb - ga)
        if not (a < theta < b):
            theta = 0.5 * (a + b)
    if best_theta < 0.0:
        for c in range(3):
            ut[c] = _hermite(u0, u1, f0, f1, h, theta, c)
        best_theta = theta
    else:
        for c in range(3):
            ut[c] = best[c]
    ut[coord] = value
    return best_theta


# ----------------------------------------------------------------------------
# Python-visible entry points


cdef int _setup(Sys* S, const long long[:, ::1] exps, const double[::1] coefs, const long long[::1] offsets,
                double eps, int code, double s_max, int mode, double direction) except -1:
    cdef Py_ssize_t n = exps.shape[0]
    cdef Py_ssize_t t
    cdef int deg = 1
    for t in range(5):
        S.off[t] = offsets[t]
    for t in range(n):
        deg = max(deg, <int>max(exps[t, 0], exps[t, 1]))
    if deg > MAXDEG:
        raise ValueError("polynomial degree above the compiled limit")
    S.exps = &exps[0, 0] if n > 0 else NULL
    S.coefs = &coefs[0] if n > 0 else NULL
    S.eps2 = eps * eps
    S.inv_eps2 = 1.0 / S.eps2
    S.code = code
    S.s_max = s_max
    S.mode = mode
    S.direction = direction
    S.deg = deg
    return 0


def rhs(const long long[:, ::1] exps, const double[::1] coefs, const long long[::1] offsets,
        double eps, int code, double s_max, int mode, double direction, double x, double y):
    cdef Sys S
    cdef double f[3]
    _setup(&S, exps, coefs, offsets, eps, code, s_max, mode, direction)
    _rhs(&S, x, y, f)
    return (f[0], f[1], f[2])


def jac(const long long[:, ::1] exps, const double[::1] coefs, const long long[::1] offsets,
        double eps, int code, double s_max, int mode, double direction, double x, double y):
    cdef Sys S
    cdef double J[4]
    _setup(&S, exps, coefs, offsets, eps, code, s_max, mode, direction)
    _jac(&S, x, y, J)
    return (J[0], J[1], J[2], J[3])


def integrate(const long long[:, ::1] exps, const double[::1] coefs, const long long[::1] offsets,
              double eps, int code, double s_max, int mode, double direction,
              const double[::1] u0, double t0, double t_end, double h0, const double[:, ::1] events,
              double rtol, double atol, double event_tol, double box, double stiff_threshold,
              double h_min, long long max_steps, int record):
    cdef Sys S
    _setup(&S, exps, coefs, offsets, eps, code, s_max, mode, direction)
    cdef double u[3]
    cdef double un[3]
    cdef double f[3]
    cdef double fn[3]
    cdef double err[3]
    cdef double J[4]
    cdef double ut[3]
    cdef double u_hit[3]
    cdef double t = t0, h, en, fac, h_next, rho, growth, th, theta_hit, other, t_ev
    cdef double span = t_end - t0
    cdef bint implicit = False, forced, ok
    cdef int order, n_stiff = 0, n_nonstiff = 0, hit, ei, coord, c, status = -1
    cdef long long steps = 0, rejected = 0, implicit_steps = 0
    cdef Py_ssize_t ne = events.shape[0]
    traj = [] if record else None

    for c in range(3):
        u[c] = u0[c]
    if h0 > 0:
        h = min(fabs(h0), span)
    else:
        h = min(1e-3, span)
    _rhs(&S, u[0], u[1], f)
    if record:
        traj.append((t, u[0], u[1], u[2]))

    while True:
        if steps >= max_steps:
            status = MAX_STEPS
            break
        if t >= t_end:
            status = T_END
            break
        if h > t_end - t:
            h = t_end - t
        if h < h_min * max(1.0, fabs(t)):
            status = UNDERFLOW
            break

        _jac(&S, u[0], u[1], J)
        _stiffness(J, &rho, &growth)
        if implicit:
            if not _extrap_step(&S, u, f, J, h, un, err):
                h *= 0.25
                rejected += 1
                continue
            order = KORD
        else:
            _dopri_step(&S, u, f, h, un, fn, err)
            order = 5
        ok = isfinite(un[0]) and isfinite(un[1]) and isfinite(un[2])
        if not ok:
            h *= 0.25
            rejected += 1
            continue
        en = _err_norm(err, u, un, rtol, atol)
        if not isfinite(en):
            h *= 0.25
            rejected += 1
            continue
        if en > 1.0:
            h *= max(0.2, 0.9 * pow(en, -1.0 / order))
            rejected += 1
            continue

        if implicit:
            _rhs(&S, un[0], un[1], fn)
            implicit_steps += 1
        steps += 1

        hit = -1
        theta_hit = 2.0
        for ei in range(ne):
            coord = <int>events[ei, 0]
            if not _crossed(u[coord] - events[ei, 1], un[coord] - events[ei, 1], events[ei, 2]):
                continue
            th = _locate(&S, u, un, f, fn, J, h, implicit, coord, events[ei, 1], event_tol, ut)
            other = ut[1 - coord]
            if events[ei, 3] <= other <= events[ei, 4] and th < theta_hit:
                hit = ei
                theta_hit = th
                for c in range(3):
                    u_hit[c] = ut[c]
        if hit >= 0:
            t_ev = t + theta_hit * h
            if record:
                traj.append((t_ev, u_hit[0], u_hit[1], u_hit[2]))
            stats = (steps, rejected, implicit_steps)
            return EVENT, t_ev, np.array([u_hit[0], u_hit[1], u_hit[2]]), hit, traj, stats

        for c in range(3):
            u[c] = un[c]
            f[c] = fn[c]
        t = t + h
        if record:
            traj.append((t, u[0], u[1], u[2]))
        if fabs(u[0]) > box or fabs(_physical_y(&S, u[1])) > box:
            status = ESCAPED
            break

        if en > 0.0:
            fac = 0.9 * pow(en, -1.0 / order)
        else:
            fac = 5.0
        h_next = h * min(4.0 if implicit else 5.0, max(0.2, fac))

        if implicit:
            if growth * h_next > 0.5:
                implicit = False
                n_nonstiff = 0
                h_next = min(h_next, 0.5 / growth)
            elif rho * h_next < 1.0 and (stiff_threshold <= 0.0 or rho <= stiff_threshold):
                n_nonstiff += 1
                if n_nonstiff >= 3:
                    implicit = False
                    n_nonstiff = 0
            else:
                n_nonstiff = 0
        elif growth * h < 0.5:
            forced = stiff_threshold > 0.0 and rho > stiff_threshold
            if rho * h >= 0.9 * EXPLICIT_STAB or forced:
                n_stiff += 1
                if n_stiff >= 3 or forced:
                    implicit = True
                    n_stiff = 0
            else:
                n_stiff = 0
        h = h_next

    stats = (steps, rejected, implicit_steps)
    return status, t, np.array([u[0], u[1], u[2]]), -1, traj, stats
