"""Reference (pure Python) stiff/non-stiff integrator for the regularized field.

The state is ``(x, y, D)`` where ``D`` accumulates the divergence of the
integrated vector field, so transition-map derivatives come for free through
the Liouville formula.  Steps are taken with the Dormand-Prince 5(4) pair
while the problem is non-stiff and with an extrapolated linearly implicit
Euler scheme (orders 1..4, Aitken-Neville tableau) once the local spectral
radius times the step size leaves the explicit stability region.  Section
crossings are located on a cubic Hermite interpolant and then polished by
re-stepping from the last accepted point so the crossing residual is below
the event tolerance.

``_kernels.pyx`` is a line-by-line port of this module; keep them in sync.
"""
from __future__ import annotations

import math

import numpy as np

# status codes shared with the compiled kernel
EVENT = 0
T_END = 1
ESCAPED = 2
UNDERFLOW = 3
MAX_STEPS = 4
NONFINITE = 5

MODE_ORIGINAL = 0
MODE_FAMILY = 1

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
A21 = 1.0 / 5
A31, A32 = 3.0 / 40, 9.0 / 40
A41, A42, A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
A51, A52, A53, A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
A61, A62, A63, A64, A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
B1, B3, B4, B5, B6 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
E1, E3, E4, E5, E6, E7 = 71.0 / 57600, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40

EXTRAP_ORDER = 4  # substep sequence 1, 2, 3, 4
EXPLICIT_STAB = 3.3  # approximate real stability boundary of the explicit pair


# ----------------------------------------------------------------------------
# right-hand sides


def _phi(code: int, s: float, s_max: float):
    if s > s_max:
        return 1.0, 0.0
    if s < -s_max:
        return 0.0, 0.0
    if code == 0:
        return 0.5 + math.atan(s) / math.pi, 1.0 / (math.pi * (1.0 + s * s))
    q = 1.0 + s * s
    r = math.sqrt(q)
    return 0.5 + 0.5 * s / r, 0.5 / (q * r)


class PolySystem:
    """Regularized polynomial field with a built-in regularization family.

    ``exps`` is ``(N, 2)``, ``coefs`` is ``(N,)`` and ``offsets`` (length 5)
    delimits the terms of ``X+, Y+, X-, Y-`` in that order.
    """

    def __init__(self, exps, coefs, offsets, eps, family_code, s_max, mode=MODE_ORIGINAL, direction=1.0):
        self.exps = [(int(i), int(j)) for i, j in np.asarray(exps).reshape(-1, 2)]
        self.coefs = [float(v) for v in np.asarray(coefs).ravel()]
        self.offsets = [int(v) for v in offsets]
        self.eps2 = float(eps) ** 2
        self.inv_eps2 = 1.0 / self.eps2
        self.code = int(family_code)
        self.s_max = float(s_max)
        self.mode = int(mode)
        self.direction = float(direction)
        self.deg = max([max(i, j) for i, j in self.exps] + [1])

    def _components(self, x, y):
        xp = [1.0] * (self.deg + 1)
        yp = [1.0] * (self.deg + 1)
        for k in range(1, self.deg + 1):
            xp[k] = xp[k - 1] * x
            yp[k] = yp[k - 1] * y
        v = [0.0] * 4
        vx = [0.0] * 4
        vy = [0.0] * 4
        for comp in range(4):
            acc = accx = accy = 0.0
            for t in range(self.offsets[comp], self.offsets[comp + 1]):
                i, j = self.exps[t]
                a = self.coefs[t]
                acc += a * xp[i] * yp[j]
                if i:
                    accx += a * i * xp[i - 1] * yp[j]
                if j:
                    accy += a * j * xp[i] * yp[j - 1]
            v[comp] = acc
            vx[comp] = accx
            vy[comp] = accy
        return v, vx, vy

    def _blend(self, x, yphys, s, want_jac):
        phi, dphi = _phi(self.code, s, self.s_max)
        v, vx, vy = self._components(x, yphys)
        om = 1.0 - phi
        X = v[0] * phi + v[2] * om
        Y = v[1] * phi + v[3] * om
        j00 = vx[0] * phi + vx[2] * om
        j11s = vy[1] * phi + vy[3] * om  # smooth part of dY/dy
        k = dphi * self.inv_eps2
        j11 = j11s + (v[1] - v[3]) * k
        if not want_jac:
            return X, Y, j00 + j11, None
        j01 = vy[0] * phi + vy[2] * om + (v[0] - v[2]) * k
        j10 = vx[1] * phi + vx[3] * om
        return X, Y, j00 + j11, (j00, j01, j10, j11)

    def rhs(self, x, y):
        d = self.direction
        if self.mode == MODE_ORIGINAL:
            X, Y, div, _ = self._blend(x, y, y * self.inv_eps2, False)
            return d * X, d * Y, d * div
        e2 = self.eps2
        X, Y, div, _ = self._blend(x, e2 * y, y, False)
        return d * e2 * X, d * Y, d * e2 * div

    def jac(self, x, y):
        d = self.direction
        if self.mode == MODE_ORIGINAL:
            _, _, _, J = self._blend(x, y, y * self.inv_eps2, True)
            return d * J[0], d * J[1], d * J[2], d * J[3]
        e2 = self.eps2
        _, _, _, J = self._blend(x, e2 * y, y, True)
        return d * e2 * J[0], d * e2 * e2 * J[1], d * J[2], d * e2 * J[3]

    def physical_y(self, y):
        return y * self.eps2 if self.mode == MODE_FAMILY else y


class FieldSystem:
    """Same interface as :class:`PolySystem` around any ``RegularizedField``."""

    def __init__(self, field, mode=MODE_ORIGINAL, direction=1.0):
        self.field = field
        self.eps2 = field.eps**2
        self.mode = int(mode)
        self.direction = float(direction)

    def rhs(self, x, y):
        d = self.direction
        if self.mode == MODE_ORIGINAL:
            f = self.field.value(x, y)
            _, div = self.field.jacobian(x, y)
            return d * f[0], d * f[1], d * div
        e2 = self.eps2
        f = self.field.value(x, e2 * y)
        _, div = self.field.jacobian(x, e2 * y)
        return d * e2 * f[0], d * f[1], d * e2 * div

    def jac(self, x, y):
        d = self.direction
        if self.mode == MODE_ORIGINAL:
            J, _ = self.field.jacobian(x, y)
            return d * J[0, 0], d * J[0, 1], d * J[1, 0], d * J[1, 1]
        e2 = self.eps2
        J, _ = self.field.jacobian(x, e2 * y)
        return d * e2 * J[0, 0], d * e2 * e2 * J[0, 1], d * J[1, 0], d * e2 * J[1, 1]

    def physical_y(self, y):
        return y * self.eps2 if self.mode == MODE_FAMILY else y


# ----------------------------------------------------------------------------
# one-step methods


def _dopri_step(sys, u, f0, h):
    """One Dormand-Prince step; returns ``(u_new, f_new, err_vector)``."""
    x, y, D = u
    k1 = f0
    k2 = sys.rhs(x + h * A21 * k1[0], y + h * A21 * k1[1])
    k3 = sys.rhs(x + h * (A31 * k1[0] + A32 * k2[0]), y + h * (A31 * k1[1] + A32 * k2[1]))
    k4 = sys.rhs(
        x + h * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
        y + h * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]),
    )
    k5 = sys.rhs(
        x + h * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
        y + h * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
    )
    k6 = sys.rhs(
        x + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
        y + h * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
    )
    un = [0.0, 0.0, 0.0]
    for c in range(3):
        un[c] = u[c] + h * (B1 * k1[c] + B3 * k3[c] + B4 * k4[c] + B5 * k5[c] + B6 * k6[c])
    k7 = sys.rhs(un[0], un[1])
    err = [0.0, 0.0, 0.0]
    for c in range(3):
        err[c] = h * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c])
    return un, k7, err


def _limp_euler(sys, u, f0, J, h, n):
    """``n`` linearly implicit Euler substeps of size ``h/n`` with a frozen Jacobian."""
    hs = h / n
    a = 1.0 - hs * J[0]
    b = -hs * J[1]
    c = -hs * J[2]
    d = 1.0 - hs * J[3]
    det = a * d - b * c
    if det == 0.0 or not math.isfinite(det):
        return None
    x, y, D = u
    f = f0
    for m in range(n):
        if m:
            f = sys.rhs(x, y)
        r0 = hs * f[0]
        r1 = hs * f[1]
        dx = (d * r0 - b * r1) / det
        dy = (a * r1 - c * r0) / det
        x += dx
        y += dy
        D += hs * f[2]
    return [x, y, D]


def _extrap_step(sys, u, f0, J, h):
    """Extrapolated linearly implicit Euler; returns ``(u_new, err_vector)`` or ``None``."""
    k = EXTRAP_ORDER
    T = [[None] * k for _ in range(k)]
    for j in range(k):
        r = _limp_euler(sys, u, f0, J, h, j + 1)
        if r is None:
            return None
        T[j][0] = r
        for m in range(1, j + 1):
            # harmonic sequence n_j = j + 1, first-order error expansion
            ratio = (j + 1.0) / (j + 1.0 - m) - 1.0
            T[j][m] = [T[j][m - 1][c] + (T[j][m - 1][c] - T[j - 1][m - 1][c]) / ratio for c in range(3)]
    un = T[k - 1][k - 1]
    err = [un[c] - T[k - 1][k - 2][c] for c in range(3)]
    return un, err


def _err_norm(err, u, un, rtol, atol):
    acc = 0.0
    for c in range(3):
        sc = atol + rtol * max(abs(u[c]), abs(un[c]))
        q = err[c] / sc
        acc += q * q
    return math.sqrt(acc / 3.0)


def _stiffness(J):
    """``(rho, growth)``: largest modulus among decaying eigenvalues and largest positive real part.

    Only decaying modes make a problem stiff; a fast growing mode (a repelling
    slow manifold) must be resolved by small steps, and an implicit method
    would wrongly damp it.
    """
    tr = J[0] + J[3]
    det = J[0] * J[3] - J[1] * J[2]
    disc = tr * tr / 4.0 - det
    if disc >= 0.0:
        r = math.sqrt(disc)
        l1 = tr / 2.0 + r
        l2 = tr / 2.0 - r
        rho = max(abs(l1) if l1 < 0.0 else 0.0, abs(l2) if l2 < 0.0 else 0.0)
        growth = max(l1, l2, 0.0)
        return rho, growth
    re = tr / 2.0
    mod = math.sqrt(max(det, 0.0))
    if re < 0.0:
        return mod, 0.0
    return 0.0, re


# ----------------------------------------------------------------------------
# events


def _hermite(u0, u1, f0, f1, h, theta, c):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * u0[c] + h10 * h * f0[c] + h01 * u1[c] + h11 * h * f1[c]


def _crossed(g0, g1, direction):
    if g0 == 0.0:
        return False
    if direction > 0:
        return g0 < 0.0 <= g1
    if direction < 0:
        return g0 > 0.0 >= g1
    return g0 * g1 < 0.0 or g1 == 0.0


def _step_to(sys, u, f0, J, h, implicit):
    if implicit:
        r = _extrap_step(sys, u, f0, J, h)
        return None if r is None else r[0]
    return _dopri_step(sys, u, f0, h)[0]


def _locate(sys, u0, u1, f0, f1, J, h, implicit, coord, value, event_tol):
    """Crossing fraction ``theta`` and state; polished on the actual stepper."""
    g0 = u0[coord] - value
    g1 = u1[coord] - value
    # root of the Hermite cubic by bisection
    lo, hi, glo = 0.0, 1.0, g0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = _hermite(u0, u1, f0, f1, h, mid, coord) - value
        if (gm < 0.0) == (glo < 0.0) and gm != 0.0:
            lo, glo = mid, gm
        else:
            hi = mid
    theta = 0.5 * (lo + hi)

    # polish: regula falsi (Illinois) on theta -> coord(step(u0, theta h)) - value
    a, ga = 0.0, g0
    b, gb = 1.0, g1
    best = None
    side = 0
    for _ in range(60):
        ut = _step_to(sys, u0, f0, J, theta * h, implicit)
        if ut is None:
            break
        gt = ut[coord] - value
        best = (theta, ut)
        if abs(gt) < event_tol:
            return theta, ut
        if (gt < 0.0) == (ga < 0.0):
            a, ga = theta, gt
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b, gb = theta, gt
            if side == 1:
                ga *= 0.5
            side = 1
        if b - a < 1e-16:
            break
        theta = (a * gb - b * ga) / (gb - ga)
        if not (a < theta < b):
            theta = 0.5 * (a + b)
    if best is None:
        ut = [_hermite(u0, u1, f0, f1, h, theta, c) for c in range(3)]
        best = (theta, ut)
    # force the residual to zero on the crossing coordinate itself
    th, ut = best
    ut = list(ut)
    ut[coord] = value
    return th, ut


# ----------------------------------------------------------------------------
# driver


def integrate(sys, u0, t0, t_end, h0, events, opts):
    """Integrate ``sys`` from ``u0`` until ``t_end``, a terminal event, or failure.

    ``events`` is a sequence of rows ``(coord, value, direction, lo, hi)``:
    the crossing of ``u[coord] = value`` in the given direction counts only
    when the other spatial coordinate lies in ``[lo, hi]``.  ``opts`` is a
    dict with ``rtol, atol, event_tol, box, stiff_threshold, h_min,
    max_steps, record``.

    Returns ``(status, t, u, event_index, trajectory, stats)``.
    """
    rtol = opts["rtol"]
    atol = opts["atol"]
    event_tol = opts["event_tol"]
    box = opts["box"]
    stiff_threshold = opts["stiff_threshold"]
    h_min = opts["h_min"]
    max_steps = int(opts["max_steps"])
    record = bool(opts["record"])

    u = [float(v) for v in u0]
    t = float(t0)
    span = t_end - t0
    h = min(abs(h0), span) if h0 > 0 else min(1e-3, span)
    f = sys.rhs(u[0], u[1])
    traj = [(t, u[0], u[1], u[2])] if record else None
    implicit = False
    n_stiff = n_nonstiff = 0
    stats = {"steps": 0, "rejected": 0, "implicit_steps": 0}

    while True:
        if stats["steps"] >= max_steps:
            return MAX_STEPS, t, u, -1, traj, stats
        if t >= t_end:
            return T_END, t, u, -1, traj, stats
        if h > t_end - t:
            h = t_end - t
        if h < h_min * max(1.0, abs(t)):
            return UNDERFLOW, t, u, -1, traj, stats

        J = sys.jac(u[0], u[1])
        rho, growth = _stiffness(J)
        if implicit:
            res = _extrap_step(sys, u, f, J, h)
            if res is None:
                h *= 0.25
                stats["rejected"] += 1
                continue
            un, err = res
            order = EXTRAP_ORDER
        else:
            un, fn, err = _dopri_step(sys, u, f, h)
            order = 5
        if not all(math.isfinite(v) for v in un):
            h *= 0.25
            stats["rejected"] += 1
            continue
        en = _err_norm(err, u, un, rtol, atol)
        if not math.isfinite(en):
            h *= 0.25
            stats["rejected"] += 1
            continue
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** (-1.0 / order))
            stats["rejected"] += 1
            continue

        # accepted
        if implicit:
            fn = sys.rhs(un[0], un[1])
            stats["implicit_steps"] += 1
        stats["steps"] += 1
        t_new = t + h

        hit = -1
        theta_hit = 2.0
        u_hit = None
        for ei, (coord, value, direction, lo, hi) in enumerate(events):
            coord = int(coord)
            if not _crossed(u[coord] - value, un[coord] - value, direction):
                continue
            th, ut = _locate(sys, u, un, f, fn, J, h, implicit, coord, value, event_tol)
            other = ut[1 - coord]
            if lo <= other <= hi and th < theta_hit:
                hit, theta_hit, u_hit = ei, th, ut
        if hit >= 0:
            t_ev = t + theta_hit * h
            if record:
                traj.append((t_ev, u_hit[0], u_hit[1], u_hit[2]))
            return EVENT, t_ev, u_hit, hit, traj, stats

        u = un
        f = fn
        t = t_new
        if record:
            traj.append((t, u[0], u[1], u[2]))
        if abs(u[0]) > box or abs(sys.physical_y(u[1])) > box:
            return ESCAPED, t, u, -1, traj, stats

        fac = 0.9 * en ** (-1.0 / order) if en > 0.0 else 5.0
        h_next = h * min(5.0 if not implicit else 4.0, max(0.2, fac))

        # stiffness switching with hysteresis
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
