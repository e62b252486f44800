"""Pure-Python / numpy implementations of the hot simulation kernels.

Two independent integrators are provided for the same rolling-ball physics
(constant friction deceleration, specular wall reflection scaled by the
restitution factor, normal-component transfer on ball-ball impact):

* ``simulate_push`` -- event-driven: closed-form event times, exact
  advancement between events.  This is the production path.
* ``dense_push_batch`` -- fixed-step integrator (vectorized over pushes)
  with continuous collision checks inside each step.  This is the test
  oracle; it shares the physical model but none of the event machinery.

``musel.kernels`` re-exports either this module or the compiled
``_core`` extension, whichever is available.
"""

import math

import numpy as np

BACKEND = "python"

# event codes shared by both lanes
EV_START = 0
EV_STOP = 1
EV_WALL_X = 2
EV_WALL_Y = 3
EV_DIAG = 4
EV_DIAG_END = 5
EV_HIT = 6

_DIR_EPS = 1e-14


class EventCapError(RuntimeError):
    """Raised when a single push generates more events than the cap allows."""


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def diag_frame(geom):
    """Unit tangent/normal frame of the diagonal wall segment.

    Returns (e1x, e1y, tx, ty, seg_len, nx, ny, c) with the normal oriented
    so that the table interior satisfies n.p - c < 0 (the origin is asserted
    to be interior by config validation).
    """
    x1, y1, x2, y2 = geom[4], geom[5], geom[6], geom[7]
    dx, dy = x2 - x1, y2 - y1
    seg_len = math.hypot(dx, dy)
    tx, ty = dx / seg_len, dy / seg_len
    nx, ny = -ty, tx
    c = nx * x1 + ny * y1
    if -c > 0.0:  # origin on positive side: flip
        nx, ny, c = -nx, -ny, -c
    return x1, y1, tx, ty, seg_len, nx, ny, c


def _time_for_distance(v, mu, s):
    # time to cover path length s under deceleration mu; s <= v^2/(2 mu)
    disc = v * v - 2.0 * mu * s
    if disc < 0.0:
        disc = 0.0
    return (v - math.sqrt(disc)) / mu


# ---------------------------------------------------------------------------
# quartic first-crossing search (ball-ball events)
# ---------------------------------------------------------------------------

def _quad_roots(a, b, c):
    """Real roots of a t^2 + b t + c, ascending.  Degenerate cases welcome."""
    if abs(a) < 1e-300:
        if abs(b) < 1e-300:
            return ()
        return (-c / b,)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    sq = math.sqrt(disc)
    if b >= 0.0:
        q = -0.5 * (b + sq)
    else:
        q = -0.5 * (b - sq)
    r1 = q / a
    r2 = c / q if abs(q) > 1e-300 else r1
    return (r1, r2) if r1 <= r2 else (r2, r1)


def _poly_eval(c4, c3, c2, c1, c0, t):
    return (((c4 * t + c3) * t + c2) * t + c1) * t + c0


def _bisect_root(c4, c3, c2, c1, c0, lo, hi):
    # f(lo) and f(hi) have opposite signs; fixed iteration count keeps the
    # result identical across lanes
    flo = _poly_eval(c4, c3, c2, c1, c0, lo)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        fm = _poly_eval(c4, c3, c2, c1, c0, mid)
        if (flo <= 0.0) == (fm <= 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def first_quartic_crossing(c4, c3, c2, c1, c0, t_hi):
    """Earliest t in (0, t_hi] where the quartic crosses from > 0 to <= 0.

    Used for the squared ball-ball separation minus contact distance, so a
    downward crossing is the moment two balls touch while approaching.
    Returns a negative value when there is no crossing.  Exact up to
    bisection: breakpoints come from the polynomial's critical points, so no
    sign change can be missed.
    """
    if t_hi <= 0.0:
        return -1.0
    # critical points of f' (a cubic) are roots of f'' (a quadratic)
    d2 = sorted(r for r in _quad_roots(12.0 * c4, 6.0 * c3, 2.0 * c2)
                if 0.0 < r < t_hi)
    # f' is monotone between those; bisect each bracket for roots of f'
    fp = lambda t: ((4.0 * c4 * t + 3.0 * c3) * t + 2.0 * c2) * t + c1
    pts = [0.0] + d2 + [t_hi]
    crit = []
    for a, b in zip(pts[:-1], pts[1:]):
        fa, fb = fp(a), fp(b)
        if (fa <= 0.0) != (fb <= 0.0):
            lo, hi = a, b
            for _ in range(90):
                mid = 0.5 * (lo + hi)
                if (fp(lo) <= 0.0) == (fp(mid) <= 0.0):
                    lo = mid
                else:
                    hi = mid
            crit.append(0.5 * (lo + hi))
    # f is monotone between consecutive critical points
    pts = [0.0] + crit + [t_hi]
    for a, b in zip(pts[:-1], pts[1:]):
        fa = _poly_eval(c4, c3, c2, c1, c0, a)
        fb = _poly_eval(c4, c3, c2, c1, c0, b)
        if fa > 0.0 and fb <= 0.0:
            return _bisect_root(c4, c3, c2, c1, c0, a, b)
    return -1.0


# ---------------------------------------------------------------------------
# event-driven simulation
# ---------------------------------------------------------------------------

def simulate_push(geom, p0x, p0y, ux, uy, v0, s2x, s2y,
                  event_cap=1000, record=False):
    """Roll the pushed ball (and optionally a second ball) to rest.

    geom = (half_extent, ball_radius, friction_decel, restitution,
    diag_x1, diag_y1, diag_x2, diag_y2).  Pass nan for (s2x, s2y) when no
    second ball is present.  Returns (rest_x, rest_y, rest2_x, rest2_y,
    n_events, events) where events is a list of
    (t, x, y, vx, vy, code) rows for the pushed ball, or None.
    """
    half, rs, mu, e, _, _, _, _ = geom
    e1x, e1y, tx, ty, seg_len, nx, ny, c = diag_frame(geom)
    bound = half - rs
    has2 = s2x == s2x  # nan check

    px, py = p0x, p0y
    dx, dy = ux, uy
    v1 = v0
    qx, qy = (s2x, s2y) if has2 else (0.0, 0.0)
    gx, gy = 0.0, 0.0  # second ball direction
    v2 = 0.0
    t_now = 0.0
    n_events = 0
    events = [(0.0, px, py, v1 * dx, v1 * dy, EV_START)] if record else None

    while v1 > 0.0 or v2 > 0.0:
        n_events += 1
        if n_events > event_cap:
            raise EventCapError(f"event cap {event_cap} exceeded")

        best_t = math.inf
        best_kind = EV_STOP
        best_sphere = 1
        best_aux = 0.0

        for sph in (1, 2):
            if sph == 1:
                if v1 <= 0.0:
                    continue
                cpx, cpy, cdx, cdy, cv = px, py, dx, dy, v1
            else:
                if v2 <= 0.0:
                    continue
                cpx, cpy, cdx, cdy, cv = qx, qy, gx, gy, v2
            s_max = cv * cv / (2.0 * mu)
            t_stop = cv / mu
            if t_stop < best_t:
                best_t, best_kind, best_sphere = t_stop, EV_STOP, sph
            # axis walls: contact planes at +-(half - rs); a tiny negative
            # travel distance means the ball sits on (or a hair past) the
            # plane after an earlier snap, so bounce immediately
            for comp, d_comp, p_comp in ((0, cdx, cpx), (1, cdy, cpy)):
                if d_comp > _DIR_EPS:
                    s = (bound - p_comp) / d_comp
                elif d_comp < -_DIR_EPS:
                    s = (-bound - p_comp) / d_comp
                else:
                    continue
                if -1e-9 <= s <= s_max:
                    th = _time_for_distance(cv, mu, max(s, 0.0))
                    if th < best_t:
                        best_t = th
                        best_kind = EV_WALL_X if comp == 0 else EV_WALL_Y
                        best_sphere = sph
                        best_aux = 1.0 if d_comp > 0.0 else -1.0
            # diagonal wall face (center hits the offset line n.p = c - rs)
            ndotu = nx * cdx + ny * cdy
            if ndotu > _DIR_EPS:
                s = (c - rs - (nx * cpx + ny * cpy)) / ndotu
                if -1e-9 <= s <= s_max:
                    s = max(s, 0.0)
                    hx, hy = cpx + s * cdx, cpy + s * cdy
                    proj = (hx - e1x) * tx + (hy - e1y) * ty
                    if 0.0 <= proj <= seg_len:
                        th = _time_for_distance(cv, mu, s)
                        if th < best_t:
                            best_t, best_kind, best_sphere = th, EV_DIAG, sph
            # diagonal wall endpoints (capsule caps)
            for k in (0, 1):
                ex = e1x + k * (seg_len * tx)
                ey = e1y + k * (seg_len * ty)
                wx, wy = cpx - ex, cpy - ey
                bq = wx * cdx + wy * cdy
                cq = wx * wx + wy * wy - rs * rs
                if bq < 0.0 and cq > -1e-9:
                    disc = bq * bq - cq
                    if disc > 0.0:
                        s = -bq - math.sqrt(disc)
                        if -1e-9 <= s <= s_max:
                            th = _time_for_distance(cv, mu, max(s, 0.0))
                            if th < best_t:
                                best_t = th
                                best_kind, best_sphere = EV_DIAG_END, sph
                                best_aux = float(k)

        # ball-ball contact: squared separation is quartic in time
        if has2 and (v1 > 0.0 or v2 > 0.0):
            m1 = 1.0 if v1 > 0.0 else 0.0
            m2 = 1.0 if v2 > 0.0 else 0.0
            ax_, ay_ = px - qx, py - qy
            bx_ = dx * v1 * m1 - gx * v2 * m2
            by_ = dy * v1 * m1 - gy * v2 * m2
            cx_ = -0.5 * mu * (dx * m1 - gx * m2)
            cy_ = -0.5 * mu * (dy * m1 - gy * m2)
            rr = 2.0 * rs
            c0 = ax_ * ax_ + ay_ * ay_ - rr * rr
            c1 = 2.0 * (ax_ * bx_ + ay_ * by_)
            c2 = bx_ * bx_ + by_ * by_ + 2.0 * (ax_ * cx_ + ay_ * cy_)
            c3 = 2.0 * (bx_ * cx_ + by_ * cy_)
            c4 = cx_ * cx_ + cy_ * cy_
            th = first_quartic_crossing(c4, c3, c2, c1, c0, best_t)
            if 0.0 < th < best_t:
                best_t, best_kind = th, EV_HIT

        # advance both balls to the event time
        tau = best_t
        if v1 > 0.0:
            step = min(tau, v1 / mu)
            d = v1 * step - 0.5 * mu * step * step
            px += dx * d
            py += dy * d
            v1 = max(v1 - mu * tau, 0.0)
        if v2 > 0.0:
            step = min(tau, v2 / mu)
            d = v2 * step - 0.5 * mu * step * step
            qx += gx * d
            qy += gy * d
            v2 = max(v2 - mu * tau, 0.0)
        t_now += tau

        # resolve
        kind = best_kind
        if kind == EV_STOP:
            # clamp exactly; the advance can leave a sub-ulp residual speed
            if best_sphere == 1:
                v1 = 0.0
            else:
                v2 = 0.0
        elif kind in (EV_WALL_X, EV_WALL_Y):
            wall = bound * best_aux
            if best_sphere == 1:
                if kind == EV_WALL_X:
                    px = wall
                    dx = -dx
                else:
                    py = wall
                    dy = -dy
                v1 *= e
            else:
                if kind == EV_WALL_X:
                    qx = wall
                    gx = -gx
                else:
                    qy = wall
                    gy = -gy
                v2 *= e
        elif kind == EV_DIAG:
            if best_sphere == 1:
                corr = (nx * px + ny * py) - (c - rs)
                px -= corr * nx
                py -= corr * ny
                dn = dx * nx + dy * ny
                dx -= 2.0 * dn * nx
                dy -= 2.0 * dn * ny
                v1 *= e
            else:
                corr = (nx * qx + ny * qy) - (c - rs)
                qx -= corr * nx
                qy -= corr * ny
                dn = gx * nx + gy * ny
                gx -= 2.0 * dn * nx
                gy -= 2.0 * dn * ny
                v2 *= e
        elif kind == EV_DIAG_END:
            ex = e1x + best_aux * (seg_len * tx)
            ey = e1y + best_aux * (seg_len * ty)
            if best_sphere == 1:
                mxv, myv = px - ex, py - ey
            else:
                mxv, myv = qx - ex, qy - ey
            mn = math.hypot(mxv, myv)
            mxv, myv = mxv / mn, myv / mn
            if best_sphere == 1:
                px, py = ex + mxv * rs, ey + myv * rs
                dn = dx * mxv + dy * myv
                dx -= 2.0 * dn * mxv
                dy -= 2.0 * dn * myv
                v1 *= e
            else:
                qx, qy = ex + mxv * rs, ey + myv * rs
                dn = gx * mxv + gy * myv
                gx -= 2.0 * dn * mxv
                gy -= 2.0 * dn * myv
                v2 *= e
        elif kind == EV_HIT:
            hnx, hny = qx - px, qy - py
            hn = math.hypot(hnx, hny)
            hnx, hny = hnx / hn, hny / hn
            qx, qy = px + hnx * 2.0 * rs, py + hny * 2.0 * rs
            v1x, v1y = dx * v1, dy * v1
            v2x, v2y = gx * v2, gy * v2
            a1n = v1x * hnx + v1y * hny
            a2n = v2x * hnx + v2y * hny
            # swap normal components, scaled by the restitution factor
            n1x = v1x - a1n * hnx + e * a2n * hnx
            n1y = v1y - a1n * hny + e * a2n * hny
            n2x = v2x - a2n * hnx + e * a1n * hnx
            n2y = v2y - a2n * hny + e * a1n * hny
            v1 = math.hypot(n1x, n1y)
            if v1 > 1e-13:
                dx, dy = n1x / v1, n1y / v1
            else:
                v1 = 0.0
            v2 = math.hypot(n2x, n2y)
            if v2 > 1e-13:
                gx, gy = n2x / v2, n2y / v2
            else:
                v2 = 0.0

        # keep directions unit-length against rounding drift
        if v1 > 0.0:
            nrm = math.hypot(dx, dy)
            dx, dy = dx / nrm, dy / nrm
        if v2 > 0.0:
            nrm = math.hypot(gx, gy)
            gx, gy = gx / nrm, gy / nrm

        if record and (best_sphere == 1 or kind == EV_HIT):
            events.append((t_now, px, py, v1 * dx, v1 * dy, kind))

    r2x, r2y = (qx, qy) if has2 else (math.nan, math.nan)
    return px, py, r2x, r2y, n_events, events


def simulate_push_batch(geom, p0, u, v0, s2, event_cap=1000):
    """Event-driven rest positions for many pushes. Returns (n, 2) array."""
    n = p0.shape[0]
    out = np.empty((n, 2))
    if s2 is None:
        sx = sy = math.nan
    for i in range(n):
        if s2 is not None:
            sx, sy = s2[i, 0], s2[i, 1]
        rx, ry, _, _, _, _ = simulate_push(
            geom, p0[i, 0], p0[i, 1], u[i, 0], u[i, 1], float(v0[i]),
            sx, sy, event_cap, False)
        out[i, 0] = rx
        out[i, 1] = ry
    return out


# ---------------------------------------------------------------------------
# fixed-step oracle integrator (vectorized over pushes)
# ---------------------------------------------------------------------------

def _seg_wall_lambda(p, d, bound):
    """Earliest crossing fraction of straight segments p -> p+d with the four
    wall contact planes.  Returns (lam, kind, aux) arrays; lam = inf if none."""
    n = p.shape[0]
    lam = np.full(n, np.inf)
    kind = np.zeros(n, dtype=np.int64)
    aux = np.zeros(n)
    for comp, ev in ((0, EV_WALL_X), (1, EV_WALL_Y)):
        for sign in (1.0, -1.0):
            dc = d[:, comp]
            moving = sign * dc > _DIR_EPS
            with np.errstate(divide="ignore", invalid="ignore"):
                lm = (sign * bound - p[:, comp]) / dc
            ok = moving & (lm >= -1e-9) & (lm <= 1.0)
            lm = np.maximum(lm, 0.0)
            ok &= lm < lam
            lam = np.where(ok, lm, lam)
            kind = np.where(ok, ev, kind)
            aux = np.where(ok, sign, aux)
    return lam, kind, aux


def _seg_diag_lambda(p, d, rs, frame):
    e1x, e1y, tx, ty, seg_len, nx, ny, c = frame
    n = p.shape[0]
    lam = np.full(n, np.inf)
    kind = np.zeros(n, dtype=np.int64)
    aux = np.zeros(n)
    ndotd = d[:, 0] * nx + d[:, 1] * ny
    ndotp = p[:, 0] * nx + p[:, 1] * ny
    with np.errstate(divide="ignore", invalid="ignore"):
        lf = (c - rs - ndotp) / ndotd
    ok = (ndotd > _DIR_EPS) & (lf >= -1e-9) & (lf <= 1.0)
    lf = np.where(ok, np.maximum(lf, 0.0), 0.0)
    hx = p[:, 0] + lf * d[:, 0]
    hy = p[:, 1] + lf * d[:, 1]
    proj = (hx - e1x) * tx + (hy - e1y) * ty
    ok &= (proj >= 0.0) & (proj <= seg_len)
    lam = np.where(ok, lf, lam)
    kind = np.where(ok, EV_DIAG, kind)
    for k in (0.0, 1.0):
        ex = e1x + k * seg_len * tx
        ey = e1y + k * seg_len * ty
        wx = p[:, 0] - ex
        wy = p[:, 1] - ey
        aq = d[:, 0] ** 2 + d[:, 1] ** 2
        bq = wx * d[:, 0] + wy * d[:, 1]
        cq = wx * wx + wy * wy - rs * rs
        disc = bq * bq - aq * cq
        with np.errstate(divide="ignore", invalid="ignore"):
            le = (-bq - np.sqrt(np.maximum(disc, 0.0))) / aq
        ok = (bq < 0.0) & (cq > -1e-9) & (disc > 0.0) & (aq > 0.0) \
            & (le >= -1e-9) & (le <= 1.0)
        le = np.maximum(le, 0.0)
        ok &= le < lam
        lam = np.where(ok, le, lam)
        kind = np.where(ok, EV_DIAG_END, kind)
        aux = np.where(ok, k, aux)
    return lam, kind, aux


def _advance_exact(p, dirv, v, mu, tau):
    """Exact constant-deceleration advance of (p, v) by time tau (arrays)."""
    tcap = np.minimum(tau, v / mu)
    dist = v * tcap - 0.5 * mu * tcap * tcap
    p = p + dirv * dist[:, None]
    v = np.maximum(v - mu * tau, 0.0)
    return p, v


def dense_push_batch(geom, p0, u, v0, s2, dt=1e-4, max_steps=2_000_000):
    """Fixed-step rest positions for many pushes; oracle for simulate_push.

    Steps every ball by dt.  Within a step each ball moves along a straight
    sub-path; collisions are located continuously on that sub-path (fraction
    lambda), resolved, and the remainder of the step is re-integrated, so the
    scheme's error is O(dt^2) per event rather than O(dt).
    """
    half, rs, mu, e, _, _, _, _ = geom
    frame = diag_frame(geom)
    bound = half - rs
    n = p0.shape[0]
    p1 = np.array(p0, dtype=float)
    with np.errstate(invalid="ignore"):
        d1 = np.array(u, dtype=float)
    v1 = np.array(v0, dtype=float)
    has2 = s2 is not None
    if has2:
        p2 = np.array(s2, dtype=float)
        d2 = np.zeros_like(p2)
        v2 = np.zeros(n)
    for _ in range(max_steps):
        act = (v1 > 0.0) | (v2 > 0.0) if has2 else v1 > 0.0
        if not act.any():
            break
        tau = np.where(act, dt, 0.0)
        # inner loop: resolve collisions inside the remaining sub-step
        for _inner in range(24):
            tc1 = np.minimum(tau, v1 / np.where(v1 > 0, mu, np.inf))
            s1 = v1 * tc1 - 0.5 * mu * tc1 * tc1
            disp1 = d1 * s1[:, None]
            lamw, kindw, auxw = _seg_wall_lambda(p1, disp1, bound)
            lamd, kindd, auxd = _seg_diag_lambda(p1, disp1, rs, frame)
            lam1 = np.minimum(lamw, lamd)
            kind1 = np.where(lamw <= lamd, kindw, kindd)
            aux1 = np.where(lamw <= lamd, auxw, auxd)
            if has2:
                tc2 = np.minimum(tau, v2 / np.where(v2 > 0, mu, np.inf))
                s2l = v2 * tc2 - 0.5 * mu * tc2 * tc2
                disp2 = d2 * s2l[:, None]
                lamw2, kindw2, auxw2 = _seg_wall_lambda(p2, disp2, bound)
                lamd2, kindd2, auxd2 = _seg_diag_lambda(p2, disp2, rs, frame)
                lam2 = np.minimum(lamw2, lamd2)
                kind2 = np.where(lamw2 <= lamd2, kindw2, kindd2)
                aux2 = np.where(lamw2 <= lamd2, auxw2, auxd2)
                # ball-ball: relative straight sub-paths
                rp = p1 - p2
                rd = disp1 - disp2
                aq = rd[:, 0] ** 2 + rd[:, 1] ** 2
                bq = rp[:, 0] * rd[:, 0] + rp[:, 1] * rd[:, 1]
                cq = rp[:, 0] ** 2 + rp[:, 1] ** 2 - 4.0 * rs * rs
                disc = bq * bq - aq * cq
                with np.errstate(divide="ignore", invalid="ignore"):
                    lh = (-bq - np.sqrt(np.maximum(disc, 0.0))) / aq
                hit_ok = (bq < 0.0) & (cq > -1e-9) & (disc > 0.0) \
                    & (aq > 0.0) & (lh >= -1e-9) & (lh <= 1.0)
                lam_pair = np.where(hit_ok, np.maximum(lh, 0.0), np.inf)
            else:
                lam_pair = np.full(n, np.inf)
                lam2 = np.full(n, np.inf)
            lam_min = np.minimum(np.minimum(lam1, lam2), lam_pair)
            pending = act & np.isfinite(lam_min) & (lam_min <= 1.0)
            if not pending.any():
                break
            lam = np.where(pending, np.minimum(lam_min, 1.0), 0.0)
            # advance every active ball to the event fraction of its sub-step
            tev = lam * tau
            adv = act.copy()
            p1n, v1n = _advance_exact(p1, d1, v1, mu, np.where(adv, tev, 0.0))
            p1 = np.where(adv[:, None], p1n, p1)
            v1 = np.where(adv, v1n, v1)
            if has2:
                p2n, v2n = _advance_exact(p2, d2, v2, mu,
                                          np.where(adv, tev, 0.0))
                p2 = np.where(adv[:, None], p2n, p2)
                v2 = np.where(adv, v2n, v2)
            tau = np.where(adv, tau - tev, tau)

            def _reflect(p, d, v, mine, kind, aux):
                hitx = mine & (kind == EV_WALL_X)
                p[:, 0] = np.where(hitx, bound * aux, p[:, 0])
                d[:, 0] = np.where(hitx, -d[:, 0], d[:, 0])
                hity = mine & (kind == EV_WALL_Y)
                p[:, 1] = np.where(hity, bound * aux, p[:, 1])
                d[:, 1] = np.where(hity, -d[:, 1], d[:, 1])
                e1x, e1y, tx, ty, seg_len, nx, ny, c = frame
                hitd = mine & (kind == EV_DIAG)
                corr = (p[:, 0] * nx + p[:, 1] * ny) - (c - rs)
                p[:, 0] = np.where(hitd, p[:, 0] - corr * nx, p[:, 0])
                p[:, 1] = np.where(hitd, p[:, 1] - corr * ny, p[:, 1])
                dn = d[:, 0] * nx + d[:, 1] * ny
                d[:, 0] = np.where(hitd, d[:, 0] - 2 * dn * nx, d[:, 0])
                d[:, 1] = np.where(hitd, d[:, 1] - 2 * dn * ny, d[:, 1])
                hite = mine & (kind == EV_DIAG_END)
                ex = e1x + aux * seg_len * tx
                ey = e1y + aux * seg_len * ty
                mx = p[:, 0] - ex
                my = p[:, 1] - ey
                mn = np.hypot(mx, my)
                safe = np.where(mn > 0, mn, 1.0)
                mx, my = mx / safe, my / safe
                p[:, 0] = np.where(hite, ex + mx * rs, p[:, 0])
                p[:, 1] = np.where(hite, ey + my * rs, p[:, 1])
                dn = d[:, 0] * mx + d[:, 1] * my
                d[:, 0] = np.where(hite, d[:, 0] - 2 * dn * mx, d[:, 0])
                d[:, 1] = np.where(hite, d[:, 1] - 2 * dn * my, d[:, 1])
                bounced = hitx | hity | hitd | hite
                v = np.where(bounced, v * e, v)
                return p, d, v

            hit_pair = pending & (lam_pair <= np.minimum(lam1, lam2))
            own1 = pending & ~hit_pair & (lam1 <= lam2)
            own2 = pending & ~hit_pair & ~(lam1 <= lam2)
            p1, d1, v1 = _reflect(p1, d1, v1, own1, kind1, aux1)
            if has2:
                p2, d2, v2 = _reflect(p2, d2, v2, own2, kind2, aux2)
                if hit_pair.any():
                    hx = p2[:, 0] - p1[:, 0]
                    hy = p2[:, 1] - p1[:, 1]
                    hnorm = np.hypot(hx, hy)
                    safe = np.where(hnorm > 0, hnorm, 1.0)
                    hx, hy = hx / safe, hy / safe
                    p2[:, 0] = np.where(hit_pair, p1[:, 0] + hx * 2 * rs,
                                        p2[:, 0])
                    p2[:, 1] = np.where(hit_pair, p1[:, 1] + hy * 2 * rs,
                                        p2[:, 1])
                    w1x, w1y = d1[:, 0] * v1, d1[:, 1] * v1
                    w2x, w2y = d2[:, 0] * v2, d2[:, 1] * v2
                    a1n = w1x * hx + w1y * hy
                    a2n = w2x * hx + w2y * hy
                    n1x = w1x - a1n * hx + e * a2n * hx
                    n1y = w1y - a1n * hy + e * a2n * hy
                    n2x = w2x - a2n * hx + e * a1n * hx
                    n2y = w2y - a2n * hy + e * a1n * hy
                    m1 = np.hypot(n1x, n1y)
                    m2 = np.hypot(n2x, n2y)
                    v1 = np.where(hit_pair, m1, v1)
                    v2 = np.where(hit_pair, m2, v2)
                    s1ok = hit_pair & (m1 > 1e-13)
                    s2ok = hit_pair & (m2 > 1e-13)
                    safe1 = np.where(m1 > 1e-13, m1, 1.0)
                    safe2 = np.where(m2 > 1e-13, m2, 1.0)
                    d1[:, 0] = np.where(s1ok, n1x / safe1, d1[:, 0])
                    d1[:, 1] = np.where(s1ok, n1y / safe1, d1[:, 1])
                    d2[:, 0] = np.where(s2ok, n2x / safe2, d2[:, 0])
                    d2[:, 1] = np.where(s2ok, n2y / safe2, d2[:, 1])
                    v1 = np.where(hit_pair & (m1 <= 1e-13), 0.0, v1)
                    v2 = np.where(hit_pair & (m2 <= 1e-13), 0.0, v2)
        else:
            # inner cap hit: drop the remainder only for rows still mid-
            # collision (pathological corner chatter; displacement is tiny)
            tau = np.where(pending, 0.0, tau)
        # commit the unconsumed remainder of the step
        p1, v1 = _advance_exact(p1, d1, v1, mu, tau)
        if has2:
            p2, v2 = _advance_exact(p2, d2, v2, mu, tau)
    else:
        raise EventCapError("dense integrator exceeded max step count")
    return p1


# ---------------------------------------------------------------------------
# exact nearest-neighbour distances
# ---------------------------------------------------------------------------

def min_dist_batch(queries, points):
    """Exact smallest Euclidean distance from each query row to the point set."""
    q = np.asarray(queries, dtype=float)
    x = np.asarray(points, dtype=float)
    d2 = ((q[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))
