"""Batched Dormand-Prince 4(5) integration with domain-exit detection.

Every row of the batch is an independent initial value problem on the same
parameter span.  By default each row carries its own adaptive step size, so a
row's result does not depend on which other rows share the batch.  With
``shared_step=True`` all rows advance with one step sequence (error norm taken
as the maximum over rows); this makes the numerical flow a smooth function of
the initial data, which is what finite-difference Jacobians need.

A row escapes once its trajectory comes within ``boundary_tol`` of the
complement of the domain.  ``clearance`` is a signed distance for points and
``corridor`` a lower bound on the distance from a segment to the complement,
so thin slits are seen even when a step jumps across them.  Steps that pass
near the complement are resolved on their cubic Hermite interpolant down to
``event_tol`` in the parameter.  The returned state of an escaped row is the
last resolved state still clear.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import LeafspaceError, NonfiniteField

Rhs = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Corridor = Callable[[np.ndarray, np.ndarray], np.ndarray]

RTOL = 1e-9
ATOL = 1e-12
EVENT_TOL = 1e-10
BOUNDARY_TOL = 1e-9

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass
class BatchResult:
    y: np.ndarray
    t: np.ndarray
    escaped: np.ndarray
    steps: np.ndarray
    trajectories: list[tuple[np.ndarray, np.ndarray]] | None = None


def _rms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(a * a, axis=1))


def _hermite(y0, f0, y1, f1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


def _hermite_slope(y0, f0, y1, f1, h, theta):
    """d/dtheta of the Hermite interpolant (theta in [0, 1])."""
    t2 = theta * theta
    return ((6 * t2 - 6 * theta) * (y0 - y1) + (3 * t2 - 4 * theta + 1) * h * f0
            + (3 * t2 - 2 * theta) * h * f1)


def _bend(ya, yb, da, db, w):
    """Bound on the distance between a cubic piece and its chord."""
    delta = yb - ya
    return (4.0 / 27.0) * (np.linalg.norm(w[:, None] * da - delta, axis=1)
                           + np.linalg.norm(w[:, None] * db - delta, axis=1))


def _first_exit(corridor: Corridor, clearance, y0, f0, y1, f1, h, tol, event_tol, locate=True):
    """Earliest parameter where each row's step curve comes within ``tol`` of the complement.

    The Hermite curve of a row is split into pieces.  A piece is safe when its
    chord clears the complement by more than its bend plus ``tol``.  Unsafe
    pieces are halved until their parameter length drops below ``event_tol``;
    such a piece is a hit.  Pieces after a known bad point are pruned.
    Returns (theta, state at theta) with theta = inf for rows that stay clear.
    """
    n = len(h)
    hc = h[:, None]
    best = np.full(n, np.inf)
    ybest = y0.copy()
    bound = np.where(clearance(y1) < tol, 1.0, np.inf)
    r = np.arange(n)
    a = np.zeros(n)
    b = np.ones(n)
    ya, yb = y0.copy(), y1.copy()
    da, db = hc * f0, hc * f1
    while r.size:
        risky = corridor(ya, yb) <= _bend(ya, yb, da, db, b - a) + tol
        if locate:
            keep = risky & (a < np.minimum(best[r], bound[r]))
        else:
            keep = risky & ~np.isfinite(bound[r])
        r, a, b, ya, yb, da, db = r[keep], a[keep], b[keep], ya[keep], yb[keep], da[keep], db[keep]
        if not r.size:
            break
        fine = (b - a) * h[r] <= event_tol
        for q in np.flatnonzero(fine):
            if a[q] < best[r[q]]:
                best[r[q]] = a[q]
                ybest[r[q]] = ya[q]
        co = ~fine
        r, a, b, ya, yb, da, db = r[co], a[co], b[co], ya[co], yb[co], da[co], db[co]
        if not r.size:
            break
        m = 0.5 * (a + b)
        args = (y0[r], f0[r], y1[r], f1[r], h[r][:, None], m[:, None])
        ym = _hermite(*args)
        dm = _hermite_slope(*args)
        bad = clearance(ym) < tol
        np.minimum.at(bound, r[bad], m[bad])
        if not locate:
            for q in np.flatnonzero(bad):
                if m[q] < best[r[q]]:
                    best[r[q]] = m[q]
                    ybest[r[q]] = ya[q]
        r = np.concatenate([r, r])
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        ya, yb = np.concatenate([ya, ym]), np.concatenate([ym, yb])
        da, db = np.concatenate([da, dm]), np.concatenate([dm, db])
    if not locate:
        # rows known to hit from the far end alone
        far = ~np.isfinite(best) & np.isfinite(bound)
        best[far] = bound[far]
    return best, ybest


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonfiniteField("vector field returned a non-finite value")


def integrate(
    rhs: Rhs,
    t0: float,
    t1: float,
    y0: np.ndarray,
    *,
    corridor: Corridor | None = None,
    clearance: Callable[[np.ndarray], np.ndarray] | None = None,
    boundary_tol: float = BOUNDARY_TOL,
    locate: bool = True,
    rtol: float = RTOL,
    atol: float = ATOL,
    event_tol: float = EVENT_TOL,
    shared_step: bool = False,
    record: bool = False,
    frozen: np.ndarray | None = None,
    max_steps: int = 200_000,
) -> BatchResult:
    """Integrate ``y' = rhs(rows, t, y)`` for every row of ``y0`` on [t0, t1].

    ``rhs`` receives the indices of the rows being evaluated so that
    row-dependent coefficients can be looked up.  Rows flagged in ``frozen``
    are stationary and are reported as reached without stepping.
    """
    Y = np.array(y0, dtype=float, copy=True)
    if Y.ndim != 2:
        raise ValueError("y0 must have shape (rows, dim)")
    N, _ = Y.shape
    if not t1 > t0:
        if t1 == t0:
            trajs = [(np.array([t0]), Y[i:i + 1].copy()) for i in range(N)] if record else None
            return BatchResult(Y, np.full(N, float(t0)), np.zeros(N, bool), np.zeros(N, int), trajs)
        raise ValueError("integration span must be increasing")

    t = np.full(N, float(t0))
    escaped = np.zeros(N, dtype=bool)
    steps = np.zeros(N, dtype=int)
    active = np.ones(N, dtype=bool) if frozen is None else ~np.asarray(frozen, bool)
    if frozen is not None:
        t[~active] = t1
    trajs = None
    if record:
        trajs = [([float(t0)], [Y[i].copy()]) for i in range(N)]
        if frozen is not None:
            for i in np.flatnonzero(~active):
                trajs[i][0].append(float(t1))
                trajs[i][1].append(Y[i].copy())

    if (corridor is None) != (clearance is None):
        raise ValueError("corridor and clearance must be given together")
    watch = corridor is not None
    if watch:
        # a start closer than boundary_tol to the complement counts as an immediate exit
        close = active & (np.asarray(clearance(Y), float) < boundary_tol)
        escaped[close] = True
        active[close] = False

    span = t1 - t0
    h = np.full(N, span)
    F = np.zeros_like(Y)
    idx = np.flatnonzero(active)
    if idx.size:
        F[idx] = rhs(idx, t[idx], Y[idx])
        _check_finite(F[idx])
        sc = atol + rtol * np.abs(Y[idx])
        d0 = _rms(Y[idx] / sc)
        d1 = _rms(F[idx] / sc)
        h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
        h0 = np.minimum(h0, span)
        y1 = Y[idx] + h0[:, None] * F[idx]
        f1 = rhs(idx, t[idx] + h0, y1)
        d2 = _rms((f1 - F[idx]) / sc) / h0
        dm = np.maximum(d1, d2)
        with np.errstate(divide="ignore"):
            h1 = np.where(dm <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dm, 1e-300)) ** 0.2)
        h[idx] = np.minimum(np.minimum(100 * h0, h1), span)
        h[idx] = np.where(d1 == 0.0, span, h[idx])
        if shared_step:
            h[idx] = h[idx].min()

    A, C, E = _A, _C, _E
    iterations = 0
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iterations += 1
        if iterations > max_steps:
            raise LeafspaceError(f"step budget of {max_steps} exhausted")
        ts = t[idx]
        ys = Y[idx]
        remaining = t1 - ts
        last = h[idx] >= remaining * (1 - 1e-13)
        hs = np.where(last, remaining, h[idx])
        if np.any(hs <= 1e-14 * np.maximum(1.0, np.abs(ts))):
            raise LeafspaceError("step size underflow")
        hc = hs[:, None]
        k = [F[idx]]
        for s in range(1, 6):
            acc = ys.copy()
            for j, a in enumerate(A[s]):
                if a:
                    acc += hc * (a * k[j])
            k.append(rhs(idx, ts + C[s] * hs, acc))
        y5 = ys.copy()
        for j, a in enumerate(A[6]):
            if a:
                y5 += hc * (a * k[j])
        k.append(rhs(idx, ts + hs, y5))
        _check_finite(y5, k[-1])
        errv = np.zeros_like(ys)
        for j, e in enumerate(E):
            if e:
                errv += e * k[j]
        errv *= hc
        sc = atol + rtol * np.maximum(np.abs(ys), np.abs(y5))
        err = _rms(errv / sc)
        if shared_step:
            err = np.full_like(err, err.max())
        ok = err <= 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(err == 0.0, 10.0, 0.9 * err ** -0.2)
        fac = np.clip(fac, 0.2, 10.0)
        fac = np.where(ok, fac, np.minimum(fac, 1.0))
        h[idx] = hs * fac
        if shared_step:
            h[idx] = h[idx].min()

        sel = np.flatnonzero(ok)
        if sel.size == 0:
            continue
        rows = idx[sel]
        steps[rows] += 1
        y_new = y5[sel]
        f_new = k[-1][sel]
        t_new = np.where(last[sel], t1, ts[sel] + hs[sel])
        hit = np.zeros(sel.size, bool)
        if watch:
            hw = hs[sel][:, None]
            step_bend = _bend(ys[sel], y_new, hw * k[0][sel], hw * f_new, np.ones(sel.size))
            near = corridor(ys[sel], y_new) <= step_bend + boundary_tol
            hj = np.flatnonzero(near)
            if hj.size:
                sj = sel[hj]
                theta, ystar = _first_exit(corridor, clearance, ys[sj], k[0][sj], y_new[hj], f_new[hj],
                                           hs[sj], boundary_tol, event_tol, locate)
                got = np.isfinite(theta)
                hit[hj[got]] = True
                rr = rows[hj[got]]
                Y[rr] = ystar[got]
                t[rr] = ts[sj[got]] + theta[got] * hs[sj[got]]
                escaped[rr] = True
                active[rr] = False
                if record:
                    for r in rr:
                        trajs[r][0].append(float(t[r]))
                        trajs[r][1].append(Y[r].copy())
        keep = ~hit
        kr = rows[keep]
        Y[kr] = y_new[keep]
        F[kr] = f_new[keep]
        t[kr] = t_new[keep]
        done = kr[last[sel][keep]]
        active[done] = False
        if record:
            for j, r in enumerate(kr):
                trajs[r][0].append(float(t[r]))
                trajs[r][1].append(Y[r].copy())

    out = None
    if record:
        out = [(np.asarray(ts_, float), np.asarray(ys_, float)) for ts_, ys_ in trajs]
    return BatchResult(Y, t, escaped, steps, out)
