"""Model-based inversion of multi-tone impedance to per-segment R and C."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from ..ladder import rc_ladder_impedance


class NonFiniteResidual(ArithmeticError):
    pass


@dataclass
class LsqEstimate:
    r: np.ndarray
    c: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int


def impedance_and_log_jacobian(r, c, omega, joint_r=None):
    """Ladder impedance and ``dZ / d ln(theta)`` for ``theta = (R_1..R_n, C_1..C_n)``.

    Forward-mode differentiation of the backward recursion; returns ``z`` of
    shape ``(m,)`` and ``dz`` of shape ``(m, 2n)``.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    jw = 1j * np.asarray(omega, dtype=float)
    n = len(r)
    dz = np.zeros((len(jw), 2 * n), dtype=complex)
    z = r[-1] + 1.0 / (jw * c[-1])
    dz[:, n - 1] = r[-1]
    dz[:, 2 * n - 1] = -1.0 / (jw * c[-1])
    for i in range(n - 2, -1, -1):
        if joint_r is not None:
            z = z + joint_r[i]
        y = jw * c[i] + 1.0 / z
        # d(1/y) = -dy / y^2 with dy = jw dC - dz / z^2
        g = -1.0 / (y * y)
        dz = (g / (z * z) * -1.0)[:, None] * dz
        dz[:, n + i] += g * jw * c[i]
        dz[:, i] += r[i]
        z = r[i] + 1.0 / y
    return z, dz


def cauer_fit(z_meas, omega, n, omega_ref=None, z_ref=None):
    """Algebraic ladder fit: rational interpolation then Cauer expansion.

    ``Z(s) = P(s) / (s Q(s))`` with ``deg P = n`` and monic ``deg Q = n - 1``
    has ``2n`` real unknowns that enter linearly in ``P(s) - Z s Q(s) = 0``.
    The first-form continued fraction of the fitted ratio yields
    ``R_1, C_1, ..., R_n, C_n``. Returns ``None`` if any element comes out
    non-positive (noise or model mismatch).
    """
    z_meas = np.asarray(z_meas, dtype=complex)
    w = np.asarray(omega, dtype=float)
    w0 = float(np.sqrt(w.min() * w.max())) if omega_ref is None else omega_ref
    zr = float(np.median(np.abs(z_meas))) if z_ref is None else z_ref
    s = 1j * w / w0
    z = z_meas / zr
    cols = [s ** j for j in range(n + 1)] + [-z * s ** (j + 1) for j in range(n - 1)]
    a = np.array(cols).T
    rhs = z * s ** n
    x = np.linalg.lstsq(np.vstack([a.real, a.imag]), np.concatenate([rhs.real, rhs.imag]),
                        rcond=None)[0]
    num = x[:n + 1]
    den = np.concatenate([[0.0], x[n + 1:], [1.0]])
    r, c = [], []
    for _ in range(n):
        # Z = num / den with deg num == deg den: peel off the series R
        ri = num[-1] / den[-1]
        rem = npoly.polysub(num, ri * den)[:len(den) - 1]
        # Y = den / rem with deg den == deg rem + 1: peel off the shunt sC
        ci = den[-1] / rem[-1]
        nxt = npoly.polysub(den, npoly.polymul([0.0, ci], rem))[:len(rem)]
        r.append(ri)
        c.append(ci)
        num, den = rem, nxt
    r = np.array(r) * zr
    c = np.array(c) / (w0 * zr)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(c)) and np.all(r > 0) and np.all(c > 0)):
        return None
    return r, c


def _stack(z):
    return np.concatenate([z.real, z.imag])


def _levenberg_marquardt(resid, starts, lo, hi, scale, max_iter, tol, accept):
    """Box-projected Levenberg-Marquardt over several starts.

    ``resid(theta)`` returns ``(residual, jacobian)``. Each start runs until
    the relative residual drops below ``tol`` ("exact"), no damped step
    improves the cost ("stationary"), or ``max_iter`` is reached. The search
    stops at the first exact start or at a stationary one below ``accept``.
    Returns ``(theta, cost, converged, iterations)`` of the best start.
    """
    best = None
    total = 0
    for theta in starts:
        theta = np.clip(theta, lo, hi)
        res, jac = resid(theta)
        cost = res @ res
        lam = 1e-3
        status = "maxiter"
        for _ in range(max_iter):
            total += 1
            if np.sqrt(cost) <= tol * scale:
                status = "exact"
                break
            # Marquardt scaling by column norms; the damped step is solved as an
            # augmented least-squares problem, never through J^T J, whose
            # condition number would be the square of an already ill-posed J
            d = np.linalg.norm(jac, axis=0)
            d[d == 0] = 1.0
            accepted = False
            while lam < 1e15:
                a = np.vstack([jac, np.sqrt(lam) * np.diag(d)])
                b = np.concatenate([-res, np.zeros(len(theta))])
                step = np.linalg.lstsq(a, b, rcond=None)[0]
                cand = np.clip(theta + step, lo, hi)
                r2, j2 = resid(cand)
                c2 = r2 @ r2
                if c2 < cost:
                    accepted = True
                    gain = (cost - c2) / cost
                    theta, res, jac, cost = cand, r2, j2, c2
                    lam = max(lam / 10, 1e-15)
                    break
                lam *= 10
            if not accepted or gain < 1e-12:
                status = "stationary"
                break
        if np.sqrt(cost) <= tol * scale:
            status = "exact"
        if best is None or cost < best[1]:
            best = (theta, cost, status != "maxiter")
        if status == "exact" or (status == "stationary" and np.sqrt(cost) <= accept * scale):
            break
    return best[0], best[1], best[2], total


def lsq_invert(z_meas, omega, r0, c0, joint_r=None, max_iter=50, tol=1e-15,
               bounds=(0.1, 10.0), n_starts=3, seed=0, weights=None, start=None,
               accept=1e-10):
    """Fit (R, C) of an ``n``-stage ladder to one frame of per-tone impedances.

    Levenberg-Marquardt in log-parameters inside the box ``[bounds[0], bounds[1]] x``
    rest values. Residuals are ``Re`` and ``Im`` of ``Z_meas - Z_model`` at
    every tone (optionally scaled by ``weights`` per tone).

    The problem is badly conditioned (condition numbers near 1e11 for four
    stages over one decade of tones), and from the rest values the iterates
    crawl along a curved valley. The algebraic ``cauer_fit`` estimate is
    therefore tried first when it exists, then the rest values (or
    ``start``), then jittered rest values; the best iterate is returned
    either way. ``iterations`` counts all attempts.

    ``tol`` is the relative residual treated as an exact fit. It sits near
    roundoff on purpose: with this conditioning a residual of 1e-12 still
    leaves C errors of several tenths of a percent. A start that stalls
    below the relative residual ``accept`` ends the search.
    """
    z_meas = np.asarray(z_meas, dtype=complex)
    w = np.asarray(omega, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    n = len(r0)
    if len(w) < n:
        raise ValueError(
            f"{2 * len(w)} measurements cannot determine {2 * n} unknowns (need >= {n} tones)"
        )
    if not np.all(np.isfinite(z_meas)):
        raise NonFiniteResidual("non-finite measurement")
    wt = np.ones(len(w)) if weights is None else np.asarray(weights, dtype=float)
    wt2 = np.concatenate([wt, wt])
    theta_ref = np.log(np.concatenate([r0, c0]))

    def resid(theta):
        e = np.exp(theta)
        z, dz = impedance_and_log_jacobian(e[:n], e[n:], w, joint_r)
        res = wt2 * _stack(z - z_meas)
        if not np.all(np.isfinite(res)):
            raise NonFiniteResidual("residual became non-finite")
        return res, wt2[:, None] * np.vstack([dz.real, dz.imag])

    rng = np.random.default_rng(seed)
    starts = [theta_ref if start is None else np.log(np.concatenate(start))]
    algebraic = cauer_fit(z_meas, w, n) if joint_r is None or not any(joint_r) else None
    if algebraic is not None:
        starts.insert(0, np.log(np.concatenate(algebraic)))
    while len(starts) < max(1, n_starts) + 1:
        starts.append(theta_ref + rng.normal(0, 0.2, theta_ref.shape))
    theta, cost, converged, iters = _levenberg_marquardt(
        resid, starts[:max(1, n_starts) + 1], theta_ref + np.log(bounds[0]),
        theta_ref + np.log(bounds[1]), np.linalg.norm(wt2 * _stack(z_meas)) or 1.0,
        max_iter, tol, accept,
    )
    e = np.exp(theta)
    return LsqEstimate(r=e[:n], c=e[n:], residual_norm=float(np.sqrt(cost)),
                       converged=bool(converged), iterations=iters)


@dataclass
class StrainEstimate:
    eps: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    clamped: int = 0


def lsq_invert_strain(z_meas, omega, model, start=None, max_iter=50, tol=1e-15, accept=1e-10):
    """Fit per-segment strain directly, with R and C tied to it by the strain law.

    ``n`` unknowns instead of ``2n``, so the fit stays well posed when the
    frames are noisy. The search box is ``[-max_strain, 2 max_strain]`` per
    segment; the returned strain is clamped to ``[0, max_strain]`` and the
    clamp events counted.
    """
    z_meas = np.asarray(z_meas, dtype=complex)
    w = np.asarray(omega, dtype=float)
    n = model.n
    if len(w) * 2 < n:
        raise ValueError(f"{2 * len(w)} measurements cannot determine {n} strains")
    if not np.all(np.isfinite(z_meas)):
        raise NonFiniteResidual("non-finite measurement")
    r0, c0 = model.rest_params()
    gr = np.array([s.gf_r for s in model.segments])
    gc = np.array([s.gf_c for s in model.segments])
    cap = np.array([s.max_strain for s in model.segments])
    if np.any(gc * cap <= 0) and np.any(gr * cap <= 0):
        raise ValueError("strain has no effect on some segment")

    def resid(eps):
        sr = 1 + eps * gr
        sc = 1 + eps * gc
        z, dz = impedance_and_log_jacobian(r0 * sr, c0 * sc, w, model.joint_r)
        jz = dz[:, :n] * (gr / sr) + dz[:, n:] * (gc / sc)
        res = _stack(z - z_meas)
        if not np.all(np.isfinite(res)):
            raise NonFiniteResidual("residual became non-finite")
        return res, np.vstack([jz.real, jz.imag])

    starts = [np.zeros(n)] if start is None else [np.asarray(start, dtype=float), np.zeros(n)]
    starts.append(cap / 2)
    eps, cost, converged, iters = _levenberg_marquardt(
        resid, starts, -cap, 2 * cap, np.linalg.norm(_stack(z_meas)) or 1.0, max_iter, tol, accept,
    )
    out = np.clip(eps, 0.0, cap)
    return StrainEstimate(out, float(np.sqrt(cost)), bool(converged), iters,
                          int(np.count_nonzero(out != eps)))


def invert_model(z_meas, omega, model, **kw):
    """``lsq_invert`` starting from the rest parameters of a ``LadderModel``."""
    r0, c0 = model.rest_params()
    return lsq_invert(z_meas, omega, r0, c0, joint_r=model.joint_r, **kw)


def invert_series(z_frames, omega, model, warm_start=True, **kw):
    """Invert every frame; with ``warm_start`` each fit starts from the previous one."""
    r0, c0 = model.rest_params()
    out = []
    start = None
    for z in np.atleast_2d(z_frames):
        est = lsq_invert(z, omega, r0, c0, joint_r=model.joint_r, start=start, **kw)
        if warm_start and est.converged:
            start = (est.r, est.c)
        out.append(est)
    return out


def invert_strain_series(z_frames, omega, model, warm_start=True, **kw):
    """``lsq_invert_strain`` on every frame, warm-started from the previous fit."""
    out = []
    start = None
    for z in np.atleast_2d(z_frames):
        est = lsq_invert_strain(z, omega, model, start=start, **kw)
        if warm_start and est.converged:
            start = est.eps
        out.append(est)
    return out


def strain_from_capacitance(c_hat, model):
    """Invert ``C = C0 (1 + eps GF)`` per segment; returns ``(strains, clamp_count)``."""
    c_hat = np.asarray(c_hat, dtype=float)
    c0 = np.array([s.c0 for s in model.segments])
    gf = np.array([s.gf_c for s in model.segments])
    if np.any(gf <= 0):
        raise ValueError("capacitive gauge factor must be positive to invert")
    cap = np.array([s.max_strain for s in model.segments])
    eps = (c_hat / c0 - 1.0) / gf
    clipped = np.clip(eps, 0.0, cap)
    # roundoff right at a bound is not a clamp
    return clipped, int(np.count_nonzero(np.abs(clipped - eps) > 1e-12))
