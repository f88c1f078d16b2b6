"""Compiled block coordinate descent on the Gram form of a penalized least-squares problem.

The smooth part is ``f(B) = 0.5 <B, G B> - <C, B> + const`` where ``B`` is m x k
and ``G`` (m x m) is shared by all k response columns. Penalized units are
scalar entries (l1) or groups of entries (unsquared l2). ``R = C - G B`` is
kept up to date so one coordinate update costs O(m).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _secular_tau(lam_vals, q, level):
    # Root of tau * ||q / (lam_vals + tau)|| = level, tau > 0.
    qn = np.sqrt(np.sum(q * q))
    lmax = np.max(lam_vals)
    hi = level * lmax / (qn - level) + 1e-300
    lo = 0.0
    tau = 0.5 * hi
    for _ in range(200):
        s1 = 0.0
        s3 = 0.0
        for i in range(q.shape[0]):
            d = lam_vals[i] + tau
            s1 += q[i] * q[i] / (d * d)
            s3 += q[i] * q[i] / (d * d * d)
        nv = np.sqrt(s1)
        F = tau * nv - level
        if F > 0.0:
            hi = tau
        else:
            lo = tau
        if abs(F) <= 1e-15 * level or hi - lo <= 1e-16 * hi:
            break
        dF = nv - tau * s3 / nv
        step_ok = False
        if dF > 0.0:
            t_new = tau - F / dF
            if lo < t_new < hi:
                tau = t_new
                step_ok = True
        if not step_ok:
            tau = 0.5 * (lo + hi)
    return tau


@njit(cache=True)
def _objective(B, C, R, const, s_row, s_col, s_lvl, g_ptr, g_row, g_col, g_lvl):
    f = const
    for r in range(B.shape[0]):
        for c in range(B.shape[1]):
            f -= 0.5 * B[r, c] * (C[r, c] + R[r, c])
    for s in range(s_row.shape[0]):
        f += s_lvl[s] * abs(B[s_row[s], s_col[s]])
    for g in range(g_ptr.shape[0] - 1):
        acc = 0.0
        for a in range(g_ptr[g], g_ptr[g + 1]):
            acc += B[g_row[a], g_col[a]] ** 2
        f += g_lvl[g] * np.sqrt(acc)
    return f


@njit(cache=True)
def block_cd(G, C, B, R, s_row, s_col, s_lvl,
             g_ptr, g_row, g_col, g_lvl, g_scalar, g_eval, g_evec, g_eptr,
             const, max_sweeps, tol, trace):
    """Run sweeps (groups first, then singletons) until the largest change < tol.

    Returns (number of sweeps, converged flag, number of trace entries).
    ``B`` and ``R`` are updated in place; ``trace[0]`` is the starting objective.
    """
    n_groups = g_ptr.shape[0] - 1
    n_single = s_row.shape[0]
    m = G.shape[0]

    trace[0] = _objective(B, C, R, const, s_row, s_col, s_lvl, g_ptr, g_row, g_col, g_lvl)
    n_trace = 1
    converged = False
    sweeps = 0
    dmax_g = 0
    for g in range(n_groups):
        if g_ptr[g + 1] - g_ptr[g] > dmax_g:
            dmax_g = g_ptr[g + 1] - g_ptr[g]
    v_old = np.zeros(dmax_g)
    g0 = np.zeros(dmax_g)
    v_new = np.zeros(dmax_g)

    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_change = 0.0
        for g in range(n_groups):
            a0 = g_ptr[g]
            d = g_ptr[g + 1] - a0
            for a in range(d):
                v_old[a] = B[g_row[a0 + a], g_col[a0 + a]]
            gn2 = 0.0
            for a in range(d):
                ra = g_row[a0 + a]
                ca = g_col[a0 + a]
                acc = R[ra, ca]
                for b in range(d):
                    if g_col[a0 + b] == ca:
                        acc += G[ra, g_row[a0 + b]] * v_old[b]
                g0[a] = acc
                gn2 += acc * acc
            gn = np.sqrt(gn2)
            lvl = g_lvl[g]
            if gn <= lvl:
                for a in range(d):
                    v_new[a] = 0.0
            elif g_scalar[g]:
                h = G[g_row[a0], g_row[a0]]
                if h <= 0.0:
                    for a in range(d):
                        v_new[a] = 0.0
                else:
                    shrink = 1.0 - lvl / gn
                    for a in range(d):
                        v_new[a] = shrink * g0[a] / h
            else:
                e0 = g_eptr[g]
                lam_vals = g_eval[a0:a0 + d]
                Q = g_evec[e0:e0 + d * d].reshape((d, d))
                q = np.zeros(d)
                for i in range(d):
                    acc = 0.0
                    for a in range(d):
                        acc += Q[a, i] * g0[a]
                    q[i] = acc
                if lvl > 0.0:
                    tau = _secular_tau(lam_vals, q, lvl)
                else:
                    tau = 0.0
                for i in range(d):
                    den = lam_vals[i] + tau
                    if den > 1e-14 * (1.0 + lam_vals[d - 1]):
                        q[i] = q[i] / den
                    else:
                        q[i] = 0.0
                for a in range(d):
                    acc = 0.0
                    for i in range(d):
                        acc += Q[a, i] * q[i]
                    v_new[a] = acc
            for a in range(d):
                delta = v_new[a] - v_old[a]
                if delta != 0.0:
                    ra = g_row[a0 + a]
                    ca = g_col[a0 + a]
                    B[ra, ca] = v_new[a]
                    for r in range(m):
                        R[r, ca] -= G[r, ra] * delta
                    if abs(delta) > max_change:
                        max_change = abs(delta)

        for s in range(n_single):
            r = s_row[s]
            c = s_col[s]
            h = G[r, r]
            old = B[r, c]
            if h <= 0.0:
                new = 0.0
            else:
                z = R[r, c] + h * old
                lvl = s_lvl[s]
                if z > lvl:
                    new = (z - lvl) / h
                elif z < -lvl:
                    new = (z + lvl) / h
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                B[r, c] = new
                for i in range(m):
                    R[i, c] -= G[i, r] * delta
                if abs(delta) > max_change:
                    max_change = abs(delta)

        trace[n_trace] = _objective(B, C, R, const, s_row, s_col, s_lvl, g_ptr, g_row, g_col, g_lvl)
        n_trace += 1
        if max_change < tol:
            converged = True
            break
    return sweeps, converged, n_trace
