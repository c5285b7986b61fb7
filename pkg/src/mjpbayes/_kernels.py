"""JIT-compiled inner loops.

Intensities are encoded as padded arrays (see ``ModelSpec.compiled``):

* ``fc`` (r, F, p) int64 -- affine coefficients of each binomial factor
* ``fk`` (r, F) int64   -- affine constants
* ``fo`` (r, F) int64   -- binomial orders, 0 marks an unused slot
* ``tk`` (r,) int64     -- time factor kind (0 none, 1 linear, 2 exp)
* ``tp`` (r, 2) float64 -- time factor parameters

Status codes shared with the Python side: 0 ok, 1 unchanged, 2 impossible,
3 event cap exceeded.
"""
import math

import numpy as np
from numba import njit

OK = 0
UNCHANGED = 1
IMPOSSIBLE = 2
CAPPED = 3


@njit(cache=True)
def binom(n, k):
    if k == 0:
        return 1.0
    if n < k:
        return 0.0
    out = 1.0
    for j in range(k):
        out *= (n - j) / (j + 1.0)
    return out


@njit(cache=True)
def time_factor(kind, par, t):
    if kind == 0:
        return 1.0
    if kind == 1:
        return par[0] + par[1] * t
    return par[0] * math.exp(par[1] * t)


@njit(cache=True)
def time_factor_integral(kind, par, s, t):
    if kind == 0:
        return t - s
    if kind == 1:
        return par[0] * (t - s) + 0.5 * par[1] * (t * t - s * s)
    if par[1] == 0.0:
        return par[0] * (t - s)
    return par[0] * (math.exp(par[1] * t) - math.exp(par[1] * s)) / par[1]


@njit(cache=True)
def state_part(i, y, fc, fk, fo):
    out = 1.0
    for f in range(fo.shape[1]):
        k = fo[i, f]
        if k == 0:
            continue
        n = fk[i, f]
        for j in range(y.shape[0]):
            n += fc[i, f, j] * y[j]
        out *= binom(n, k)
        if out == 0.0:
            return 0.0
    return out


@njit(cache=True)
def intensities(y, t, fc, fk, fo, tk, tp, out):
    for i in range(out.shape[0]):
        out[i] = state_part(i, y, fc, fk, fo) * time_factor(tk[i], tp[i], t)


@njit(cache=True)
def integrated(y, s, t, fc, fk, fo, tk, tp, out):
    for i in range(out.shape[0]):
        out[i] = state_part(i, y, fc, fk, fo) * time_factor_integral(tk[i], tp[i], s, t)


@njit(cache=True)
def path_stats(y_a, times, types, a, b, theta, A, fc, fk, fo, tk, tp):
    """Single pass over a path on [a, b].

    Returns (log path density, integrated intensities per reaction,
    reaction totals, valid flag).
    """
    r = A.shape[1]
    p = A.shape[0]
    y = y_a.copy()
    integ = np.zeros(r)
    totals = np.zeros(r, dtype=np.int64)
    buf = np.empty(r)
    hv = np.empty(r)
    logpsi = 0.0
    prev = a
    valid = True
    n = times.shape[0]
    for k in range(n + 1):
        t = times[k] if k < n else b
        if k < n and not (t > prev and t <= b):
            valid = False
            break
        integrated(y, prev, t, fc, fk, fo, tk, tp, buf)
        for i in range(r):
            integ[i] += buf[i]
            logpsi -= theta[i] * buf[i]
        if k == n:
            break
        i = types[k]
        intensities(y, t, fc, fk, fo, tk, tp, hv)
        mu = theta[i] * hv[i]
        if mu <= 0.0:
            valid = False
            break
        logpsi += math.log(mu)
        totals[i] += 1
        for j in range(p):
            y[j] += A[j, i]
            if y[j] < 0:
                valid = False
        if not valid:
            break
        prev = t
    if not valid:
        logpsi = -np.inf
    return logpsi, integ, totals, valid


@njit(cache=True)
def states_at(y_a, times, types, A, query):
    """States of the path just after each (sorted) query time."""
    p = A.shape[0]
    out = np.empty((query.shape[0], p), dtype=np.int64)
    y = y_a.copy()
    k = 0
    n = times.shape[0]
    for q in range(query.shape[0]):
        while k < n and times[k] <= query[q]:
            for j in range(p):
                y[j] += A[j, types[k]]
            k += 1
        out[q, :] = y
    return out


@njit(cache=True)
def dirichlet_alpha(mu0):
    """Concentrations proportional to 1/mu0 with the variance-sum scale.

    Works with ``mu_min / mu0`` (scale invariant) so equal hazards give
    exactly 1.
    """
    n = mu0.shape[0]
    lo = mu0[0]
    for k in range(n):
        lo = min(lo, mu0[k])
    e = np.empty(n)
    s1 = 0.0
    s2 = 0.0
    for k in range(n):
        e[k] = lo / mu0[k]
        s1 += e[k]
        s2 += e[k] * e[k]
    scale = s1 / s2
    for k in range(n):
        e[k] *= scale
    return e


@njit(cache=True)
def _fill_last_mu0(mu0):
    # the slack after the last event may sit in an absorbing state
    n = mu0.shape[0]
    if mu0[n - 1] > 0.0:
        return
    lo = np.inf
    for k in range(n - 1):
        if mu0[k] < lo:
            lo = mu0[k]
    mu0[n - 1] = lo if lo < np.inf else 1.0


@njit(cache=True)
def log_dirichlet_times(times, a, b, alpha):
    """log Dirichlet(alpha) density of the waiting fractions, including the
    1/(b-a)^n change of scale to event times."""
    n = times.shape[0]
    L = b - a
    a0 = 0.0
    out = 0.0
    prev = a
    for k in range(n + 1):
        t = times[k] if k < n else b
        d = (t - prev) / L
        if d <= 0.0:
            return -np.inf
        out += (alpha[k] - 1.0) * math.log(d) - math.lgamma(alpha[k])
        a0 += alpha[k]
        prev = t
    return out + math.lgamma(a0) - n * math.log(L)


@njit(cache=True)
def _type_weights(y, S, t, theta, A, fc, fk, fo, tk, tp, hv, w):
    p = A.shape[0]
    intensities(y, t, fc, fk, fo, tk, tp, hv)
    mu0 = 0.0
    tot = 0.0
    for i in range(hv.shape[0]):
        mu = theta[i] * hv[i]
        mu0 += mu
        w[i] = 0.0
        if S[i] > 0 and mu > 0.0:
            ok = True
            for j in range(p):
                if y[j] + A[j, i] < 0:
                    ok = False
            if ok:
                w[i] = math.sqrt(S[i] * mu)
                tot += w[i]
    return mu0, tot


@njit(cache=True)
def type_sequence_logq(y_a, types, r_tot, a, b, theta, A, fc, fk, fo, tk, tp):
    """log probability of an ordered type sequence under the sqrt-weighted
    sequential draw, and the total intensity before each step (length n+1).
    Returns -inf when the sequence cannot be produced."""
    r = A.shape[1]
    n = types.shape[0]
    S = r_tot.copy()
    y = y_a.copy()
    hv = np.empty(r)
    w = np.empty(r)
    mu0 = np.empty(n + 1)
    logp = 0.0
    for k in range(n):
        ts = a + (b - a) * k / n
        m0, tot = _type_weights(y, S, ts, theta, A, fc, fk, fo, tk, tp, hv, w)
        i = types[k]
        if tot <= 0.0 or w[i] <= 0.0:
            return -np.inf, mu0
        logp += math.log(w[i] / tot)
        mu0[k] = m0
        S[i] -= 1
        for j in range(A.shape[0]):
            y[j] += A[j, i]
    intensities(y, b, fc, fk, fo, tk, tp, hv)
    m0 = 0.0
    for i in range(r):
        m0 += theta[i] * hv[i]
    mu0[n] = m0
    _fill_last_mu0(mu0)
    return logp, mu0


@njit(cache=True)
def log_proposal(y_a, times, types, r_tot, a, b, theta, A, fc, fk, fo, tk, tp):
    n = types.shape[0]
    if n == 0:
        return 0.0
    logp, mu0 = type_sequence_logq(y_a, types, r_tot, a, b, theta, A, fc, fk, fo, tk, tp)
    if logp == -np.inf:
        return -np.inf
    alpha = dirichlet_alpha(mu0)
    return logp + log_dirichlet_times(times, a, b, alpha)


@njit(cache=True)
def _draw_times(rng, alpha, a, b, out):
    n = out.shape[0]
    lg = np.empty(n + 1)
    m = -np.inf
    for k in range(n + 1):
        if alpha[k] < 1.0:
            # Gamma(a) = Gamma(a+1) * U^(1/a), kept in log space
            lg[k] = math.log(rng.standard_gamma(alpha[k] + 1.0)) + math.log(rng.random()) / alpha[k]
        else:
            lg[k] = math.log(rng.standard_gamma(alpha[k]))
        if lg[k] > m:
            m = lg[k]
    s = 0.0
    for k in range(n + 1):
        s += math.exp(lg[k] - m)
    L = b - a
    acc = 0.0
    prev = a
    for k in range(n):
        acc += math.exp(lg[k] - m) / s
        t = a + L * acc
        if not (t > prev and t < b):
            return False
        out[k] = t
        prev = t
    return True


@njit(cache=True)
def propose_bridge(rng, y_a, r_tot, a, b, theta, A, fc, fk, fo, tk, tp):
    """Path on [a, b] from y_a with prescribed totals.

    Returns (status, times, types, log proposal density)."""
    r = A.shape[1]
    n = 0
    for i in range(r):
        n += r_tot[i]
    times = np.empty(n)
    types = np.empty(n, dtype=np.int64)
    if n == 0:
        return OK, times, types, 0.0
    S = r_tot.copy()
    y = y_a.copy()
    hv = np.empty(r)
    w = np.empty(r)
    mu0 = np.empty(n + 1)
    logp = 0.0
    for k in range(n):
        ts = a + (b - a) * k / n
        m0, tot = _type_weights(y, S, ts, theta, A, fc, fk, fo, tk, tp, hv, w)
        if tot <= 0.0:
            return IMPOSSIBLE, times, types, -np.inf
        u = rng.random() * tot
        i = 0
        c = w[0]
        while c <= u and i < r - 1:
            i += 1
            c += w[i]
        while w[i] <= 0.0:
            i -= 1
        types[k] = i
        logp += math.log(w[i] / tot)
        mu0[k] = m0
        S[i] -= 1
        for j in range(A.shape[0]):
            y[j] += A[j, i]
    intensities(y, b, fc, fk, fo, tk, tp, hv)
    m0 = 0.0
    for i in range(r):
        m0 += theta[i] * hv[i]
    mu0[n] = m0
    _fill_last_mu0(mu0)
    alpha = dirichlet_alpha(mu0)
    ok = _draw_times(rng, alpha, a, b, times)
    if not ok:
        ok = _draw_times(rng, alpha, a, b, times)
        if not ok:
            return IMPOSSIBLE, times, types, -np.inf
    return OK, times, types, logp + log_dirichlet_times(times, a, b, alpha)


@njit(cache=True)
def gillespie(rng, y0, a, b, theta, A, fc, fk, fo, tk, tp, equal_rate, cap):
    """Direct-method simulation on (a, b].

    With ``equal_rate`` every reaction with positive intensity fires at
    rate 1/(b-a) regardless of theta.  Intensities of time-dependent
    reactions are frozen at the time of the previous event.
    Returns (status, times, types, final state).
    """
    r = A.shape[1]
    p = A.shape[0]
    cap_buf = 64
    times = np.empty(cap_buf)
    types = np.empty(cap_buf, dtype=np.int64)
    y = y0.copy()
    hv = np.empty(r)
    mu = np.empty(r)
    t = a
    n = 0
    while True:
        intensities(y, t, fc, fk, fo, tk, tp, hv)
        m0 = 0.0
        for i in range(r):
            if equal_rate:
                mu[i] = 1.0 / (b - a) if hv[i] > 0.0 else 0.0
            else:
                mu[i] = theta[i] * hv[i]
            m0 += mu[i]
        if m0 <= 0.0:
            break
        t = t + rng.standard_exponential() / m0
        if t > b:
            break
        u = rng.random() * m0
        i = 0
        c = mu[0]
        while c <= u and i < r - 1:
            i += 1
            c += mu[i]
        while mu[i] <= 0.0:
            i -= 1
        if n == cap:
            return CAPPED, times[:n], types[:n], y
        if n == times.shape[0]:
            nt = np.empty(2 * n)
            nty = np.empty(2 * n, dtype=np.int64)
            nt[:n] = times
            nty[:n] = types
            times = nt
            types = nty
        times[n] = t
        types[n] = i
        n += 1
        for j in range(p):
            y[j] += A[j, i]
            if y[j] < 0:
                return IMPOSSIBLE, times[:n], types[:n], y
    return OK, times[:n], types[:n], y
