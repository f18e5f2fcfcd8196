"""Compiled inner loops of the replica-exchange trans-dimensional sampler.

Everything here operates on the flat ensemble arrays owned by
``peakjump.sampler``:

* ``par``  (S, Kcap, 3)  peak parameters per storage slot
* ``rows`` (S, Kcap, n)  cached per-peak contribution curves
* ``resid`` (S, n)       cached residual y - f(x)
* ``energy`` (S,)        cached E = sum(resid^2) / 2n
* ``slot_of`` (L,)       rung -> slot indirection; exchange swaps two ints

Rung-indexed arrays (step sizes, statistics, random streams) are never
swapped: an exchange trades configurations between temperatures, not the
per-temperature proposal scales.

Each peak's contribution is evaluated only inside the window where its
exponent exceeds -_CUT (beyond that the curve is below ~1e-15 of the
amplitude and is stored as exact zero), and a proposal's energy change is
accumulated from dot products over the union of the old and new windows.
On equidistant grids the Gaussian is filled by a two-multiply recurrence
instead of one exp per point.  Cached energies are refreshed from the rows
at the end of every Monte Carlo step, so incremental float error cannot
accumulate across steps.

Parameter kinds are indexed 0..4: amplitude, precision, center, continuum
offset, continuum slope.  The prior pack ``pp`` is a float64 vector:

    0 amp shape | 1 amp rate | 2 prec shape | 3 prec rate
    4 center kind (0 uniform, 1 normal) | 5 lo/mean | 6 hi/sd
    7 has continuum | 8 c0 mean | 9 c0 sd | 10 c1 shape | 11 c1 rate
    12 k_min | 13 k_max

``klogp`` holds log prior probabilities of K indexed by K itself.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._rng import next_u64, rng_gamma, rng_normal, rng_uniform

__all__ = []  # internal module; sampler.py re-exports nothing from here

# exponent cutoff for windowed evaluation: exp(-36) ~ 2.3e-16
_CUT = 36.0

KIND_AMP = 0
KIND_PREC = 1
KIND_CENTER = 2
KIND_OFFSET = 3
KIND_SLOPE = 4
NKINDS = 5

# jump move outcome codes
JUMP_NONE = 0
JUMP_BIRTH_REJ = 1
JUMP_BIRTH_ACC = 2
JUMP_DEATH_REJ = 3
JUMP_DEATH_ACC = 4


@njit(cache=True, inline="always")
def _lower_bound(xs, v):
    lo = 0
    hi = xs.size
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, inline="always")
def _win_bounds(xs, rho, mu):
    w = np.sqrt(2.0 * _CUT / rho)
    i0 = _lower_bound(xs, mu - w)
    i1 = _lower_bound(xs, mu + w)
    return i0, i1


@njit(cache=True, fastmath=True)
def _fill_window(xs, h, a, rho, mu, out, i0, i1):
    """Write a*exp(-rho/2 (x-mu)^2) into out[i0:i1]; out elsewhere untouched."""
    if i1 <= i0:
        return
    if h > 0.0:
        # uniform grid: geometric recurrence, two multiplies per point
        d0 = xs[i0] - mu
        g = a * np.exp(-0.5 * rho * d0 * d0)
        c = np.exp(-rho * h * (d0 + 0.5 * h))
        q = np.exp(-rho * h * h)
        for i in range(i0, i1):
            out[i] = g
            g *= c
            c *= q
    else:
        for i in range(i0, i1):
            d = xs[i] - mu
            out[i] = a * np.exp(-0.5 * rho * d * d)


@njit(cache=True, fastmath=True)
def _dots_row(row, resid, i0, i1):
    """(sum row*resid, sum row*row) over [i0, i1)."""
    s1 = 0.0
    s2 = 0.0
    for i in range(i0, i1):
        g = row[i]
        s1 += g * resid[i]
        s2 += g * g
    return s1, s2


@njit(cache=True, fastmath=True)
def _delta_dots(scratch, row, resid, i0, i1):
    """(sum d*resid, sum d*d) with d = scratch - row over [i0, i1)."""
    s1 = 0.0
    s2 = 0.0
    for i in range(i0, i1):
        d = scratch[i] - row[i]
        s1 += d * resid[i]
        s2 += d * d
    return s1, s2


@njit(cache=True, fastmath=True)
def _apply_replace(scratch, row, resid, i0, i1):
    for i in range(i0, i1):
        d = scratch[i] - row[i]
        resid[i] -= d
        row[i] = scratch[i]


@njit(cache=True)
def _local_scan(
    xs, ys, invx, sxx, h, pp, bvec, l, s,
    K, par, cont, rows, resid, energy, steps, states,
    att, acc, wat, wac, adapt, scratch, flags,
):
    """One full sweep of single-parameter Metropolis updates on slot s at rung l.

    flags[pos] is set to 1/0 (accepted/rejected) for each proposal in scan
    order: (amplitude, precision, center) per peak, then offset, slope.
    """
    n = xs.size
    b = bvec[l]
    inv2n = 0.5 / n
    ash = pp[0]
    arate = pp[1]
    psh = pp[2]
    prate = pp[3]
    ckind = pp[4]
    ca = pp[5]
    cb = pp[6]
    hascont = pp[7] > 0.0
    pos = 0
    for k in range(K[s]):
        row = rows[s, k]
        # --- amplitude: contribution scales linearly, no basis re-evaluation
        a0 = par[s, k, 0]
        rho = par[s, k, 1]
        mu = par[s, k, 2]
        att[l, KIND_AMP] += 1
        if adapt:
            wat[l, KIND_AMP] += 1
        a1 = a0 + steps[l, KIND_AMP] * rng_normal(states, l)
        if a1 > 0.0:
            logpr = (ash - 1.0) * (np.log(a1) - np.log(a0)) - arate * (a1 - a0)
            i0, i1 = _win_bounds(xs, rho, mu)
            sgr, sgg = _dots_row(row, resid[s], i0, i1)
            t = a1 / a0 - 1.0
            de = (t * t * sgg - 2.0 * t * sgr) * inv2n
            loga = -n * b * de + logpr
            if np.log(rng_uniform(states, l)) < loga:
                for i in range(i0, i1):
                    d = t * row[i]
                    resid[s, i] -= d
                    row[i] += d
                par[s, k, 0] = a1
                energy[s] += de
                acc[l, KIND_AMP] += 1
                if adapt:
                    wac[l, KIND_AMP] += 1
                flags[pos] = 1
            else:
                flags[pos] = 0
        else:
            flags[pos] = 0
        pos += 1

        # --- precision
        a0 = par[s, k, 0]
        r0 = par[s, k, 1]
        mu = par[s, k, 2]
        att[l, KIND_PREC] += 1
        if adapt:
            wat[l, KIND_PREC] += 1
        r1 = r0 + steps[l, KIND_PREC] * rng_normal(states, l)
        if r1 > 0.0:
            logpr = (psh - 1.0) * (np.log(r1) - np.log(r0)) - prate * (r1 - r0)
            i0n, i1n = _win_bounds(xs, r1, mu)
            i0o, i1o = _win_bounds(xs, r0, mu)
            i0u = min(i0n, i0o)
            i1u = max(i1n, i1o)
            for i in range(i0u, i1u):
                scratch[i] = 0.0
            _fill_window(xs, h, a0, r1, mu, scratch, i0n, i1n)
            s1, s2 = _delta_dots(scratch, row, resid[s], i0u, i1u)
            de = (s2 - 2.0 * s1) * inv2n
            loga = -n * b * de + logpr
            if np.log(rng_uniform(states, l)) < loga:
                _apply_replace(scratch, row, resid[s], i0u, i1u)
                par[s, k, 1] = r1
                energy[s] += de
                acc[l, KIND_PREC] += 1
                if adapt:
                    wac[l, KIND_PREC] += 1
                flags[pos] = 1
            else:
                flags[pos] = 0
        else:
            flags[pos] = 0
        pos += 1

        # --- center
        a0 = par[s, k, 0]
        r0 = par[s, k, 1]
        m0 = par[s, k, 2]
        att[l, KIND_CENTER] += 1
        if adapt:
            wat[l, KIND_CENTER] += 1
        m1 = m0 + steps[l, KIND_CENTER] * rng_normal(states, l)
        ok = True
        logpr = 0.0
        if ckind == 0.0:
            ok = (m1 >= ca) and (m1 <= cb)
        else:
            z1 = (m1 - ca) / cb
            z0 = (m0 - ca) / cb
            logpr = -0.5 * (z1 * z1 - z0 * z0)
        if ok:
            i0n, i1n = _win_bounds(xs, r0, m1)
            i0o, i1o = _win_bounds(xs, r0, m0)
            i0u = min(i0n, i0o)
            i1u = max(i1n, i1o)
            for i in range(i0u, i1u):
                scratch[i] = 0.0
            _fill_window(xs, h, a0, r0, m1, scratch, i0n, i1n)
            s1, s2 = _delta_dots(scratch, row, resid[s], i0u, i1u)
            de = (s2 - 2.0 * s1) * inv2n
            loga = -n * b * de + logpr
            if np.log(rng_uniform(states, l)) < loga:
                _apply_replace(scratch, row, resid[s], i0u, i1u)
                par[s, k, 2] = m1
                energy[s] += de
                acc[l, KIND_CENTER] += 1
                if adapt:
                    wac[l, KIND_CENTER] += 1
                flags[pos] = 1
            else:
                flags[pos] = 0
        else:
            flags[pos] = 0
        pos += 1

    if hascont:
        # --- continuum offset: constant shift, closed-form energy change
        c0m = pp[8]
        c0sd = pp[9]
        c00 = cont[s, 0]
        att[l, KIND_OFFSET] += 1
        if adapt:
            wat[l, KIND_OFFSET] += 1
        c01 = c00 + steps[l, KIND_OFFSET] * rng_normal(states, l)
        z1 = (c01 - c0m) / c0sd
        z0 = (c00 - c0m) / c0sd
        logpr = -0.5 * (z1 * z1 - z0 * z0)
        sr = 0.0
        for i in range(n):
            sr += resid[s, i]
        dc = c01 - c00
        de = (n * dc * dc - 2.0 * dc * sr) * inv2n
        loga = -n * b * de + logpr
        if np.log(rng_uniform(states, l)) < loga:
            for i in range(n):
                resid[s, i] -= dc
            cont[s, 0] = c01
            energy[s] += de
            acc[l, KIND_OFFSET] += 1
            if adapt:
                wac[l, KIND_OFFSET] += 1
            flags[pos] = 1
        else:
            flags[pos] = 0
        pos += 1

        # --- continuum slope (c1 / x term)
        c1sh = pp[10]
        c1rate = pp[11]
        c10 = cont[s, 1]
        att[l, KIND_SLOPE] += 1
        if adapt:
            wat[l, KIND_SLOPE] += 1
        c11 = c10 + steps[l, KIND_SLOPE] * rng_normal(states, l)
        if c11 > 0.0:
            logpr = (c1sh - 1.0) * (np.log(c11) - np.log(c10)) - c1rate * (c11 - c10)
            sxr = 0.0
            for i in range(n):
                sxr += invx[i] * resid[s, i]
            dc = c11 - c10
            de = (dc * dc * sxx - 2.0 * dc * sxr) * inv2n
            loga = -n * b * de + logpr
            if np.log(rng_uniform(states, l)) < loga:
                for i in range(n):
                    resid[s, i] -= dc * invx[i]
                cont[s, 1] = c11
                energy[s] += de
                acc[l, KIND_SLOPE] += 1
                if adapt:
                    wac[l, KIND_SLOPE] += 1
                flags[pos] = 1
            else:
                flags[pos] = 0
        else:
            flags[pos] = 0
        pos += 1
    return pos


@njit(cache=True)
def _move_prob_up(kc, kmin, kmax):
    """Probability that the jump mechanism proposes a birth at count kc."""
    if kc == kmin:
        return 1.0
    if kc == kmax:
        return 0.0
    return 0.5


@njit(cache=True)
def _birth_move(
    xs, h, pp, klogp, bvec, l, s,
    K, par, rows, resid, energy, states,
    batt, bacc, scratch,
):
    """Append a prior-drawn peak to slot s; requires K[s] < k_max.

    The appended peak's prior density cancels against its proposal density
    (identity dimension map, unit Jacobian), leaving the reduced acceptance
    exp(-n b dE) * (reverse/forward move probability) * (K-prior ratio).
    """
    n = xs.size
    b = bvec[l]
    kmin = int(pp[12])
    kmax = int(pp[13])
    kc = K[s]
    a = rng_gamma(states, l, pp[0]) / pp[1]
    rho = rng_gamma(states, l, pp[2]) / pp[3]
    if pp[4] == 0.0:
        mu = pp[5] + (pp[6] - pp[5]) * rng_uniform(states, l)
    else:
        mu = pp[5] + pp[6] * rng_normal(states, l)
    batt[l] += 1
    i0, i1 = _win_bounds(xs, rho, mu)
    for i in range(i0, i1):
        scratch[i] = 0.0
    _fill_window(xs, h, a, rho, mu, scratch, i0, i1)
    s1, s2 = _dots_row(scratch, resid[s], i0, i1)
    de = (s2 - 2.0 * s1) * (0.5 / n)
    rfwd = _move_prob_up(kc, kmin, kmax)
    rrev = 1.0 - _move_prob_up(kc + 1, kmin, kmax)
    loga = -n * b * de + np.log(rrev / rfwd) + klogp[kc + 1] - klogp[kc]
    if np.log(rng_uniform(states, l)) < loga:
        par[s, kc, 0] = a
        par[s, kc, 1] = rho
        par[s, kc, 2] = mu
        for i in range(n):
            rows[s, kc, i] = 0.0
        for i in range(i0, i1):
            rows[s, kc, i] = scratch[i]
            resid[s, i] -= scratch[i]
        energy[s] += de
        K[s] = kc + 1
        bacc[l] += 1
        return JUMP_BIRTH_ACC
    return JUMP_BIRTH_REJ


@njit(cache=True)
def _death_move(
    xs, pp, klogp, bvec, l, s,
    K, par, rows, resid, energy, states,
    datt, dacc,
):
    """Remove a uniformly chosen peak from slot s; requires K[s] > k_min.

    The uniform selection factor cancels against the birth insertion factor
    because the peak list is exchangeable, so the acceptance mirrors the
    birth formula with the move-probability ratio inverted.
    """
    n = xs.size
    b = bvec[l]
    kmin = int(pp[12])
    kmax = int(pp[13])
    kc = K[s]
    datt[l] += 1
    j = int(rng_uniform(states, l) * kc)
    if j >= kc:
        j = kc - 1
    rho = par[s, j, 1]
    mu = par[s, j, 2]
    i0, i1 = _win_bounds(xs, rho, mu)
    sgr, sgg = _dots_row(rows[s, j], resid[s], i0, i1)
    de = (sgg + 2.0 * sgr) * (0.5 / n)
    rfwd = 1.0 - _move_prob_up(kc, kmin, kmax)
    rrev = _move_prob_up(kc - 1, kmin, kmax)
    loga = -n * b * de + np.log(rrev / rfwd) + klogp[kc - 1] - klogp[kc]
    if np.log(rng_uniform(states, l)) < loga:
        for i in range(i0, i1):
            resid[s, i] += rows[s, j, i]
        last = kc - 1
        if j != last:
            for c in range(3):
                par[s, j, c] = par[s, last, c]
            for i in range(n):
                rows[s, j, i] = rows[s, last, i]
        energy[s] += de
        K[s] = last
        dacc[l] += 1
        return JUMP_DEATH_ACC
    return JUMP_DEATH_REJ


@njit(cache=True)
def _jump_move(
    xs, ys, h, pp, klogp, bvec, l, s,
    K, par, rows, resid, energy, states,
    batt, bacc, datt, dacc, scratch,
):
    """One trans-dimensional proposal on slot s at rung l.

    Births are proposed with probability 1 at K = k_min, never at K = k_max,
    and with probability 1/2 in between; otherwise a death is proposed.
    With k_min == k_max the move is disabled entirely and draws nothing.
    """
    kmin = int(pp[12])
    kmax = int(pp[13])
    if kmin == kmax:
        return JUMP_NONE
    rm = _move_prob_up(K[s], kmin, kmax)
    u = rng_uniform(states, l)
    if u < rm:
        return _birth_move(
            xs, h, pp, klogp, bvec, l, s,
            K, par, rows, resid, energy, states,
            batt, bacc, scratch,
        )
    return _death_move(
        xs, pp, klogp, bvec, l, s,
        K, par, rows, resid, energy, states,
        datt, dacc,
    )


@njit(cache=True)
def _exchange_sweep(n, bvec, slot_of, energy, states, xatt, xacc, xflags):
    """Deterministic sweep over adjacent rung pairs l, l+1 in ladder order.

    Swapping full states leaves prior and K-prior factors unchanged, so the
    acceptance is exp(n (b_{l+1} - b_l) (E_{l+1} - E_l)); the uniform draw
    comes from the dedicated exchange stream (last state row).
    """
    L = bvec.size
    ex = L  # exchange stream row index
    for l in range(L - 1):
        xatt[l] += 1
        u = rng_uniform(states, ex)
        sa = slot_of[l]
        sb = slot_of[l + 1]
        loga = n * (bvec[l + 1] - bvec[l]) * (energy[sb] - energy[sa])
        if np.log(u) < loga:
            slot_of[l] = sb
            slot_of[l + 1] = sa
            xacc[l] += 1
            xflags[l] = 1
        else:
            xflags[l] = 0


@njit(cache=True, fastmath=True)
def _refresh_slot(ys, invx, hascont, s, K, cont, rows, resid, energy):
    """Recompute resid and energy of slot s exactly from the cached rows."""
    n = ys.size
    if hascont:
        c0 = cont[s, 0]
        c1 = cont[s, 1]
        for i in range(n):
            resid[s, i] = ys[i] - c0 - c1 * invx[i]
    else:
        for i in range(n):
            resid[s, i] = ys[i]
    for k in range(K[s]):
        for i in range(n):
            resid[s, i] -= rows[s, k, i]
    e = 0.0
    for i in range(n):
        e += resid[s, i] * resid[s, i]
    energy[s] = e / (2.0 * n)


@njit(cache=True)
def _refresh_all(ys, invx, hascont, K, cont, rows, resid, energy):
    for s in range(K.size):
        _refresh_slot(ys, invx, hascont, s, K, cont, rows, resid, energy)


@njit(cache=True)
def _init_ensemble(xs, ys, invx, h, pp, kcum, K, par, cont, rows, resid, energy, states):
    """Draw every rung's start from the prior using that rung's own stream."""
    L = K.size
    kmin = int(pp[12])
    hascont = pp[7] > 0.0
    for l in range(L):
        u = rng_uniform(states, l)
        k = kmin + kcum.size - 1
        acc = 0.0
        for i in range(kcum.size):
            acc = kcum[i]
            if u < acc:
                k = kmin + i
                break
        K[l] = k
        for kk in range(k):
            a = rng_gamma(states, l, pp[0]) / pp[1]
            rho = rng_gamma(states, l, pp[2]) / pp[3]
            if pp[4] == 0.0:
                mu = pp[5] + (pp[6] - pp[5]) * rng_uniform(states, l)
            else:
                mu = pp[5] + pp[6] * rng_normal(states, l)
            par[l, kk, 0] = a
            par[l, kk, 1] = rho
            par[l, kk, 2] = mu
            i0, i1 = _win_bounds(xs, rho, mu)
            _fill_window(xs, h, a, rho, mu, rows[l, kk], i0, i1)
        if hascont:
            cont[l, 0] = pp[8] + pp[9] * rng_normal(states, l)
            cont[l, 1] = rng_gamma(states, l, pp[10]) / pp[11]
    _refresh_all(ys, invx, hascont, K, cont, rows, resid, energy)


@njit(cache=True)
def _run_mcs(
    xs, ys, invx, sxx, h, pp, klogp, bvec, slot_of,
    K, par, cont, rows, resid, energy, steps, states,
    att, acc, wat, wac, batt, bacc, datt, dacc, xatt, xacc,
    inner, adapt, jump_enabled, scratch, flags, xflags,
):
    """One Monte Carlo step: inner (jump + local sweep) repeats on every
    rung, then one exchange sweep, then exact cache refresh."""
    L = bvec.size
    for l in range(L):
        s = slot_of[l]
        for _rep in range(inner):
            if jump_enabled:
                _jump_move(
                    xs, ys, h, pp, klogp, bvec, l, s,
                    K, par, rows, resid, energy, states,
                    batt, bacc, datt, dacc, scratch,
                )
            _local_scan(
                xs, ys, invx, sxx, h, pp, bvec, l, s,
                K, par, cont, rows, resid, energy, steps, states,
                att, acc, wat, wac, adapt, scratch, flags,
            )
    _exchange_sweep(xs.size, bvec, slot_of, energy, states, xatt, xacc, xflags)
    hascont = pp[7] > 0.0
    _refresh_all(ys, invx, hascont, K, cont, rows, resid, energy)
