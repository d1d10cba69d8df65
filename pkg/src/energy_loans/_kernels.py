"""Compiled inner loops: the greedy battery policy and contract-grid evaluation."""

import numpy as np
from numba import njit

SOC_TOL = 1e-9


@njit(cache=True, nogil=True)
def greedy_step(soc, demand_kw, dt, lo, hi, ch_rate, dis_rate, eta_c, eta_d, degr):
    """One period of the naive policy; returns (dispatch_kw, new_soc).

    The battery offsets ``demand_kw`` (charging on surplus, discharging on
    deficit) within its rate limits and the SOC window, after the fixed
    per-step degradation.  If degradation alone would push the SOC under the
    floor the policy charges just enough to stay on it.  A step limited by the
    SOC window lands exactly on the bound.
    """
    p = -demand_kw
    if p > ch_rate:
        p = ch_rate
    elif p < -dis_rate:
        p = -dis_rate
    at_hi = False
    at_lo = False
    room_up = hi - soc + degr
    if p > 0.0 and eta_c * p * dt >= room_up:
        p = room_up / (eta_c * dt)
        at_hi = True
    room_down = soc - degr - lo
    if room_down < 0.0:
        need = -room_down / (eta_c * dt)
        if p <= need:
            p = need
            at_lo = True
    elif p < 0.0 and -p * dt / eta_d >= room_down:
        p = -room_down * eta_d / dt
        at_lo = True
    if at_hi:
        new = hi
    elif at_lo:
        new = lo
    elif p >= 0.0:
        new = soc + eta_c * p * dt - degr
    else:
        new = soc + p * dt / eta_d - degr
    if new < lo and new > lo - SOC_TOL:
        new = lo
    elif new > hi and new < hi + SOC_TOL:
        new = hi
    return p, new


@njit(cache=True, nogil=True)
def simulate_greedy(soc0, demand, dt, lo, hi, ch_rate, dis_rate, eta_c, eta_d, degr):
    n = demand.shape[0]
    dispatch = np.empty(n)
    soc = np.empty(n + 1)
    soc[0] = soc0
    for k in range(n):
        p, s = greedy_step(soc[k], demand[k], dt, lo, hi, ch_rate, dis_rate, eta_c, eta_d, degr)
        dispatch[k] = p
        soc[k + 1] = s
    return dispatch, soc


@njit(cache=True, nogil=True)
def restore_energy(delta, eta_c, eta_d):
    """Grid-side energy returning the SOC to its start; ``delta = soc0 - soc_end``."""
    if delta > 0.0:
        return delta / eta_c
    return delta * eta_d


@njit(cache=True, nogil=True)
def evaluate_grid(paths, probs, committed, q_kw, taus, soc0, dt, lo, hi, ch_rate, dis_rate,
                  eta_c, eta_d, degr, w_flex, w_autarky):
    """Expected utility of every (quantity, delay) contract.

    ``paths`` holds scenario net demand (S x L) with probabilities ``probs``,
    ``committed`` the exchange already agreed over the window (L), ``q_kw``
    the contract quantities as power in the delivery period.  Returns an
    array of shape (len(q_kw), len(taus)).

    Per (quantity, scenario) the path before the return period is shared by
    all delays; after the return, a path whose SOC rejoins the no-contract
    path is finished with that path's remaining sums.
    """
    n_s, n_l = paths.shape
    n_q = q_kw.shape[0]
    n_t = taus.shape[0]
    out = np.zeros((n_q, n_t))

    # no-contract path per scenario: SOC trajectory and suffix sums of both criteria
    base_soc = np.empty((n_s, n_l + 1))
    base_flex_tail = np.zeros((n_s, n_l + 1))
    base_aut_tail = np.zeros((n_s, n_l + 1))
    base_util = np.empty(n_s)
    step_p = np.empty(n_l)
    step_a = np.empty(n_l)
    for s in range(n_s):
        soc = soc0
        base_soc[s, 0] = soc
        flex = 0.0
        aut = 0.0
        for l in range(n_l):
            d = paths[s, l] + committed[l]
            p, soc = greedy_step(soc, d, dt, lo, hi, ch_rate, dis_rate, eta_c, eta_d, degr)
            base_soc[s, l + 1] = soc
            step_p[l] = p * dt
            step_a[l] = abs(d + p) * dt
            flex += step_p[l]
            aut += step_a[l]
        flex += restore_energy(soc0 - soc, eta_c, eta_d)
        base_util[s] = -(w_flex * flex + w_autarky * aut)
        for l in range(n_l - 1, -1, -1):
            base_flex_tail[s, l] = base_flex_tail[s, l + 1] + step_p[l]
            base_aut_tail[s, l] = base_aut_tail[s, l + 1] + step_a[l]

    no_deal = 0.0
    for s in range(n_s):
        no_deal += probs[s] * base_util[s]

    pre_soc = np.empty(n_l + 1)
    pre_flex = np.empty(n_l + 1)
    pre_aut = np.empty(n_l + 1)
    for iq in range(n_q):
        qk = q_kw[iq]
        if qk == 0.0:
            for it in range(n_t):
                out[iq, it] = no_deal
            continue
        for s in range(n_s):
            # contract delivered at l = 0, no return yet
            soc = soc0
            pre_soc[0] = soc
            pre_flex[0] = 0.0
            pre_aut[0] = 0.0
            for l in range(n_l):
                d = paths[s, l] + committed[l]
                if l == 0:
                    d += qk
                p, soc = greedy_step(soc, d, dt, lo, hi, ch_rate, dis_rate, eta_c, eta_d, degr)
                pre_soc[l + 1] = soc
                pre_flex[l + 1] = pre_flex[l] + p * dt
                pre_aut[l + 1] = pre_aut[l] + abs(d + p) * dt
            for it in range(n_t):
                tau = taus[it]
                if tau >= n_l:
                    soc = pre_soc[n_l]
                    flex = pre_flex[n_l]
                    aut = pre_aut[n_l]
                else:
                    soc = pre_soc[tau]
                    flex = pre_flex[tau]
                    aut = pre_aut[tau]
                    l = tau
                    while l < n_l:
                        d = paths[s, l] + committed[l]
                        if l == tau:
                            d -= qk
                        p, soc = greedy_step(soc, d, dt, lo, hi, ch_rate, dis_rate,
                                             eta_c, eta_d, degr)
                        flex += p * dt
                        aut += abs(d + p) * dt
                        l += 1
                        if l < n_l and soc == base_soc[s, l]:
                            flex += base_flex_tail[s, l]
                            aut += base_aut_tail[s, l]
                            soc = base_soc[s, n_l]
                            break
                flex += restore_energy(soc0 - soc, eta_c, eta_d)
                out[iq, it] += probs[s] * -(w_flex * flex + w_autarky * aut)
    return out
