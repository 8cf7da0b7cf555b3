"""Numba kernels for the low-rank SDP coordinate descent and its
reverse-mode differentiation.

Vector layout: V has one row per variable, row 0 is the truth direction.
The weight matrix C is symmetric with a zero diagonal, so the coordinate
gradient g_o = sum_j C[o, j] * V[j] already excludes the self term.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def init_vectors(n1, k, in_vars, in_vals, seed):
    """Truth row = first basis vector; inputs at +-truth; rest random unit."""
    np.random.seed(seed)
    V = np.zeros((n1, k))
    V[0, 0] = 1.0
    is_input = np.zeros(n1, np.bool_)
    for t in range(in_vars.size):
        v = in_vars[t]
        is_input[v] = True
        V[v, 0] = 1.0 if in_vals[t] == 1 else -1.0
    for i in range(1, n1):
        if not is_input[i]:
            nrm = 0.0
            while nrm < 1e-12:
                vec = np.random.standard_normal(k)
                nrm = np.sqrt((vec * vec).sum())
            V[i] = vec / nrm
    return V


@njit(cache=True, nogil=True)
def mixing_forward(C, V, upd, max_sweeps, tol, degen_tol, t_var, t_old, t_norm, t_skip):
    """Sweeps of v_o <- -g_o/|g_o| over upd (ascending); records each step.

    Returns the number of steps taken.  Stops early when the largest
    per-vector change within a sweep drops below tol.  Updates with
    |g_o| < degen_tol leave the vector unchanged.
    """
    n1, k = V.shape
    g = np.zeros(k)
    step = 0
    for _ in range(max_sweeps):
        max_change = 0.0
        for ui in range(upd.size):
            o = upd[ui]
            for r in range(k):
                g[r] = 0.0
            for j in range(n1):
                c = C[o, j]
                if c != 0.0:
                    for r in range(k):
                        g[r] += c * V[j, r]
            nrm = np.sqrt((g * g).sum())
            t_var[step] = o
            t_norm[step] = nrm
            for r in range(k):
                t_old[step, r] = V[o, r]
            if nrm < degen_tol:
                t_skip[step] = True
            else:
                t_skip[step] = False
                change = 0.0
                for r in range(k):
                    nv = -g[r] / nrm
                    d = nv - V[o, r]
                    change += d * d
                    V[o, r] = nv
                if change > max_change:
                    max_change = change
            step += 1
        if np.sqrt(max_change) < tol:
            break
    return step


@njit(cache=True, nogil=True)
def mixing_forward_notrace(C, V, upd, max_sweeps, tol, degen_tol):
    n1, k = V.shape
    g = np.zeros(k)
    for _ in range(max_sweeps):
        max_change = 0.0
        for ui in range(upd.size):
            o = upd[ui]
            for r in range(k):
                g[r] = 0.0
            for j in range(n1):
                c = C[o, j]
                if c != 0.0:
                    for r in range(k):
                        g[r] += c * V[j, r]
            nrm = np.sqrt((g * g).sum())
            if nrm >= degen_tol:
                change = 0.0
                for r in range(k):
                    nv = -g[r] / nrm
                    d = nv - V[o, r]
                    change += d * d
                    V[o, r] = nv
                if change > max_change:
                    max_change = change
        if np.sqrt(max_change) < tol:
            break


@njit(cache=True, nogil=True)
def mixing_backward(C, V, dV, t_var, t_old, t_norm, t_skip, steps, stop_at, dC):
    """Reverse replay of the recorded steps down to (and excluding) stop_at.

    V must be the forward's final state; it is walked back in place.  dV
    holds incoming vector gradients and is consumed.  dC accumulates
    per-ordered-usage gradients; the symmetric parameter gradient is
    dC + dC.T.  A positive stop_at truncates the unroll, treating earlier
    vectors as constants.
    """
    n1, k = V.shape
    dg = np.zeros(k)
    for s in range(steps - 1, stop_at - 1, -1):
        o = t_var[s]
        if not t_skip[s]:
            nrm = t_norm[s]
            coef = 0.0
            for r in range(k):
                coef += V[o, r] * dV[o, r]
            # v_new = -g/|g|, and the unit g equals -v_new
            for r in range(k):
                dg[r] = -(dV[o, r] - V[o, r] * coef) / nrm
            for j in range(n1):
                if j == o:
                    continue
                acc = 0.0
                for r in range(k):
                    acc += dg[r] * V[j, r]
                dC[o, j] += acc
                c = C[o, j]
                if c != 0.0:
                    for r in range(k):
                        dV[j, r] += c * dg[r]
            for r in range(k):
                dV[o, r] = 0.0
        for r in range(k):
            V[o, r] = t_old[s, r]


@njit(cache=True, nogil=True)
def readout_prob(V, var):
    k = V.shape[1]
    t = 0.0
    for r in range(k):
        t += V[var, r] * V[0, r]
    if t > 1.0:
        t = 1.0
    elif t < -1.0:
        t = -1.0
    return np.arccos(-t) / np.pi


@njit(cache=True, nogil=True)
def seed_loss_grad(V, sup_vars, sup_vals, dV, eps, threshold):
    """Mean binary cross-entropy over supervised vars; writes dL/dv rows.

    Returns (loss, correct_bit_count).  Gradients vanish where the
    probability or the dot product sits at its clamp boundary.
    """
    k = V.shape[1]
    n_sup = sup_vars.size
    loss = 0.0
    ncorr = 0
    for t in range(n_sup):
        o = sup_vars[t]
        y = sup_vals[t]
        dot = 0.0
        for r in range(k):
            dot += V[o, r] * V[0, r]
        tc = dot
        if tc > 1.0:
            tc = 1.0
        elif tc < -1.0:
            tc = -1.0
        p_raw = np.arccos(-tc) / np.pi
        p = p_raw
        if p < eps:
            p = eps
        elif p > 1.0 - eps:
            p = 1.0 - eps
        if y == 1:
            loss += -np.log(p)
        else:
            loss += -np.log(1.0 - p)
        pred = 1 if p_raw > threshold else 0
        if pred == y:
            ncorr += 1
        if eps < p_raw < 1.0 - eps and -1.0 < dot < 1.0:
            dldp = (p - y) / (p * (1.0 - p)) / n_sup
            dpdt = 1.0 / (np.pi * np.sqrt(1.0 - tc * tc))
            for r in range(k):
                dV[o, r] += dldp * dpdt * V[0, r]
    return loss / n_sup, ncorr


@njit(cache=True, nogil=True)
def train_example(C, k, in_vars, in_vals, sup_vars, sup_vals, upd, seed,
                  max_sweeps, tol, degen_tol, eps, threshold, backward_cap,
                  t_var, t_old, t_norm, t_skip, dC):
    """Forward + loss + reverse pass for one example; accumulates into dC."""
    n1 = C.shape[0]
    V = init_vectors(n1, k, in_vars, in_vals, seed)
    steps = mixing_forward(C, V, upd, max_sweeps, tol, degen_tol,
                           t_var, t_old, t_norm, t_skip)
    dV = np.zeros((n1, k))
    loss, ncorr = seed_loss_grad(V, sup_vars, sup_vals, dV, eps, threshold)
    stop_at = max(0, steps - backward_cap * upd.size)
    mixing_backward(C, V, dV, t_var, t_old, t_norm, t_skip, steps, stop_at, dC)
    return loss, ncorr


@njit(cache=True, nogil=True)
def eval_example(C, k, in_vars, in_vals, upd, seed, max_sweeps, tol, degen_tol, probs):
    """Forward pass only; fills probs[var] for every variable row."""
    n1 = C.shape[0]
    V = init_vectors(n1, k, in_vars, in_vals, seed)
    mixing_forward_notrace(C, V, upd, max_sweeps, tol, degen_tol)
    for v in range(n1):
        probs[v] = readout_prob(V, v)
