"""Numba branch-and-bound kernel for exact weighted MaxSAT.

Formula encoding (built in maxsat_solver):
  cl_start/cl_lits  CSR of signed literals per clause
  cl_w              clause weight, -1.0 marks a hard clause
  cl_taut           1 for tautological clauses (treated as satisfied)
  occ_start/occ_lit CSR over variables of signed clause references:
                    +-(ci+1) encodes the clause index and the polarity
                    of the variable's literal in it

Search state per clause: n_free counts unassigned literals, n_true counts
true literals.  A clause is live while n_true == 0 and n_free > 0,
falsified when both hit zero, satisfied once n_true > 0.  Per-variable
counters track occurrences in live clauses by polarity; they drive unit
propagation, the greedy rule for variables that can take a weakly
dominant value, and static value preferences.

Two search modes: OPTIMIZE finds one best assignment; FIND returns the
first complete assignment whose weight reaches a target (used for optimum
enumeration under blocking clauses).  In FIND mode the greedy rule is
masked off projection variables so no projected optimum is skipped.
"""

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_HARD_UNSAT = 1
STATUS_NOT_FOUND = 2

MODE_MAX = 0
MODE_MIN = 1

SEARCH_OPTIMIZE = 0
SEARCH_FIND = 1


@njit(cache=True, nogil=True, inline="always")
def _push_prop(prop_var, prop_val, tail, v, val):
    prop_var[tail] = v
    prop_val[tail] = val
    return tail + 1


@njit(cache=True, nogil=True)
def bb_search(n_vars, cl_start, cl_lits, cl_w, cl_taut,
              occ_start, occ_lit,
              order, greedy_ok,
              assume_var, assume_val,
              mode, search, target, eps,
              out_assign):
    """Returns (status, weight).  out_assign receives the witness."""
    n_cl = cl_w.size
    maximize = mode == MODE_MAX

    n_true = np.zeros(n_cl, np.int32)
    n_free = np.zeros(n_cl, np.int32)
    assign = np.full(n_vars + 1, -1, np.int8)
    hard_pos = np.zeros(n_vars + 1, np.int32)
    hard_neg = np.zeros(n_vars + 1, np.int32)
    soft_pos = np.zeros(n_vars + 1, np.int32)
    soft_neg = np.zeros(n_vars + 1, np.int32)

    total_soft = 0.0
    sat_soft = 0.0
    fals_soft = 0.0
    root_conflict = False

    for ci in range(n_cl):
        w = cl_w[ci]
        hard = w < 0.0
        if not hard:
            total_soft += w
        nl = cl_start[ci + 1] - cl_start[ci]
        n_free[ci] = nl
        n_true[ci] = cl_taut[ci]
        if cl_taut[ci] != 0:
            continue
        if nl == 0:
            if hard:
                root_conflict = True
            else:
                fals_soft += w
            continue
        for t in range(cl_start[ci], cl_start[ci + 1]):
            lit = cl_lits[t]
            v = lit if lit > 0 else -lit
            if hard:
                if lit > 0:
                    hard_pos[v] += 1
                else:
                    hard_neg[v] += 1
            else:
                if lit > 0:
                    soft_pos[v] += 1
                else:
                    soft_neg[v] += 1

    if root_conflict:
        return STATUS_HARD_UNSAT, 0.0

    # static value preference: polarity carrying more live soft weight
    pref = np.zeros(n_vars + 1, np.int8)
    pos_w = np.zeros(n_vars + 1)
    neg_w = np.zeros(n_vars + 1)
    for ci in range(n_cl):
        w = cl_w[ci]
        if w < 0.0 or cl_taut[ci] != 0:
            continue
        for t in range(cl_start[ci], cl_start[ci + 1]):
            lit = cl_lits[t]
            if lit > 0:
                pos_w[lit] += w
            else:
                neg_w[-lit] += w
    for v in range(1, n_vars + 1):
        want_one = pos_w[v] >= neg_w[v]
        if not maximize:
            want_one = not want_one
        pref[v] = 1 if want_one else 0

    trail_var = np.zeros(n_vars + 1, np.int32)
    trail_len = 0
    prop_var = np.zeros(n_cl + n_vars + 8, np.int32)
    prop_val = np.zeros(n_cl + n_vars + 8, np.int8)

    dec_pos = np.zeros(n_vars + 2, np.int32)
    dec_var = np.zeros(n_vars + 2, np.int32)
    dec_val = np.zeros(n_vars + 2, np.int8)
    dec_flip = np.zeros(n_vars + 2, np.uint8)
    dec_ptr = np.zeros(n_vars + 2, np.int32)
    depth = 0
    ptr = 0

    best_w = 0.0
    found = False

    q_head = 0
    q_tail = 0
    for t in range(assume_var.size):
        q_tail = _push_prop(prop_var, prop_val, q_tail, assume_var[t], assume_val[t])

    while True:
        # ---- propagation + greedy fixpoint ----
        conflict = False
        while True:
            progressed = False
            while q_head < q_tail:
                v = prop_var[q_head]
                val = prop_val[q_head]
                q_head += 1
                if assign[v] >= 0:
                    if assign[v] != val:
                        conflict = True
                        break
                    continue
                # assign v := val
                assign[v] = val
                trail_var[trail_len] = v
                trail_len += 1
                progressed = True
                for t in range(occ_start[v], occ_start[v + 1]):
                    ref = occ_lit[t]
                    pos = ref > 0
                    ci = (ref if pos else -ref) - 1
                    istrue = pos == (val == 1)
                    n_free[ci] -= 1
                    if istrue:
                        n_true[ci] += 1
                        if n_true[ci] == 1:
                            w = cl_w[ci]
                            hard = w < 0.0
                            if not hard:
                                sat_soft += w
                            for u in range(cl_start[ci], cl_start[ci + 1]):
                                lit2 = cl_lits[u]
                                v2 = lit2 if lit2 > 0 else -lit2
                                if hard:
                                    if lit2 > 0:
                                        hard_pos[v2] -= 1
                                    else:
                                        hard_neg[v2] -= 1
                                else:
                                    if lit2 > 0:
                                        soft_pos[v2] -= 1
                                    else:
                                        soft_neg[v2] -= 1
                    else:
                        if n_true[ci] == 0:
                            w = cl_w[ci]
                            hard = w < 0.0
                            if n_free[ci] == 0:
                                if hard:
                                    conflict = True
                                    # finish the occurrence scan for undo symmetry
                                else:
                                    fals_soft += w
                                    for u in range(cl_start[ci], cl_start[ci + 1]):
                                        lit2 = cl_lits[u]
                                        v2 = lit2 if lit2 > 0 else -lit2
                                        if lit2 > 0:
                                            soft_pos[v2] -= 1
                                        else:
                                            soft_neg[v2] -= 1
                            elif n_free[ci] == 1 and hard:
                                for u in range(cl_start[ci], cl_start[ci + 1]):
                                    lit2 = cl_lits[u]
                                    v2 = lit2 if lit2 > 0 else -lit2
                                    if assign[v2] < 0:
                                        q_tail = _push_prop(prop_var, prop_val, q_tail,
                                                            v2, 1 if lit2 > 0 else 0)
                                        break
                if conflict:
                    break
            if conflict:
                break
            q_head = 0
            q_tail = 0
            # greedy weakly-dominant assignments
            any_greedy = False
            for v in range(1, n_vars + 1):
                if assign[v] >= 0 or greedy_ok[v] == 0:
                    continue
                hp = hard_pos[v]
                hn = hard_neg[v]
                sp = soft_pos[v]
                sn = soft_neg[v]
                if hp == 0 and hn == 0 and sp == 0 and sn == 0:
                    q_tail = _push_prop(prop_var, prop_val, q_tail, v, 0)
                    any_greedy = True
                elif maximize:
                    if hn == 0 and sn == 0:
                        q_tail = _push_prop(prop_var, prop_val, q_tail, v, 1)
                        any_greedy = True
                    elif hp == 0 and sp == 0:
                        q_tail = _push_prop(prop_var, prop_val, q_tail, v, 0)
                        any_greedy = True
                else:
                    if hn == 0 and sp == 0:
                        q_tail = _push_prop(prop_var, prop_val, q_tail, v, 1)
                        any_greedy = True
                    elif hp == 0 and sn == 0:
                        q_tail = _push_prop(prop_var, prop_val, q_tail, v, 0)
                        any_greedy = True
            if not any_greedy and not progressed and q_head == q_tail:
                break

        prune = conflict
        if not conflict:
            if maximize:
                ub = total_soft - fals_soft
                if search == SEARCH_FIND:
                    if ub < target - eps:
                        prune = True
                elif found and ub <= best_w + eps:
                    prune = True
            else:
                lb = sat_soft
                if search == SEARCH_FIND:
                    if lb > target + eps:
                        prune = True
                elif found and lb >= best_w - eps:
                    prune = True

        if not prune:
            # pick next branch variable
            while ptr < order.size and assign[order[ptr]] >= 0:
                ptr += 1
            if ptr >= order.size:
                # leaf: every variable assigned
                w = sat_soft
                if search == SEARCH_FIND:
                    ok = w >= target - eps if maximize else w <= target + eps
                    if ok:
                        for v in range(1, n_vars + 1):
                            out_assign[v] = assign[v]
                        return STATUS_OPTIMAL, w
                else:
                    better = (not found) or (w > best_w if maximize else w < best_w)
                    if better:
                        best_w = w
                        found = True
                        for v in range(1, n_vars + 1):
                            out_assign[v] = assign[v]
                prune = True
            else:
                v = order[ptr]
                depth += 1
                dec_pos[depth] = trail_len
                dec_var[depth] = v
                dec_val[depth] = pref[v]
                dec_flip[depth] = 0
                dec_ptr[depth] = ptr
                q_head = 0
                q_tail = _push_prop(prop_var, prop_val, 0, v, pref[v])
                continue

        # ---- backtrack ----
        while depth > 0 and dec_flip[depth] == 1:
            # undo to this decision's trail mark, then discard the level
            while trail_len > dec_pos[depth]:
                trail_len -= 1
                v = trail_var[trail_len]
                val = assign[v]
                for t in range(occ_start[v], occ_start[v + 1]):
                    ref = occ_lit[t]
                    pos = ref > 0
                    ci = (ref if pos else -ref) - 1
                    istrue = pos == (val == 1)
                    n_free[ci] += 1
                    if istrue:
                        n_true[ci] -= 1
                        if n_true[ci] == 0:
                            w = cl_w[ci]
                            hard = w < 0.0
                            if not hard:
                                sat_soft -= w
                            for u in range(cl_start[ci], cl_start[ci + 1]):
                                lit2 = cl_lits[u]
                                v2 = lit2 if lit2 > 0 else -lit2
                                if hard:
                                    if lit2 > 0:
                                        hard_pos[v2] += 1
                                    else:
                                        hard_neg[v2] += 1
                                else:
                                    if lit2 > 0:
                                        soft_pos[v2] += 1
                                    else:
                                        soft_neg[v2] += 1
                    else:
                        if n_true[ci] == 0 and n_free[ci] == 1:
                            w = cl_w[ci]
                            if w >= 0.0:
                                fals_soft -= w
                                for u in range(cl_start[ci], cl_start[ci + 1]):
                                    lit2 = cl_lits[u]
                                    v2 = lit2 if lit2 > 0 else -lit2
                                    if lit2 > 0:
                                        soft_pos[v2] += 1
                                    else:
                                        soft_neg[v2] += 1
                assign[v] = -1
            depth -= 1
        if depth == 0:
            if search == SEARCH_FIND:
                return STATUS_NOT_FOUND, 0.0
            if found:
                return STATUS_OPTIMAL, best_w
            return STATUS_HARD_UNSAT, 0.0
        # undo the current level's consequences and flip its decision
        while trail_len > dec_pos[depth]:
            trail_len -= 1
            v = trail_var[trail_len]
            val = assign[v]
            for t in range(occ_start[v], occ_start[v + 1]):
                ref = occ_lit[t]
                pos = ref > 0
                ci = (ref if pos else -ref) - 1
                istrue = pos == (val == 1)
                n_free[ci] += 1
                if istrue:
                    n_true[ci] -= 1
                    if n_true[ci] == 0:
                        w = cl_w[ci]
                        hard = w < 0.0
                        if not hard:
                            sat_soft -= w
                        for u in range(cl_start[ci], cl_start[ci + 1]):
                            lit2 = cl_lits[u]
                            v2 = lit2 if lit2 > 0 else -lit2
                            if hard:
                                if lit2 > 0:
                                    hard_pos[v2] += 1
                                else:
                                    hard_neg[v2] += 1
                            else:
                                if lit2 > 0:
                                    soft_pos[v2] += 1
                                else:
                                    soft_neg[v2] += 1
                else:
                    if n_true[ci] == 0 and n_free[ci] == 1:
                        w = cl_w[ci]
                        if w >= 0.0:
                            fals_soft -= w
                            for u in range(cl_start[ci], cl_start[ci + 1]):
                                lit2 = cl_lits[u]
                                v2 = lit2 if lit2 > 0 else -lit2
                                if lit2 > 0:
                                    soft_pos[v2] += 1
                                else:
                                    soft_neg[v2] += 1
            assign[v] = -1
        flipped = 1 - dec_val[depth]
        dec_val[depth] = flipped
        dec_flip[depth] = 1
        ptr = dec_ptr[depth]
        q_head = 0
        q_tail = _push_prop(prop_var, prop_val, 0, dec_var[depth], flipped)
