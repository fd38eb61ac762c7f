"""Compiled per-report forwarding loop.

Every routine here mirrors a pure-Python counterpart (fuzzy.centroid,
schemes.next_hop_*, engine reference path) operation for operation, so the two
backends produce bit-identical runs; tests/test_engine.py holds them to it.
Argument groups:

    net    = (x, y, dist_to_bs, alive, residual, nbr_ptr, nbr_idx, ncloser)
    fz     = (knots, label_counts, rule_table)
    cache  = (cached_energy, cached_af, cached_fv) + scratch (levels, work, act, mu)
             + per-node ND degrees (mund)
    crisp  = (m, n, initial_energy, diagonal)
    radio  = (bits, e_elec, e_amp, path_loss, initial_energy, radio_range)
"""
import math

import numba as nb
import numpy as np

GREEDY, DEF, FUZZY, CRISP = 0, 1, 2, 3
DELIVERED, DROPPED_ENROUTE, DROPPED_AT_BS, STRANDED = 0, 1, 2, 3
TX, RX = 0, 1

jit = nb.njit(cache=True)
inline = nb.njit(cache=True, inline="always")


@inline
def degree(a, b, c, d, x):
    if x < a or x > d:
        return 0.0
    if b <= x and x <= c:
        return 1.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@jit
def firing_into(knots, counts, table, te, nd, af, levels, mu):
    """Rule strengths per output label; ``mu`` is scratch of length sum(counts[:3])."""
    for o in range(counts[3]):
        levels[o] = 0.0
    nt = counts[0]
    nn = counts[1]
    na = counts[2]
    for i in range(nt):
        mu[i] = degree(knots[0, i, 0], knots[0, i, 1], knots[0, i, 2], knots[0, i, 3], te)
    for j in range(nn):
        mu[nt + j] = degree(knots[1, j, 0], knots[1, j, 1], knots[1, j, 2], knots[1, j, 3], nd)
    for k in range(na):
        mu[nt + nn + k] = degree(knots[2, k, 0], knots[2, k, 1], knots[2, k, 2], knots[2, k, 3], af)
    _fire(counts, table, levels, mu)


@jit
def node_firing_into(knots, counts, table, te, v, af, mund, levels, mu):
    """firing_into for node ``v`` with its ND degrees read from ``mund``.

    ``mu`` carries one extra slot holding the AF its AF degrees belong to.
    """
    for o in range(counts[3]):
        levels[o] = 0.0
    nt = counts[0]
    nn = counts[1]
    na = counts[2]
    for i in range(nt):
        mu[i] = degree(knots[0, i, 0], knots[0, i, 1], knots[0, i, 2], knots[0, i, 3], te)
    for j in range(nn):
        mu[nt + j] = mund[v, j]
    key = nt + nn + na
    if not mu[key] == af:
        for k in range(na):
            mu[nt + nn + k] = degree(knots[2, k, 0], knots[2, k, 1], knots[2, k, 2],
                                     knots[2, k, 3], af)
        mu[key] = af
    _fire(counts, table, levels, mu)


@jit
def nd_degrees(knots, counts, dist, diag):
    """ND membership degrees of every node; they never change within a run."""
    nn = counts[1]
    out = np.zeros((len(dist), nn))
    for v in range(len(dist)):
        nd = dist[v] / diag
        for j in range(nn):
            out[v, j] = degree(knots[1, j, 0], knots[1, j, 1], knots[1, j, 2], knots[1, j, 3], nd)
    return out


@inline
def _fire(counts, table, levels, mu):
    nt = counts[0]
    nn = counts[1]
    na = counts[2]
    for i in range(nt):
        mu_t = mu[i]
        if mu_t <= 0.0:
            continue
        for j in range(nn):
            mu_n = mu[nt + j]
            if mu_n <= 0.0:
                continue
            w_tn = mu_t if mu_t < mu_n else mu_n
            for k in range(na):
                mu_a = mu[nt + nn + k]
                if mu_a <= 0.0:
                    continue
                w = w_tn if w_tn < mu_a else mu_a
                out = table[i, j, k]
                if w > levels[out]:
                    levels[out] = w


@jit
def firing_levels(knots, counts, table, te, nd, af, levels):
    mu = np.empty(counts[0] + counts[1] + counts[2])
    firing_into(knots, counts, table, te, nd, af, levels, mu)


def work_sizes(n_out):
    """Scratch lengths (float, int) that centroid_into needs for ``n_out`` labels."""
    npairs = n_out * (n_out - 1) // 2
    return 17 * n_out + max(npairs, 1), n_out


@inline
def _cval(work, g, x, right):
    # min(level, one-sided degree) for the clipped set whose (a, b, c, d, level,
    # lo, hi) start at g; right=True takes the limit from the right
    a = work[g]
    b = work[g + 1]
    c = work[g + 2]
    d = work[g + 3]
    lv = work[g + 4]
    lo = work[g + 5]
    hi = work[g + 6]
    if right:
        if lo <= x and x < hi:
            return lv
    elif lo < x and x <= hi:
        return lv
    if right:
        if x < a or x >= d:
            mu = 0.0
        elif x < b:
            mu = (x - a) / (b - a)
        elif x < c:
            mu = 1.0
        else:
            mu = (d - x) / (d - c)
    else:
        if x <= a or x > d:
            mu = 0.0
        elif x <= b:
            mu = (x - a) / (b - a)
        elif x <= c:
            mu = 1.0
        else:
            mu = (d - x) / (d - c)
    return mu if mu < lv else lv


@jit
def centroid_into(knots, counts, levels, work, act):
    """Centroid of the max of clipped output sets, using caller scratch.

    ``work`` layout: per active set (a, b, c, d, level, lo, hi) with lo/hi the
    clip points, then the raw knots, the sorted unique knots, values at the
    left and right knot, crossings.
    """
    nfv = counts[3]
    na = 0
    for o in range(nfv):
        if levels[o] > 0.0:
            act[na] = o
            na += 1
    if na == 0:
        return np.nan
    nraw = 4 * na
    RAW = 7 * na
    XS = RAW + nraw
    V = XS + nraw
    W = V + na
    TS = W + na
    for i in range(na):
        o = act[i]
        a = knots[3, o, 0]
        b = knots[3, o, 1]
        c = knots[3, o, 2]
        d = knots[3, o, 3]
        lv = levels[o]
        lo = a + (b - a) * lv
        hi = d - (d - c) * lv
        g = 7 * i
        work[g] = a
        work[g + 1] = b
        work[g + 2] = c
        work[g + 3] = d
        work[g + 4] = lv
        work[g + 5] = lo
        work[g + 6] = hi
        r = RAW + 4 * i
        work[r] = a
        work[r + 1] = lo
        work[r + 2] = hi
        work[r + 3] = d
    for i in range(RAW + 1, RAW + nraw):
        val = work[i]
        j = i - 1
        while j >= RAW and work[j] > val:
            work[j + 1] = work[j]
            j -= 1
        work[j + 1] = val
    nx = 0
    for i in range(RAW, RAW + nraw):
        x = work[i]
        if nx == 0 or x != work[XS + nx - 1]:
            work[XS + nx] = x
            nx += 1
    area = 0.0
    moment = 0.0
    for s in range(nx - 1):
        x0 = work[XS + s]
        x1 = work[XS + s + 1]
        for i in range(na):
            g = 7 * i
            if x1 <= work[g] or x0 >= work[g + 3]:
                # interval outside this set's support
                work[V + i] = 0.0
                work[W + i] = 0.0
            else:
                work[V + i] = _cval(work, g, x0, True)
                work[W + i] = _cval(work, g, x1, False)
        h = x1 - x0
        nt = 0
        for i in range(na):
            for j in range(i + 1, na):
                g0 = work[V + i] - work[V + j]
                g1 = work[W + i] - work[W + j]
                if g0 * g1 < 0.0:
                    u = g0 / (g0 - g1)
                    q = TS + nt
                    while q > TS and work[q - 1] > u:
                        work[q] = work[q - 1]
                        q -= 1
                    work[q] = u
                    nt += 1
        xa = x0
        ya = work[V]
        for i in range(1, na):
            if work[V + i] > ya:
                ya = work[V + i]
        for t in range(nt):
            u = work[TS + t]
            xb = x0 + h * u
            yb = work[V] + (work[W] - work[V]) * u
            for i in range(1, na):
                y = work[V + i] + (work[W + i] - work[V + i]) * u
                if y > yb:
                    yb = y
            hw = xb - xa
            if hw > 0.0:
                area += 0.5 * hw * (ya + yb)
                moment += hw * (xa * (2.0 * ya + yb) + xb * (ya + 2.0 * yb)) / 6.0
            xa = xb
            ya = yb
        yb = work[W]
        for i in range(1, na):
            if work[W + i] > yb:
                yb = work[W + i]
        hw = x1 - xa
        if hw > 0.0:
            area += 0.5 * hw * (ya + yb)
            moment += hw * (xa * (2.0 * ya + yb) + x1 * (ya + 2.0 * yb)) / 6.0
    if area <= 0.0:
        num = 0.0
        den = 0.0
        for i in range(na):
            o = act[i]
            num += 0.5 * (knots[3, o, 1] + knots[3, o, 2]) * levels[o]
            den += levels[o]
        return num / den
    return moment / area


@jit
def centroid(knots, counts, levels):
    nfv = counts[3]
    work = np.empty(17 * nfv + max(nfv * (nfv - 1) // 2, 1))
    act = np.empty(nfv, dtype=np.int64)
    return centroid_into(knots, counts, levels, work, act)


@jit
def infer(knots, counts, table, te, nd, af, levels):
    firing_levels(knots, counts, table, te, nd, af, levels)
    return centroid(knots, counts, levels)


@jit
def fuzzy_fv(v, af, dist, residual, initial, diag, knots, counts, table, ce, ca, cf,
             levels, work, act, mu, mund):
    """Fuzzy FV of node ``v``, recomputed and stored in the cache."""
    e = residual[v]
    node_firing_into(knots, counts, table, e / initial, v, af, mund, levels, mu)
    val = centroid_into(knots, counts, levels, work, act)
    ce[v] = e
    ca[v] = af
    cf[v] = val
    return val


@inline
def crisp_fv(v, af, dist, residual, m, n, initial, diag):
    proximity = 1.0 - dist[v] / diag
    energy = residual[v] / initial
    return 1.0 * af ** m + (proximity + energy) ** n


@jit
def fitness(v, af, kind, net, fz, cache, crisp):
    """Score of ``v`` under ``kind`` (FUZZY uses and refreshes the cache)."""
    dist = net[2]
    residual = net[4]
    m, n, initial, diag = crisp
    if kind == FUZZY:
        ce, ca, cf, levels, work, act, mu, mund = cache
        if ce[v] == residual[v] and ca[v] == af:
            return cf[v]
        return fuzzy_fv(v, af, dist, residual, initial, diag, fz[0], fz[1], fz[2],
                        ce, ca, cf, levels, work, act, mu, mund)
    return crisp_fv(v, af, dist, residual, m, n, initial, diag)


@inline
def select_next(cur, af, kind, k, stamps, stamp, dist, alive, residual, ptr, idx, ncloser,
                knots, counts, table, ce, ca, cf, levels, work, act, mu, mund, m, n, initial,
                diag, rng, kbuf):
    """Next hop from ``cur`` or -1. Candidates are alive, unvisited neighbours,
    restricted to those strictly closer to the BS whenever any exist.

    Neighbour rows are ordered by (distance to BS, id), so the closer
    neighbours form a prefix of length ``ncloser[cur]``.
    """
    lo = ptr[cur]
    mid = lo + ncloser[cur]
    hi = ptr[cur + 1]
    if kind == GREEDY:
        for p in range(lo, hi):
            v = idx[p]
            if alive[v] and stamps[v] != stamp:
                return v
        return -1
    if kind == DEF:
        nk = 0
        for p in range(lo, mid):
            v = idx[p]
            if alive[v] and stamps[v] != stamp:
                kbuf[nk] = v
                nk += 1
                if nk == k:
                    break
        if nk > 0:
            return kbuf[rng.integers(0, nk)]
        for p in range(mid, hi):
            v = idx[p]
            if alive[v] and stamps[v] != stamp:
                return v
        return -1
    best = -1
    bs = -np.inf
    a = lo
    b = mid
    for sweep in range(2):
        for p in range(a, b):
            v = idx[p]
            if not alive[v] or stamps[v] == stamp:
                continue
            if kind == FUZZY:
                if ce[v] == residual[v] and ca[v] == af:
                    s = cf[v]
                else:
                    s = fuzzy_fv(v, af, dist, residual, initial, diag, knots, counts, table,
                                 ce, ca, cf, levels, work, act, mu, mund)
            else:
                s = crisp_fv(v, af, dist, residual, m, n, initial, diag)
            if best < 0 or s > bs or (s == bs and v < best):
                best = v
                bs = s
        if best >= 0:
            return best
        a = mid
        b = hi
    return best


@jit
def build_route(head, af, kind, k, radio_range, stamps, stamp_ctr, net, fz, cache, crisp,
                rng, kbuf, route):
    """Fill ``route`` from ``head``; returns (length, reached_bs)."""
    x, y, dist, alive, residual, ptr, idx, ncloser = net
    knots, counts, table = fz
    ce, ca, cf, levels, work, act, mu, mund = cache
    m, n_exp, initial, diag = crisp
    stamp_ctr[0] += 1
    st = stamp_ctr[0]
    stamps[head] = st
    route[0] = head
    n = 1
    cur = head
    while dist[cur] > radio_range:
        nxt = select_next(cur, af, kind, k, stamps, st, dist, alive, residual, ptr, idx,
                          ncloser, knots, counts, table, ce, ca, cf, levels, work, act, mu, mund,
                          m, n_exp, initial, diag, rng, kbuf)
        if nxt < 0:
            return n, False
        stamps[nxt] = st
        route[n] = nxt
        n += 1
        cur = nxt
    return n, True


@inline
def _debit(v, amount, kind, consumed, residual, alive, totals, initial):
    before = consumed[v]
    after = before + amount
    if after >= initial:
        after = initial
    paid = after - before
    consumed[v] = after
    totals[kind] += paid
    residual[v] = initial - after
    if after >= initial:
        alive[v] = False
        return paid, True
    return paid, False


@jit
def run_reports(r0, r_end, first_round, head, fixed, fixed_len, fixed_reached, kind, af,
                q, k, ftr, mac_slots, radio, net, fz, cache, crisp, stamps, stamp_ctr, kbuf,
                consumed, totals, used, counts, attack_rng, verify_rng, scheme_rng,
                out_fate, out_legit, out_slot, out_hops, out_energy, out_af,
                deaths, death_count, tracing, trace_buf, trace_off):
    """Forward reports for rounds r0.. until r_end or the first report that
    kills a node; returns the index of the next unprocessed round."""
    x, y, dist, alive, residual, ptr, idx, ncloser = net
    knots, counts_fz, table = fz
    ce, ca, cf, levels, work, act, mu, mund = cache
    m, n_exp, init_fz, diag = crisp
    bits, e_elec, e_amp, lam, initial, radio_range = radio
    rx = bits * e_elec
    fixed_mode = fixed_len > 0
    for r in range(r0, r_end):
        rnd = first_round + r
        fabricate = attack_rng.random() < ftr
        slot = attack_rng.integers(0, mac_slots)
        out_slot[r] = -1 if not fabricate else slot
        legit = not fabricate
        out_legit[r] = legit
        deaths_before = death_count[0]
        if tracing:
            t = trace_off[r]
            trace_buf[t] = head
            trace_off[r + 1] = t + 1
        st = 0
        if not fixed_mode:
            stamp_ctr[0] += 1
            st = stamp_ctr[0]
            stamps[head] = st
        cur = head
        pos = 1
        hops = 0
        fate = -1
        while True:
            if fixed_mode:
                if fixed_reached and cur == fixed[fixed_len - 1]:
                    break
                nxt = fixed[pos] if pos < fixed_len else -1
                pos += 1
            else:
                if dist[cur] <= radio_range:
                    break
                nxt = select_next(cur, af, kind, k, stamps, st, dist, alive, residual, ptr,
                                  idx, ncloser, knots, counts_fz, table, ce, ca, cf, levels,
                                  work, act, mu, mund, m, n_exp, init_fz, diag, scheme_rng,
                                  kbuf)
                if nxt >= 0:
                    stamps[nxt] = st
            if nxt < 0:
                fate = STRANDED
                break
            dx = x[cur] - x[nxt]
            dy = y[cur] - y[nxt]
            d = math.sqrt(dx * dx + dy * dy)
            paid, died = _debit(cur, bits * e_elec + bits * e_amp * d ** lam, TX,
                                consumed, residual, alive, totals, initial)
            out_energy[r] += paid
            if died:
                deaths[death_count[0], 0] = cur
                deaths[death_count[0], 1] = rnd
                death_count[0] += 1
            if tracing:
                trace_buf[trace_off[r + 1]] = nxt
                trace_off[r + 1] += 1
            used[nxt] = True
            hops += 1
            paid, died = _debit(nxt, rx, RX, consumed, residual, alive, totals, initial)
            out_energy[r] += paid
            if died:
                deaths[death_count[0], 0] = nxt
                deaths[death_count[0], 1] = rnd
                death_count[0] += 1
                fate = STRANDED
                break
            if not legit and verify_rng.random() < q:
                fate = DROPPED_ENROUTE
                break
            cur = nxt
        if fate < 0:
            d = dist[cur]
            paid, died = _debit(cur, bits * e_elec + bits * e_amp * d ** lam, TX,
                                consumed, residual, alive, totals, initial)
            out_energy[r] += paid
            if died:
                deaths[death_count[0], 0] = cur
                deaths[death_count[0], 1] = rnd
                death_count[0] += 1
            fate = DELIVERED if legit else DROPPED_AT_BS
        out_fate[r] = fate
        out_hops[r] = hops
        if fate != STRANDED:
            if not legit:
                counts[0] += 1
            elif fate == DELIVERED:
                counts[1] += 1
        tot = counts[0] + counts[1]
        out_af[r] = counts[0] / tot if tot > 0 else 0.0
        if death_count[0] > deaths_before:
            return r + 1
    return r_end


@jit
def disseminate_query(path, n, rnd, bits, radio, x, y, consumed, residual, alive, totals,
                      deaths, death_count):
    """BS -> head control query along ``path[:n]`` (head first); returns joules.

    Mirrors Simulation._disseminate_query; deaths go to ``deaths`` stamped ``rnd``.
    """
    e_elec = radio[1]
    e_amp = radio[2]
    lam = radio[3]
    initial = radio[4]
    rx = bits * e_elec
    last = path[n - 1]
    spent, died = _debit(last, rx, RX, consumed, residual, alive, totals, initial)
    if died:
        deaths[death_count[0], 0] = last
        deaths[death_count[0], 1] = rnd
        death_count[0] += 1
        return spent
    for i in range(n - 1, 0, -1):
        s = path[i]
        r = path[i - 1]
        dx = x[s] - x[r]
        dy = y[s] - y[r]
        d = math.sqrt(dx * dx + dy * dy)
        paid, died = _debit(s, bits * e_elec + bits * e_amp * d ** lam, TX,
                            consumed, residual, alive, totals, initial)
        spent += paid
        if died:
            deaths[death_count[0], 0] = s
            deaths[death_count[0], 1] = rnd
            death_count[0] += 1
        paid, died = _debit(r, rx, RX, consumed, residual, alive, totals, initial)
        spent += paid
        if died:
            deaths[death_count[0], 0] = r
            deaths[death_count[0], 1] = rnd
            death_count[0] += 1
            break
    return spent


@jit
def audit_paths(n, fate, legit, trace, off, x, y, radio_range, seen, stamp_ctr):
    """(routes, loops, out-of-range hops, legitimate en-route drops) over the
    first ``n`` traced paths; ``seen``/``stamp_ctr`` are per-node scratch."""
    routes = 0
    loops = 0
    bad = 0
    false_drops = 0
    for r in range(n):
        sent = fate[r] >= 0
        if sent:
            routes += 1
            if legit[r] and fate[r] == DROPPED_ENROUTE:
                false_drops += 1
        stamp_ctr[0] += 1
        st = stamp_ctr[0]
        revisit = False
        for t in range(off[r], off[r + 1]):
            v = trace[t]
            if seen[v] == st:
                revisit = True
            seen[v] = st
            if t > off[r]:
                u = trace[t - 1]
                dx = x[u] - x[v]
                dy = y[u] - y[v]
                if math.sqrt(dx * dx + dy * dy) > radio_range:
                    bad += 1
        if revisit and sent:
            loops += 1
    return routes, loops, bad, false_drops
