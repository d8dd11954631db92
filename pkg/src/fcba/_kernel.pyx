# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event-driven kernel; same algorithm and outputs as ``_kernel_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t, int8_t
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

cdef enum:
    MUTUAL = 1
    LEFT_ARROW_SURVIVES = 2
    RIGHT_ARROW_SURVIVES = 3
    WEAK_FROM_LEFT = 4
    WEAK_FROM_RIGHT = 5
    COALESCE = 6
    HIT_STRONG = 1
    HIT_WEAK = 2
    HIT_MUTUAL = 3

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t splitmix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double pair_uniform(uint64_t seed, uint64_t kl, uint64_t kr) noexcept nogil:
    return <double>(splitmix64(splitmix64(seed ^ kl) ^ kr) >> 11) * INV53


cdef inline uint64_t child_key(uint64_t kl, uint64_t kr) noexcept nogil:
    return splitmix64(kl ^ splitmix64(kr ^ GOLDEN)) | (1ULL << 63)


cdef struct Entry:
    double t
    double x
    int64_t i
    int64_t j


cdef inline bint less(Entry* a, Entry* b) noexcept nogil:
    if a.t != b.t:
        return a.t < b.t
    if a.x != b.x:
        return a.x < b.x
    if a.i != b.i:
        return a.i < b.i
    return a.j < b.j


cdef struct Heap:
    Entry* data
    Py_ssize_t size
    Py_ssize_t cap


cdef int heap_push(Heap* h, double t, double x, int64_t i, int64_t j) noexcept nogil:
    cdef Py_ssize_t k, parent
    cdef Entry e
    cdef Entry* grown
    if h.size == h.cap:
        grown = <Entry*> realloc(h.data, 2 * h.cap * sizeof(Entry))
        if grown == NULL:
            return -1
        h.data = grown
        h.cap = 2 * h.cap
    e.t = t
    e.x = x
    e.i = i
    e.j = j
    k = h.size
    h.size += 1
    while k > 0:
        parent = (k - 1) >> 1
        if less(&e, &h.data[parent]):
            h.data[k] = h.data[parent]
            k = parent
        else:
            break
    h.data[k] = e
    return 0


cdef Entry heap_pop(Heap* h) noexcept nogil:
    cdef Entry top = h.data[0]
    cdef Entry last
    cdef Py_ssize_t k = 0, child
    h.size -= 1
    if h.size > 0:
        last = h.data[h.size]
        while True:
            child = 2 * k + 1
            if child >= h.size:
                break
            if child + 1 < h.size and less(&h.data[child + 1], &h.data[child]):
                child += 1
            if less(&h.data[child], &last):
                h.data[k] = h.data[child]
                k = child
            else:
                break
        h.data[k] = last
    return top


def evolve(positions, velocities, keys, reaction_seed, double a, double b, double alpha, double beta,
           bint record=True, stream=None):
    if stream is not None:
        raise TypeError("the compiled kernel only supports keyed collision randomness")
    cdef Py_ssize_t n = len(positions)
    cdef Py_ssize_t cap = n + n // 2 + 1
    cdef Py_ssize_t ecap = n if record else 0

    vel_a = np.zeros(cap, np.int8)
    gen_a = np.zeros(cap, np.bool_)
    bpos_a = np.zeros(cap, np.float64)
    btime_a = np.zeros(cap, np.float64)
    dtime_a = np.full(cap, np.inf)
    dpos_a = np.full(cap, np.nan)
    dkind_a = np.zeros(cap, np.int8)
    partner_a = np.full(cap, -1, np.int64)
    wl_a = np.zeros(cap, np.int32)
    wr_a = np.zeros(cap, np.int32)
    fl_a = np.zeros(cap, np.int8)
    fr_a = np.zeros(cap, np.int8)
    pl_a = np.full(cap, -1, np.int64)
    pr_a = np.full(cap, -1, np.int64)
    et_a = np.zeros(ecap, np.float64)
    ex_a = np.zeros(ecap, np.float64)
    ek_a = np.zeros(ecap, np.int8)
    el_a = np.zeros(ecap, np.int64)
    er_a = np.zeros(ecap, np.int64)
    ec_a = np.zeros(ecap, np.int64)

    cdef int8_t[::1] vel = vel_a
    cdef cnp.npy_bool[::1] gen = gen_a
    cdef double[::1] bpos = bpos_a
    cdef double[::1] btime = btime_a
    cdef double[::1] dtime = dtime_a
    cdef double[::1] dpos = dpos_a
    cdef int8_t[::1] dkind = dkind_a
    cdef int64_t[::1] partner = partner_a
    cdef int32_t[::1] wl = wl_a
    cdef int32_t[::1] wr = wr_a
    cdef int8_t[::1] fl = fl_a
    cdef int8_t[::1] fr = fr_a
    cdef int64_t[::1] pl = pl_a
    cdef int64_t[::1] pr = pr_a
    cdef double[::1] et = et_a
    cdef double[::1] ex = ex_a
    cdef int8_t[::1] ek = ek_a
    cdef int64_t[::1] el = el_a
    cdef int64_t[::1] er = er_a
    cdef int64_t[::1] ec = ec_a

    inter_a = np.zeros(cap, np.float64)
    key_a = np.zeros(cap, np.uint64)
    alive_a = np.zeros(cap, np.int8)
    left_a = np.full(cap, -1, np.int64)
    right_a = np.full(cap, -1, np.int64)
    cdef double[::1] inter = inter_a
    cdef uint64_t[::1] key = key_a
    cdef int8_t[::1] alive = alive_a
    cdef int64_t[::1] left = left_a
    cdef int64_t[::1] right = right_a

    cdef double[::1] pos_in = np.ascontiguousarray(positions, dtype=np.float64)
    cdef int8_t[::1] vel_in = np.ascontiguousarray(velocities, dtype=np.int8)
    cdef uint64_t[::1] key_in = np.ascontiguousarray(np.asarray(keys).astype(np.int64).view(np.uint64))

    cdef uint64_t seed = <uint64_t>(int(reaction_seed) & 0xFFFFFFFFFFFFFFFF)
    cdef double t_a = a / 2.0, t_ab = a, t_al = a + b, t_alb = alpha + beta
    cdef Py_ssize_t s, i, j, g, lo, hi, ls, rs
    cdef Py_ssize_t n_slots = n, n_events = 0
    cdef int kind, hit, vi, vj
    cdef int64_t created
    cdef double t, x, u, tt
    cdef Entry e
    cdef Heap h
    cdef int k_kill

    for s in range(n):
        vel[s] = vel_in[s]
        bpos[s] = pos_in[s]
        inter[s] = pos_in[s]
        key[s] = key_in[s]
        alive[s] = 1
        left[s] = s - 1
        right[s] = s + 1 if s + 1 < n else -1

    cdef int8_t* p_alive = &alive[0]
    cdef double* p_dtime = &dtime[0]
    cdef double* p_dpos = &dpos[0]
    cdef int8_t* p_dkind = &dkind[0]
    cdef int64_t* p_partner = &partner[0]
    cdef int64_t* p_left = &left[0]
    cdef int64_t* p_right = &right[0]
    cdef int8_t* p_vel = &vel[0]
    cdef double* p_inter = &inter[0]

    h.cap = n + 16
    h.size = 0
    h.data = <Entry*> malloc(h.cap * sizeof(Entry))
    if h.data == NULL:
        raise MemoryError()

    try:
        with nogil:
            for s in range(n - 1):
                vi = vel[s]
                vj = vel[s + 1]
                if vi > vj:
                    tt = (inter[s + 1] - inter[s]) / <double>(vi - vj)
                    if tt < 0.0:
                        tt = 0.0
                    if heap_push(&h, tt, inter[s] + <double>vi * tt, s, s + 1) != 0:
                        break

            while h.size > 0:
                e = heap_pop(&h)
                t = e.t
                x = e.x
                i = e.i
                j = e.j
                if not (alive[i] and alive[j] and right[i] == j):
                    continue
                u = pair_uniform(seed, key[i], key[j])
                vi = vel[i]
                vj = vel[j]
                created = -1
                # kill list encoded by flags; neighbour pairs scheduled below
                lo = -1
                hi = -1
                if vi == 1 and vj == -1:
                    if u < t_a:
                        kind = LEFT_ARROW_SURVIVES
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = left[j]
                        hi = j
                    elif u < t_ab:
                        kind = RIGHT_ARROW_SURVIVES
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = i
                        hi = right[i]
                    elif u < t_al:
                        kind = COALESCE
                        g = n_slots
                        n_slots += 1
                        created = g
                        ls = left[i]
                        rs = right[j]
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        vel[g] = 0
                        inter[g] = x
                        key[g] = child_key(key[i], key[j])
                        alive[g] = 1
                        left[g] = ls
                        right[g] = rs
                        if ls >= 0:
                            right[ls] = g
                        if rs >= 0:
                            left[rs] = g
                        gen[g] = 1
                        bpos[g] = x
                        btime[g] = t
                        pl[g] = i
                        pr[g] = j
                        if ls >= 0:
                            _schedule(&h, ls, g, t, p_vel, p_inter)
                        if rs >= 0:
                            _schedule(&h, g, rs, t, p_vel, p_inter)
                    else:
                        kind = MUTUAL
                        ls = left[i]
                        rs = right[j]
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = ls
                        hi = rs
                elif vi == 1:
                    if u < alpha:
                        kind = RIGHT_ARROW_SURVIVES
                        hit = HIT_STRONG
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = i
                        hi = right[i]
                    elif u < t_alb:
                        kind = WEAK_FROM_LEFT
                        hit = HIT_WEAK
                        wl[j] += 1
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = left[j]
                        hi = j
                    else:
                        kind = MUTUAL
                        hit = HIT_MUTUAL
                        ls = left[i]
                        rs = right[j]
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = ls
                        hi = rs
                    if fl[j] == 0:
                        fl[j] = hit
                else:
                    if u < alpha:
                        kind = LEFT_ARROW_SURVIVES
                        hit = HIT_STRONG
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = left[j]
                        hi = j
                    elif u < t_alb:
                        kind = WEAK_FROM_RIGHT
                        hit = HIT_WEAK
                        wr[i] += 1
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = i
                        hi = right[i]
                    else:
                        kind = MUTUAL
                        hit = HIT_MUTUAL
                        ls = left[i]
                        rs = right[j]
                        _kill(i, t, x, kind, j, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        _kill(j, t, x, kind, i, p_alive, p_dtime, p_dpos, p_dkind, p_partner, p_left, p_right)
                        lo = ls
                        hi = rs
                    if fr[i] == 0:
                        fr[i] = hit
                if lo >= 0 and hi >= 0:
                    _schedule(&h, lo, hi, t, p_vel, p_inter)
                if record:
                    et[n_events] = t
                    ex[n_events] = x
                    ek[n_events] = kind
                    el[n_events] = i
                    er[n_events] = j
                    ec[n_events] = created
                n_events += 1
    finally:
        free(h.data)

    for s in range(n, n_slots):
        vel_a[s] = 0

    return {
        "vel": vel_a, "generated": gen_a, "birth_pos": bpos_a, "birth_time": btime_a,
        "death_time": dtime_a, "death_pos": dpos_a, "death_kind": dkind_a, "partner": partner_a,
        "weak_left": wl_a, "weak_right": wr_a, "first_left": fl_a, "first_right": fr_a,
        "parent_left": pl_a, "parent_right": pr_a,
        "ev_time": et_a, "ev_pos": ex_a, "ev_kind": ek_a, "ev_left": el_a, "ev_right": er_a,
        "ev_created": ec_a, "n_slots": n_slots, "n_events": n_events,
    }


cdef inline void _kill(Py_ssize_t s, double t, double x, int kind, Py_ssize_t other,
                       int8_t* alive, double* dtime, double* dpos, int8_t* dkind,
                       int64_t* partner, int64_t* left, int64_t* right) noexcept nogil:
    cdef int64_t ls = left[s], rs = right[s]
    alive[s] = 0
    dtime[s] = t
    dpos[s] = x
    dkind[s] = kind
    partner[s] = other
    if ls >= 0:
        right[ls] = rs
    if rs >= 0:
        left[rs] = ls


cdef inline void _schedule(Heap* h, Py_ssize_t i, Py_ssize_t j, double now,
                           int8_t* vel, double* inter) noexcept nogil:
    cdef int vi = vel[i], vj = vel[j]
    cdef double t
    if vi <= vj:
        return
    t = (inter[j] - inter[i]) / <double>(vi - vj)
    if t < now:
        t = now
    heap_push(h, t, inter[i] + <double>vi * t, i, j)
