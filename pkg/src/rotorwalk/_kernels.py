"""Hot loops for walk, multi-particle, and frontier dynamics.

The walk-facing kernels expand nodes and realise rotors inline, consuming
pre-drawn uniforms from chunked pools, so stepping and tree growth both run
at compiled speed.  A kernel suspends (returning an event code, with all
state saved) when a pool runs dry or the arrays need to grow; the Python
wrapper refills or grows and re-enters.  Suspension always happens *before*
any draw is consumed, so the draw sequence is identical to the pure-Python
expansion path.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SINK = -1

# Event codes shared by all kernels.
EV_DONE = 0
EV_RETURNED = 1
EV_BOUNDARY = 2
EV_NEED_OFF_POOL = 3
EV_NEED_ROT_POOL = 4
EV_NEED_GROW = 5
EV_ABORTED = 6
EV_STACK_FULL = 7

# _try_expand sentinels (mapped onto events by the kernels)
_X_OFF = -2
_X_ROT = -3
_X_GROW = -4


@njit(cache=True)
def _try_expand(i, parent, depth, first_child, child_count, rotor, rotor0,
                visited, rotor_u, off_cum, off_pool, rot_pool, meta):
    """Sample and attach children of ``i``; -2/-3/-4 mean suspend first.

    meta: [arena size, offspring pool index, rotor pool index].  Nothing is
    consumed unless the expansion fully succeeds.
    """
    size = meta[0]
    oi = meta[1]
    ri = meta[2]
    kmax = off_cum.shape[0]
    if oi >= off_pool.shape[0]:
        return _X_OFF
    if ri + kmax > rot_pool.shape[0]:
        return _X_ROT
    if size + kmax > parent.shape[0]:
        return _X_GROW
    u = off_pool[oi]
    oi += 1
    k = 0
    while k < kmax - 1 and off_cum[k] <= u:
        k += 1
    k += 1
    d1 = depth[i] + 1
    for c in range(size, size + k):
        parent[c] = i
        depth[c] = d1
        first_child[c] = -1
        child_count[c] = -1
        rotor[c] = -1
        rotor0[c] = -1
        visited[c] = 0
        rotor_u[c] = rot_pool[ri]
        ri += 1
    first_child[i] = size
    child_count[i] = k
    meta[0] = size + k
    meta[1] = oi
    meta[2] = ri
    return k


@njit(cache=True)
def _realize_rotor(i, child_count, rotor, rotor0, rotor_u, qcum):
    """Turn the stored uniform of ``i`` into its initial rotor value."""
    d = child_count[i]
    u = rotor_u[i]
    loc = 0
    while loc < d and qcum[d, loc] <= u:
        loc += 1
    val = d - loc
    rotor[i] = val
    rotor0[i] = val
    return val


@njit(cache=True)
def walk_kernel(parent, depth, first_child, child_count, rotor, rotor0,
                visited, rotor_u, off_cum, qcum, off_pool, rot_pool, meta,
                pos, H, steps, max_depth, budget):
    """Single rotor walk from ``pos`` until the sink or depth ``H``.

    Returns ``(event, pos, steps, max_depth)``.
    """
    while True:
        if child_count[pos] < 0:
            res = _try_expand(pos, parent, depth, first_child, child_count,
                              rotor, rotor0, visited, rotor_u, off_cum,
                              off_pool, rot_pool, meta)
            if res == _X_OFF:
                return EV_NEED_OFF_POOL, pos, steps, max_depth
            if res == _X_ROT:
                return EV_NEED_ROT_POOL, pos, steps, max_depth
            if res == _X_GROW:
                return EV_NEED_GROW, pos, steps, max_depth
        if rotor[pos] < 0:
            _realize_rotor(pos, child_count, rotor, rotor0, rotor_u, qcum)
        r = rotor[pos] + 1
        if r > child_count[pos]:
            r = 0
        rotor[pos] = r
        if r == 0:
            pos = parent[pos]
        else:
            pos = first_child[pos] + r - 1
        steps += 1
        if pos == SINK:
            return EV_RETURNED, pos, steps, max_depth
        visited[pos] = 1
        if depth[pos] > max_depth:
            max_depth = depth[pos]
        if depth[pos] >= H:
            return EV_BOUNDARY, pos, steps, max_depth
        if steps >= budget:
            return EV_ABORTED, pos, steps, max_depth


@njit(cache=True)
def escape_kernel(parent, depth, first_child, child_count, rotor, rotor0,
                  visited, rotor_u, off_cum, qcum, off_pool, rot_pool, meta,
                  outcomes, H, budget, state):
    """Chained walks: walk k+1 starts in the configuration walk k left.

    ``outcomes[k]`` becomes 1 when walk k parks at depth ``H`` and 0 when it
    falls into the sink.  ``state`` carries ``[next_walk, pos, steps_in_walk,
    total_steps]`` across suspensions; pos == -2 injects the next walk.
    """
    k = state[0]
    pos = state[1]
    wsteps = state[2]
    total = state[3]
    n = outcomes.shape[0]
    while True:
        if pos == -2:
            if k >= n:
                break
            pos = 0
            visited[0] = 1
            wsteps = 0
        if child_count[pos] < 0:
            res = _try_expand(pos, parent, depth, first_child, child_count,
                              rotor, rotor0, visited, rotor_u, off_cum,
                              off_pool, rot_pool, meta)
            if res < 0:
                state[0] = k
                state[1] = pos
                state[2] = wsteps
                state[3] = total
                if res == _X_OFF:
                    return EV_NEED_OFF_POOL
                if res == _X_ROT:
                    return EV_NEED_ROT_POOL
                return EV_NEED_GROW
        if rotor[pos] < 0:
            _realize_rotor(pos, child_count, rotor, rotor0, rotor_u, qcum)
        r = rotor[pos] + 1
        if r > child_count[pos]:
            r = 0
        rotor[pos] = r
        if r == 0:
            pos = parent[pos]
        else:
            pos = first_child[pos] + r - 1
        wsteps += 1
        total += 1
        if pos == SINK:
            outcomes[k] = 0
            k += 1
            pos = -2
            continue
        visited[pos] = 1
        if depth[pos] >= H:
            outcomes[k] = 1
            k += 1
            pos = -2
            continue
        if wsteps >= budget:
            state[0] = k
            state[1] = pos
            state[2] = wsteps
            state[3] = total
            return EV_ABORTED
    state[0] = k
    state[1] = pos
    state[2] = wsteps
    state[3] = total
    return EV_DONE


@njit(cache=True)
def frontier_kernel(parent, depth, first_child, child_count, rotor, rotor0,
                    visited, rotor_u, off_cum, qcum, off_pool, rot_pool, meta,
                    in_frontier, stack, state, target_n, budget):
    """Grow the frontier by particle injections until ``target_n``.

    One injection drops a particle at the root and drives it (plus any
    particles re-activated by collisions with parked ones) to quiescence:
    a particle parks on the first never-visited vertex it reaches, falls
    into the sink, or, upon hitting a parked vertex, un-parks it and both
    walk on.  State: ``[n_done, sink_count, member_count, realized_height,
    stack_size, steps, pos]`` with pos == -2 meaning "no active particle".
    """
    n_done = state[0]
    sink_count = state[1]
    members = state[2]
    rh = state[3]
    ssize = state[4]
    steps = state[5]
    pos = state[6]
    cap = stack.shape[0]
    ev = EV_DONE
    while True:
        if pos == -2:
            if ssize > 0:
                ssize -= 1
                pos = stack[ssize]
            elif n_done < target_n:
                n_done += 1
                pos = 0
            else:
                ev = EV_DONE
                break
        if pos == SINK:
            sink_count += 1
            pos = -2
            continue
        if visited[pos] == 0:
            visited[pos] = 1
            in_frontier[pos] = 1
            members += 1
            if depth[pos] > rh:
                rh = depth[pos]
            pos = -2
            continue
        if in_frontier[pos] == 1:
            # collision with a parked particle: un-park it; both walk on
            if ssize >= cap:
                ev = EV_STACK_FULL
                break
            in_frontier[pos] = 0
            members -= 1
            stack[ssize] = pos
            ssize += 1
        if child_count[pos] < 0:
            res = _try_expand(pos, parent, depth, first_child, child_count,
                              rotor, rotor0, visited, rotor_u, off_cum,
                              off_pool, rot_pool, meta)
            if res == _X_OFF:
                ev = EV_NEED_OFF_POOL
                break
            if res == _X_ROT:
                ev = EV_NEED_ROT_POOL
                break
            if res == _X_GROW:
                ev = EV_NEED_GROW
                break
        if rotor[pos] < 0:
            _realize_rotor(pos, child_count, rotor, rotor0, rotor_u, qcum)
        r = rotor[pos] + 1
        if r > child_count[pos]:
            r = 0
        rotor[pos] = r
        if r == 0:
            pos = parent[pos]
        else:
            pos = first_child[pos] + r - 1
        steps += 1
        if steps >= budget:
            ev = EV_ABORTED
            break
    state[0] = n_done
    state[1] = sink_count
    state[2] = members
    state[3] = rh
    state[4] = ssize
    state[5] = steps
    state[6] = pos
    return ev


@njit(cache=True)
def expand_to_depth_kernel(parent, depth, first_child, child_count, rotor,
                           rotor0, visited, rotor_u, off_cum, off_pool,
                           rot_pool, meta, H, cursor):
    """Materialise every node above depth ``H`` by one forward scan.

    Children always get larger ids than their parent, so a single pass over
    the id space reaches every node whose depth allows expansion.  ``cursor``
    carries the scan position across suspensions.
    """
    i = cursor[0]
    while i < meta[0]:
        if depth[i] < H and child_count[i] < 0:
            res = _try_expand(i, parent, depth, first_child, child_count,
                              rotor, rotor0, visited, rotor_u, off_cum,
                              off_pool, rot_pool, meta)
            if res < 0:
                cursor[0] = i
                if res == _X_OFF:
                    return EV_NEED_OFF_POOL
                if res == _X_ROT:
                    return EV_NEED_ROT_POOL
                return EV_NEED_GROW
        i += 1
    cursor[0] = i
    return EV_DONE


@njit(cache=True)
def interior_order_kernel(first_child, child_count, is_sink, order, stack, root):
    """Preorder over the component enclosed by the absorbing set.

    Returns the number of interior vertices, or ``-(x + 1)`` when vertex x
    is reachable, unexpanded, and not absorbing (the set fails to separate).
    """
    stack[0] = root
    top = 1
    cnt = 0
    while top > 0:
        top -= 1
        x = stack[top]
        if child_count[x] < 0:
            return -(x + 1)
        order[cnt] = x
        cnt += 1
        fc = first_child[x]
        for c in range(fc, fc + child_count[x]):
            if is_sink[c] == 0:
                stack[top] = c
                top += 1
    return cnt


@njit(cache=True)
def legal_kernel(parent, first_child, child_count, rotor,
                 particles, is_sink, absorbed, worklist, state, mode, budget):
    """Drive legal moves to quiescence on a pre-materialised finite region.

    ``mode``: 0 = LIFO, 1 = FIFO, 2 = seeded pseudo-random pick.  The
    worklist may hold stale entries; occupancy is re-checked on pop.  State:
    ``[wl_size, wl_head, sink_count, moves, rng]`` (head only used by FIFO,
    which treats the worklist as a ring buffer).
    """
    wl_cap = worklist.shape[0]
    size = state[0]
    head = state[1]
    sink_count = state[2]
    moves = state[3]
    rng = state[4]
    while size > 0:
        if mode == 0:
            size -= 1
            v = worklist[(head + size) % wl_cap]
        elif mode == 1:
            v = worklist[head]
            head = (head + 1) % wl_cap
            size -= 1
        else:
            # LCG pick; statistical quality only matters for schedule
            # shuffling, never for the model's randomness.
            rng = rng * 6364136223846793005 + 1442695040888963407
            j = (rng & 0x7FFFFFFFFFFFFFFF) % size
            idx = (head + j) % wl_cap
            last = (head + size - 1) % wl_cap
            v = worklist[idx]
            worklist[idx] = worklist[last]
            size -= 1
        if particles[v] <= 0:
            continue
        if size + 2 > wl_cap:
            # put v back (one slot is free: we just popped) and let the
            # wrapper grow the worklist before resuming
            worklist[(head + size) % wl_cap] = v
            size += 1
            state[0] = size
            state[1] = head
            state[2] = sink_count
            state[3] = moves
            state[4] = rng
            return EV_STACK_FULL
        # fire one particle at v
        particles[v] -= 1
        r = rotor[v] + 1
        if r > child_count[v]:
            r = 0
        rotor[v] = r
        if r == 0:
            tgt = parent[v]
        else:
            tgt = first_child[v] + r - 1
        moves += 1
        if tgt == SINK:
            sink_count += 1
        elif is_sink[tgt] == 1:
            absorbed[tgt] += 1
        else:
            particles[tgt] += 1
            worklist[(head + size) % wl_cap] = tgt
            size += 1
        if particles[v] > 0:
            worklist[(head + size) % wl_cap] = v
            size += 1
        if moves >= budget:
            state[0] = size
            state[1] = head
            state[2] = sink_count
            state[3] = moves
            state[4] = rng
            return EV_ABORTED
    state[0] = size
    state[1] = head
    state[2] = sink_count
    state[3] = moves
    state[4] = rng
    return EV_DONE


@njit(cache=True)
def hitting_kernel(parent, first_child, child_count, is_sink, h, order, root):
    """Exact two-pass tree elimination for the sink-hitting probability.

    ``order`` holds the interior vertices in a parent-before-child order.
    Writes h in place (sinks stay 0) and returns the edge-difference sum
    ``|1 - h(root)| + sum over interior x, child c of |h(x) - h(c)|``.
    """
    m = order.shape[0]
    n = h.shape[0]
    b = np.zeros(n)
    a = np.zeros(n)
    # children before parents: reversed parent-before-child order
    for t in range(m - 1, -1, -1):
        x = order[t]
        d = child_count[x]
        fc = first_child[x]
        sb = 0.0
        sa = 0.0
        for c in range(fc, fc + d):
            if is_sink[c] == 0:
                sb += b[c]
                sa += a[c]
        bx = 1.0 / (d + 1 - sb)
        b[x] = bx
        a[x] = sa * bx
    # parents before children: resolve against the known parent value
    for t in range(m):
        x = order[t]
        p = parent[x]
        hp = 1.0 if p == SINK else h[p]
        h[x] = a[x] + b[x] * hp
    ksum = 1.0 - h[root]
    for t in range(m):
        x = order[t]
        d = child_count[x]
        fc = first_child[x]
        hx = h[x]
        for c in range(fc, fc + d):
            diff = hx - h[c]
            if diff < 0:
                diff = -diff
            ksum += diff
    return ksum
