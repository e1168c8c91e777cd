"""Compiled hot loops: swept-link collision checks and the RRT-Connect core.

Obstacles are passed as a ``(K, 3)`` array of ``(cx, cy, r)`` rows. Every
kernel is a pure function of its arguments; randomness comes in as a
pre-drawn sample array so the kernels stay deterministic.
"""

import math

import numpy as np
from numba import njit

TRAPPED = 0
ADVANCED = 1
REACHED = 2


@njit(cache=True)
def config_collides(q, links, link_radius, obs):
    if obs.shape[0] == 0:
        return False
    ax = 0.0
    ay = 0.0
    phi = 0.0
    for i in range(links.shape[0]):
        phi += q[i]
        bx = ax + links[i] * math.cos(phi)
        by = ay + links[i] * math.sin(phi)
        dx = bx - ax
        dy = by - ay
        seg2 = dx * dx + dy * dy
        for k in range(obs.shape[0]):
            cx = obs[k, 0]
            cy = obs[k, 1]
            t = ((cx - ax) * dx + (cy - ay) * dy) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            px = ax + t * dx - cx
            py = ay + t * dy - cy
            lim = obs[k, 2] + link_radius
            if px * px + py * py < lim * lim:
                return True
        ax = bx
        ay = by
    return False


@njit(cache=True)
def edge_state_count(q1, q2, resolution):
    dmax = 0.0
    for i in range(q1.shape[0]):
        d = abs(q2[i] - q1[i])
        if d > dmax:
            dmax = d
    # guard against 1.0 / 0.1 style rounding pushing the count up by one
    steps = int(math.ceil(dmax / resolution - 1e-9))
    if steps < 0:
        steps = 0
    return steps + 1


@njit(cache=True)
def edge_check(q1, q2, links, link_radius, obs, resolution):
    """Return ``(valid, checks)``; stops at the first colliding state."""
    count = edge_state_count(q1, q2, resolution)
    n = q1.shape[0]
    q = np.empty(n)
    for s in range(count):
        frac = 0.0 if count == 1 else s / (count - 1)
        for i in range(n):
            q[i] = q1[i] + frac * (q2[i] - q1[i])
        if config_collides(q, links, link_radius, obs):
            return False, s + 1
    return True, count


@njit(cache=True)
def _grow(nodes, parents):
    cap = nodes.shape[0] * 2
    new_nodes = np.empty((cap, nodes.shape[1]))
    new_nodes[: nodes.shape[0]] = nodes
    new_parents = np.empty(cap, dtype=np.int64)
    new_parents[: parents.shape[0]] = parents
    return new_nodes, new_parents


@njit(cache=True)
def _nearest(nodes, size, q):
    best = 0
    best_d = np.inf
    for j in range(size):
        d = 0.0
        for i in range(q.shape[0]):
            diff = nodes[j, i] - q[i]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = j
    return best, math.sqrt(best_d)


@njit(cache=True)
def _trace(nodes, parents, idx):
    length = 0
    j = idx
    while j >= 0:
        length += 1
        j = parents[j]
    out = np.empty((length, nodes.shape[1]))
    j = idx
    k = length - 1
    while j >= 0:
        out[k] = nodes[j]
        k -= 1
        j = parents[j]
    return out


@njit(cache=True)
def rrt_connect_core(start, goal, rng, lo, hi, max_iterations, links, link_radius, obs, step_size,
                     resolution, max_checks, checks):
    """Bidirectional RRT with EXTEND/CONNECT alternation.

    Samples are drawn from ``rng`` uniformly in ``[lo, hi]``, one joint at a time,
    which reproduces ``rng.uniform(lo, hi, size=(iterations, n))`` row by row.

    ``checks`` is the number of collision checks already spent by the caller
    (endpoint validation). ``max_checks <= 0`` disables the check budget.
    Returns ``(success, path, checks, iterations, tree_nodes)``.
    """
    n = start.shape[0]
    cap = 256
    nodes_a = np.empty((cap, n))
    par_a = np.empty(cap, dtype=np.int64)
    nodes_b = np.empty((cap, n))
    par_b = np.empty(cap, dtype=np.int64)
    nodes_a[0] = start
    par_a[0] = -1
    nodes_b[0] = goal
    par_b[0] = -1
    size_a = 1
    size_b = 1
    a_is_start = True
    q_new = np.empty(n)
    target = np.empty(n)
    q_rand = np.empty(n)

    for it in range(max_iterations):
        # EXTEND tree a toward the sample
        for i in range(n):
            q_rand[i] = rng.uniform(lo[i], hi[i])
        near, dist = _nearest(nodes_a, size_a, q_rand)
        if dist <= step_size:
            for i in range(n):
                q_new[i] = q_rand[i]
        else:
            for i in range(n):
                q_new[i] = nodes_a[near, i] + step_size * (q_rand[i] - nodes_a[near, i]) / dist
        ok, c = edge_check(nodes_a[near], q_new, links, link_radius, obs, resolution)
        checks += c
        extended = False
        if ok:
            if size_a == nodes_a.shape[0]:
                nodes_a, par_a = _grow(nodes_a, par_a)
            nodes_a[size_a] = q_new
            par_a[size_a] = near
            size_a += 1
            extended = True
        if max_checks > 0 and checks > max_checks:
            return False, np.empty((0, n)), checks, it + 1, size_a + size_b

        if extended:
            # CONNECT tree b toward the new node
            for i in range(n):
                target[i] = q_new[i]
            status = ADVANCED
            while status == ADVANCED:
                near_b, dist_b = _nearest(nodes_b, size_b, target)
                reached = dist_b <= step_size
                if reached:
                    for i in range(n):
                        q_new[i] = target[i]
                else:
                    for i in range(n):
                        q_new[i] = nodes_b[near_b, i] + step_size * (target[i] - nodes_b[near_b, i]) / dist_b
                ok, c = edge_check(nodes_b[near_b], q_new, links, link_radius, obs, resolution)
                checks += c
                if not ok:
                    status = TRAPPED
                else:
                    if size_b == nodes_b.shape[0]:
                        nodes_b, par_b = _grow(nodes_b, par_b)
                    nodes_b[size_b] = q_new
                    par_b[size_b] = near_b
                    size_b += 1
                    status = REACHED if reached else ADVANCED
                if max_checks > 0 and checks > max_checks:
                    return False, np.empty((0, n)), checks, it + 1, size_a + size_b

            if status == REACHED:
                half_a = _trace(nodes_a, par_a, size_a - 1)
                half_b = _trace(nodes_b, par_b, size_b - 1)
                # both halves end at the shared connection state; drop one copy
                total = half_a.shape[0] + half_b.shape[0] - 1
                path = np.empty((total, n))
                if a_is_start:
                    first, second = half_a, half_b
                else:
                    first, second = half_b, half_a
                for k in range(first.shape[0]):
                    path[k] = first[k]
                for k in range(second.shape[0] - 1):
                    path[first.shape[0] + k] = second[second.shape[0] - 2 - k]
                return True, path, checks, it + 1, size_a + size_b

        # SWAP
        nodes_a, nodes_b = nodes_b, nodes_a
        par_a, par_b = par_b, par_a
        size_a, size_b = size_b, size_a
        a_is_start = not a_is_start

    return False, np.empty((0, n)), checks, max_iterations, size_a + size_b
