"""
Cluster-size layouts for simulated two-way designs.
"""

from collections import deque

import numpy as np

from ..errors import InfeasibleSizes, InfeasibleThinning


def cluster_sizes(N, J, gamma):
    """Exponentially varying cluster sizes.

    N_j = floor(N exp(gamma j/J) / sum_i exp(gamma i/J)) for j < J and the
    last cluster takes the remainder, so the sizes sum to N exactly.
    """
    if J < 1 or N < J:
        raise InfeasibleSizes(f"need N >= J >= 1, got N={N}, J={J}")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    w = np.exp(gamma * np.arange(1, J + 1) / J)
    sizes = np.floor(N * w / w.sum()).astype(np.int64)
    sizes[-1] = N - sizes[:-1].sum()
    if (sizes < 1).any():
        raise InfeasibleSizes(f"integer part gives an empty cluster (N={N}, J={J}, gamma={gamma})")
    return sizes


def allocate_intersections(sizes_g, sizes_h, N=None):
    """Integer N_gh close to N_g N_h / N with exact row and column sums.

    Cells start at the integer part of their quota. The units still
    missing from each row and column are then handed out at most one per
    cell, largest fractional remainder first, subject to the row and column
    deficits. When the greedy pass gets stuck, alternating-path swaps move
    earlier assignments to make room, so the marginals are always exact.
    """
    a = np.asarray(sizes_g, dtype=np.int64)
    b = np.asarray(sizes_h, dtype=np.int64)
    if N is None:
        N = int(a.sum())
    if a.sum() != N or b.sum() != N:
        raise ValueError("marginal sizes must both sum to N")
    E = np.outer(a, b) / N
    M = np.floor(E).astype(np.int64)
    rem = E - M
    rd = a - M.sum(axis=1)
    cd = b - M.sum(axis=0)
    extra = np.zeros(M.shape, dtype=bool)
    # cells with an integer quota never take an increment
    open_ = rem > 0
    while rd.sum() > 0:
        free = (rd[:, None] > 0) & (cd[None, :] > 0) & ~extra & open_
        if free.any():
            g, h = np.unravel_index(np.argmax(np.where(free, rem, -np.inf)), rem.shape)
            extra[g, h] = True
            rd[g] -= 1
            cd[h] -= 1
            continue
        if not _augment(extra, open_, rd, cd):
            # no room left in 0/1 increments; stack on the best cell
            score = np.where((rd[:, None] > 0) & (cd[None, :] > 0), rem, -np.inf)
            g, h = np.unravel_index(np.argmax(score), score.shape)
            M[g, h] += 1
            rd[g] -= 1
            cd[h] -= 1
    return M + extra


def _augment(extra, open_, rd, cd):
    """Find an alternating path from a short row to a short column and flip
    it, which adds one increment to each of the two ends."""
    G, H = extra.shape
    for g0 in np.flatnonzero(rd > 0):
        prev_col = {}
        prev_row = {g0: None}
        queue = deque([g0])
        while queue:
            g = queue.popleft()
            for h in np.flatnonzero(open_[g] & ~extra[g]):
                if h in prev_col:
                    continue
                prev_col[h] = g
                if cd[h] > 0:
                    cd[h] -= 1
                    rd[g0] -= 1
                    # flip the path ending at (g, h)
                    while True:
                        gg = prev_col[h]
                        extra[gg, h] = True
                        hh = prev_row[gg]
                        if hh is None:
                            break
                        extra[gg, hh] = False
                        h = hh
                    return True
                for g2 in np.flatnonzero(extra[:, h]):
                    if g2 not in prev_row:
                        prev_row[g2] = h
                        queue.append(g2)
    return False


def _connected(S):
    """Is the bipartite graph with adjacency S (rows x cols) connected?"""
    G, H = S.shape
    seen_r = np.zeros(G, bool)
    seen_c = np.zeros(H, bool)
    seen_r[0] = True
    queue = deque([("r", 0)])
    while queue:
        kind, i = queue.popleft()
        if kind == "r":
            for h in np.flatnonzero(S[i] & ~seen_c):
                seen_c[h] = True
                queue.append(("c", h))
        else:
            for g in np.flatnonzero(S[:, i] & ~seen_r):
                seen_r[g] = True
                queue.append(("r", g))
    return seen_r.all() and seen_c.all()


def _repair_columns(M, target):
    """Move units within rows until column sums equal ``target``.

    Units travel along paths of columns linked by rows in which both cells
    are non-empty; the donor cell always keeps at least one unit. Returns
    False if some deficit cannot be reached.
    """
    G, H = M.shape
    while True:
        diff = M.sum(axis=0) - target
        if not diff.any():
            return True
        d = int(np.flatnonzero(diff < 0)[0])
        # BFS from the deficit column over donor columns
        prev = {d: None}
        queue = deque([d])
        found = None
        while queue and found is None:
            c = queue.popleft()
            for g in np.flatnonzero(M[:, c] > 0):
                for s in np.flatnonzero(M[g] > 1):
                    if s in prev:
                        continue
                    prev[s] = (c, g)
                    if diff[s] > 0:
                        found = s
                        break
                    queue.append(s)
                if found is not None:
                    break
        if found is None:
            return False
        # push units back along the path: found -> ... -> d
        path = []
        s = found
        while prev[s] is not None:
            c, g = prev[s]
            path.append((g, s, c))
            s = c
        amount = min(-diff[d], diff[found], min(M[g, s] - 1 for g, s, _ in path))
        for g, s, c in path:
            M[g, s] -= amount
            M[g, c] += amount


def thin_intersections(M, target_frac, rng):
    """Empty a fraction of the intersections while keeping every N_g and N_h.

    Cells are visited in a random order that favours small cells (keys
    U^(1/N_gh)). Each visited cell is emptied if its row and column keep a
    non-empty cell and the row/column support graph stays connected (so a
    two-way fixed-effects design stays identified). Its units are spread
    over the other non-empty cells of the same row, and column totals are
    then restored by transfers within rows.

    Raises
    ------
    InfeasibleThinning
        If the requested number of empty cells cannot be reached.
    """
    M = np.array(M, dtype=np.int64)
    G, H = M.shape
    target = int(round(target_frac * G * H))
    if target_frac < 0 or target > G * H - (G + H - 1):
        raise InfeasibleThinning(f"cannot empty {target} of {G * H} cells")
    col_target = M.sum(axis=0).copy()
    empties = int((M == 0).sum())
    if empties >= target:
        return M
    u = rng.random((G, H))
    with np.errstate(divide="ignore"):
        keys = np.where(M > 0, u ** (1.0 / np.maximum(M, 1)), -1.0)
    order = np.argsort(-keys, axis=None, kind="stable")
    for flat in order:
        if empties >= target:
            break
        g, h = divmod(int(flat), H)
        if M[g, h] == 0:
            continue
        S = M > 0
        if S[g].sum() < 2 or S[:, h].sum() < 2:
            continue
        S[g, h] = False
        if not _connected(S):
            continue
        trial = M.copy()
        units = trial[g, h]
        trial[g, h] = 0
        others = np.flatnonzero(trial[g] > 0)
        w = trial[g, others].astype(float)
        share = units * w / w.sum()
        add = np.floor(share).astype(np.int64)
        left = units - add.sum()
        add[np.argsort(-(share - add), kind="stable")[:left]] += 1
        trial[g, others] += add
        if not _repair_columns(trial, col_target):
            continue
        M = trial
        empties += 1
    if empties < target:
        raise InfeasibleThinning(f"reached {empties} empty cells, wanted {target}")
    return M
