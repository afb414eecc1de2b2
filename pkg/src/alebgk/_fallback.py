"""Pure numpy implementations of the kernels in ``_kernels.pyx``.

Same signatures and slot-ownership rules. Row blocks are vectorised; the
sums over neighbours use ``np.add.reduceat`` (sequential per row) and sums
over nodes reduce along the last axis, so results depend only on the row
and never on how rows are split between workers.
"""
import numpy as np

_BLOCK = 64


def _neg(a):
    return np.minimum(a, 0.0)


def advect(rows, lo, hi, ptr, nbr, frame, rot, nodes, U, f, f_tilde, dt, rate):
    dims = nodes.shape[1]
    for b0 in range(lo, hi, _BLOCK):
        blk = rows[b0:min(hi, b0 + _BLOCK)]
        starts = ptr[blk]
        counts = ptr[blk + 1] - starts
        has = counts > 0
        if has.any():
            pairs = np.concatenate([np.arange(s, s + c) for s, c in zip(starts, counts)])
            owner = np.repeat(blk, counts)
            fr = frame[pairs]                      # (P, d, d)
            proj = np.einsum("pad,kd->pak", fr, nodes)  # (P, d, K)
            projU = np.einsum("pad,pd->pa", fr, U[owner])
            c = proj - projU[:, :, None]
            coef = 2.0 * rot[pairs, 0, None] * _neg(c[:, 0])
            for a in range(1, dims):
                coef += 2.0 * _neg(rot[pairs, a, None] * c[:, a])
            diff = f[nbr[pairs]] - f[owner]
            seg = np.concatenate([[0], np.cumsum(counts[has])[:-1]])
            Q = np.add.reduceat(coef[:, None, :] * diff, seg, axis=0)
            acc = -np.add.reduceat(coef, seg, axis=0)
            idx = blk[has]
            f_tilde[idx] = f[idx] - dt * Q
            rate[idx] = np.maximum(acc.max(axis=1), 0.0)
        idle = blk[~has]
        f_tilde[idle] = f[idle]
        rate[idle] = 0.0


def moments(rows, lo, hi, nodes, f, dvol, rho, U, e3):
    idx = rows[lo:hi]
    if len(idx) == 0:
        return
    g = f[idx, 0]
    m0 = g.sum(axis=1) * dvol
    m1 = (g[:, None, :] * nodes.T[None]).sum(axis=2) * dvol
    ok = m0 > 0
    u = np.where(ok[:, None], m1 / np.where(ok, m0, 1.0)[:, None], 0.0)
    c2 = ((nodes[None, :, :] - u[:, None, :]) ** 2).sum(axis=2)
    s = (c2 * g).sum(axis=1)
    if f.shape[1] == 2:
        s = s + f[idx, 1].sum(axis=1)
    rho[idx] = m0
    U[idx] = u
    e3[idx] = np.where(ok, s * dvol, 0.0)


def relax(rows, lo, hi, nodes, rho, U, T, tau, R, dt, f_tilde, f):
    nnode, dims = nodes.shape
    r0, r1 = lo // nnode, -(-hi // nnode)
    for r in range(r0, r1):
        i = rows[r]
        k0 = max(lo - r * nnode, 0)
        k1 = min(hi - r * nnode, nnode)
        RT = R * T[i]
        pref = rho[i] / (2.0 * np.pi * RT) ** (dims / 2.0)
        c2 = ((nodes[k0:k1] - U[i]) ** 2).sum(axis=1)
        M = pref * np.exp(-c2 / (2.0 * RT))
        wt = tau[i] / (tau[i] + dt)
        wm = dt / (tau[i] + dt)
        f[i, 0, k0:k1] = wt * f_tilde[i, 0, k0:k1] + wm * M
        if f.shape[1] == 2:
            f[i, 1, k0:k1] = wt * f_tilde[i, 1, k0:k1] + wm * RT * M


def interp(rows, lo, hi, ptr, nbr, coef, src, out):
    for r in range(lo, hi):
        p0, p1 = ptr[r], ptr[r + 1]
        acc = np.zeros(src.shape[1:])
        for p in range(p0, p1):
            acc += coef[p] * src[nbr[p]]
        out[rows[r]] = acc


def _candidates(i, cells, nvox, cell_start, cell_items):
    dims = cells.shape[1]
    base = cells[i]
    out = []
    for off in np.ndindex(*([3] * dims)):
        cc = base + np.array(off) - 1
        if np.any(cc < 0) or np.any(cc >= nvox):
            continue
        lin = int(np.ravel_multi_index(tuple(cc), tuple(nvox)))
        out.append(cell_items[cell_start[lin]:cell_start[lin + 1]])
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _scan(x, i, cells, nvox, cell_start, cell_items, h2):
    cand = _candidates(i, cells, nvox, cell_start, cell_items)
    cand = cand[cand != i]
    d = x[cand] - x[i]
    return np.sort(cand[(d * d).sum(axis=1) <= h2])


def neighbor_count(x, cells, nvox, cell_start, cell_items, h2, lo, hi, counts):
    for i in range(lo, hi):
        counts[i] = len(_scan(x, i, cells, nvox, cell_start, cell_items, h2))


def neighbor_fill(x, cells, nvox, cell_start, cell_items, h2, lo, hi, ptr, nbr):
    for i in range(lo, hi):
        nbr[ptr[i]:ptr[i + 1]] = _scan(x, i, cells, nvox, cell_start, cell_items, h2)
