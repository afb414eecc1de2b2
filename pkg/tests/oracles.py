"""Reference computations that share no code with the package.

Each oracle recomputes a quantity the slow, obvious way: dense linear
algebra, brute-force loops or fine quadrature.
"""
import math

import numpy as np

ARGON = dict(d=0.368e-9, k_b=1.3806e-23, R=208.0)


def tau_by_hand(rho, T, d=ARGON["d"], k_b=ARGON["k_b"], R=ARGON["R"]):
    lam = k_b / (math.sqrt(2.0) * math.pi * rho * R * d * d)
    c_bar = math.sqrt(8.0 * R * T / math.pi)
    return 4.0 * lam / (math.pi * c_bar), lam


def gaussian_moments(rho, U, T, R, dims):
    """Continuum moments of the Maxwellian: (mass, momentum, 3 rho R T)."""
    return rho, rho * np.asarray(U, float), 3.0 * rho * R * T


def maxwellian_point(v, rho, U, T, R):
    v, U = np.asarray(v, float), np.asarray(U, float)
    d = len(v)
    return rho / (2 * math.pi * R * T) ** (d / 2) * math.exp(-float((v - U) @ (v - U)) / (2 * R * T))


def marginalize_v3(rho, U3, T, R, nodes2, v3_max, n3):
    """g1, g2 on the 2D grid by midpoint-free trapezoid quadrature over v3.

    ``n3`` intervals on ``[-v3_max, v3_max]``; the 3D Maxwellian is
    evaluated pointwise.
    """
    v3 = np.linspace(-v3_max, v3_max, n3 + 1)
    wts = np.full(n3 + 1, 2 * v3_max / n3)
    wts[0] = wts[-1] = 0.5 * wts[0]
    U3 = np.asarray(U3, float)
    pref = rho / (2 * math.pi * R * T) ** 1.5
    g1 = np.zeros(len(nodes2))
    g2 = np.zeros(len(nodes2))
    for k, v in enumerate(nodes2):
        c2 = (v[0] - U3[0]) ** 2 + (v[1] - U3[1]) ** 2 + (v3 - U3[2]) ** 2
        vals = pref * np.exp(-c2 / (2 * R * T))
        g1[k] = vals @ wts
        g2[k] = (vals * (v3 - U3[2]) ** 2) @ wts
    return g1, g2


def brute_neighbors(x, h):
    n = len(x)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            if j != i and math.dist(x[i], x[j]) <= h:
                row.append(j)
        out.append(row)
    return out


def dense_ls_gradient(x, i, nbrs, h, values, alpha=6.0):
    """Weighted LS gradient by a dense ``lstsq`` on sqrt(W) M a = sqrt(W) b."""
    d = x[nbrs] - x[i]
    r = np.sqrt((d * d).sum(axis=1))
    w = np.where(r <= h, np.exp(-alpha * (r / h) ** 2), 0.0)
    sw = np.sqrt(w)
    a, *_ = np.linalg.lstsq(d * sw[:, None], (values[nbrs] - values[i]) * sw, rcond=None)
    return a


def dense_ls_value(pos, target, values, h, alpha=6.0):
    """Constant term of the weighted fit ``a0 + a.(x - target)`` via ``lstsq``."""
    d = np.asarray(pos, float) - np.asarray(target, float)
    r = np.sqrt((d * d).sum(axis=1))
    w = np.where(r <= h, np.exp(-alpha * (r / h) ** 2), 0.0)
    M = np.hstack([np.ones((len(d), 1)), d])
    sw = np.sqrt(w)
    a, *_ = np.linalg.lstsq(M * sw[:, None], np.asarray(values, float) * sw, rcond=None)
    return a[0]


def winding_number(angles):
    """Total signed turning of a closed sequence of angles, in turns."""
    a = np.asarray(angles, float)
    d = np.diff(np.concatenate([a, a[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d.sum() / (2 * np.pi)
