"""Finite-difference and interpolation weights on uniform stencils."""
from functools import lru_cache

import numpy as np


def fd_weights(z, nodes, m):
    """Fornberg weights for derivatives 0..m at ``z`` from values at ``nodes``.

    Returns an array of shape (m + 1, len(nodes)); row k holds the weights of
    the k-th derivative.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def centered_weights(deriv, half_width=3):
    """Weights of the centered (2*half_width+1)-point stencil, unit spacing."""
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    w = fd_weights(0.0, offsets, deriv)[deriv]
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def shifted_weights(deriv, start, width=6):
    """Weights at offset 0 from nodes ``start .. start+width-1`` (unit spacing)."""
    offsets = np.arange(start, start + width, dtype=float)
    w = fd_weights(0.0, offsets, deriv)[deriv]
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def lagrange_basis(npts, max_deriv):
    """Polynomial coefficients of the Lagrange basis on nodes 0..npts-1.

    Returns an object array ``basis[k][j]`` holding the coefficients
    (highest power first) of the k-th derivative of the j-th basis
    polynomial.
    """
    nodes = np.arange(npts, dtype=float)
    basis = []
    for k in range(max_deriv + 1):
        row = []
        for j in range(npts):
            others = np.delete(nodes, j)
            poly = np.poly(others) / np.prod(nodes[j] - others)
            row.append(np.polyder(poly, k) if k else poly)
        basis.append(row)
    return basis


def lagrange_weights(t, npts, deriv):
    """Vectorized weights of the ``deriv``-th derivative at local coordinates ``t``.

    ``t`` is measured in grid units from the first stencil node. Where ``t``
    sits on a node and ``deriv`` is 0 the weights are exactly one-hot, so
    interpolation reproduces node values bit for bit.
    """
    t = np.asarray(t, dtype=float)
    basis = lagrange_basis(npts, deriv)[deriv]
    w = np.stack([np.polyval(coeffs, t) for coeffs in basis], axis=-1)
    if deriv == 0:
        nearest = np.rint(t)
        on_node = (np.abs(t - nearest) < 1e-12) & (nearest >= 0) & (nearest < npts)
        if np.any(on_node):
            idx = nearest[on_node].astype(int)
            onehot = np.zeros((idx.size, npts))
            onehot[np.arange(idx.size), idx] = 1.0
            w[on_node] = onehot
    return w
