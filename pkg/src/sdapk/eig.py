"""Dense complex eigenvalue solver for small non-Hermitian matrices.

Balancing, Householder reduction to Hessenberg form and a single-shift QR
iteration with Wilkinson shifts and deflation.  Intended for the matrices of
the stability analysis (order at most a few dozen).
"""

from __future__ import annotations

import numpy as np


class EigenConvergenceError(RuntimeError):
    pass


def balance(A: np.ndarray, max_sweeps: int = 100) -> np.ndarray:
    """Diagonal similarity scaling by powers of two that equalises row/column norms."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    radix = 2.0
    for _ in range(max_sweeps):
        converged = True
        for i in range(n):
            off = np.arange(n) != i
            c = float(np.sum(np.abs(A[off, i])))
            r = float(np.sum(np.abs(A[i, off])))
            if c == 0.0 or r == 0.0:
                continue
            g, f, s = r / radix, 1.0, c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                converged = False
                A[i, :] /= f
                A[:, i] *= f
        if converged:
            break
    return A


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix unitarily similar to ``A``."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H


def _givens(a: complex, b: complex):
    """(c, s) with c real such that [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    na = abs(a)
    nrm = np.hypot(na, abs(b))
    c = na / nrm
    s = (a / na) * np.conj(b) / nrm
    return c, s


def _wilkinson(a, b, c, d):
    tr = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + b * c)
    m1, m2 = tr + disc, tr - disc
    return m1 if abs(m1 - d) <= abs(m2 - d) else m2


def hessenberg_qr_eigvals(H: np.ndarray, max_iter_per_eig: int = 60) -> np.ndarray:
    H = np.array(H, dtype=complex)
    n = H.shape[0]
    eigs = np.zeros(n, dtype=complex)
    eps = np.finfo(float).eps
    # a subdiagonal below eps*||H|| is a backward-stable perturbation even
    # when the neighbouring diagonal entries vanish (clustered zero eigenvalues)
    floor = eps * np.linalg.norm(H)
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eigs[0] = H[0, 0]
            break
        lo = hi
        while lo > 0:
            scale = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if scale == 0.0:
                scale = np.abs(H[lo - 1:hi + 1, lo - 1:hi + 1]).sum()
            if abs(H[lo, lo - 1]) <= max(eps * scale, floor):
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise EigenConvergenceError(
                f"QR iteration stalled at index {hi}; |subdiag| = {abs(H[hi, hi - 1]):.3e}")
        if its % 11 == 0:
            mu = H[hi, hi] + abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2] if hi - 2 >= lo else 0)
        else:
            mu = _wilkinson(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        blk = H[lo:hi + 1, lo:hi + 1]
        m = hi - lo + 1
        blk[np.diag_indices(m)] -= mu
        rots = []
        for k in range(m - 1):
            c, s = _givens(blk[k, k], blk[k + 1, k])
            rows = blk[k:k + 2, k:].copy()
            blk[k, k:] = c * rows[0] + s * rows[1]
            blk[k + 1, k:] = -np.conj(s) * rows[0] + c * rows[1]
            rots.append((c, s))
        for k, (c, s) in enumerate(rots):
            top = min(k + 2, m - 1) + 1
            cols = blk[:top, k:k + 2].copy()
            blk[:top, k] = c * cols[:, 0] + np.conj(s) * cols[:, 1]
            blk[:top, k + 1] = -s * cols[:, 0] + c * cols[:, 1]
        blk[np.diag_indices(m)] += mu
        H[lo:hi + 1, lo:hi + 1] = blk
    return eigs


def eigvals(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix expected")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    return hessenberg_qr_eigvals(hessenberg(balance(A)))


def eigvec(A: np.ndarray, lam: complex, iters: int = 3) -> np.ndarray:
    """Unit eigenvector for ``lam`` by shifted inverse iteration."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    scale = max(np.abs(A).max(), 1.0)
    shift = lam + 1e-10 * scale
    M = A - shift * np.eye(n)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    for _ in range(iters):
        try:
            y = np.linalg.solve(M, x)
        except np.linalg.LinAlgError:
            M = M + 1e-8 * scale * np.eye(n)
            y = np.linalg.solve(M, x)
        x = y / np.linalg.norm(y)
    return x


def max_real_eig(S: np.ndarray, backend: str = "inrepo") -> tuple[float, complex]:
    """Largest real part among the eigenvalues of ``S`` and the eigenvalue attaining it."""
    if backend == "inrepo":
        ev = eigvals(S)
    elif backend == "numpy":
        ev = np.linalg.eigvals(S)
    else:
        raise ValueError(f"unknown eigen backend {backend!r}")
    k = int(np.argmax(ev.real))
    return float(ev[k].real), complex(ev[k])
