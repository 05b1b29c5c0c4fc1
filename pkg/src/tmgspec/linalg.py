"""Small numerical helpers shared by the spectral modules."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 800
# shift for shift-invert Lanczos; keeps H - s invertible when a band is pinned at 0
_SHIFT = 1e-11


def smallest_singular_values(D, m: int, method: str = "auto") -> np.ndarray:
    """The ``m`` smallest singular values of ``D``, ascending.

    ``method="dense"`` uses a full SVD.  ``"sparse"`` runs shift-invert Lanczos on
    the Hermitian dilation ``[[0, D^*], [D, 0]]`` whose eigenvalues are the
    singular values with both signs.
    """
    dim = D.shape[0]
    if m > dim:
        raise ValueError(f"requested {m} singular values of a {dim}x{dim} matrix")
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "sparse"
    if method == "dense":
        Dd = D.toarray() if sp.issparse(D) else np.asarray(D)
        s = sla.svdvals(Dd)
        return np.sort(s)[:m]
    if method != "sparse":
        raise ValueError(f"unknown method {method!r}")
    D = sp.csc_matrix(D)
    H = sp.bmat([[None, D.conj().T], [D, None]], format="csc")
    shifted = (H - _SHIFT * sp.identity(H.shape[0], format="csc")).tocsc()
    lu = spla.splu(shifted)
    op = spla.LinearOperator(H.shape, matvec=lu.solve, dtype=complex)
    vals = spla.eigsh(
        H, k=2 * m, sigma=_SHIFT, which="LM", OPinv=op, tol=0, return_eigenvectors=False
    )
    a = np.sort(np.abs(vals))
    # the 2m values nearest zero come in +/- pairs
    return 0.5 * (a[0::2] + a[1::2])


def offdiag_eig(A12: np.ndarray, A21: np.ndarray, vectors: bool = True):
    """Eigenpairs of ``[[0, A12], [A21, 0]]`` through the product ``A12 @ A21``.

    Returns eigenvalues ``lam`` (both square roots of every nonzero eigenvalue of
    the product) and, if requested, the matching eigenvectors stacked as
    ``(top; bottom)``.  Zero eigenvalues are discarded.
    """
    prod = A12 @ A21
    if vectors:
        mu, Va = sla.eig(prod)
    else:
        mu = sla.eigvals(prod)
        Va = None
    scale = max(np.abs(mu).max(initial=0.0), 1e-300)
    keep = np.abs(mu) > 1e-13 * scale
    mu = mu[keep]
    root = np.sqrt(mu)
    lam = np.concatenate([root, -root])
    if not vectors:
        return lam, None
    Va = Va[:, keep]
    bottom = A21 @ Va
    top = np.concatenate([Va, Va], axis=1)
    bot = np.concatenate([bottom / root, -bottom / root], axis=1)
    vecs = np.concatenate([top, bot], axis=0)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    return lam, vecs


def loglog_fit(r: np.ndarray, y: np.ndarray):
    """Least-squares line through ``(log r, log y)``: (slope, exp(intercept), rms residual)."""
    lx = np.log(r)
    ly = np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return float(coef[0]), float(np.exp(coef[1])), float(np.sqrt(np.mean(resid**2)))
