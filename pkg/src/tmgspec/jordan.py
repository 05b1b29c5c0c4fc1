"""Kernels, Jordan chains and Grushin effective blocks of ``D_n(alpha)`` at the Dirac point K = 0.

Inner products are ``<a, b> = b^H a``.  Chains satisfy ``D u_{k+1} = u_k`` and
``D^* v_{k+1} = v_k`` with unit ``u_1``, ``v_1`` and minimal-norm iterates
(each ``u_{k+1}`` orthogonal to the kernel, each ``v_{k+1}`` to the cokernel).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import MomentumBasis
from .linalg import DENSE_LIMIT
from .operators import ModelConfig, build_Dn, build_Hk

log = logging.getLogger(__name__)

KER_REL_TOL = 1e-8
CHAIN_TOL = 1e-9
GAUGE_GUARD = 1e-10


class AmbiguousDimension(ArithmeticError):
    pass


class ChainBreak(ArithmeticError):
    pass


class GaugeFailure(ArithmeticError):
    pass


class GrushinSingular(ArithmeticError):
    """The bordered system is singular: k is outside the Grushin disk."""


def ip(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(b, a))


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def operator_norm_bound(D) -> float:
    """``sqrt(|D|_1 |D|_inf)``, an upper bound for the spectral norm."""
    if sp.issparse(D):
        return float(np.sqrt(spla.norm(D, 1) * spla.norm(D, np.inf)))
    return float(np.linalg.norm(D, 2))


@dataclass
class KernelPair:
    kernel: np.ndarray  # dim x d, orthonormal
    cokernel: np.ndarray
    d: int
    singular_values: np.ndarray
    tol: float


def _near_zero_singular(D, count: int):
    """Smallest singular values with right (kernel-side) and left vectors."""
    dim = D.shape[0]
    if dim <= DENSE_LIMIT:
        U, s, Vh = np.linalg.svd(D.toarray() if sp.issparse(D) else D)
        order = np.argsort(s)[:count]
        return s[order], Vh.conj().T[:, order], U[:, order]
    D = sp.csc_matrix(D)
    H = sp.bmat([[None, D.conj().T], [D, None]], format="csc")
    shift = 1e-11
    lu = spla.splu((H - shift * sp.identity(H.shape[0], format="csc")).tocsc())
    op = spla.LinearOperator(H.shape, matvec=lu.solve, dtype=complex)
    lam, X = spla.eigsh(H, k=2 * count, sigma=shift, which="LM", OPinv=op, tol=0)
    order = np.argsort(np.abs(lam))
    lam, X = np.abs(lam[order]), X[:, order]
    s = 0.5 * (lam[0::2] + lam[1::2])
    return s, X[:dim], X[dim:]


def _span(parts: np.ndarray, rank: int) -> np.ndarray:
    U, sv, _ = np.linalg.svd(parts, full_matrices=False)
    return U[:, :rank]


def kernel_pair(config: ModelConfig, basis: MomentumBasis | None = None, ker_tol: float | None = None,
                probe: int = 3) -> KernelPair:
    """Orthonormal bases of ``ker D_n(alpha)`` and ``ker D_n(alpha)^*`` at k = 0.

    With one-dimensional kernel and ``e_2n`` an exact kernel vector, the
    kernel basis is ``e_2n`` itself.
    """
    basis = basis if basis is not None else config.basis()
    D = build_Dn(config, basis, 0.0).matrix
    tol = ker_tol if ker_tol is not None else KER_REL_TOL * operator_norm_bound(D)
    s, right, left = _near_zero_singular(D, probe)
    amb = (s > tol) & (s < 10 * tol)
    if np.any(amb):
        raise AmbiguousDimension(f"singular value {s[amb][0]:.3e} inside ({tol:.1e}, {10 * tol:.1e})")
    d = int(np.count_nonzero(s <= tol))
    if d == 0:
        raise ArithmeticError("no kernel found at K; truncation too small?")
    if d >= probe:
        raise AmbiguousDimension(f"kernel dimension >= {probe}")
    if len(s) == len(right[0]) or basis.dim <= DENSE_LIMIT:
        K, C = right[:, :d], left[:, :d]
    else:
        # eigenvector pairs of the dilation: span of top / bottom halves
        K = _span(right[:, : 2 * d], d)
        C = _span(left[:, : 2 * d], d)
    K = np.linalg.qr(K)[0]
    C = np.linalg.qr(C)[0]
    e = np.zeros(basis.dim, dtype=complex)
    e[basis.constant_index(2 * config.n)] = 1.0
    protected = np.linalg.norm(D @ e) <= tol
    if d == 1:
        K = e[:, None] if protected else _fix_phase(K[:, 0])[:, None]
        C = _fix_phase(C[:, 0])[:, None]
    elif protected:
        # u_1 = e_2n, second column orthogonal to it
        rest = K - np.outer(e, e.conj() @ K)
        j = int(np.argmax(np.linalg.norm(rest, axis=0)))
        K = np.stack([e, _fix_phase(rest[:, j] / np.linalg.norm(rest[:, j]))], axis=1)
    return KernelPair(K, C, d, s, tol)


def _bordered(A, cols: np.ndarray, rows: np.ndarray):
    """Sparse LU of ``[[A, cols], [rows^H, 0]]``."""
    d = cols.shape[1]
    M = sp.bmat(
        [[sp.csc_matrix(A), sp.csc_matrix(cols)], [sp.csc_matrix(rows.conj().T), sp.csc_matrix((d, d))]],
        format="csc",
    )
    return spla.splu(M), M


@dataclass
class JordanChainData:
    n: int
    alpha: complex
    N: int
    u: list
    v: list
    gram: np.ndarray
    d: int
    u_prime: np.ndarray | None = None
    v_prime: np.ndarray | None = None
    defects: list = field(default_factory=list)
    normalization: dict = field(default_factory=dict)
    kernel: KernelPair | None = field(default=None, repr=False)

    @property
    def length(self) -> int:
        return len(self.u)

    def coefficients(self) -> dict:
        L = self.length
        out = {"u_last_v1": abs(self.gram[L - 1, 0]), "u1_v_last": abs(self.gram[0, L - 1])}
        if self.u_prime is not None:
            out["u_prime_v_prime"] = abs(ip(self.u_prime, self.v_prime))
        return out

    def to_dict(self) -> dict:
        g = self.gram
        return {
            "n": self.n,
            "alpha": [self.alpha.real, self.alpha.imag],
            "N": self.N,
            "d": self.d,
            "length": self.length,
            "gram_re": g.real.tolist(),
            "gram_im": g.imag.tolist(),
            "coefficients": self.coefficients(),
            "chain_defects": [float(x) for x in self.defects],
            "normalization": self.normalization,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def dump_vectors(self, path, basis: MomentumBasis) -> tuple[Path, Path]:
        """Write u_1.., v_1.. (and u', v') as little-endian interleaved complex128 plus a JSON sidecar."""
        path = Path(path)
        names, vecs = [], []
        for i, x in enumerate(self.u):
            names.append(f"u{i + 1}")
            vecs.append(x)
        for i, x in enumerate(self.v):
            names.append(f"v{i + 1}")
            vecs.append(x)
        if self.u_prime is not None:
            names += ["u_prime", "v_prime"]
            vecs += [self.u_prime, self.v_prime]
        arr = np.stack(vecs).astype("<c16")
        path.write_bytes(arr.tobytes())
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps({
            "dtype": "float64-le interleaved (re, im)",
            "vectors": names,
            "dim": basis.dim,
            "basis": {"n": basis.n, "N": basis.N, "center": [basis.center.real, basis.center.imag],
                      "comp": basis.comp.tolist(), "m1": basis.m1.tolist(), "m2": basis.m2.tolist()},
        }) + "\n")
        return path, side


def _extend(D, start: np.ndarray, length: int, lu, kernel_dim: int, tol: float,
            own: np.ndarray | None = None, other: np.ndarray | None = None):
    """Minimal-norm chain ``D x_{k+1} = x_k`` from the bordered factorization.

    With ``own`` (kernel of D) and ``other`` (cokernel), an iterate that must
    be solved against again is shifted along ``own`` until it is orthogonal to
    ``other``; the minimal-norm iterate need not be when the kernel is 2-d.
    """
    chain, defects = [start], []
    dim = D.shape[0]
    for step in range(1, length):
        rhs = np.concatenate([chain[-1], np.zeros(kernel_dim, dtype=complex)])
        sol = lu.solve(rhs)
        x, y = sol[:dim], sol[dim:]
        defect = np.linalg.norm(D @ x - chain[-1]) / max(np.linalg.norm(chain[-1]), 1e-300)
        if defect > tol:
            raise ChainBreak(f"chain breaks at step {step + 1}: defect {defect:.2e}")
        if own is not None and step < length - 1:
            c = np.linalg.lstsq(other.conj().T @ own, -(other.conj().T @ x), rcond=1e-10)[0]
            x = x + own @ c
        chain.append(x)
        defects.append(defect)
    return chain, defects


def jordan_chain(config: ModelConfig, basis: MomentumBasis | None = None, ker_tol: float | None = None,
                 chain_tol: float = 1e-7, kernel: KernelPair | None = None) -> JordanChainData:
    """Jordan chains of ``D_n(alpha)`` and its adjoint at K.

    One-dimensional kernel: chains of length n from ``u_1`` and the unit
    cokernel vector ``v_1``.  Two-dimensional kernel: chains of length n - 1,
    with ``v_1`` the cokernel direction of ``u_{n-1}`` and the extra pair
    ``(u', v')`` completing the kernel and cokernel, gauge fixed.
    """
    basis = basis if basis is not None else config.basis()
    n = config.n
    D = build_Dn(config, basis, 0.0).matrix
    kp = kernel if kernel is not None else kernel_pair(config, basis, ker_tol)
    K, C = kp.kernel, kp.cokernel
    lu, _ = _bordered(D, C, K)
    luh, _ = _bordered(D.conj().T.tocsc(), K, C)
    Dh = D.conj().T
    u1 = K[:, 0]
    if kp.d == 1:
        u, du = _extend(D, u1, n, lu, 1, chain_tol)
        v, dv = _extend(Dh, C[:, 0], n, luh, 1, chain_tol)
        up = vp = None
    else:
        if n < 2:
            raise ValueError("a two-dimensional kernel needs n >= 2")
        L = n - 1
        u, du = _extend(D, u1, L, lu, 2, chain_tol, K, C)
        proj = C @ (C.conj().T @ u[-1])
        if np.linalg.norm(proj) < GAUGE_GUARD:
            raise GaugeFailure("u_{n-1} has no cokernel component")
        v1 = proj / np.linalg.norm(proj)
        # orthogonal complements inside the 2-d kernel / cokernel
        vp = C[:, 0] - v1 * ip(C[:, 0], v1)
        if np.linalg.norm(vp) < 0.5:
            vp = C[:, 1] - v1 * ip(C[:, 1], v1)
        vp /= np.linalg.norm(vp)
        up = K[:, 1] - u1 * ip(K[:, 1], u1)
        up /= np.linalg.norm(up)
        v, dv = _extend(Dh, v1, L, luh, 2, chain_tol, C, K)
        up, vp = gauge_fix(u, v, up, vp)
    gram = np.array([[ip(a, b) for b in v] for a in u])
    data = JordanChainData(
        n, config.alpha, basis.N, u, v, gram, kp.d, up, vp, du + dv,
        {"u1": "unit", "v1": "unit", "iterates": "minimal-norm (orthogonal to kernel / cokernel)",
         "inner_product": "<a,b> = b^H a", "prime_pair": "gauge fixed, unit norm"},
        kp,
    )
    return data


def gauge_fix(u: list, v: list, u_prime: np.ndarray, v_prime: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift ``u'`` along ``u_1`` and ``v'`` along ``v_1`` so they pair to zero with ``v_{n-1}``, ``u_{n-1}``."""
    den_u = ip(u[0], v[-1])
    den_v = ip(v[0], u[-1])
    if abs(den_u) < GAUGE_GUARD or abs(den_v) < GAUGE_GUARD:
        raise GaugeFailure(f"<u_1, v_(n-1)> = {abs(den_u):.2e}; truncation failure")
    up = u_prime - ip(u_prime, v[-1]) / den_u * u[0]
    vp = v_prime - ip(v_prime, u[-1]) / den_v * v[0]
    return up / np.linalg.norm(up), vp / np.linalg.norm(vp)


def cone_coefficients(data: JordanChainData) -> tuple[float, float]:
    """``(|<u_{n-1}, v_1>|, |<u', v'>|)`` for a two-dimensional kernel."""
    if data.d != 2:
        raise ValueError("cone coefficients need a two-dimensional kernel")
    return abs(data.gram[-1, 0]), abs(ip(data.u_prime, data.v_prime))


@dataclass
class EffectiveBlock:
    k: complex
    F: np.ndarray  # 2x2 block on the (u_1, v_1) pair
    residual: float
    F_prime: np.ndarray | None = None  # (u', v') block on the Dirac set
    full: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"k": [self.k.real, self.k.imag], "residual": self.residual,
             "F_re": self.F.real.tolist(), "F_im": self.F.imag.tolist()}
        if self.F_prime is not None:
            d["F_prime_re"] = self.F_prime.real.tolist()
            d["F_prime_im"] = self.F_prime.imag.tolist()
        return d


def border_vectors(data: JordanChainData) -> np.ndarray:
    """Columns of ``R_-``: ``(u_1, 0)``, ``(0, v_1)`` and, on the Dirac set, ``(u', 0)``, ``(0, v')``."""
    dim = len(data.u[0])
    z = np.zeros(dim, dtype=complex)
    cols = [np.concatenate([data.u[0], z]), np.concatenate([z, data.v[0]])]
    if data.u_prime is not None:
        cols += [np.concatenate([data.u_prime, z]), np.concatenate([z, data.v_prime])]
    return np.stack(cols, axis=1)


def effective_block(config: ModelConfig, k: complex, data: JordanChainData | None = None,
                    basis: MomentumBasis | None = None, residual_tol: float = 1e-9) -> EffectiveBlock:
    """``F_{-+}(0, k)`` from the bordered system ``[[H_k, R_-], [R_+, 0]]``, ``R_+ = R_-^*``."""
    basis = basis if basis is not None else config.basis()
    data = data if data is not None else jordan_chain(config, basis)
    R = border_vectors(data)
    m = R.shape[1]
    H = build_Hk(config, basis, k).matrix
    M = sp.bmat([[sp.csc_matrix(H), sp.csc_matrix(R)], [sp.csc_matrix(R.conj().T), None]], format="csc")
    rhs = np.zeros((M.shape[0], m), dtype=complex)
    rhs[-m:, :] = np.eye(m)
    try:
        lu = spla.splu(M)
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise GrushinSingular(f"bordered system singular at k={k}: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise GrushinSingular(f"bordered system singular at k={k}")
    res = float(np.linalg.norm(M @ sol - rhs) / np.linalg.norm(rhs))
    if res > residual_tol:
        raise GrushinSingular(f"k={k} too large for the Grushin disk (residual {res:.2e})")
    G = sol[-m:, :]
    F = G[:2, :2]
    Fp = G[2:, 2:] if m == 4 else None
    return EffectiveBlock(complex(k), F, res, Fp, G)
