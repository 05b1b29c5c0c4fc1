"""Matrices of the chiral multilayer Dirac operator and its Bloch Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .lattice import OMEGA, MomentumBasis, OperatorMatrix, _locate, build_basis


@dataclass(frozen=True)
class ModelConfig:
    """Problem parameters: layer count, tunnelings, coupling and truncation."""

    n: int = 2
    t: tuple = None
    alpha: complex = 0.0
    N: int = 16

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        t = self.t
        if t is None:
            t = (1.0,) * (self.n - 1)
        t = tuple(float(x) for x in np.atleast_1d(t)) if len(np.atleast_1d(t)) else ()
        if len(t) != self.n - 1:
            raise ValueError(f"expected {self.n - 1} tunnelings, got {len(t)}")
        if any(x == 0 for x in t):
            raise ValueError("tunnelings must be non-zero")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.N < 1:
            raise ValueError("truncation N must be >= 1")

    def with_alpha(self, alpha) -> "ModelConfig":
        return replace(self, alpha=complex(alpha))

    def basis(self, bloch_k: complex = 0.0, center: complex = 0.0) -> MomentumBasis:
        return _cached_basis(self.n, self.N, complex(center)).with_bloch(bloch_k)


_BASIS_CACHE: dict = {}


def _cached_basis(n: int, N: int, center: complex) -> MomentumBasis:
    key = (n, N, center)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = build_basis(n, N, 0.0, center)
    return _BASIS_CACHE[key]


@dataclass(frozen=True)
class DoubledBasis:
    """Two stacked copies of a ``2n``-component basis (the ``4n``-component space of H)."""

    base: MomentumBasis

    @property
    def dim(self) -> int:
        return 2 * self.base.dim


def build_potential(basis: MomentumBasis, sign: int) -> OperatorMatrix:
    """Multiplication by ``U(sign z)`` between the first-layer components.

    ``sign = +1`` maps component 2 into component 1 (the ``U(z)`` entry of D),
    ``sign = -1`` maps component 1 into component 2 (the ``U(-z)`` entry).
    A plane wave at ``q`` goes to ``sum_j omega^j`` times the wave at
    ``q + sign i omega^j``; shifts leaving the truncation are dropped.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    src, dst = (2, 1) if sign == 1 else (1, 2)
    cols = np.flatnonzero(basis.comp == src)
    q0 = basis.base_momenta[cols]
    rows_all, cols_all, vals = [], [], []
    for j in range(3):
        target = _locate(basis, np.full(len(cols), dst), q0 + sign * 1j * OMEGA**j)
        ok = target >= 0
        rows_all.append(target[ok])
        cols_all.append(cols[ok])
        vals.append(np.full(ok.sum(), OMEGA**j))
    M = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(basis.dim, basis.dim),
    )
    return OperatorMatrix(M, basis, basis)


def build_Vn(config: ModelConfig, basis: MomentumBasis) -> OperatorMatrix:
    """``dD_n/dalpha``: U(z), U(-z) in the first 2x2 component block, zero elsewhere."""
    _check(config, basis)
    V = build_potential(basis, 1).matrix + build_potential(basis, -1).matrix
    return OperatorMatrix(V.tocsr(), basis, basis)


def _tunneling(config: ModelConfig, basis: MomentumBasis) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for m in range(1, config.n):
        tm = config.t[m - 1]
        # T_+ : component 2m-1 <- 2m+1 ; T_- : component 2m+2 <- 2m (equal momentum)
        for dst, src in ((2 * m - 1, 2 * m + 1), (2 * m + 2, 2 * m)):
            d = basis.component_slice(dst)
            s = basis.component_slice(src)
            rows.append(np.arange(d.start, d.stop))
            cols.append(np.arange(s.start, s.stop))
            vals.append(np.full(d.stop - d.start, tm, dtype=complex))
    if not rows:
        return sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )


def _check(config: ModelConfig, basis: MomentumBasis):
    if config.n != basis.n:
        raise ValueError(f"config has n={config.n} but basis has n={basis.n}")


def build_Dn(config: ModelConfig, basis: MomentumBasis, k: complex = 0.0) -> OperatorMatrix:
    """Matrix of ``D_n(alpha; t) + k``: diagonal ``q + k``, alpha U couplings in layer 1, tunnelings."""
    _check(config, basis)
    diag = sp.diags(basis.momenta + k, format="csr")
    D = diag + _tunneling(config, basis)
    if config.alpha != 0:
        D = D + config.alpha * build_Vn(config, basis).matrix
    return OperatorMatrix(D.tocsr(), basis, basis)


def build_Hk(config: ModelConfig, basis: MomentumBasis, k: complex = 0.0) -> OperatorMatrix:
    """Hermitian ``[[0, (D_n + k)^*], [D_n + k, 0]]`` on the doubled basis."""
    D = build_Dn(config, basis, k).matrix
    H = sp.bmat([[None, D.conj().T], [D, None]], format="csr")
    doubled = DoubledBasis(basis)
    return OperatorMatrix(H, doubled, doubled)


def chiral_operator(basis: MomentumBasis) -> OperatorMatrix:
    """``W = diag(1, -1)`` on the doubled basis."""
    d = np.concatenate([np.ones(basis.dim), -np.ones(basis.dim)]).astype(complex)
    doubled = DoubledBasis(basis)
    return OperatorMatrix(sp.diags(d, format="csr"), doubled, doubled)


@dataclass(frozen=True)
class ConstantVector:
    """Unit vector on the constant plane wave of component ``index``.

    ``index`` runs over ``1..2n`` (``doubled=False``) or ``1..4n`` on the
    doubled space of ``H``.
    """

    index: int
    basis: MomentumBasis
    doubled: bool = False
    vector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n2 = 2 * self.basis.n
        limit = 2 * n2 if self.doubled else n2
        if not 1 <= self.index <= limit:
            raise ValueError(f"index must lie in 1..{limit}")
        c = (self.index - 1) % n2 + 1
        pos = self.basis.constant_index(c)
        size = 2 * self.basis.dim if self.doubled else self.basis.dim
        v = np.zeros(size, dtype=complex)
        v[pos + (self.basis.dim if self.index > n2 else 0)] = 1.0
        object.__setattr__(self, "vector", v)


def constant_vector(basis: MomentumBasis, index: int, doubled: bool = False) -> np.ndarray:
    return ConstantVector(index, basis, doubled).vector
