"""Moire lattice, dual lattice and symmetry-adapted plane-wave bases.

Conventions
-----------
omega = exp(2 pi i / 3).  The moire lattice is
``Lambda = (4 pi / 3) i omega (Z + omega Z)`` and its dual is spanned by
``g1 = sqrt(3) omega`` and ``g2 = sqrt(3) omega**2``.  A plane wave
``exp(i <z, q>)`` with ``<z, q> = Re(z conj(q))`` is labelled by its momentum
``q``; the operator ``2 D_zbar`` acts on it as multiplication by ``q``.

On the Floquet space fixed by the twisted translations, odd components
(1, 3, ...) carry momenta in ``i + Lambda*`` and even components carry
momenta in ``Lambda*``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

OMEGA = np.exp(2j * np.pi / 3)
G1 = np.sqrt(3) * OMEGA
G2 = np.sqrt(3) * OMEGA**2
DIRAC_POINTS = (0j, -1j)

# coset offset of odd / even components
ODD_OFFSET = 1j
EVEN_OFFSET = 0j

_GMAT = np.array([[G1.real, G2.real], [G1.imag, G2.imag]])
_GMAT_INV = np.linalg.inv(_GMAT)


@dataclass(frozen=True)
class LatticePoint:
    """Element ``(4 pi / 3) i omega (a1 + omega a2)`` of the moire lattice."""

    a1: int
    a2: int

    @property
    def value(self) -> complex:
        return complex(4 * np.pi / 3 * 1j * OMEGA * (self.a1 + OMEGA * self.a2))

    def __add__(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(self.a1 + other.a1, self.a2 + other.a2)

    def scaled(self, factor: int) -> "LatticePoint":
        return LatticePoint(factor * self.a1, factor * self.a2)

    def in_3lattice(self) -> bool:
        """True when the point lies in the sublattice 3*Lambda."""
        return self.a1 % 3 == 0 and self.a2 % 3 == 0


@dataclass(frozen=True)
class DualPoint:
    """``(m1 g1 + m2 g2) / d`` with ``d = 3`` when ``third`` is set (dual of 3*Lambda)."""

    m1: int
    m2: int
    third: bool = False

    @property
    def value(self) -> complex:
        d = 3 if self.third else 1
        return complex((self.m1 * G1 + self.m2 * G2) / d)


@dataclass(frozen=True)
class SectorLabel:
    kappa: int
    p: int | None = None

    def __post_init__(self):
        if self.kappa not in (0, 1, 2):
            raise ValueError(f"kappa must be in {{0,1,2}}, got {self.kappa}")
        if self.p is not None and self.p not in (0, 1, 2):
            raise ValueError(f"p must be in {{0,1,2}}, got {self.p}")

    @property
    def k(self) -> complex:
        return -1j * self.kappa


def pairing(a, q) -> float:
    """Real inner product ``(a conj(q) + conj(a) q) / 2`` of two plane vectors."""
    if isinstance(a, (LatticePoint, DualPoint)):
        a = a.value
    if isinstance(q, (LatticePoint, DualPoint)):
        q = q.value
    a = complex(a)
    q = complex(q)
    return 0.5 * (a * q.conjugate() + a.conjugate() * q).real


def dual_coordinates(q) -> np.ndarray:
    """Real coordinates ``(x1, x2)`` with ``q = x1 g1 + x2 g2``."""
    q = np.asarray(q, dtype=complex)
    xy = np.stack([q.real, q.imag])
    return np.tensordot(_GMAT_INV, xy, axes=1)


def in_dual_lattice(q, tol: float = 1e-9) -> bool:
    x = dual_coordinates(q)
    return bool(np.all(np.abs(x - np.round(x)) < tol))


def component_offset(c: int) -> complex:
    """Coset offset of the 1-based component ``c``."""
    return ODD_OFFSET if c % 2 == 1 else EVEN_OFFSET


def rotation_weights(n: int) -> np.ndarray:
    """Diagonal of ``J = diag(1, 1, wbar, w, ..., wbar^(n-1), w^(n-1))``."""
    J = np.empty(2 * n, dtype=complex)
    for m in range(n):
        J[2 * m] = np.conj(OMEGA) ** m
        J[2 * m + 1] = OMEGA**m
    return J


def cutoff_radius(N: int) -> float:
    return np.sqrt(3) * (N + 0.5)


@dataclass(frozen=True, eq=False)
class MomentumBasis:
    """Plane-wave basis of the Floquet space on ``2n`` components.

    Entries are ``(c, m1, m2)`` with base momentum
    ``q0 = delta_c + m1 g1 + m2 g2``; the momentum seen by ``2 D_zbar`` is
    ``q0 + bloch_k``.  The entry set is ``|q0 + center| <= sqrt(3) (N + 1/2)``,
    a disc about the Dirac point ``-center``; it is invariant under the
    rotation ``q0 + center -> wbar (q0 + center)`` so the rotation acts as an
    exact permutation.
    """

    n: int
    N: int
    bloch_k: complex
    center: complex
    comp: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    _index: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.comp)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([component_offset(c) for c in range(1, 2 * self.n + 1)])

    @cached_property
    def base_momenta(self) -> np.ndarray:
        off = np.where(self.comp % 2 == 1, ODD_OFFSET, EVEN_OFFSET)
        return off + self.m1 * G1 + self.m2 * G2

    @property
    def momenta(self) -> np.ndarray:
        return self.base_momenta + self.bloch_k

    def entries(self) -> list[tuple[int, int, int]]:
        return list(zip(self.comp.tolist(), self.m1.tolist(), self.m2.tolist()))

    def index(self, c: int, m1: int, m2: int) -> int | None:
        return self._index.get((c, m1, m2))

    def component_slice(self, c: int) -> slice:
        idx = np.flatnonzero(self.comp == c)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def constant_index(self, c: int) -> int:
        """Index of the constant (q0 = 0) plane wave in even component ``c``."""
        i = self.index(c, 0, 0)
        if c % 2 == 1 or i is None:
            raise ValueError(f"component {c} has no constant mode")
        return i

    def with_bloch(self, k: complex) -> "MomentumBasis":
        return MomentumBasis(self.n, self.N, complex(k), self.center, self.comp, self.m1, self.m2, self._index)

    def same_entries(self, other: "MomentumBasis") -> bool:
        return (
            self.n == other.n
            and self.dim == other.dim
            and np.array_equal(self.comp, other.comp)
            and np.array_equal(self.m1, other.m1)
            and np.array_equal(self.m2, other.m2)
        )


def _coset_indices(offset: complex, center: complex, R: float) -> list[tuple[int, int]]:
    M = int(np.ceil(R / 1.5)) + 3
    r = np.arange(-M, M + 1)
    a, b = np.meshgrid(r, r, indexing="ij")
    q = offset + center + a * G1 + b * G2
    keep = np.abs(q) <= R + 1e-9
    pairs = sorted(zip(a[keep].tolist(), b[keep].tolist()))
    return pairs


def build_basis(n: int, N: int, bloch_k: complex = 0.0, center: complex = 0.0) -> MomentumBasis:
    """Component-major, then lexicographic ``(m1, m2)`` plane-wave basis."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if N < 1:
        raise ValueError("truncation N must be >= 1")
    R = cutoff_radius(N)
    odd = _coset_indices(ODD_OFFSET, center, R)
    even = _coset_indices(EVEN_OFFSET, center, R)
    comp, m1, m2 = [], [], []
    for c in range(1, 2 * n + 1):
        pairs = odd if c % 2 == 1 else even
        comp.extend([c] * len(pairs))
        m1.extend(p[0] for p in pairs)
        m2.extend(p[1] for p in pairs)
    comp = np.array(comp, dtype=np.int64)
    m1 = np.array(m1, dtype=np.int64)
    m2 = np.array(m2, dtype=np.int64)
    index = {(int(c), int(a), int(b)): i for i, (c, a, b) in enumerate(zip(comp, m1, m2))}
    return MomentumBasis(n, N, complex(bloch_k), complex(center), comp, m1, m2, index)


def _locate(basis: MomentumBasis, comps: np.ndarray, q0: np.ndarray) -> np.ndarray:
    """Basis index of each (component, base momentum) pair, -1 when absent."""
    off = np.where(comps % 2 == 1, ODD_OFFSET, EVEN_OFFSET)
    x = dual_coordinates(q0 - off)
    xr = np.round(x)
    if np.any(np.abs(x - xr) > 1e-8):
        raise ValueError("momentum outside the component coset")
    xr = xr.astype(np.int64)
    out = np.full(len(comps), -1, dtype=np.int64)
    for i, (c, a, b) in enumerate(zip(comps.tolist(), xr[0].tolist(), xr[1].tolist())):
        j = basis.index(c, a, b)
        if j is not None:
            out[i] = j
    return out


def rotation_permutation(basis: MomentumBasis) -> np.ndarray:
    """Image index of each entry under ``q0 + center -> wbar (q0 + center)``."""
    c = basis.center
    if not in_dual_lattice(np.conj(OMEGA) * c - c):
        raise ValueError("basis center is not a rotation fixed point modulo the dual lattice")
    q0 = basis.base_momenta
    target = np.conj(OMEGA) * (q0 + c) - c
    perm = _locate(basis, basis.comp, target)
    if np.any(perm < 0):
        raise ValueError("momentum set is not rotation invariant")
    return perm


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Complex matrix tagged with its domain and codomain bases."""

    matrix: object
    domain: MomentumBasis
    codomain: MomentumBasis
    domain_sector: SectorLabel | None = None
    codomain_sector: SectorLabel | None = None

    def __post_init__(self):
        rows, cols = self.matrix.shape
        if rows != self.codomain.dim or cols != self.domain.dim:
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"codomain {self.codomain.dim} x domain {self.domain.dim}"
            )

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    def sparse(self):
        if sp.issparse(self.matrix):
            return self.matrix.tocsr()
        return sp.csr_matrix(self.matrix)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.matrix @ other.matrix, other.domain, self.codomain)
        return self.matrix @ other


def rotation_matrix(basis: MomentumBasis) -> OperatorMatrix:
    """Unitary matrix of the twisted rotation ``u -> J u(omega z)`` on ``2n`` components."""
    perm = rotation_permutation(basis)
    J = rotation_weights(basis.n)[basis.comp - 1]
    C = sp.csr_matrix((J, (perm, np.arange(basis.dim))), shape=(basis.dim, basis.dim))
    return OperatorMatrix(C, basis, basis)


def sector_projector(basis: MomentumBasis, p: int) -> OperatorMatrix:
    """Orthogonal projector onto ``{u : C u = wbar^p u}``."""
    C = rotation_matrix(basis).matrix
    C2 = C @ C
    eye = sp.identity(basis.dim, dtype=complex, format="csr")
    P = (eye + OMEGA**p * C + OMEGA ** (2 * p) * C2) / 3
    return OperatorMatrix(P.tocsr(), basis, basis, SectorLabel(0, p % 3), SectorLabel(0, p % 3))


def sector_isometry(basis: MomentumBasis, p: int, exclude: tuple[int, ...] = ()) -> sp.csr_matrix:
    """Orthonormal columns spanning the range of the p-th sector projector.

    One column per rotation orbit: ``P_p e_r`` normalised, for the orbit
    representative ``r`` (its smallest index).  Orbits whose image vanishes are
    skipped.  ``exclude`` drops fixed-point columns (used to deflate protected
    constants such as ``e_2n``).
    """
    perm = rotation_permutation(basis)
    J = rotation_weights(basis.n)[basis.comp - 1]
    wp = OMEGA ** (p % 3)
    seen = np.zeros(basis.dim, dtype=bool)
    rows, cols, vals = [], [], []
    col = 0
    for r in range(basis.dim):
        if seen[r]:
            continue
        orbit = [r]
        j = perm[r]
        while j != r:
            orbit.append(int(j))
            j = perm[j]
        seen[orbit] = True
        if len(orbit) == 1:
            # C e_r = J_r e_r lies in sector p iff J_r = wbar^p
            if abs(J[r] - np.conj(wp)) > 1e-12 or r in exclude:
                continue
            rows.append(r)
            cols.append(col)
            vals.append(1.0 + 0j)
            col += 1
            continue
        if len(orbit) != 3:
            raise ValueError("rotation orbit of unexpected length")
        # P_p e_r = (e_r + w^p C e_r + w^2p C^2 e_r) / 3
        coef = 1.0 + 0j
        for l, idx in enumerate(orbit):
            rows.append(idx)
            cols.append(col)
            vals.append(coef / np.sqrt(3))
            coef = coef * wp * J[idx]
        col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, col))
