"""Magic and Dirac coupling sets as reciprocal spectra of Birman-Schwinger operators.

Both sets come from the factorisation ``D(alpha) + k = (D(0) + k)(I + alpha T)``
with ``T = (D(0) + k)^{-1} V``.  The operator fails to be invertible exactly
when ``-1/alpha`` is an eigenvalue of ``T``.

* mode ``"A"``: single layer, generic ``k``; the reciprocal spectrum is the
  magic set (independent of ``k``).
* mode ``"B<j>"``: ``k = 0``, restricted to the rotation sector ``j`` with the
  protected constants deflated from domain and codomain.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lattice import MomentumBasis, OperatorMatrix, SectorLabel, sector_isometry, G1, G2
from .linalg import offdiag_eig, smallest_singular_values
from .operators import ModelConfig, build_Dn, build_Vn

log = logging.getLogger(__name__)

DEFAULT_GENERIC_K = 0.3 + 0.2j
REAL_TOL = 1e-6
MERGE_TOL = 1e-6
DUPLICATE_TOL = 1e-10


class SingularBlockError(ArithmeticError):
    """A retained diagonal block of ``D(0) + k`` is singular."""


class ContourCollision(ArithmeticError):
    """An eigenvalue sits on or near the quadrature contour."""


def is_real(alpha, tol: float = REAL_TOL) -> np.ndarray:
    alpha = np.asarray(alpha)
    return np.abs(alpha.imag) <= tol * (1 + np.abs(alpha))


def _sort_key(alpha: complex) -> float:
    return alpha.real if is_real(alpha) else abs(alpha)


@dataclass
class SpectralSet:
    """Ordered coupling values with residuals and convergence deltas."""

    mode: str
    n: int
    t: tuple
    N: int
    values: np.ndarray
    residuals: np.ndarray
    deltas: np.ndarray | None = None
    multiplicity: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        res = np.asarray(self.residuals, dtype=float)
        order = sorted(range(len(vals)), key=lambda i: (_sort_key(vals[i]), vals[i].imag))
        vals, res = vals[order], res[order]
        deltas = None if self.deltas is None else np.asarray(self.deltas, dtype=float)[order]
        mult = np.ones(len(vals), dtype=int) if self.multiplicity is None else np.asarray(self.multiplicity)[order]
        # merge numerical duplicates
        keep = []
        for i, v in enumerate(vals):
            if keep and abs(v - vals[keep[-1]]) <= DUPLICATE_TOL * (1 + abs(v)):
                j = keep[-1]
                mult[j] += mult[i]
                res[j] = max(res[j], res[i])
                continue
            keep.append(i)
        self.values = vals[keep]
        self.residuals = res[keep]
        self.multiplicity = mult[keep]
        self.deltas = None if deltas is None else deltas[keep]
        self.t = tuple(self.t)

    def __len__(self):
        return len(self.values)

    @property
    def real_mask(self) -> np.ndarray:
        return is_real(self.values)

    def positive_real(self, count: int | None = None) -> np.ndarray:
        """Positive real members, ascending (imaginary parts dropped)."""
        mask = self.real_mask & (self.values.real > 0)
        out = self.values.real[mask]
        return out if count is None else out[:count]

    def subset(self, mask) -> "SpectralSet":
        mask = np.asarray(mask, dtype=bool)
        return SpectralSet(
            self.mode, self.n, self.t, self.N, self.values[mask], self.residuals[mask],
            None if self.deltas is None else self.deltas[mask], self.multiplicity[mask],
        )

    def first_positive_real(self, count: int) -> "SpectralSet":
        mask = self.real_mask & (self.values.real > 0)
        idx = np.flatnonzero(mask)[:count]
        sel = np.zeros(len(self.values), dtype=bool)
        sel[idx] = True
        return self.subset(sel)

    def to_dict(self) -> dict:
        items = []
        for i, v in enumerate(self.values):
            item = {"re": float(v.real), "im": float(v.imag), "residual": float(self.residuals[i])}
            if self.deltas is not None:
                item["delta"] = float(self.deltas[i])
            items.append(item)
        return {"mode": self.mode, "n": self.n, "t": list(self.t), "N": self.N, "values": items}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralSet":
        vals = [complex(x["re"], x["im"]) for x in d["values"]]
        res = [x["residual"] for x in d["values"]]
        deltas = [x["delta"] for x in d["values"]] if d["values"] and "delta" in d["values"][0] else None
        return cls(d["mode"], d["n"], tuple(d["t"]), d["N"], np.array(vals, dtype=complex), np.array(res), deltas)

    @classmethod
    def from_json(cls, s: str) -> "SpectralSet":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class DeflationRecord:
    """Protected constants removed from the domain / codomain of ``D_n(0)``."""

    domain: tuple = ()
    codomain: tuple = ()
    domain_sector: SectorLabel | None = None
    codomain_sector: SectorLabel | None = None

    @classmethod
    def for_sector(cls, n: int, j: int) -> "DeflationRecord":
        """``e_2n`` leaves the domain iff it lies in sector j; ``e_2`` leaves the codomain iff it is sector 0."""
        j = j % 3
        dom = ("e%d" % (2 * n),) if j == (1 - n) % 3 else ()
        cod = ("e2",) if (j - 1) % 3 == 0 else ()
        return cls(dom, cod, SectorLabel(0, j), SectorLabel(0, (j - 1) % 3))


class D0Solver:
    """Exact (pseudo-)inverse of ``D_n(0) + k`` built from its momentum blocks.

    At fixed momentum the odd components form an upper bidiagonal tunneling
    chain and the even components a lower bidiagonal one; both are inverted in
    closed form.  A block with vanishing diagonal is only allowed for the even
    constant chain at ``q + k = 0``, where the kernel ``e_2n`` and cokernel
    ``e_2`` are deflated (minimal-norm solution, ``e_2`` component ignored).
    """

    def __init__(self, config: ModelConfig, basis: MomentumBasis, k: complex = 0.0,
                 deflation: DeflationRecord | None = None, tol: float = 1e-12):
        if config.n != basis.n:
            raise ValueError(f"config has n={config.n} but basis has n={basis.n}")
        self.config = config
        self.basis = basis
        self.k = complex(k)
        self.deflation = deflation
        n, t = config.n, config.t
        q = basis.momenta + self.k
        rows, cols, vals = [], [], []
        self.deflated_domain = []
        self.deflated_codomain = []
        for parity in (1, 0):
            comps = [c for c in range(1, 2 * n + 1) if c % 2 == parity]
            slices = [basis.component_slice(c) for c in comps]
            base = np.arange(slices[0].stop - slices[0].start)
            qq = q[slices[0]]
            small = np.abs(qq) < tol
            if np.any(small) and parity == 1:
                raise SingularBlockError("odd momentum collides with -k; choose a different k")
            if np.count_nonzero(small) > 1:
                raise SingularBlockError("more than one singular momentum block")
            reg = ~small
            for a in range(n):
                for b in range(n):
                    # odd chain is upper bidiagonal (b >= a), even chain lower (a >= b)
                    lo, hi = (a, b) if parity == 1 else (b, a)
                    if hi < lo:
                        continue
                    prod = np.ones(reg.sum(), dtype=complex) / qq[reg]
                    for l in range(lo, hi):
                        prod = prod * (-t[l] / qq[reg])
                    rows.append(slices[a].start + base[reg])
                    cols.append(slices[b].start + base[reg])
                    vals.append(prod)
            if np.any(small):
                i0 = int(np.flatnonzero(small)[0])
                # x_{2m} = b_{2m+2} / t_m ; x_{2n} = 0 ; b_2 ignored
                for m in range(n - 1):
                    rows.append(np.array([slices[m].start + i0]))
                    cols.append(np.array([slices[m + 1].start + i0]))
                    vals.append(np.array([1.0 / t[m]], dtype=complex))
                self.deflated_domain.append(slices[n - 1].start + i0)
                self.deflated_codomain.append(slices[0].start + i0)
        self.matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(basis.dim, basis.dim),
        )
        self._D = build_Dn(config.with_alpha(0.0), basis, self.k).matrix

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.matrix @ b

    def residual(self, b: np.ndarray) -> float:
        """``|D x - b| / |b|`` with the cokernel part of ``b`` removed."""
        b = np.array(b, dtype=complex)
        b[self.deflated_codomain] = 0
        x = self.solve(b)
        nb = np.linalg.norm(b)
        return float(np.linalg.norm(self._D @ x - b) / nb) if nb else 0.0


def invert_D0(config: ModelConfig, basis: MomentumBasis | None = None, j: int | None = None,
              deflation: DeflationRecord | None = None, k: complex = 0.0) -> D0Solver:
    """Solver for ``D_n(0) + k``; with a sector ``j`` it maps sector ``j-1`` (flat) to sector ``j`` (sharp)."""
    basis = basis if basis is not None else config.basis()
    if j is not None and deflation is None:
        deflation = DeflationRecord.for_sector(config.n, j)
    return D0Solver(config, basis, k, deflation)


def _first_layer_columns(Q: sp.csr_matrix, basis: MomentumBasis) -> tuple[np.ndarray, np.ndarray]:
    """Split sector-isometry columns into those supported on component 1 and on component 2."""
    Qc = Q.tocsc()
    comp_of_col = np.empty(Q.shape[1], dtype=int)
    for col in range(Q.shape[1]):
        r = Qc.indices[Qc.indptr[col]]
        comp_of_col[col] = basis.comp[r]
    return np.flatnonzero(comp_of_col == 1), np.flatnonzero(comp_of_col == 2)


def _parse_mode(mode: str) -> tuple[str, int | None]:
    if mode == "A":
        return "A", None
    if mode.startswith("B") and mode[1:] in ("0", "1", "2"):
        return "B", int(mode[1:])
    raise ValueError(f"unknown mode {mode!r}; expected 'A' or 'B0', 'B1', 'B2'")


def birman_schwinger_set(config: ModelConfig, mode: str = "A", basis: MomentumBasis | None = None,
                         k: complex = DEFAULT_GENERIC_K, residuals: bool = True,
                         with_deltas: bool = False) -> SpectralSet:
    """Reciprocal spectrum ``alpha = -1/lambda`` of a Birman-Schwinger operator.

    Only ``V_n`` couples the first layer, so the nonzero spectrum of
    ``T = X V_n`` (``X`` the deflated inverse of ``D_n(0) + k``) equals that of
    ``S = V_n X`` on the first-layer part of the codomain.  ``S`` swaps the two
    first-layer components, so its spectrum is ``+/- sqrt`` of the spectrum of
    the product of its two blocks.
    """
    kind, j = _parse_mode(mode)
    if kind == "A":
        if config.n != 1:
            config = replace(config, n=1, t=())
        basis = config.basis() if basis is None or basis.n != 1 else basis
        solver = invert_D0(config, basis, k=k)
        codomain_Q = sp.identity(basis.dim, dtype=complex, format="csr")
    else:
        k = 0.0
        basis = basis if basis is not None else config.basis()
        deflation = DeflationRecord.for_sector(config.n, j)
        solver = invert_D0(config, basis, j, deflation)
        exclude = tuple(solver.deflated_codomain) if deflation.codomain else ()
        codomain_Q = sector_isometry(basis, (j - 1) % 3, exclude=exclude)
    c1, c2 = _first_layer_columns(codomain_Q, basis)
    Q1 = codomain_Q[:, c1].toarray()
    Q2 = codomain_Q[:, c2].toarray()
    V = build_Vn(config, basis).matrix
    X = solver.matrix
    # S = [[0, A12], [A21, 0]] in the (component 1, component 2) split
    A12 = Q1.conj().T @ (V @ (X @ Q2))
    A21 = Q2.conj().T @ (V @ (X @ Q1))
    lam, vecs = offdiag_eig(A12, A21, vectors=residuals)
    alpha = -1.0 / lam
    if residuals:
        W = np.concatenate([Q1, Q2], axis=1) @ vecs
        U = X @ W
        D0 = build_Dn(config.with_alpha(0.0), basis, k).matrix
        R = D0 @ U + (V @ U) * alpha[None, :]
        if kind == "B" and solver.deflated_codomain and (j - 1) % 3 == 0:
            R[solver.deflated_codomain, :] = 0
        res = np.linalg.norm(R, axis=0) / np.linalg.norm(U, axis=0)
    else:
        res = np.full(len(alpha), np.nan)
    out = SpectralSet(mode, config.n, config.t, basis.N, alpha, res)
    if with_deltas:
        out.deltas = convergence_deltas(out, config, mode, k)
    return out


def convergence_deltas(current: SpectralSet, config: ModelConfig, mode: str, k=DEFAULT_GENERIC_K) -> np.ndarray:
    """Distance from each value to the nearest value computed at truncation ``N - 1``."""
    if current.N <= 1:
        return np.full(len(current), np.inf)
    coarse_cfg = replace(config, N=current.N - 1)
    coarse = birman_schwinger_set(coarse_cfg, mode, k=k, residuals=False)
    if len(coarse) == 0:
        return np.full(len(current), np.inf)
    return np.min(np.abs(current.values[:, None] - coarse.values[None, :]), axis=1)


def magic_set(config: ModelConfig, **kw) -> SpectralSet:
    return birman_schwinger_set(config, "A", **kw)


def set_difference(B0: SpectralSet, A: SpectralSet, tol: float = MERGE_TOL) -> SpectralSet:
    if len(A) == 0 or len(B0) == 0:
        return B0.subset(np.ones(len(B0), dtype=bool))
    d = np.min(np.abs(B0.values[:, None] - A.values[None, :]), axis=1)
    return B0.subset(d > tol)


def dirac_set(config: ModelConfig, with_deltas: bool = False, tol: float = MERGE_TOL,
              magic: SpectralSet | None = None) -> SpectralSet:
    """``B = B_0 minus A``: Dirac couplings at the rotation sector 0."""
    B0 = birman_schwinger_set(config, "B0", with_deltas=with_deltas)
    A = magic if magic is not None else birman_schwinger_set(replace(config, n=1, t=()), "A", residuals=False)
    B = set_difference(B0, A, tol)
    B.mode = "B"
    return B


@dataclass(frozen=True)
class ProjectorTrace:
    trace: complex
    rank: int
    deviation: float
    radius: float


def projector_trace(config: ModelConfig, basis: MomentumBasis | None = None, radius: float = 0.3,
                    nodes: int = 16) -> ProjectorTrace:
    """Trace of the Riesz projector of ``D_n(alpha)`` for the disc ``|z| < radius``.

    Trapezoidal rule on the circle: ``tr Pi = (1/nodes) sum_j z_j tr (z_j - D)^{-1}``.
    """
    basis = basis if basis is not None else config.basis()
    D = build_Dn(config, basis, 0.0).dense()
    eye = np.eye(basis.dim)
    total = 0j
    for j in range(nodes):
        z = radius * np.exp(2j * np.pi * (j + 0.5) / nodes)
        lu = sla.lu_factor(z * eye - D)
        total += z * np.trace(sla.lu_solve(lu, eye))
    tr = total / nodes
    rank = int(round(tr.real))
    return ProjectorTrace(tr, rank, float(abs(tr - rank)), radius)


def projector_rank(config: ModelConfig, basis: MomentumBasis | None = None, radius: float = 0.3,
                   nodes: int = 16, threshold: float = 0.1) -> int:
    """``rank Pi(alpha)`` rounded from the quadrature trace; raises on contour collision."""
    pt = projector_trace(config, basis, radius, nodes)
    log.debug("projector trace %s (deviation %.2e)", pt.trace, pt.deviation)
    if pt.deviation > threshold:
        raise ContourCollision(
            f"trace {pt.trace:.6g} is {pt.deviation:.2e} from an integer at radius {radius}"
        )
    return pt.rank


def bz_grid(size: int) -> np.ndarray:
    """Uniform ``size x size`` grid over the cell spanned by the dual generators."""
    a = np.arange(size) / size
    s, r = np.meshgrid(a, a, indexing="ij")
    return (s * G1 + r * G2).ravel()


def flat_band_residual(config: ModelConfig, grid=12, basis: MomentumBasis | None = None,
                       method: str = "auto") -> float:
    """``max_k`` of the smallest singular value of ``D_n(alpha) + k`` over a k-grid."""
    ks = bz_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=complex)
    basis = basis if basis is not None else config.basis()
    worst = 0.0
    for k in ks:
        D = build_Dn(config, basis, k).matrix
        worst = max(worst, float(smallest_singular_values(D, 1, method)[0]))
    return worst
