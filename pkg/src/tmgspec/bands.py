"""Bloch bands, k-paths, crossing orders at the Dirac points and the trichotomy classifier."""
from __future__ import annotations

import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import DIRAC_POINTS, G1, OMEGA, MomentumBasis, in_dual_lattice
from .linalg import loglog_fit, smallest_singular_values
from .operators import ModelConfig, build_Dn

log = logging.getLogger(__name__)

# high-symmetry points of the hexagonal moire zone with K = 0, K' = -i
PRESETS = {
    "K": 0j,
    "K'": -1j,
    "Gamma": np.sqrt(3) / 2 - 0.5j,
    "M": -0.5j,
}
_ALIASES = {"Kp": "K'", "K′": "K'", "G": "Gamma", "Γ": "Gamma"}

G_NORM = abs(G1)


class BandError(ArithmeticError):
    """Base class for fit and classification failures."""


class NotPinned(BandError):
    pass


class WindowTooCoarse(BandError):
    pass


class Inconclusive(BandError):
    pass


def worker_count() -> int:
    env = os.environ.get("MCS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring MCS_THREADS=%r", env)
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class KPath:
    """Piecewise-linear path through named momenta, ``samples`` points per segment."""

    waypoints: tuple
    samples: int = 24

    def __post_init__(self):
        pts = tuple((str(name), complex(k)) for name, k in self.waypoints)
        if not pts:
            raise ValueError("path needs at least one waypoint")
        if self.samples < 2:
            raise ValueError("samples per segment must be >= 2")
        for (n0, a), (n1, b) in zip(pts, pts[1:]):
            if abs(a - b) < 1e-14:
                raise ValueError(f"consecutive waypoints {n0} and {n1} coincide")
        object.__setattr__(self, "waypoints", pts)

    @classmethod
    def parse(cls, text: str, samples: int = 24) -> "KPath":
        """``"K,Gamma,M,K'"`` style list; entries may also be complex literals like ``0.2-0.1j``."""
        pts = []
        for tok in _split(text):
            name = _ALIASES.get(tok, tok)
            if name in PRESETS:
                pts.append((name, PRESETS[name]))
            else:
                try:
                    pts.append((tok, complex(tok.replace("i", "j"))))
                except ValueError:
                    raise ValueError(f"unknown waypoint {tok!r}") from None
        return cls(tuple(pts), samples)

    @classmethod
    def default(cls, samples: int = 24) -> "KPath":
        return cls.parse("K,Gamma,M,K'", samples)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Momenta and arclength; segment endpoints are shared, not repeated."""
        ks = [self.waypoints[0][1]]
        for (_, a), (_, b) in zip(self.waypoints, self.waypoints[1:]):
            s = np.linspace(0, 1, self.samples)[1:]
            ks.extend(a + s * (b - a))
        ks = np.array(ks, dtype=complex)
        arc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(ks)))])
        return ks, arc


def _split(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


@dataclass
class BandTable:
    k: np.ndarray
    s: np.ndarray
    E: np.ndarray  # rows x m, ascending per row

    def __post_init__(self):
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        if np.any(self.E < 0) or np.any(np.diff(self.E, axis=1) < 0):
            raise ValueError("band energies must be nonnegative and ascending per row")

    @property
    def m(self) -> int:
        return self.E.shape[1]

    def to_csv(self) -> str:
        out = io.StringIO(newline="")
        out.write(",".join(["s", "k_re", "k_im"] + [f"E{j + 1}" for j in range(self.m)]) + "\n")
        for s, k, row in zip(self.s, self.k, self.E):
            vals = [s, k.real, k.imag, *row]
            out.write(",".join(repr(float(v)) for v in vals) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BandTable":
        lines = text.strip().splitlines()
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(lines[0].split(",")))
        return cls(data[:, 1] + 1j * data[:, 2], data[:, 0], data[:, 3:])

    def to_svg(self, width: int = 640, height: int = 400, pad: int = 30) -> str:
        s0, s1 = float(self.s.min()), float(self.s.max())
        e1 = float(self.E.max()) or 1.0
        sx = (width - 2 * pad) / (s1 - s0 if s1 > s0 else 1.0)
        sy = (height - 2 * pad) / e1
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
        for j in range(self.m):
            pts = " ".join(
                f"{pad + (s - s0) * sx:.2f},{height - pad - e * sy:.2f}" for s, e in zip(self.s, self.E[:, j])
            )
            parts.append(f'<polyline fill="none" stroke="black" points="{pts}"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def basis_for(config: ModelConfig, k: complex) -> MomentumBasis:
    """Truncation disc centred on K, or on K' when ``k`` is itself a K' point.

    Each disc is rotation invariant about its own Dirac point, which keeps the
    protected zero mode there exact at finite truncation.
    """
    if in_dual_lattice(complex(k) - DIRAC_POINTS[1]):
        return config.basis(center=DIRAC_POINTS[1])
    return config.basis()


def band_values(config: ModelConfig, k: complex, m: int, basis: MomentumBasis | None = None,
                method: str = "auto") -> np.ndarray:
    """``E_1..E_m``: the m smallest singular values of ``D_n(alpha) + k``."""
    basis = basis if basis is not None else basis_for(config, k)
    if m > basis.dim:
        raise ValueError(f"m={m} exceeds basis dimension {basis.dim}")
    D = build_Dn(config, basis, k).matrix
    return smallest_singular_values(D, m, method)


def band_path(config: ModelConfig, path: KPath, m: int, threads: int | None = None) -> BandTable:
    ks, arc = path.points()
    threads = threads or worker_count()
    job = lambda k: band_values(config, k, m)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, ks))
    else:
        rows = [job(k) for k in ks]
    return BandTable(ks, arc, np.array(rows))


@dataclass(frozen=True)
class FitOptions:
    window: tuple = (1e-3, 1e-2)  # radii as fractions of |g1|
    samples: int = 8
    pin_tol: float = 1e-8
    fit_tol: float = 0.05  # rms of the log-log residual


@dataclass(frozen=True)
class CrossingFit:
    exponent: float
    coefficient: float
    radii: tuple
    residual: float
    center: complex = 0j
    direction: complex = 1 + 0j
    band: int = 1

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "residual": self.residual,
            "center": [self.center.real, self.center.imag],
            "direction": [self.direction.real, self.direction.imag],
            "radii": list(self.radii),
        }


def crossing_fit(config: ModelConfig, center: complex = 0j, direction: complex = 1.0, band: int = 1,
                 options: FitOptions = FitOptions(), basis: MomentumBasis | None = None) -> CrossingFit:
    """Log-log slope of ``E_band(center + r direction)`` over the fit window."""
    center, direction = complex(center), complex(direction)
    if abs(direction) == 0:
        raise ValueError("direction must be nonzero")
    direction /= abs(direction)
    basis = basis if basis is not None else basis_for(config, center)
    pinned = band_values(config, center, band, basis)[band - 1]
    if pinned > options.pin_tol:
        raise NotPinned(f"band {band} is {pinned:.3e} at {center}, not pinned to zero")
    lo, hi = options.window
    r = np.geomspace(lo, hi, options.samples) * G_NORM
    E = np.array([band_values(config, center + ri * direction, band, basis)[band - 1] for ri in r])
    if np.any(E <= 0):
        raise WindowTooCoarse("band value underflows inside the fit window")
    slope, coef, rms = loglog_fit(r, E)
    if rms > options.fit_tol or slope <= 0:
        raise WindowTooCoarse(f"log-log residual {rms:.3e} exceeds {options.fit_tol:.1e}")
    return CrossingFit(slope, coef, (float(r[0]), float(r[-1])), rms, center, direction, band)


@dataclass(frozen=True)
class ClassifyOptions:
    flat_tol: float = 1e-5
    flat_grid: int = 12
    probe_k: complex = 0.3 + 0.2j
    # tolerance on |exponent - integer|
    order_tol: float = 0.2
    # a second near-zero singular value at K below this marks a two-dimensional kernel
    kernel_tol: float = 1e-4
    fit: FitOptions = FitOptions()


@dataclass
class Classification:
    kind: str  # "Generic" | "Flat" | "Dirac" | "Inconclusive"
    order: int | None = None
    fits: list = field(default_factory=list)
    flat_residual: float | None = None
    kernel_values: tuple = ()
    message: str = ""

    def to_dict(self) -> dict:
        d = {"class": self.kind, "order": self.order, "fits": [f.to_dict() for f in self.fits]}
        if self.flat_residual is not None:
            d["flat_residual"] = self.flat_residual
        d["kernel_singular_values"] = [float(x) for x in self.kernel_values]
        if self.message:
            d["message"] = self.message
        return d


def _nearest_int(x: float, tol: float) -> int | None:
    r = int(round(x))
    return r if abs(x - r) <= tol else None


def classify(config: ModelConfig, options: ClassifyOptions = ClassifyOptions(),
             directions=(1, OMEGA, OMEGA**2)) -> Classification:
    """Flat band, Dirac cones, or a generic crossing of order n at K.

    Dirac couplings are rounded inputs in practice, so the kernel test uses a
    loose threshold on the second singular value at K and the pinning check of
    the band fits is relaxed accordingly.  The decision is driven by the fitted
    exponents.
    """
    from .spectra import flat_band_residual

    basis = config.basis()
    probe = band_values(config, options.probe_k, 1, basis)[0]
    flat = None
    if probe < options.flat_tol:
        flat = flat_band_residual(config, options.flat_grid, basis)
        if flat < options.flat_tol:
            return Classification("Flat", None, [], flat, ())
    sv = band_values(config, 0.0, 2, basis)
    two_dim = sv[1] < options.kernel_tol
    n = config.n
    relaxed = FitOptions(options.fit.window, options.fit.samples, options.kernel_tol, options.fit.fit_tol)
    bands = (1, 2) if two_dim else (1,)
    fits = []
    try:
        for b in bands:
            for d in directions:
                fits.append(crossing_fit(config, DIRAC_POINTS[0], d, b, relaxed if b > 1 else options.fit, basis))
    except BandError as exc:
        return Classification("Inconclusive", None, fits, flat, tuple(sv), str(exc))
    orders = {}
    for b in bands:
        exps = [f.exponent for f in fits if f.band == b]
        spread = max(exps) - min(exps)
        o = _nearest_int(float(np.mean(exps)), options.order_tol)
        if o is None or spread > options.order_tol:
            return Classification("Inconclusive", None, fits, flat, tuple(sv),
                                  f"band {b} exponents {np.round(exps, 3).tolist()} not near an integer")
        orders[b] = o
    if two_dim:
        if orders[1] == max(n - 1, 1) and orders[2] == 1:
            return Classification("Dirac", 1, fits, flat, tuple(sv))
        return Classification("Inconclusive", None, fits, flat, tuple(sv),
                              f"two-dimensional kernel but orders {orders}")
    if orders[1] != n:
        return Classification("Inconclusive", orders[1], fits, flat, tuple(sv),
                              f"fitted order {orders[1]} differs from n={n}")
    return Classification("Generic", orders[1], fits, flat, tuple(sv))
