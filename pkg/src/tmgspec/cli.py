"""Command-line front end.

Exit codes: 0 success, 2 numerically inconclusive (or bad usage), 3 I/O or
config-file failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bands import BandError, KPath, band_path, classify
from .jordan import effective_block, jordan_chain
from .operators import ModelConfig
from .spectra import birman_schwinger_set, dirac_set

log = logging.getLogger("tmgspec")

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_IO = 0, 2, 3


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Model parameters plus per-command options; unset fields fall back to defaults."""

    n: int = 2
    t: tuple | None = None
    alpha: complex = 0.0
    trunc: int = 16
    count: int = 6
    tol: float = 1e-4
    theta_a: float = 1.1
    path: str = "K,Gamma,M,K'"
    samples: int = 24
    bands: int = 4
    k: complex = 0.01
    fmt: str | None = None
    out: str | None = None
    dump: str | None = None

    def model(self, **over) -> ModelConfig:
        kw = dict(n=self.n, t=self.t, alpha=self.alpha, N=self.trunc)
        kw.update(over)
        return ModelConfig(**kw)


_KEYS = {f.name for f in fields(RunConfig)}
# accepted spellings in a config file
_FILE_ALIASES = {"N": "trunc", "format": "fmt", "theta_A": "theta_a"}


def parse_complex(text) -> complex:
    """``"re"`` or ``"re,im"``; lists ``[re, im]`` from JSON are accepted too."""
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, (list, tuple)):
        if len(text) not in (1, 2):
            raise ValueError(f"expected [re] or [re, im], got {text!r}")
        return complex(float(text[0]), float(text[1]) if len(text) == 2 else 0.0)
    parts = [p for p in str(text).split(",") if p.strip()]
    if len(parts) not in (1, 2):
        raise ValueError(f"expected re[,im], got {text!r}")
    return complex(float(parts[0]), float(parts[1]) if len(parts) == 2 else 0.0)


def parse_t(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, val in raw.items():
        name = _FILE_ALIASES.get(key, key)
        if name not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = val
    return _coerce(out)


def _coerce(d: dict) -> dict:
    out = dict(d)
    try:
        if "alpha" in out:
            out["alpha"] = parse_complex(out["alpha"])
        if "k" in out:
            out["k"] = parse_complex(out["k"])
        if "t" in out and out["t"] is not None:
            out["t"] = parse_t(out["t"])
        for key in ("n", "trunc", "count", "samples", "bands"):
            if key in out:
                out[key] = int(out[key])
        for key in ("tol", "theta_a"):
            if key in out:
                out[key] = float(out[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    merged = {}
    if args.config:
        merged.update(load_config(args.config))
    flags = {k: v for k, v in vars(args).items() if k in _KEYS and v is not None}
    merged.update(flags)
    return RunConfig(**merged)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="number of layer pairs (default 2)")
    common.add_argument("--t", type=parse_t, help="tunnelings, comma separated (default 1,...,1)")
    common.add_argument("--alpha", type=parse_complex, help="coupling re[,im]")
    common.add_argument("--trunc", type=int, help="plane-wave truncation N (default 16)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", dest="fmt", choices=["csv", "json", "svg"])
    common.add_argument("--config", help="JSON file with defaults for any option")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tmgspec", description="Chiral twisted multilayer spectra.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("magic", parents=[common], help="first real magic couplings")
    s.add_argument("--count", type=int)
    s.add_argument("--tol", type=float, help="convergence tolerance on |value(N) - value(N-1)|")

    s = sub.add_parser("dirac-set", parents=[common], help="first real Dirac couplings and angle prediction")
    s.add_argument("--count", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--theta-a", dest="theta_a", type=float, help="reference magic angle in degrees")

    s = sub.add_parser("bands", parents=[common], help="band table along a k-path")
    s.add_argument("--path", help="comma list of K, K', Gamma, M or complex literals")
    s.add_argument("--samples", type=int, help="points per segment")
    s.add_argument("--bands", type=int, help="number of bands")

    sub.add_parser("classify", parents=[common], help="Generic / Flat / Dirac")

    s = sub.add_parser("chain", parents=[common], help="Jordan chain data at K")
    s.add_argument("--dump", help="write chain vectors as binary with a JSON sidecar")

    s = sub.add_parser("effective", parents=[common], help="Grushin effective block at k")
    s.add_argument("--k", type=parse_complex, help="momentum re[,im]")
    return p


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _spectral_rows(S) -> list:
    out = []
    for i, v in enumerate(S.values):
        out.append([i + 1, v.real, v.imag, S.residuals[i], np.nan if S.deltas is None else S.deltas[i]])
    return out


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(str(x) if isinstance(x, (int, np.integer)) else repr(float(x)) for x in r))
    return "\n".join(lines) + "\n"


def _emit_set(S, rc: RunConfig, extra: dict | None = None) -> str:
    if rc.fmt == "csv":
        return _csv(["index", "re", "im", "residual", "delta"], _spectral_rows(S))
    d = S.to_dict()
    if extra:
        d.update(extra)
    return _json(d)


def _converged(S, tol: float, count: int) -> bool:
    if len(S) < count:
        log.warning("only %d of %d real values resolved at this truncation", len(S), count)
        return False
    return S.deltas is None or bool(np.all(S.deltas <= tol))


def cmd_magic(rc: RunConfig):
    cfg = rc.model(n=1, t=())
    A = birman_schwinger_set(cfg, "A", with_deltas=True).first_positive_real(rc.count)
    return _emit_set(A, rc), EXIT_OK if _converged(A, rc.tol, rc.count) else EXIT_INCONCLUSIVE


def angle_prediction(alpha1: float, beta1: float, theta_a: float) -> dict:
    ratio = alpha1 / beta1
    return {"alpha1": alpha1, "beta1": beta1, "ratio": ratio, "theta_A_deg": theta_a, "theta_B_deg": theta_a * ratio}


def cmd_dirac_set(rc: RunConfig):
    cfg = rc.model()
    A = birman_schwinger_set(replace(cfg, n=1, t=()), "A", residuals=False)
    B = dirac_set(cfg, with_deltas=True, magic=A).first_positive_real(rc.count)
    extra = None
    a1, b1 = A.positive_real(1), B.positive_real(1)
    if len(a1) and len(b1):
        extra = {"angle_prediction": angle_prediction(float(a1[0]), float(b1[0]), rc.theta_a)}
    return _emit_set(B, rc, extra), EXIT_OK if _converged(B, rc.tol, rc.count) else EXIT_INCONCLUSIVE


def cmd_bands(rc: RunConfig):
    path = KPath.parse(rc.path, rc.samples)
    table = band_path(rc.model(), path, rc.bands)
    if rc.fmt == "svg":
        return table.to_svg(), EXIT_OK
    if rc.fmt == "json":
        return _json({"s": table.s.tolist(), "k_re": table.k.real.tolist(), "k_im": table.k.imag.tolist(),
                      "E": table.E.tolist()}), EXIT_OK
    return table.to_csv(), EXIT_OK


def cmd_classify(rc: RunConfig):
    c = classify(rc.model())
    code = EXIT_INCONCLUSIVE if c.kind == "Inconclusive" else EXIT_OK
    return _json(c.to_dict()), code


def cmd_chain(rc: RunConfig):
    cfg = rc.model()
    basis = cfg.basis()
    data = jordan_chain(cfg, basis)
    if rc.dump:
        data.dump_vectors(rc.dump, basis)
    return _json(data.to_dict()), EXIT_OK


def cmd_effective(rc: RunConfig):
    cfg = rc.model()
    E = effective_block(cfg, rc.k)
    return _json(E.to_dict()), EXIT_OK


COMMANDS = {
    "magic": cmd_magic,
    "dirac-set": cmd_dirac_set,
    "bands": cmd_bands,
    "classify": cmd_classify,
    "chain": cmd_chain,
    "effective": cmd_effective,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = resolve(args)
        text, code = COMMANDS[args.command](rc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, BandError, np.linalg.LinAlgError) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    try:
        if rc.out:
            Path(rc.out).write_text(text, encoding="utf-8", newline="\n")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
