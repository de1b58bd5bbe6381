"""Command-line driver: ``sigrecon {sig,solve,trees,independence,reconstruct,demo}``.

A run is described by one JSON config; command-line flags override its keys.
Exit status: 0 on success, 1 on runtime failure or a failed verdict, 2 on usage
or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import NumericOverflowError, parse_word
from .cde import SolverConfig, SolverError, solve_batch, trajectory_csv
from .independence import (
    BudgetError,
    CertificateConfig,
    check_cyclic_word_identity,
    check_ladder_collision,
    independence_certificate,
    sample_points,
)
from .reconstruction import ReconstructionConfig, reconstruct
from .signature import PiecewiseLinearPath, path_signature, random_walk_path
from .trees import enumerate_rooted_ops, enumerate_trees
from .vector_fields import VectorFieldModel, sample_model

log = logging.getLogger("sigrecon")

CYCLIC_TOL = 1e-9
LADDER_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent named generator derived from the run seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


@dataclass
class ExperimentConfig:
    d: int = 2
    N: int = 2
    L: int = 3
    m: int | None = None
    model: str = "neural2exp"
    activation: str = "tanh"
    seed: int | None = None
    path: dict = field(default_factory=lambda: {"segments": 5, "box": 1.0})
    y0: list | None = None
    r: float = 1.0
    solver: dict = field(default_factory=dict)
    reconstruction: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=lambda: {"rtol": 1e-3, "atol": 1e-5})
    expect: str = "independent"
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("d", "N", "L"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.m is not None and (not isinstance(self.m, int) or self.m < 1):
            raise ConfigError(f"m must be a positive integer, got {self.m!r}")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if "points" in self.path:
            pts = np.asarray(self.path["points"], dtype=float)
            if pts.ndim != 2 or pts.shape[1] != self.d or pts.shape[0] < 2:
                raise ConfigError(f"path points must have shape (K+1 >= 2, d={self.d}), got {pts.shape}")
        elif "segments" not in self.path:
            raise ConfigError("path needs either 'points' or 'segments'")
        if self.y0 is not None and len(self.y0) != self.N:
            raise ConfigError(f"y0 has length {len(self.y0)}, expected N={self.N}")
        if self.expect not in ("independent", "dependent"):
            raise ConfigError("expect must be 'independent' or 'dependent'")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("this run is randomized; a seed is required")
        return self.seed

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def build_model(self) -> VectorFieldModel:
        try:
            return sample_model(self.model, self.d, self.N, self.require_seed(), activation=self.activation)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cannot build model: {exc}") from None

    def build_path(self) -> PiecewiseLinearPath:
        if "points" in self.path:
            try:
                return PiecewiseLinearPath.from_dict(self.path)
            except ValueError as exc:
                raise ConfigError(f"invalid path: {exc}") from None
        return random_walk_path(stream(self.require_seed(), "path"), self.d, int(self.path["segments"]),
                                amplitude=float(self.path.get("amplitude", 1.0)), box=self.path.get("box"))

    def build_y0(self) -> np.ndarray:
        if self.y0 is not None:
            return np.asarray(self.y0, dtype=float)
        return stream(self.require_seed(), "y0").standard_normal(self.N)

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(**self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver config: {exc}") from None

    def reconstruction_config(self) -> ReconstructionConfig:
        data = {"L": self.L, "seed": self.require_seed(), **self.reconstruction}
        data["solver"] = self.solver_config()
        try:
            return ReconstructionConfig.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid reconstruction config: {exc}") from None


def demo_config(seed: int = 42) -> ExperimentConfig:
    return ExperimentConfig(d=2, N=2, L=3, model="neural2exp", seed=seed, path={"segments": 5, "box": 1.0})


# -- output helpers ----------------------------------------------------------------

def _header(cfg: ExperimentConfig) -> str:
    return "# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n"


def _emit(text: str, target: str | None, out) -> None:
    if target:
        Path(target).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def _json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


# -- subcommands ------------------------------------------------------------------

def cmd_sig(cfg: ExperimentConfig, args, out) -> int:
    S = path_signature(cfg.build_path(), cfg.L)
    _emit(_json({"config": cfg.to_dict(), "signature": S.to_dict()}), args.out, out)
    return 0


def cmd_solve(cfg: ExperimentConfig, args, out) -> int:
    res = solve_batch(cfg.build_model(), cfg.build_path(), cfg.build_y0()[None], cfg.r, cfg.solver_config(),
                      trajectory=True)
    _emit(_header(cfg) + trajectory_csv(res.times, res.states[:, 0]), args.out, out)
    return 0


def cmd_trees(cfg: ExperimentConfig, args, out) -> int:
    try:
        w = parse_word(args.word)
        trees, ops = enumerate_trees(w), enumerate_rooted_ops(w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    buf = io.StringIO()
    buf.write(f"# word: {','.join(map(str, w))}\n# trees: {len(trees)}\n# rooted_ops: {len(ops)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "index", "parents", "labels", "bracket"])
    for family, items in (("tree", trees), ("rooted_op", ops)):
        for k, t in enumerate(items):
            writer.writerow([family, k, " ".join(map(str, t.parents)), " ".join(map(str, t.labels)), str(t)])
    _emit(buf.getvalue(), args.out, out)
    return 0


def cmd_independence(cfg: ExperimentConfig, args, out) -> int:
    m = cfg.m if cfg.m is not None else cfg.L
    model = cfg.build_model()
    cert_data = {"seed": cfg.require_seed(), **cfg.certificate}
    distinct = bool(cert_data.pop("distinct", False))
    if "tols" in cert_data:
        cert_data["tols"] = tuple(cert_data["tols"])
    try:
        cert_cfg = CertificateConfig(**cert_data)
    except TypeError as exc:
        raise ConfigError(f"invalid certificate config: {exc}") from None
    tree_report, word_report = independence_certificate(model, m, cert_cfg, distinct=distinct)
    payload = {"config": cfg.to_dict(), "level": m,
               "tree_family": tree_report.to_dict(), "word_family": word_report.to_dict()}
    ok = tree_report.verdict == cfg.expect
    points = sample_points(stream(cfg.require_seed(), "checks"), 40, cfg.N)
    if args.check_remark37:
        residual = check_cyclic_word_identity(model, points)
        payload["cyclic_identity"] = {"normalized_residual": residual, "tol": CYCLIC_TOL}
        ok = ok and residual <= CYCLIC_TOL
    if args.check_remark39:
        rep = check_ladder_collision(model, m, points)
        payload["ladder_collision"] = {**rep.to_dict(), "tol": LADDER_TOL}
        ok = ok and rep.component_similarity >= 1 - LADDER_TOL
    payload["ok"] = bool(ok)
    _emit(_json(payload), args.out, out)
    return 0 if ok else 1


def _run_reconstruction(cfg: ExperimentConfig):
    report = reconstruct(cfg.build_model(), cfg.build_path(), cfg.reconstruction_config())
    report.config = {"experiment": cfg.to_dict(), "reconstruction": report.config}
    rtol, atol = float(cfg.tolerance.get("rtol", 1e-3)), float(cfg.tolerance.get("atol", 1e-5))
    passed = all(lv.ok and lv.within(rtol, atol) for lv in report.levels)
    return report, passed


def cmd_reconstruct(cfg: ExperimentConfig, args, out) -> int:
    report, passed = _run_reconstruction(cfg)
    payload = {**report.to_dict(), "passed": passed}
    _emit(_json(payload), args.out, out)
    csv_text = _header(cfg) + report.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    elif args.out:
        out.write(csv_text)
    for lv in report.levels:
        if lv.error:
            print(f"level {lv.level}: {lv.error}", file=sys.stderr)
    return 0 if passed else 1


def cmd_demo(cfg: ExperimentConfig, args, out) -> int:
    report, passed = _run_reconstruction(cfg)
    if args.out:
        Path(args.out).write_text(_json({**report.to_dict(), "passed": passed}), encoding="utf-8")
    out.write(_header(cfg) + report.to_csv())
    out.write(f"# passed: {str(passed).lower()}\n")
    return 0 if passed else 1


COMMANDS = {
    "sig": cmd_sig,
    "solve": cmd_solve,
    "trees": cmd_trees,
    "independence": cmd_independence,
    "reconstruct": cmd_reconstruct,
    "demo": cmd_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigrecon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, config=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", required=True, help="experiment config JSON file")
            p.add_argument("--seed", type=int)
        p.add_argument("--out", help="write the main artifact here instead of stdout")
        return p

    p = add("sig", "truncated signature of the configured path (JSON)")
    p.add_argument("--level", type=int, dest="L")
    p = add("solve", "CDE trajectory (CSV)")
    p.add_argument("--r", type=float)
    p = add("trees", "enumerate trees over a word (CSV with counts)", config=False)
    p.add_argument("--word", required=True, help="e.g. 1,2,1")
    p = add("independence", "rank certificates for tree and word families (JSON)")
    p.add_argument("--level", type=int, dest="m", required=True)
    p.add_argument("--check-remark37", action="store_true", help="also check the cyclic word identity for N=1")
    p.add_argument("--check-remark39", action="store_true", help="also check the depth-one ladder collision")
    p = add("reconstruct", "recover the signature from CDE solutions (JSON + CSV)")
    p.add_argument("--csv", help="CSV summary path (default: stdout after the JSON when --out is set)")
    p = add("demo", "end-to-end d=2, N=2, L=3 recovery with an error table", config=False)
    p.add_argument("--seed", type=int, default=42)
    return parser


def load_config(args) -> ExperimentConfig:
    if args.command == "trees":
        return ExperimentConfig()
    if args.command == "demo":
        return demo_config(args.seed)
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("seed", "L", "m", "r"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"sigrecon {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, NumericOverflowError, BudgetError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"sigrecon {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
