"""Command-line front end: ``ecdkit enorm | ecd | verify | study``.

Exit codes: 0 success, 1 property failure, 2 input or usage error,
3 internal inconsistency (a lower bound above its certified upper bound).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np
from referencing import Registry, Resource

from . import __version__, truncate, verify
from .channel import Dilation, KrausMap, annihilation, as_dilation, map_from_dict
from .distance import AscentConfig, bures_e_distance, ecd_distance, ecd_norm_cp
from .energy import EnergyObservable, InfeasibleBudget, number_observable
from .enorm import e_norm
from .matcore import DimensionError

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_INCONSISTENT = 0, 1, 2, 3
BRACKET_TOL = 1e-8


class InputError(Exception):
    """Invalid input file, field or flag (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    restarts: int = 32
    max_iter: int = 200
    tol: float = 1e-12
    ref_dim: int | None = None
    output: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.restarts < 1:
            raise InputError("--restarts must be at least 1")
        if self.max_iter < 1:
            raise InputError("--max-iter must be at least 1")
        if self.seed < 0:
            raise InputError("--seed must be nonnegative")

    def ascent(self) -> AscentConfig:
        return AscentConfig(restarts=self.restarts, max_iter=self.max_iter, tol=self.tol, seed=self.seed,
                            ref_dim=self.ref_dim)


# --------------------------------------------------------------------------
# input loading


def _schema_registry() -> Registry:
    pkg = resources.files("ecdkit") / "schemas"
    pairs = []
    for name in ("common", "observable", "operator", "map", "scenario"):
        doc = json.loads((pkg / f"{name}.json").read_text())
        pairs.append((f"{name}.json", Resource.from_contents(doc)))
        pairs.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(pairs)


_REGISTRY = None


def _validate(doc, schema: str, where: str) -> None:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _schema_registry()
    validator = jsonschema.Draft202012Validator(_REGISTRY.contents(f"{schema}.json"), registry=_REGISTRY)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InputError(f"{where}: field {path}: {err.message}")


def read_json(path: str) -> tuple[dict, str]:
    """Parse a JSON file; returns the document and the SHA-256 of its bytes."""
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 text ({exc.reason})") from None
    return doc, hashlib.sha256(raw).hexdigest()


def observable_from_doc(doc, where: str = "observable") -> EnergyObservable:
    _validate(doc, "observable", where)
    if doc.get("type") == "number":
        return number_observable(doc["dim"])
    try:
        return EnergyObservable.from_dict(doc)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def operator_from_doc(doc, where: str = "operator") -> np.ndarray:
    _validate(doc, "operator", where)
    if doc["type"] == "annihilation":
        return annihilation(doc["dim"])
    a = np.asarray(doc["matrix"], dtype=float)
    if a.ndim != 3:
        raise InputError(f"{where}: field matrix: rows have unequal lengths")
    return a[..., 0] + 1j * a[..., 1]


def map_from_doc(doc, where: str = "map") -> KrausMap | Dilation:
    _validate(doc, "map", where)
    if doc["type"] == "annihilation":
        return Dilation(annihilation(doc["dim"]), 1)
    try:
        return map_from_dict(doc)
    except (ValueError, DimensionError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _load(path: str, loader, digests: dict, role: str):
    doc, digest = read_json(path)
    digests[role] = digest
    return loader(doc, path)


def _check_dims(m, g: EnergyObservable, where: str) -> None:
    d_in = m.shape[1] if isinstance(m, np.ndarray) else m.dims[0]
    if d_in != g.dim:
        raise InputError(f"{where}: input dimension {d_in} does not match observable dimension {g.dim}")


# --------------------------------------------------------------------------
# output


def _envelope(cfg: RunConfig, digests: dict, result) -> dict:
    return {"tool": "ecdkit", "version": __version__, "seed": cfg.seed, "inputs": dict(sorted(digests.items())),
            "result": result}


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _threads() -> int:
    try:
        return truncate._threads()
    except ValueError as exc:
        raise InputError(str(exc)) from None


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` evenly spaced energies (``n >= 2``, ``0 < lo < hi``)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise InputError(f"--grid expects lo:hi:n, got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"--grid expects lo:hi:n with numeric fields, got {spec!r}") from None
    if n < 2:
        raise InputError(f"--grid needs at least 2 points, got {n}")
    if not 0 < lo < hi:
        raise InputError(f"--grid needs 0 < lo < hi, got {lo}:{hi}")
    return np.linspace(lo, hi, n)


# --------------------------------------------------------------------------
# commands


def cmd_enorm(args) -> int:
    cfg = _run_config(args)
    digests = {}
    a = _load(args.operator, operator_from_doc, digests, "operator")
    g = _load(args.observable, observable_from_doc, digests, "observable")
    _check_dims(a, g, args.operator)
    energies = parse_grid(args.grid) if args.grid else np.array([args.energy])
    if np.any(energies <= 0):
        raise InputError("--energy must be positive")
    certs = []
    for e in energies:
        try:
            certs.append(e_norm(a, g, float(e)))
        except InfeasibleBudget as exc:
            raise InputError(str(exc)) from None
    if args.format == "csv":
        rows = [(float(c.budget), float(c.value), float(c.mu), float(c.gap)) for c in certs]
        _emit(truncate.write_csv(("E", "value", "mu", "gap"), rows), cfg.output)
    else:
        _emit(_dump(_envelope(cfg, digests, [c.to_dict() for c in certs])), cfg.output)
    return EXIT_OK


def cmd_ecd(args) -> int:
    cfg = _run_config(args)
    if len(args.inputs) not in (2, 3):
        raise InputError("ecd expects PHI [PSI] OBSERVABLE")
    digests = {}
    *maps, obs = args.inputs
    g = _load(obs, observable_from_doc, digests, "observable")
    loaded = [_load(p, map_from_doc, digests, role) for p, role in zip(maps, ("phi", "psi"))]
    for p, m in zip(maps, loaded):
        _check_dims(m, g, p)
    if args.energy <= 0:
        raise InputError("--energy must be positive")
    if len(loaded) == 1:
        if args.bures:
            raise InputError("--bures needs two maps")
        cert = ecd_norm_cp(loaded[0], g, args.energy)
        result = {"kind": "ecd_norm", **cert.to_dict()}
        _emit(_dump(_envelope(cfg, digests, result)), cfg.output)
        return EXIT_OK
    phi, psi = loaded
    if phi.dims != psi.dims:
        raise InputError(f"map dimensions differ: {phi.dims} vs {psi.dims}")
    solver = bures_e_distance if args.bures else ecd_distance
    rep = solver(phi, psi, g, args.energy, cfg.ascent())
    result = {"kind": "bures_distance" if args.bures else "ecd_distance", **rep.to_dict()}
    _emit(_dump(_envelope(cfg, digests, result)), cfg.output)
    if rep.lower > rep.upper + BRACKET_TOL:
        print(f"internal inconsistency: lower {rep.lower!r} > upper {rep.upper!r}", file=sys.stderr)
        return EXIT_INCONSISTENT
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    if args.seed < 0:
        raise InputError("--seed must be nonnegative")
    results = verify.run_suite(args.suite, args.seed, args.trials, threads=_threads())
    lines = [f"ecdkit {__version__} verify suite={args.suite} seed={args.seed} trials={args.trials}"]
    for r in results:
        lines.append(r.line())
        if not r.passed:
            lines.append("  instance: " + json.dumps(r.instance, sort_keys=True))
    failed = [r.name for r in results if not r.passed]
    lines.append(f"summary: {len(results) - len(failed)} passed, {len(failed)} failed"
                 + (f" ({', '.join(failed)})" if failed else ""))
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_study(args) -> int:
    doc, digest = read_json(args.scenario)
    _validate(doc, "scenario", args.scenario)
    g = observable_from_doc(doc["observable"], f"{args.scenario}: observable")
    v = as_dilation(map_from_doc(doc["dilation"], f"{args.scenario}: dilation"))
    _check_dims(v, g, f"{args.scenario}: dilation")
    budget = float(doc["budget"])
    schedule = doc.get("schedule") or truncate.default_schedule(g, budget)
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    base = truncate.STUDY_CONFIG
    cfg = AscentConfig(restarts=doc.get("restarts", base.restarts), max_iter=doc.get("max_iter", base.max_iter),
                       polish=base.polish, seed=seed, ref_dim=doc.get("ref_dim"))
    try:
        study = truncate.TruncationStudy(v, g, budget, list(schedule))
    except truncate.ScheduleError as exc:
        raise InputError(f"{args.scenario}: infeasible schedule: {exc}") from None
    except ValueError as exc:
        raise InputError(f"{args.scenario}: {exc}") from None
    study.run(cfg, threads=_threads())
    _emit(study.to_csv(), args.output)
    if "profile" in doc and args.profile_out:
        prof = truncate.scaling_profile(v.v, g, doc["profile"])
        _emit(prof.to_csv(), args.profile_out)
        print(f"profile knee at E = {prof.knee:.12g}", file=sys.stderr)
    bad = study.violations()
    for r in bad:
        print(f"contract violated at E_n = {r.E_n:.12g}: bound30 or tail bound fails", file=sys.stderr)
    print(f"scenario sha256 {digest} seed {seed}", file=sys.stderr)
    return EXIT_PROPERTY if bad else EXIT_OK


def _run_config(args) -> RunConfig:
    return RunConfig(seed=args.seed, restarts=getattr(args, "restarts", 32), max_iter=getattr(args, "max_iter", 200),
                     tol=getattr(args, "tol", 1e-12), ref_dim=getattr(args, "ref_dim", None), output=args.output)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ecdkit", description="Energy-constrained operator norms and channel distances.")
    p.add_argument("--version", action="version", version=f"ecdkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default, help="random seed (echoed into outputs)")
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")

    sp = sub.add_parser("enorm", help="E-norm of an operator")
    sp.add_argument("operator", help="operator JSON")
    sp.add_argument("observable", help="observable JSON")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--energy", type=float, help="energy budget E")
    grp.add_argument("--grid", help="energy grid lo:hi:n")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    common(sp)
    sp.set_defaults(func=cmd_enorm)

    sp = sub.add_parser("ecd", help="energy-constrained diamond norm of one map or distance of two")
    sp.add_argument("inputs", nargs="+", metavar="FILE", help="PHI [PSI] OBSERVABLE")
    sp.add_argument("--energy", type=float, required=True, help="energy budget E")
    sp.add_argument("--bures", action="store_true", help="energy-constrained Bures distance instead")
    sp.add_argument("--restarts", type=int, default=32)
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--ref-dim", type=int, default=None, help="reference dimension (default: input dimension)")
    common(sp)
    sp.set_defaults(func=cmd_ecd)

    sp = sub.add_parser("verify", help="run property-check suites")
    sp.add_argument("--suite", choices=(*verify.SUITES, "all"), default="all")
    sp.add_argument("--trials", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("study", help="truncation study CSV from a scenario file")
    sp.add_argument("scenario", help="scenario JSON")
    sp.add_argument("--profile-out", help="also write the scaling profile CSV here")
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"ecdkit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
