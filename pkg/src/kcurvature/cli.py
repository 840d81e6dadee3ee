"""Command-line front end with JSON input and output.

Every subcommand prints one JSON document on standard output.  Exit codes:
0 on success, 2 for invalid input or arguments, 3 for numerical failures
(non-convergence, failed internal checks).  Logs go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import adapted_basis, families, identities, manifold_fd, phi_optimizer
from .errors import ConvergenceError
from .tensor_core import (
    Metric,
    Plane,
    StatStructure,
    SymCubic,
    curvature_like_residuals,
    instance_from_dict,
    instance_to_dict,
    sectional_k_curvature,
)

log = logging.getLogger("kcurvature")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class CliError(ValueError):
    """Bad command-line usage, reported as a validation error."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _clean(obj):
    """Convert numpy values to JSON-native ones; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _emit(doc, pretty: bool, stream=None) -> None:
    stream = stream or sys.stdout
    text = json.dumps(_clean(doc), indent=2 if pretty else None, allow_nan=False)
    stream.write(text + "\n")


def _read_json(source: str | None):
    """Parse a path, an inline JSON document, or standard input (``-`` or missing)."""
    if source is None or source == "-":
        text = sys.stdin.read()
    elif source.lstrip().startswith(("{", "[")):
        text = source
    else:
        path = Path(source)
        if not path.is_file():
            raise CliError(f"input {source!r} is neither a file nor inline JSON")
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON: {exc}") from exc


def _read_instance(source) -> StatStructure:
    doc = _read_json(source)
    if not isinstance(doc, dict):
        raise CliError("expected a JSON object describing an instance")
    return instance_from_dict(doc)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from exc


def _plane_vector(token: str, n: int) -> np.ndarray:
    token = token.strip()
    if "," not in token:
        try:
            i = int(token)
        except ValueError as exc:
            raise CliError(f"plane argument {token!r} is neither an index nor a vector") from exc
        if not 0 <= i < n:
            raise CliError(f"index {i} out of range for dimension {n}")
        e = np.zeros(n)
        e[i] = 1.0
        return e
    v = _floats(token)
    if v.size != n:
        raise CliError(f"vector {token!r} has {v.size} entries, expected {n}")
    return v


def _parse_plane(args: list[str], n: int) -> Plane:
    if len(args) == 1:
        parts = args[0].split(",")
        if len(parts) != 2 or not all(p.strip().lstrip("-").isdigit() for p in parts):
            raise CliError("a single --plane argument must be two indices 'i,j'")
        args = parts
    if len(args) != 2:
        raise CliError("--plane takes two indices or vectors")
    return Plane(_plane_vector(args[0], n), _plane_vector(args[1], n))


def _critical_dict(cp: phi_optimizer.CriticalPoint) -> dict:
    return {
        "x": cp.x,
        "value": cp.value,
        "kind": cp.kind,
        "gap": cp.gap,
        "multiplier": cp.multiplier,
        "residual": cp.residual,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_curvature(a) -> dict:
    s = _read_instance(a.input)
    if a.plane:
        return {"k": sectional_k_curvature(s, _parse_plane(a.plane, s.dim))}
    planes = []
    for i in range(s.dim):
        for j in range(i + 1, s.dim):
            e = np.eye(s.dim)
            planes.append({"plane": [i, j], "k": sectional_k_curvature(s, Plane(e[i], e[j]))})
    return {"planes": planes}


def cmd_maximize(a) -> dict:
    s = _read_instance(a.input)
    initial = _floats(a.initial) if a.initial else None
    cp = phi_optimizer.find_local_max(s, starts=a.starts, seed=a.seed, initial=initial)
    out = _critical_dict(cp)
    if a.grid:
        x, v = phi_optimizer.grid_oracle_max(s, a.grid)
        out["grid"] = {"x": x, "value": v, "resolution": a.grid}
    return out


def cmd_decompose(a) -> dict:
    s = _read_instance(a.input)
    if a.commuting:
        basis, values = adapted_basis.diagonalize_commuting(s, tol=a.tol or 1e-10, seed=a.seed)
        return {"basis": basis.T, "values": values}
    d = adapted_basis.decompose(s, tol=a.tol or 1e-8, seed=a.seed)
    return d.to_dict()


def cmd_verify(a) -> dict:
    s = _read_instance(a.input)
    check = a.check
    if check == "curvature-like":
        r = curvature_like_residuals(s)
        tol = a.tol or 1e-10
        worst = max(r.antisymmetry, r.bianchi, r.skewness)
        return {
            "check": check,
            "antisymmetry": r.antisymmetry,
            "bianchi": r.bianchi,
            "skewness": r.skewness,
            "ok": worst <= tol * r.scale,
        }
    if check == "constant":
        A = adapted_basis.is_constant_curvature(s, a.tol or 1e-10)
        _, residual = adapted_basis.curvature_operator_residual(s)
        return {"check": check, "constant": A is not None, "A": A, "residual": residual}
    if check == "canonical":
        verdict = identities.characterize_canonical(s, a.tol or 1e-8)
        return {"check": check, **verdict.to_dict()}
    if check == "rigidity":
        report = identities.rigidity_probe(s, a.tol or 1e-10, a.seed)
        return {"check": check, **report.to_dict()}
    plane = identities.negativity_witness(s, a.seed)
    if plane is None:
        return {"check": check, "plane": None}
    return {"check": check, "plane": [plane.u, plane.v], "k": sectional_k_curvature(s, plane)}


def _family_spec(a) -> families.FamilySpec:
    if a.kind is None or a.dim is None:
        raise CliError("generate needs --kind and --dim (or --spec / --decomposition)")
    params = {}
    if a.lam is not None:
        params["lambda"] = a.lam
    if a.mu is not None:
        params["mu"] = a.mu
    if a.A is not None:
        params["A"] = a.A
    if a.values is not None:
        params["values"] = _floats(a.values).tolist()
    return families.FamilySpec(a.kind, a.dim, params, a.seed)


def cmd_generate(a) -> dict:
    if a.decomposition:
        doc = _read_json(a.decomposition)
        metric = Metric(np.array(doc["metric"], dtype=float)) if "metric" in doc else None
        return instance_to_dict(adapted_basis.AdaptedDecomposition.from_dict(doc).rebuild(metric))
    if a.spec:
        doc = _read_json(a.spec)
        spec = families.FamilySpec(doc["kind"], int(doc["dim"]), doc.get("params", {}), doc.get("seed"))
    else:
        spec = _family_spec(a)
    return families.generate(spec)


def _snapshot_family(doc):
    """Piecewise-linear interpolation between instance snapshots carrying ``t``."""
    if not isinstance(doc, list) or len(doc) < 2:
        raise CliError("track input must be a JSON array of at least two snapshots")
    snaps = sorted(((float(d["t"]), instance_from_dict(d)) for d in doc), key=lambda p: p[0])
    ts = np.array([t for t, _ in snaps])
    if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
        raise CliError("snapshot times must be distinct and span [0, 1]")
    dims = {s.dim for _, s in snaps}
    if len(dims) != 1:
        raise CliError("all snapshots must have the same dimension")

    def family(t: float) -> StatStructure:
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        a, b = snaps[i][1], snaps[i + 1][1]
        gram = (1 - w) * a.metric.gram + w * b.metric.gram
        entries = (1 - w) * a.cubic.entries + w * b.cubic.entries
        return StatStructure(Metric(gram), SymCubic(a.dim, entries))

    return family


def _rotation_family(s: StatStructure, angle: float):
    if not s.metric.is_identity:
        raise CliError("--rotate needs an instance with the identity metric")

    def family(t: float) -> StatStructure:
        q = np.eye(s.dim)
        c, sn = math.cos(angle * t), math.sin(angle * t)
        q[:2, :2] = [[c, -sn], [sn, c]]
        return families.rotate(s, q)

    return family


def cmd_track(a) -> dict:
    doc = _read_json(a.input)
    if a.rotate is not None:
        if not isinstance(doc, dict):
            raise CliError("--rotate takes a single instance")
        family = _rotation_family(instance_from_dict(doc), a.rotate)
    else:
        family = _snapshot_family(doc)
    s0 = family(0.0)
    initial = _floats(a.initial) if a.initial else None
    start = phi_optimizer.find_local_max(s0, seed=a.seed, initial=initial)
    path = phi_optimizer.track_critical_frame(family, a.steps, start)
    return {
        "ts": path.ts,
        "points": [p.x for p in path.points],
        "values": [p.value for p in path.points],
        "kinds": [p.kind for p in path.points],
        "residuals": path.residuals,
    }


def _build_field(a) -> manifold_fd.ChartField:
    if a.poly:
        doc = _read_json(a.poly)
        return manifold_fd.polynomial_field(doc, a.fd_step)
    if a.field == "hessian-exp":
        return manifold_fd.hessian_exp(a.fd_step)
    if a.field == "sphere":
        return manifold_fd.sphere(a.dim or 2, a.radius, a.fd_step)
    if a.field == "constant":
        s = _read_instance(a.input) if a.input else families.make_lambda_quarter(2, 1.0)
        return manifold_fd.constant(s, a.fd_step)
    raise CliError("manifold-check needs --field or --poly")


def cmd_manifold_check(a) -> dict:
    f = _build_field(a)
    point = _floats(a.point) if a.point else np.zeros(f.dim)
    if point.size != f.dim:
        raise CliError(f"--point needs {f.dim} coordinates")
    out = {"field": f.name, "point": point, "fd_step": f.fd_step}
    if a.check == "identities":
        out["residuals"] = manifold_fd.check_identities(f, point, a.tol)
    elif a.check == "codazzi":
        out["codazzi"] = manifold_fd.check_codazzi(f, point)
    elif a.check == "christoffel":
        out["christoffel"] = manifold_fd.christoffel_hat(f, point)
    else:
        sample = manifold_fd.curvature_tensors(f, point)
        out.update(Rhat=sample.Rhat, R=sample.R, Rbar=sample.Rbar, bracketKK=sample.bracketKK)
    return out


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--pretty", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="kcurvature", description="Sectional K-curvature toolkit for statistical structures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, takes_input=True):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if takes_input:
            sp.add_argument("input", nargs="?", help="instance file, inline JSON, or - for stdin")
        sp.set_defaults(func=func)
        return sp

    sp = add("curvature", cmd_curvature, "sectional K-curvature of a plane (all basis planes by default)")
    sp.add_argument("--plane", nargs="+", metavar="ARG", help="'i,j' or two indices/vectors like 1,0,0")

    sp = add("maximize", cmd_maximize, "local maximizer of Phi(X) = C(X,X,X) on the unit sphere")
    sp.add_argument("--starts", type=int, default=16)
    sp.add_argument("--initial", help="starting vector, comma-separated")
    sp.add_argument("--grid", type=int, help="also report the grid maximum at this resolution (dim <= 3)")

    sp = add("decompose", cmd_decompose, "adapted basis of a constant-curvature structure")
    sp.add_argument("--commuting", action="store_true", help="diagonal form for [K,K] = 0 instead")

    sp = add("verify", cmd_verify, "algebraic checks and classifiers")
    sp.add_argument(
        "--check", required=True, choices=["curvature-like", "constant", "canonical", "rigidity", "witness"]
    )

    sp = add("generate", cmd_generate, "instance JSON for a named family", takes_input=False)
    sp.add_argument("--kind", choices=families.KINDS)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--A", dest="A", type=float)
    sp.add_argument("--values", help="diagonal values, comma-separated")
    sp.add_argument("--spec", help="family spec JSON (file or inline)")
    sp.add_argument("--decomposition", help="rebuild the instance from decomposition JSON")

    sp = add("track", cmd_track, "follow a strict maximizer along a one-parameter family")
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--rotate", type=float, help="rotate a single instance in the (e1, e2) plane by t*ANGLE")
    sp.add_argument("--initial", help="starting vector at t=0, comma-separated")

    sp = add("manifold-check", cmd_manifold_check, "finite-difference identity checks on a chart field")
    sp.add_argument("--field", choices=["hessian-exp", "sphere", "constant"])
    sp.add_argument("--poly", help="polynomial field JSON (file or inline)")
    sp.add_argument("--point", help="coordinates, comma-separated")
    sp.add_argument("--fd-step", type=float, default=1e-3)
    sp.add_argument("--dim", type=int, help="sphere dimension")
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument(
        "--check", default="identities", choices=["identities", "codazzi", "christoffel", "curvature"]
    )
    return p


def _error_doc(exc: BaseException, code: int) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConvergenceError):
        err["best_residual"] = exc.best_residual
        err["last_good"] = exc.last_good
    return {"error": err}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        _emit(_error_doc(exc, EXIT_INVALID), False)
        return EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.tol is not None and args.tol <= 0:
        _emit(_error_doc(CliError("--tol must be positive"), EXIT_INVALID), args.pretty)
        return EXIT_INVALID
    try:
        result = args.func(args)
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        _emit(_error_doc(exc, EXIT_NUMERICAL), args.pretty)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError) as exc:
        log.error("%s", exc)
        _emit(_error_doc(exc, EXIT_INVALID), args.pretty)
        return EXIT_INVALID
    except RuntimeError as exc:
        log.error("%s", exc)
        _emit(_error_doc(exc, EXIT_NUMERICAL), args.pretty)
        return EXIT_NUMERICAL
    _emit(result, args.pretty)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
