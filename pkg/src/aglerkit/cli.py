"""``aglerkit`` command line: check | decompose | realize | eval | testfn.

Exit codes: 0 feasible/ok, 2 infeasible, 3 undecided, 64 usage or parse
error, 65 inconsistent or tampered artifact, 66 missing input file.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .agler import (
    AglerDecomposition,
    DecompositionProblem,
    SeparationEvidence,
    solve_decomposition,
    verify_decomposition,
)
from .errors import (
    AglerError,
    InconsistentDecompositionError,
    InvalidInputError,
    NumericalFailure,
    SamplingFailure,
    UndecidedError,
)
from .kernels import (
    CLASS_TAGS,
    FiniteKernel,
    InterpolationProblem,
    constrained_np_check,
    dbr_pick_matrix,
    generic_dual_check,
)
from .linalg import psd_check
from .realize import Colligation, lurking_isometry, rho_eval, transfer_eval, verify_colligation
from .serialize import (
    SCHEMA_VERSION,
    cmat_from_json,
    cmat_to_json,
    complex_to_json,
    dumps,
    point_from_json,
    point_to_json,
    sha256_text,
    write_atomic,
)
from .testfns import TestFamily, antipodal_measure, sample_extreme_measure, _derived_seed

EXIT_OK, EXIT_INFEASIBLE, EXIT_UNDECIDED = 0, 2, 3
EXIT_USAGE, EXIT_DATAERR, EXIT_NOINPUT = 64, 65, 66
RELOAD_TOL = 1e-12
BOUNDARY_COND = 1e6
BOUNDARY_RHO = 0.999


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- problem files ------------------------------------------------------------------

FAMILY_KINDS = ("disk", "polydisk", "constrained", "antipodal", "explicit")


@dataclass
class ProblemFile:
    cls: str
    nodes: list
    values: list
    family: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    kernels: list | None = None
    schema_version: str = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data) -> "ProblemFile":
        if not isinstance(data, dict):
            raise InvalidInputError("problem file must be a JSON object")
        version = str(data.get("schema_version", SCHEMA_VERSION))
        if version != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported schema_version {version!r}")
        tag = data.get("class", "classical-disk")
        if tag not in CLASS_TAGS:
            raise InvalidInputError(f"unknown class tag {tag!r}")
        for key in ("nodes", "values"):
            if not isinstance(data.get(key), list):
                raise InvalidInputError(f"missing or malformed {key!r}")
        nodes = [point_from_json(v) for v in data["nodes"]]
        values = [cmat_from_json(v) for v in data["values"]]
        if len(nodes) != len(values):
            raise InvalidInputError(f"{len(nodes)} nodes but {len(values)} values")
        family = dict(data.get("family") or {})
        if family and family.get("kind") not in FAMILY_KINDS:
            raise InvalidInputError(f"unknown family kind {family.get('kind')!r}")
        options = dict(data.get("options") or {})
        kernels = data.get("kernels")
        if kernels is not None:
            kernels = [[[cmat_from_json(b) for b in row] for row in k] for k in kernels]
        return cls(tag, nodes, values, family, options, kernels, version)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "class": self.cls,
            "nodes": [point_to_json(z) for z in self.nodes],
            "values": [cmat_to_json(v) for v in self.values],
            "family": self.family,
            "options": self.options,
        }
        if self.kernels is not None:
            out["kernels"] = [[[cmat_to_json(b) for b in row] for row in k] for k in self.kernels]
        return out

    def node_array(self) -> np.ndarray:
        return np.array(self.nodes, dtype=complex)

    def value_array(self) -> np.ndarray:
        shapes = {v.shape for v in self.values}
        if len(shapes) != 1:
            raise InvalidInputError("values have inconsistent sizes")
        return np.array(self.values, dtype=complex)

    def interpolation(self) -> InterpolationProblem:
        return InterpolationProblem(self.node_array(), self.value_array(), self.cls)


def build_family(desc: dict, input_dim: int, N: int) -> TestFamily:
    """Instantiate a test family from its JSON description."""
    kind = desc.get("kind") or ("polydisk" if input_dim > 1 else "disk")
    if kind == "disk":
        return TestFamily.disk()
    if kind == "polydisk":
        return TestFamily.polydisk(int(desc.get("d", input_dim)))
    if kind == "antipodal":
        return TestFamily.constrained([antipodal_measure(int(desc.get("N", N)))])
    if kind == "constrained":
        return TestFamily.sampled_constrained(
            int(desc.get("N", N)), int(desc.get("count", 8)), seed=int(desc.get("seed", 0)),
            include_antipodal=bool(desc.get("include_antipodal", True)))
    if kind == "explicit":
        return TestFamily.from_list(desc.get("functions", []))
    raise InvalidInputError(f"unknown family kind {kind!r}")


# -- IO helpers -----------------------------------------------------------------------

def _read_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except FileNotFoundError:
        raise CliError(EXIT_NOINPUT, f"{path}: no such file") from None
    except IsADirectoryError:
        raise CliError(EXIT_NOINPUT, f"{path}: is a directory") from None


def _load_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _load_problem(path: str):
    data, text = _load_json(path)
    try:
        return ProblemFile.from_dict(data), text
    except (InvalidInputError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from None


def _emit(obj, out: str | None) -> None:
    text = dumps(obj)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _provenance(text: str, seed, **extra) -> dict:
    return {"input_sha256": sha256_text(text), "seed": seed, "tool_version": __version__, **extra}


def _merged(pf: ProblemFile, args, key: str, flag: str, default):
    v = getattr(args, flag, None)
    if v is not None:
        return v
    return pf.options.get(key, default)


def _jsonify(x):
    """Witness dicts contain numpy arrays and reports; flatten to JSON."""
    if isinstance(x, dict):
        return {k: _jsonify(v) for k, v in x.items()}
    if hasattr(x, "min_eigenvalue"):
        return {"is_psd": bool(x.is_psd), "min_eigenvalue": float(x.min_eigenvalue),
                "witness": [complex_to_json(c) for c in x.witness]}
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x) or x.dtype.kind in "fi":
            if x.ndim == 0:
                return complex_to_json(x)
            if x.ndim == 1:
                return [complex_to_json(c) for c in x]
            return [_jsonify(s) for s in x] if x.ndim > 2 else cmat_to_json(x)
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return complex_to_json(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# -- commands ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    pf, text = _load_problem(args.problem)
    tol = _merged(pf, args, "tol", "tol", 1e-9)
    seed = _merged(pf, args, "seed", "seed", 0)
    try:
        prob = pf.interpolation()
        if pf.kernels is not None:
            z = prob.nodes
            kernels = [FiniteKernel(z, np.array(k)) for k in pf.kernels]
            rep = generic_dual_check(prob, kernels, _merged(pf, args, "y_samples", "y_samples", 0), seed, tol)
            report = {"method": "generic-dual", "verdict": rep.verdict, "witness": rep.witness,
                      "samples_used": rep.samples_used, "min_eig_seen": rep.min_eig_seen,
                      "vacuous": rep.vacuous, "notes": rep.notes}
        elif pf.cls == "classical-disk":
            pick = dbr_pick_matrix(prob)
            r = psd_check(pick, tol)
            report = {"method": "pick-matrix", "verdict": "feasible" if r.is_psd else "infeasible",
                      "min_eig_seen": r.min_eigenvalue,
                      "witness": None if r.is_psd else {"pick_matrix": pick, "report": r}}
        elif pf.cls == "constrained-H1":
            rep = constrained_np_check(prob, _merged(pf, args, "sphere_samples", "samples", 1000),
                                       _merged(pf, args, "y_samples", "y_samples", 0), seed, tol)
            report = {"method": "constrained-pick", "verdict": rep.verdict, "witness": rep.witness,
                      "samples_used": rep.samples_used, "min_eig_seen": rep.min_eig_seen,
                      "notes": rep.notes}
        else:
            return _decompose(pf, text, args, check_only=True)
    except InvalidInputError as exc:
        raise CliError(EXIT_USAGE, f"{args.problem}: {exc}") from None
    report["provenance"] = _provenance(text, seed)
    report["schema_version"] = SCHEMA_VERSION
    report["kind"] = "check-report"
    _emit(_jsonify(report), args.out)
    return {"feasible": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(report["verdict"], EXIT_UNDECIDED)


def _decomposition_problem(pf: ProblemFile, args) -> DecompositionProblem:
    desc = dict(pf.family)
    if getattr(args, "family", None):
        desc["kind"] = args.family
    if getattr(args, "samples", None) is not None and desc.get("kind") == "constrained":
        desc["count"] = args.samples
    nodes, values = pf.node_array(), pf.value_array()
    input_dim = 1 if nodes.ndim == 1 else nodes.shape[1]
    family = build_family(desc, input_dim, values.shape[1])
    return DecompositionProblem(nodes, values, family,
                                multiplicity=_merged(pf, args, "multiplicity", "multiplicity", None),
                                tol=_merged(pf, args, "tol", "tol", 1e-7),
                                max_iter=_merged(pf, args, "max_iters", "max_iters", 50_000))


def _decomposition_to_dict(dec: AglerDecomposition) -> dict:
    return {
        "W": [cmat_to_json(w) for w in dec.W],
        "factors": [[cmat_to_json(h) if h.size else [] for h in H] for H in dec.factors],
        "multiplicities": [int(r) for r in dec.multiplicities],
        "residual": dec.residual,
        "iterations": dec.iterations,
        "method": dec.method,
    }


def _evidence_to_dict(ev: SeparationEvidence) -> dict:
    n, N = ev.coefficients.shape[0], ev.coefficients.shape[1]
    blocks = [[cmat_to_json(ev.coefficients[i, :, j, :]) for j in range(n)] for i in range(n)]
    return {"coefficients": blocks, "margin": ev.margin, "generator_min": ev.generator_min,
            "dual_min_eig": ev.dual_min_eig, "gap": ev.gap, "iterations": ev.iterations,
            "block_dim": N}


def _decompose(pf: ProblemFile, text: str, args, check_only: bool = False) -> int:
    seed = _merged(pf, args, "seed", "seed", 0)
    try:
        prob = _decomposition_problem(pf, args)
        result = solve_decomposition(prob, seed=seed)
    except UndecidedError as exc:
        out = {"schema_version": SCHEMA_VERSION, "kind": "undecided", "message": str(exc),
               "residual_trace_tail": exc.trace[-10:],
               "provenance": _provenance(text, seed)}
        _emit(out, args.out)
        return EXIT_UNDECIDED
    except (InvalidInputError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_USAGE, f"{args.problem}: {exc}") from None
    except SamplingFailure as exc:
        raise CliError(EXIT_UNDECIDED, str(exc)) from None
    family = prob.family.to_list()
    if isinstance(result, SeparationEvidence):
        out = {"schema_version": SCHEMA_VERSION, "kind": "separation", "problem": pf.to_dict(),
               "family": family, "evidence": _evidence_to_dict(result),
               "provenance": _provenance(text, seed, margin=result.margin)}
        _emit(out, args.out)
        return EXIT_INFEASIBLE
    residual = verify_decomposition(result, prob)
    result.residual = residual
    out = {"schema_version": SCHEMA_VERSION, "kind": "check-report" if check_only else "decomposition",
           "problem": pf.to_dict(), "family": family, "verdict": "feasible",
           "provenance": _provenance(text, seed, residual=residual)}
    if check_only:
        out["method"] = "agler-decomposition"
        out["residual"] = residual
    else:
        out["decomposition"] = _decomposition_to_dict(result)
        # the artifact must verify on reload
        _load_decomposition(json.loads(dumps(out)), "<memory>")
    _emit(out, args.out)
    return EXIT_OK


def cmd_decompose(args) -> int:
    pf, text = _load_problem(args.problem)
    return _decompose(pf, text, args)


def _load_decomposition(data, path: str):
    """Rebuild problem and decomposition from an artifact and re-verify the stored residual."""
    try:
        if data.get("schema_version") != SCHEMA_VERSION or data.get("kind") != "decomposition":
            raise InvalidInputError("not a decomposition artifact")
        pf = ProblemFile.from_dict(data["problem"])
        family = TestFamily.from_list(data["family"])
        prob = DecompositionProblem(pf.node_array(), pf.value_array(), family,
                                    multiplicity=pf.options.get("multiplicity"))
        d = data["decomposition"]
        W = [cmat_from_json(w) if w else np.zeros((0, 0), dtype=complex) for w in d["W"]]
        stored = float(d["residual"])
        mults = [int(r) for r in d["multiplicities"]]
        N = prob.N
        factors = [np.array([cmat_from_json(h) if h else np.zeros((N, 0), dtype=complex) for h in H])
                   for H in d["factors"]]
        if len(factors) != len(family) or len(mults) != len(family):
            raise InvalidInputError("factor table does not match the family")
        dec = AglerDecomposition(W, factors, mults, stored, int(d.get("iterations", 0)),
                                 d.get("method", ""))
        residual = verify_decomposition(dec, prob)
    except CliError:
        raise
    except (AglerError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CliError(EXIT_DATAERR, f"{path}: inconsistent artifact: {exc}") from None
    if abs(residual - stored) > RELOAD_TOL:
        raise CliError(EXIT_DATAERR,
                       f"{path}: stored residual {stored:.6e} but recomputed {residual:.6e}")
    return pf, prob, dec


def cmd_realize(args) -> int:
    data, text = _load_json(args.artifact)
    if not isinstance(data, dict):
        raise CliError(EXIT_DATAERR, f"{args.artifact}: not an artifact")
    pf, prob, dec = _load_decomposition(data, args.artifact)
    threshold = args.tol if args.tol is not None else 1e-6
    try:
        col = lurking_isometry(dec, prob)
        rep = verify_colligation(col, prob)
    except (InconsistentDecompositionError, NumericalFailure) as exc:
        raise CliError(EXIT_DATAERR, f"{args.artifact}: {exc}") from None
    if rep.max_error > threshold:
        raise CliError(EXIT_DATAERR,
                       f"round-trip node error {rep.max_error:.3e} exceeds {threshold:g}")
    out = {"schema_version": SCHEMA_VERSION, "kind": "colligation",
           "colligation": col.to_dict(),
           "report": {"node_errors": rep.node_errors, "max_error": rep.max_error,
                      "unitarity_defect": rep.unitarity_defect,
                      "spectral_radius": rep.spectral_radius,
                      "resolvent_condition": rep.resolvent_condition},
           "nodes": [point_to_json(z) for z in prob.nodes],
           "provenance": _provenance(text, data.get("provenance", {}).get("seed"),
                                     residual=dec.residual,
                                     unitarity_defect=rep.unitarity_defect)}
    _emit(out, args.out)
    return EXIT_OK


def _load_colligation(path: str) -> Colligation:
    data, _ = _load_json(path)
    try:
        if data.get("schema_version") != SCHEMA_VERSION or data.get("kind") != "colligation":
            raise InvalidInputError("not a colligation artifact")
        col = Colligation.from_dict(data["colligation"])
        stored = float(data["report"]["unitarity_defect"])
    except (AglerError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CliError(EXIT_DATAERR, f"{path}: inconsistent artifact: {exc}") from None
    if abs(col.unitarity_defect() - stored) > RELOAD_TOL:
        raise CliError(EXIT_DATAERR, f"{path}: unitarity defect does not match the stored value")
    return col


def _parse_point(s: str):
    try:
        parts = [complex(p.strip().replace(" ", "")) for p in s.split(",")]
    except ValueError:
        raise CliError(EXIT_USAGE, f"cannot parse point {s!r}") from None
    return parts[0] if len(parts) == 1 else np.array(parts)


def cmd_eval(args) -> int:
    col = _load_colligation(args.artifact)
    rows = []
    for s in args.points:
        z = _parse_point(s)
        rho_norm = 0.0
        try:
            if col.state_dim:
                rho = rho_eval(col.sectors, z)
                rho_norm = float(np.linalg.norm(rho, 2))
                if rho_norm >= 1:
                    raise CliError(EXIT_USAGE, f"point {s} is outside the domain")
            val, cond = transfer_eval(col, z, return_condition=True)
        except InvalidInputError as exc:
            raise CliError(EXIT_USAGE, f"point {s}: {exc}") from None
        except NumericalFailure as exc:
            raise CliError(EXIT_UNDECIDED, f"point {s}: {exc}") from None
        if cond > BOUNDARY_COND or rho_norm > BOUNDARY_RHO:
            print(f"warning: point {s} is near the boundary (||rho|| = {rho_norm:.7f}, "
                  f"resolvent condition {cond:.2e})", file=sys.stderr)
        rows.append({"point": point_to_json(z), "value": cmat_to_json(val), "condition": cond})
    _emit({"schema_version": SCHEMA_VERSION, "kind": "values", "values": rows}, args.out)
    return EXIT_OK


def cmd_testfn(args) -> int:
    if args.N < 1:
        raise CliError(EXIT_USAGE, "N must be at least 1")
    if args.count < 0:
        raise CliError(EXIT_USAGE, "count must be non-negative")
    measures = [antipodal_measure(args.N)] if args.include_antipodal else []
    total = max(args.count, len(measures))
    k = 0
    try:
        while len(measures) < total:
            measures.append(sample_extreme_measure(args.N, seed=_derived_seed(args.seed, k)))
            k += 1
    except SamplingFailure as exc:
        raise CliError(EXIT_UNDECIDED, str(exc)) from None
    out = {"schema_version": SCHEMA_VERSION, "kind": "measures", "N": args.N,
           "measures": [mu.to_dict() for mu in measures],
           "provenance": {"seed": args.seed, "tool_version": __version__}}
    _emit(out, args.out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aglerkit", description="Schur-Agler interpolation, decomposition and realization.")
    p.add_argument("--version", action="version", version=f"aglerkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, solver=True):
        sp.add_argument("--out", help="write JSON here (atomically) instead of stdout")
        sp.add_argument("--tol", type=float)
        if solver:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--samples", type=int,
                            help="sphere samples (check) or constrained family size (decompose)")
            sp.add_argument("--y-samples", dest="y_samples", type=int)
            sp.add_argument("--multiplicity", type=int)
            sp.add_argument("--max-iters", dest="max_iters", type=int)
            sp.add_argument("--family", choices=FAMILY_KINDS[:4])

    sp = sub.add_parser("check", help="dual (Pick-type) feasibility test")
    sp.add_argument("problem")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("decompose", help="solve for an Agler decomposition")
    sp.add_argument("problem")
    common(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("realize", help="build a unitary colligation from a decomposition artifact")
    sp.add_argument("artifact")
    common(sp, solver=False)
    sp.set_defaults(func=cmd_realize)

    sp = sub.add_parser("eval", help="evaluate a realized transfer function")
    sp.add_argument("artifact")
    sp.add_argument("points", nargs="+", help="complex numbers, comma-separated for polydisk points")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("testfn", help="sample extreme constrained test functions")
    sp.add_argument("--N", type=int, default=1)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--include-antipodal", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_testfn)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"aglerkit: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
