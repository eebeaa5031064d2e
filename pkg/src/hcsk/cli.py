"""hcsk command line: solve-periodic, oracle-1d, verify, toric.

Exit codes: 0 ok, 1 verify failure, 2 safeguard violated, 3 no convergence,
4 bad input.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import _backend, complexmm, fileio, oracle1d, realmm, toric, verify
from .errors import (
    BranchLost,
    ConstraintViolated,
    HcskError,
    NoConvergence,
    NotConvex,
    NotDelzant,
    SafeguardViolated,
)
from .torus import TorusGrid

log = logging.getLogger("hcsk")

EXIT_OK, EXIT_VERIFY, EXIT_SAFEGUARD, EXIT_NOCONV, EXIT_INPUT = 0, 1, 2, 3, 4


class BadInput(Exception):
    pass


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise BadInput(f"{where} must be an object")
    extra = set(d) - set(allowed)
    if extra:
        raise BadInput(f"unknown keys in {where}: {sorted(extra)}")


def _complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def _matrix(v):
    m = np.array([[_complex(x) for x in row] for row in v])
    if m.shape != (2, 2):
        raise BadInput("matrix must be 2x2")
    if np.abs(m - m.T).max() > 0:
        raise BadInput("Higgs matrix must be symmetric")
    return m


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise BadInput(f"cannot read {path}: {e}") from None


def _resolve(base, p):
    p = Path(p)
    return p if p.is_absolute() or base is None else base / p


# ---------------------------------------------------------------- F and xi specs

_F_KEYS = ("type", "amplitude", "phase", "frequency")


def _profile(conf):
    """Callable y -> complex values from {"type": zero|sin|cos, "amplitude", "phase", "frequency"}."""
    conf = conf or {"type": "zero"}
    _reject_unknown(conf, _F_KEYS, "F")
    kind = conf.get("type", "zero")
    amp = float(conf.get("amplitude", 0.0))
    rot = np.exp(1j * float(conf.get("phase", 0.0)))
    m = int(conf.get("frequency", 1))
    if kind == "zero":
        return lambda y: np.zeros_like(y, dtype=complex)
    if kind == "sin":
        return lambda y: amp * rot * np.sin(2 * np.pi * m * y)
    if kind == "cos":
        return lambda y: amp * rot * np.cos(2 * np.pi * m * y)
    raise BadInput(f"unknown F type {kind!r}")


def _oracle_case(cfg):
    case = cfg.get("case", "second")
    if case == "first":
        return oracle1d.FirstType(_profile(cfg.get("xi22")))
    if case == "second":
        if "c" not in cfg:
            raise BadInput("second-type case needs c")
        return oracle1d.SecondType(_complex(cfg["c"]), _profile(cfg.get("F")))
    raise BadInput(f"unknown oracle case {case!r}")


_XI_KEYS = {
    "zero": (),
    "constant": ("matrix",),
    "field": ("path",),
    "modes": ("path", "rows"),
    "ttensor": ("amplitude", "kmax", "base"),
    "oracle": ("case", "c", "F", "xi22"),
}


def _random_ttensor(rng, N, amplitude, kmax):
    T = np.zeros((N, N, 2, 2, 2), dtype=complex)
    for a in range(2):
        w = (verify.random_smooth(rng, N, amplitude, kmax)
             + 1j * verify.random_smooth(rng, N, amplitude, kmax))
        T[..., a, 0, 1] = w
        T[..., a, 1, 0] = -w
    return T


def build_xi(conf, N, rng, base_dir=None):
    """(xi field, oracle case or None) from a source description."""
    if not isinstance(conf, dict) or "kind" not in conf:
        raise BadInput("xi must be an object with a 'kind'")
    kind = conf["kind"]
    if kind not in _XI_KEYS:
        raise BadInput(f"unknown xi kind {kind!r}")
    _reject_unknown(conf, ("kind",) + _XI_KEYS[kind], f"xi ({kind})")
    shape = (N, N, 2, 2)
    if kind == "zero":
        return np.zeros(shape, dtype=complex), None
    if kind == "constant":
        return np.broadcast_to(_matrix(conf["matrix"]), shape).copy(), None
    if kind == "field":
        try:
            xi = fileio.read_field(_resolve(base_dir, conf["path"]))
        except (OSError, ValueError) as e:
            raise BadInput(str(e)) from None
        if xi.shape != shape:
            raise BadInput(f"field file has shape {xi.shape}, grid needs {shape}")
        return xi, None
    if kind == "modes":
        if "rows" in conf:
            rows = conf["rows"]
        elif "path" in conf:
            _, raw = fileio.read_csv(_resolve(base_dir, conf["path"]))
            rows = [(int(r[0]), int(r[1]), complex(float(r[2]), float(r[3])),
                     complex(float(r[4]), float(r[5])), complex(float(r[6]), float(r[7])))
                    for r in raw]
        else:
            raise BadInput("modes source needs 'rows' or 'path'")
        rows = [(int(r[0]), int(r[1]), _complex(r[2]), _complex(r[3]), _complex(r[4])) for r in rows]
        try:
            return complexmm.from_modes_table(rows, N), None
        except ValueError as e:
            raise BadInput(str(e)) from None
    if kind == "ttensor":
        T = _random_ttensor(rng, N, float(conf.get("amplitude", 0.05)), int(conf.get("kmax", 3)))
        xi = complexmm.from_T_tensor(T)
        if "base" in conf:
            xi = xi + _matrix(conf["base"])
        return xi, None
    case = _oracle_case({k: v for k, v in conf.items() if k != "kind"})
    return oracle1d.xi_field(case, TorusGrid(N)), case


# ---------------------------------------------------------------- commands

_SOLVE_KEYS = ("xi", "solver", "phi0")


def cmd_solve_periodic(cfg, args, out, header):
    _reject_unknown(cfg, _SOLVE_KEYS, "config")
    solver_cfg = dict(cfg.get("solver", {}))
    allowed = [f for f in realmm.SolveOptions.__dataclass_fields__]
    _reject_unknown(solver_cfg, allowed, "solver")
    if args.grid:
        solver_cfg["N"] = args.grid
    try:
        opts = realmm.SolveOptions(**solver_cfg)
    except (TypeError, ValueError) as e:
        raise BadInput(str(e)) from None
    N = int(opts.N)
    rng = np.random.default_rng(args.seed)
    xi, case = build_xi(cfg.get("xi", {"kind": "zero"}), N, rng, args.config_dir)
    phi0 = None
    if "phi0" in cfg:
        p = cfg["phi0"]
        _reject_unknown(p, ("amplitude", "kmax"), "phi0")
        phi0 = verify.random_smooth(rng, N, float(p.get("amplitude", 0.001)), int(p.get("kmax", 3)))

    grid = {"N": N, "n": 2}
    head = header(grid)
    records = []
    report = {"command": "solve-periodic", "N": N}
    code = EXIT_OK
    try:
        res = realmm.solve_continuity(xi, 0.0, opts, phi0=phi0, records=records)
    except SafeguardViolated as e:
        report.update(status="safeguard_violated", t_reached=e.t_reached, detail=str(e))
        code = EXIT_SAFEGUARD
    except NoConvergence as e:
        report.update(status="no_convergence", detail=str(e), trace=e.trace)
        code = EXIT_NOCONV
    else:
        report.update(status="converged", phi_sup=float(np.abs(res.phi).max()), **res.summary())
        if case is not None and isinstance(case, oracle1d.SecondType):
            r = oracle1d.solve_translation_invariant(case, samples=max(1024, N))
            fpp_oracle = r.fpp[:: r.fpp.size // N]
            fpp_solver = np.mean(np.asarray(realmm.hessian(res.phi))[..., 0, 0], axis=1) - 1.0
            report["oracle"] = {"k": r.k, "one_plus_k": 1.0 + r.k,
                                "fpp_sup_difference": float(np.abs(fpp_solver - fpp_oracle).max())}
        if args.format == "binary":
            fileio.write_field(out / "phi.hcsk", res.phi)
        else:
            cols, rows = fileio.field_rows(res.phi)
            fileio.write_csv(out / "phi.csv", head, cols, rows)
    fileio.write_json(out / "report.json", head, report)
    fileio.write_jsonl(out / "runlog.jsonl", head, records)
    return code


_ORACLE_KEYS = ("case", "c", "F", "xi22", "samples")


def cmd_oracle_1d(cfg, args, out, header):
    _reject_unknown(cfg, _ORACLE_KEYS, "config")
    samples = int(args.grid or cfg.get("samples", 1024))
    case = _oracle_case(cfg)
    r = oracle1d.solve_translation_invariant(case, samples=samples)
    head = header({"samples": samples, "n": 1})
    rows = zip(r.y, r.fpp, r.p, np.full(samples, r.k), r.residual)
    fileio.write_csv(out / "oracle1d.csv", head, ["y1", "fpp", "p", "k", "residual"], rows)
    fileio.write_json(out / "oracle1d.json", head,
                      {"kind": r.kind, "k": r.k, "one_plus_k": 1.0 + r.k,
                       "residual_sup": r.residual_sup})
    return EXIT_OK


_VERIFY_KEYS = ("suites", "counts")


def cmd_verify(cfg, args, out, header):
    _reject_unknown(cfg, _VERIFY_KEYS, "config")
    only = cfg.get("suites")
    if only is not None and set(only) - set(verify.SUITES):
        raise BadInput(f"unknown suites {sorted(set(only) - set(verify.SUITES))}")
    counts = cfg.get("counts", {})
    _reject_unknown(counts, verify.SUITES, "counts")
    results = verify.run_all(args.seed, counts, only)
    head = header(None)
    fileio.write_csv(out / "verify.csv", head, ["suite", "passed", "defect", "threshold", "samples"],
                     [(r.name, r.passed, r.defect, r.threshold, r.samples) for r in results])
    for r in results:
        print(f"{r.name:12s} {'PASS' if r.passed else 'FAIL'} defect={r.defect:.3e} "
              f"threshold={r.threshold:.1e} samples={r.samples}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


_TORIC_KEYS = ("polygon", "probes", "p0", "boundary_check")


def _boundary_xi(conf, P):
    _reject_unknown(conf, ("kind", "matrix"), "boundary_check")
    kind = conf.get("kind", "zero")
    if kind == "zero":
        return lambda y: np.zeros(np.shape(y)[:-1] + (2, 2), dtype=complex)
    Phi = _matrix(conf["matrix"])
    if kind == "constant":
        return lambda y: np.broadcast_to(Phi, np.shape(y)[:-1] + (2, 2))
    if kind == "conjugated":
        def xi(y):
            Gi = np.linalg.inv(toric.guillemin_hessian(P, y))
            return Gi @ Phi @ Gi
        return xi
    raise BadInput(f"unknown boundary_check kind {kind!r}")


def cmd_toric(cfg, args, out, header):
    _reject_unknown(cfg, _TORIC_KEYS, "config")
    poly = cfg.get("polygon")
    if isinstance(poly, str):
        poly = _load_json(_resolve(args.config_dir, poly))
    if not isinstance(poly, dict):
        raise BadInput("polygon must be a file path or an object with 'vertices'")
    P = toric.parse_polygon(poly)
    probes_raw = cfg.get("probes", [])
    if isinstance(probes_raw, str):
        probes_raw = _load_json(_resolve(args.config_dir, probes_raw))
        if isinstance(probes_raw, dict):
            _reject_unknown(probes_raw, ("probes",), "probe file")
            probes_raw = probes_raw.get("probes", [])
    probes = [toric.parse_probe(e) for e in probes_raw]
    ids = [str(e.get("id", i)) for i, e in enumerate(probes_raw)]
    p0 = cfg.get("p0")
    if p0 is not None:
        p0 = [float(toric._rational(v)) for v in p0]
        probes = [toric.normalize(f, p0) for f in probes]
    rows, valid = [], []
    for pid, f in zip(ids, probes):
        L = toric.l_functional(P, f)
        B = toric.boundary_integral(P, f)
        ratio = L / B if B > 1e-14 else float("nan")
        rows.append((pid, L, B, ratio))
        if B > 1e-14:
            valid.append((ratio, pid))
    head = header({"vertices": len(P.vertices)})
    fileio.write_csv(out / "toric.csv", head, ["probe_id", "L_C", "boundary_integral", "ratio"], rows)
    summary = {"C": toric.boundary_constant(P), "area": P.area,
               "boundary_measure": P.boundary_measure,
               "normals": [list(n) for n in P.normals],
               "constants": [str(c) for c in P.constants]}
    if valid:
        lam, worst = min(valid)
        summary.update(lambda_hat=lam, worst_probe=worst,
                       verdict="instability witness" if lam < 0 else "evidence")
    else:
        summary.update(lambda_hat=None, worst_probe=None, verdict="no admissible probes")
    if "boundary_check" in cfg:
        rep = toric.xi_boundary_check(P, _boundary_xi(cfg["boundary_check"], P))
        summary["boundary_check"] = {"passed": rep.passed, "sups": list(rep.sups),
                                     "ratios": list(rep.ratios), "face": rep.face}
    fileio.write_json(out / "toric.json", head, summary)
    for pid, L, B, ratio in rows:
        print(f"{pid}: L_C={L:.12g} boundary={B:.12g} ratio={ratio:.6g}")
    return EXIT_OK


COMMANDS = {
    "solve-periodic": cmd_solve_periodic,
    "oracle-1d": cmd_oracle_1d,
    "verify": cmd_verify,
    "toric": cmd_toric,
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=int, help="grid size N (overrides the config)")
    common.add_argument("--threads", type=int, help="kernel threads (HCSK_THREADS wins)")
    common.add_argument("--format", choices=("csv", "binary"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="hcsk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    threads = os.environ.get("HCSK_THREADS") or args.threads
    if threads:
        _backend.set_threads(int(threads))
    try:
        cfg = _load_json(args.config) if args.config else {}
        args.config_dir = args.config.parent if args.config else None
        effective = {"command": args.command, "config": cfg, "seed": args.seed,
                     "grid": args.grid, "format": args.format}

        def header(grid):
            return fileio.provenance(effective, grid)

        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, args.out, header)
    except (BadInput, ConstraintViolated, BranchLost, NotDelzant, NotConvex, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SafeguardViolated as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SAFEGUARD
    except NoConvergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOCONV
    except HcskError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
