"""Command-line driver: ``construct``, ``sweep``, ``ed``, ``ed-scaling`` and ``itebd``.

Exit codes: 0 success, 1 invalid configuration, 2 singular metric,
3 resource cap exceeded, 4 imaginary-time evolution did not converge.
Grid points run on a process pool sized by ``NHPH_WORKERS`` (default 1);
results are collected in input order and each file has a single writer.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .ed import (
    CHAIN_CAP,
    CLUSTER_TOL,
    SIMILARITY_CAP,
    SizeCapError,
    build_chain,
    conjugation_defect,
    full_spectrum,
    gap_scaling,
    obc_similarity_check,
)
from .export import fmt, fmt_complex, metadata, write_csv, write_json
from .itebd import find_ground_state, save_checkpoint, to_uniform
from .linalg import DEGENERACY_TOL, RANK_TOL, DegenerateEigenvalueError
from .mps import (
    StatePair,
    UniformMPS,
    asymmetric_aklt,
    block,
    left_partner,
    rg_fixed_point,
    transfer_matrix,
)
from .observables import entanglement_spectrum, infidelity, order_parameters, string_order
from .parent import (
    NoParentHamiltonianError,
    blocked_map,
    build_projector,
    criterion_biorthogonal,
    criterion_direct_sum,
    expand_lambda,
    fixed_point_metric,
    hamiltonian_k2,
    LocalProjector,
    metric,
    projector_from_maps,
)

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_CAP, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4
K_MAX = 8
DEFAULT_SCALING_SIZES = {2: (3, 5, 7), 3: (4, 6, 8)}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share the configuration exit code so that 2 stays reserved
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _notice(msg: str) -> None:
    print(f"notice: {msg}", file=sys.stderr)


def workers() -> int:
    raw = os.environ.get("NHPH_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"NHPH_WORKERS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("NHPH_WORKERS must be >= 1")
    return n


def run_pool(fn: Callable, items: Sequence) -> list:
    """Map ``fn`` over ``items``; results come back in input order."""
    n = min(workers(), max(len(items), 1))
    if n == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _positive(name, value, integer=False):
    if value is None:
        return
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"--{name} must be positive, got {value}")
    if integer and int(value) != value:
        raise ConfigError(f"--{name} must be an integer")


def _config(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and not callable(v)}


def default_grid(count: int = 40, lo: float = 0.1, hi: float = 10.0) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), count)


def _out(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_pair(args) -> StatePair:
    if args.state is None:
        return StatePair.asymmetric_aklt(args.mu)
    right = UniformMPS.from_json(Path(args.state).read_text())
    left = left_partner(right) if args.left is None else UniformMPS.from_json(Path(args.left).read_text())
    return StatePair(right, left, args.mu)


# construct ---------------------------------------------------------------

def cmd_construct(args) -> int:
    _positive("mu", args.mu)
    _positive("k", args.k, integer=True)
    if args.k > K_MAX:
        raise ConfigError(f"--k must be <= {K_MAX}")
    out = _out(args)
    pair = _load_pair(args)
    tol = {"rank": RANK_TOL, "degeneracy": DEGENERACY_TOL}
    meta = metadata("construct", _config(args), tol)
    tr = blocked_map(pair.right, args.k, "right")
    tl = blocked_map(pair.left, args.k, "left")
    g = metric(tl, tr)
    report = {
        "mu": args.mu,
        "k": args.k,
        "rank_right": tr.rank,
        "rank_left": tl.rank,
        "condition_estimate": g.condition_estimate,
        "criteria": {
            "metric_invertible": g.invertible,
            "direct_sum": criterion_direct_sum(tl, tr),
            "biorthogonal": criterion_biorthogonal(tl, tr),
        },
        "warnings": [],
    }
    try:
        pi = LocalProjector(projector_from_maps(tl, tr), args.k, pair.right.d, args.mu)
    except NoParentHamiltonianError as exc:
        report["error"] = "no nH-PH at this k"
        report["detail"] = str(exc)
        write_json(out / "construct_report.json", report, meta)
        print("no nH-PH at this k", file=sys.stderr)
        return EXIT_SINGULAR

    m = pi.matrix
    report["hermitian"] = bool(np.abs(m - m.conj().T).max() < 1e-12)
    comp = pi.complement
    report["residuals"] = {
        "right_annihilation": float(np.abs(m @ tr.matrix).max()),
        "left_annihilation": float(np.abs(tl.matrix.conj().T @ m).max()),
        "idempotence": float(np.abs(comp @ comp - comp).max()),
    }
    e_inf = None
    try:
        e_inf = rg_fixed_point(transfer_matrix(pair.left, pair.right))
    except DegenerateEigenvalueError:
        report["warnings"].append("transfer matrix has a degenerate dominant eigenvalue; fixed point undefined")
    if e_inf is not None:
        g_inf = fixed_point_metric(e_inf, pair.right.D)
        report["fixed_point_metric_invertible"] = g_inf.invertible
        if not g_inf.invertible:
            report["warnings"].append("fixed-point metric is singular: no projector-form parent Hamiltonian as k -> infinity")
    if args.state is None and args.k == 2:
        diff = float(np.abs(hamiltonian_k2(args.mu).matrix - m).max())
        report["closed_form_k2"] = {"max_abs_difference": diff, "agrees": diff < 1e-12}
        coeffs = expand_lambda(pi)
        rows = [[fmt_complex(z) for z in row] for row in coeffs]
        write_csv(out / "lambda_expansion.csv", [f"lambda{j + 1}" for j in range(9)], rows, meta)
    pi_path = out / "projector.json"
    pi_path.write_text(json.dumps({"meta": meta, **pi.to_dict()}, sort_keys=True) + "\n")
    for w in report["warnings"]:
        _notice(w)
    write_json(out / "construct_report.json", report, meta)
    return EXIT_OK


# sweep -------------------------------------------------------------------

def _sweep_point(job):
    mu, m_max = job
    rows, strings, skipped = [], [], []
    for mode in ("LR", "RR"):
        try:
            rows.append(order_parameters(mu, mode))
            for m in range(2, m_max + 1):
                strings.append((mu, m, string_order(mu, m, mode), mode))
        except DegenerateEigenvalueError:
            skipped.append(mode)
    return mu, rows, strings, skipped


def cmd_sweep(args) -> int:
    if args.grid:
        grid = np.array(args.grid, dtype=float)
    else:
        _positive("mu-min", args.mu_min)
        _positive("mu-max", args.mu_max)
        _positive("points", args.points, integer=True)
        grid = default_grid(args.points, args.mu_min, args.mu_max)
    for mu in grid:
        _positive("grid", mu)
    _positive("m-max", args.m_max, integer=True)
    if args.m_max < 2:
        raise ConfigError("--m-max must be >= 2")
    out = _out(args)
    meta = metadata("sweep", _config(args), {"degeneracy": DEGENERACY_TOL})
    results = run_pool(_sweep_point, [(float(mu), args.m_max) for mu in grid])
    order_rows, string_rows = [], []
    for mu, rows, strings, skipped in results:
        for mode in skipped:
            _notice(f"mu={fmt(mu)} skipped in {mode} mode: degenerate dominant transfer eigenvalue")
        for r in rows:
            vals = [r.o_af, r.o_left, r.o_right, r.o_chiral]
            order_rows.append([fmt(r.mu)] + [fmt(p) for z in vals for p in (z.real, z.imag)] + [r.mode])
        for mu_, m, z, mode in strings:
            string_rows.append([fmt(mu_), str(m), fmt(z.real), fmt(z.imag), mode])
    header = ["mu"] + [f"{p}_{name}" for name in ("af", "left", "right", "chiral") for p in ("re", "im")] + ["mode"]
    if args.format == "json":
        write_json(out / "order.json", {"header": header, "rows": order_rows}, meta)
        write_json(out / "string_order.json", {"header": ["mu", "m", "re", "im", "mode"], "rows": string_rows}, meta)
    else:
        write_csv(out / "order.csv", header, order_rows, meta)
        write_csv(out / "string_order.csv", ["mu", "m", "re", "im", "mode"], string_rows, meta)
    return EXIT_OK


# ed ----------------------------------------------------------------------

def _check_chain(n, k):
    _positive("n", n, integer=True)
    if n < k:
        raise ConfigError(f"--n={n} is shorter than the interaction span k={k}")
    if 3**n > CHAIN_CAP:
        raise SizeCapError(f"3^{n} exceeds the dense cap {CHAIN_CAP}")


def cmd_ed(args) -> int:
    _positive("mu", args.mu)
    _positive("k", args.k, integer=True)
    _check_chain(args.n, args.k)
    out = _out(args)
    meta = metadata("ed", _config(args), {"cluster": CLUSTER_TOL})
    p = build_projector(StatePair.asymmetric_aklt(args.mu), args.k)
    report = full_spectrum(build_chain(p, args.n, args.boundary), CLUSTER_TOL)
    payload = {"mu": args.mu, **report.to_dict(),
               "conjugation_defect": conjugation_defect(report.eigenvalues)}
    if args.boundary == "open":
        if 3**args.n <= SIMILARITY_CAP:
            payload["obc_similarity_distance"] = obc_similarity_check(args.mu, args.n, args.k)
        else:
            _notice(f"similarity check skipped: 3^{args.n} exceeds {SIMILARITY_CAP}")
    stem = f"spectrum_mu{fmt(args.mu)}_n{args.n}_k{args.k}_{args.boundary}"
    if args.format == "csv":
        rows = [[fmt(z.real), fmt(z.imag)] for z in report.eigenvalues]
        write_csv(out / f"{stem}.csv", ["re", "im"], rows, {**meta, "summary": {
            k: v for k, v in payload.items() if k != "eigenvalues"}})
    else:
        write_json(out / f"{stem}.json", payload, meta)
    return EXIT_OK


def _gap_job(job):
    mu, k, n = job
    p = build_projector(StatePair.asymmetric_aklt(mu), k)
    return n, full_spectrum(build_chain(p, n, "periodic"), CLUSTER_TOL).gap


def cmd_ed_scaling(args) -> int:
    _positive("mu", args.mu)
    _positive("k", args.k, integer=True)
    sizes = args.n_list or DEFAULT_SCALING_SIZES.get(args.k)
    if sizes is None:
        raise ConfigError(f"no default sizes for k={args.k}; pass --n-list")
    if len(sizes) < 3:
        raise ConfigError("--n-list needs at least 3 sizes")
    for n in sizes:
        _check_chain(n, args.k)
    out = _out(args)
    meta = metadata("ed-scaling", {**_config(args), "n_list": list(sizes)}, {"cluster": CLUSTER_TOL})
    gaps = run_pool(_gap_job, [(args.mu, args.k, n) for n in sizes])
    fit = gap_scaling(gaps)
    row = [fmt(args.mu), " ".join(str(n) for n, _ in gaps), " ".join(fmt(g) for _, g in gaps),
           fmt(fit.extrapolated_gap), fmt(fit.residual)]
    write_csv(out / f"scaling_mu{fmt(args.mu)}_k{args.k}.csv",
              ["mu", "n_list", "gaps", "extrapolated_gap", "residual"], [row],
              {**meta, "abscissa": fit.abscissa, "boundary": "periodic"})
    return EXIT_OK


# itebd -------------------------------------------------------------------

def cmd_itebd(args) -> int:
    _positive("mu", args.mu)
    _positive("k", args.k, integer=True)
    _positive("dmax", args.dmax, integer=True)
    _positive("dtau", args.dtau)
    _positive("e-tol", args.e_tol)
    _positive("max-steps", args.max_steps, integer=True)
    _positive("check-interval", args.check_interval, integer=True)
    if args.k > 4:
        raise ConfigError("--k must be <= 4 for imaginary-time evolution")
    if args.dmax > 32:
        raise SizeCapError("bond dimension exceeds the iTEBD cap D_max <= 32")
    out = _out(args)
    meta = metadata("itebd", _config(args), {"e_tol": args.e_tol, "infidelity_target": 1e-8})
    p = build_projector(StatePair.asymmetric_aklt(args.mu), args.k)
    state, trace = find_ground_state(p, d_max=args.dmax, dtau=args.dtau, e_tol=args.e_tol,
                                     max_steps=args.max_steps, adjoint=args.adjoint, seed=args.seed,
                                     check_interval=args.check_interval)
    save_checkpoint(out / "checkpoint.json", state, trace, meta={"meta": meta, "mu": args.mu})
    uniform = to_uniform(state)
    (out / "state.json").write_text(uniform.to_json() + "\n")
    ref_mu = 1.0 / args.mu if args.adjoint else args.mu
    reference = asymmetric_aklt(ref_mu)
    eta = infidelity(block(reference, args.k), uniform, sites=args.k)
    report = {
        "mu": args.mu,
        "reference_mu": ref_mu,
        "adjoint": args.adjoint,
        "converged": trace.converged,
        "steps": trace.steps,
        "final_e": trace.e_history[-1] if trace.e_history else None,
        "infidelity": eta,
    }
    write_json(out / "itebd_report.json", report, meta)
    weights = sorted((float(x) for x in state.schmidt_weights[-1] ** 2), reverse=True)
    total = sum(weights)
    write_json(out / "entanglement.json",
               {"mu": args.mu, "weights": [w / total for w in weights], "convention": "squared-schmidt",
                "reference_weights": entanglement_spectrum(reference).tolist()}, meta)
    if not trace.converged:
        print(f"not converged after {trace.steps} steps", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nhph", description="Non-Hermitian parent Hamiltonian toolkit")
    parser.add_argument("--version", action="version", version=f"nhph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("construct", help="build and verify the local term")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--state", help="right state as MPS JSON (default: asymmetric AKLT)")
    sp.add_argument("--left", help="left state as MPS JSON (default: transpose partner of --state)")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("sweep", help="order parameters and string order over a mu grid")
    sp.add_argument("--grid", type=float, nargs="+")
    sp.add_argument("--mu-min", type=float, default=0.1)
    sp.add_argument("--mu-max", type=float, default=10.0)
    sp.add_argument("--points", type=int, default=40)
    sp.add_argument("--m-max", type=int, default=10)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("ed", help="dense spectrum of a short chain")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--boundary", choices=["open", "periodic"], default="periodic")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    common(sp)
    sp.set_defaults(func=cmd_ed)

    sp = sub.add_parser("ed-scaling", help="periodic-chain gap extrapolation in 1/N")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--n-list", type=int, nargs="+")
    common(sp)
    sp.set_defaults(func=cmd_ed_scaling)

    sp = sub.add_parser("itebd", help="imaginary-time ground state search")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--dmax", type=int, default=12)
    sp.add_argument("--dtau", type=float, default=5e-3)
    sp.add_argument("--e-tol", type=float, default=1e-14)
    sp.add_argument("--max-steps", type=int, default=200_000)
    sp.add_argument("--check-interval", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--adjoint", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_itebd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NoParentHamiltonianError as exc:
        print(f"no nH-PH at this k: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
