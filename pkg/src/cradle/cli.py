"""Command-line interface: ``cradle build | simulate | verify | transform | figures``.

Exit codes: 0 when everything requested passes, 1 when a certificate fails,
2 for invalid input (bad parameters, unreadable files, unsupported operations).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .chains import build_chain, chain_to_jacobi, jacobi_to_chain_free_free
from .dynamics import (
    State,
    analytic_trajectory,
    conservation_report,
    integrate_ode,
    max_frequency,
    mirror_reversal_error,
    modal_model,
    pulse,
    verify_fractional_revival,
    verify_perfect_transfer,
)
from .exceptions import CradleError, InvalidParameters, NoRevivalPossible
from .figures import snapshot_schedule, write_figures, write_snapshots
from .io import ChainDocument, Provenance, dumps
from .spectral import (
    DYNAMICS_TOL,
    SPECTRAL_TOL,
    Boundary,
    ChainParams,
    dense_eigenvalues,
    deform_jacobi,
    spectral_surgery,
    spectrum,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

FREE_FREE_SWEEP = [(0, 1, 2), (0, 1, 4), (0, 3, 4), (0, 1, 8)]
FIXED_FIXED_SWEEP = [(1, 1, 2), (1, 1, 4), (2, 1, 4), (1, 3, 4), (3, 1, 4), (-1, 3, 4), (1, 3, 8), (2, 3, 8)]


def tolerances() -> dict[str, float]:
    """Certificate tolerances, overridable through ``CRADLE_TOL``.

    ``CRADLE_TOL=1e-9`` sets every tolerance; ``CRADLE_TOL=spectral=1e-11,dynamics=1e-7``
    sets them one by one.
    """
    tol = {"spectral": SPECTRAL_TOL, "dynamics": DYNAMICS_TOL, "energy": DYNAMICS_TOL}
    raw = os.environ.get("CRADLE_TOL", "").strip()
    if not raw:
        return tol
    try:
        if "=" not in raw:
            return {k: float(raw) for k in tol}
        for item in raw.split(","):
            key, _, value = item.partition("=")
            key = key.strip()
            if key not in tol:
                raise InvalidParameters(f"unknown tolerance {key!r} in CRADLE_TOL")
            tol[key] = float(value)
    except ValueError as exc:
        raise InvalidParameters(f"cannot parse CRADLE_TOL={raw!r}") from exc
    return tol


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _omega(text: str, N: int) -> float:
    if text.replace(" ", "").lower() in ("2pi/n", "2*pi/n"):
        return 2 * math.pi / N
    return float(text)


# -- build ------------------------------------------------------------------


def params_from_args(args) -> ChainParams:
    boundary = Boundary.FIXED_FIXED if args.fixed_fixed else Boundary.FREE_FREE
    if args.N is None or args.N < 1:
        raise InvalidParameters("-N must be a positive integer")
    common = dict(alpha=args.alpha, omega_tilde=_omega(args.omega_tilde, args.N),
                  scale=args.scale, relaxed=args.relaxed)
    n_sites = args.N + 1
    if args.c is not None:
        a = args.a if args.a is not None else Fraction(0)
        return ChainParams(n_sites, boundary, a, args.c, **common)
    if args.rho is None or args.Z is None:
        raise InvalidParameters("give --rho and -Z (or --c, with --a for fixed-fixed)")
    if boundary is Boundary.FREE_FREE:
        return ChainParams.free_free(n_sites, args.rho, args.Z, **common)
    if args.mu is None:
        raise InvalidParameters("fixed-fixed chains need --mu")
    return ChainParams.fixed_fixed(n_sites, args.mu, args.rho, args.Z, **common)


def provenance_of(params: ChainParams) -> Provenance:
    if not params.is_symmetric:
        return Provenance.DEFORMED
    return Provenance.CLOSED_FORM if params.boundary is Boundary.FREE_FREE else Provenance.GAMMA_SUM


def spectrum_certificate(chain, declared, tol: float) -> dict:
    lam = dense_eigenvalues(chain_to_jacobi(chain))
    declared = np.asarray(declared, dtype=float)
    if lam.size != declared.size:
        return {"passed": False, "max_rel_error": math.inf}
    err = float(np.max(np.abs(lam - declared)) / max(abs(declared).max(), np.finfo(float).tiny))
    return {"passed": err < tol, "max_rel_error": err}


def summary_table(chain) -> str:
    m, K = chain.normalized()
    lines = [f"{'i':>3}  {'m_i/m_0':>22}  {'K_i/(w~^2 m_0)':>22}"]
    for i in range(K.size):
        mass = f"{m[i]:22.15g}" if i < m.size else " " * 22
        lines.append(f"{i:>3}  {mass}  {K[i]:22.15g}")
    return "\n".join(lines)


def cmd_build(args) -> int:
    params = params_from_args(args)
    chain = build_chain(params)
    declared = spectrum(params).lambdas
    cert = spectrum_certificate(chain, declared, tolerances()["spectral"])
    doc = ChainDocument.from_chain(chain, provenance_of(params), declared, {"spectrum": cert})
    doc.save(args.output)
    print(summary_table(chain))
    print(f"wrote {args.output}")
    return EXIT_OK if cert["passed"] else EXIT_FAIL


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = ChainDocument.load(args.document)
    chain = doc.to_chain()
    _, spec, _ = modal_model(chain)
    t_end = args.t_end if args.t_end is not None else (
        2 * spec.t_star if spec.t_star is not None else 2 * math.pi / max(spec.omegas[1], 1e-300)
    )
    start = pulse(chain.n_sites, args.amplitude, args.site, chain.masses)
    if args.engine == "analytic":
        traj = analytic_trajectory(chain, start, np.linspace(0.0, t_end, args.samples))
    else:
        dt = None if args.dt == "auto" else float(args.dt)
        h = dt if dt is not None else 2 * math.pi / max_frequency(chain) / 200
        n_steps = max(1, math.ceil(t_end / h - 1e-9))
        every = max(1, n_steps // max(args.samples - 1, 1))
        traj = integrate_ode(chain, start, t_end, dt=dt, order=args.order, record_every=every)
    traj.to_csv(args.csv)
    report = conservation_report(traj)
    print(f"wrote {args.csv} ({len(traj)} samples, engine={args.engine})")
    print(f"energy drift {report.energy_drift:.3e}, momentum drift {report.momentum_drift:.3e}")
    if args.snapshots:
        if chain.params is None:
            raise InvalidParameters("snapshots need a document with parameters")
        schedule = snapshot_schedule(chain.params.with_sites(chain.n_sites + len(chain.removed)), args.at)
        paths = write_snapshots(chain, schedule, args.snapshots)
        print(f"wrote {len(paths)} snapshot files to {args.snapshots}")
    return EXIT_OK


# -- verify -----------------------------------------------------------------


def _pt_entry(chain, tol):
    rep = verify_perfect_transfer(chain, tol=tol)
    return {
        "passed": rep.achieved,
        "t_star": rep.t_star,
        "terminal_amplitudes": list(rep.terminal_amplitudes),
        "sign": rep.sign,
        "expected_sign": rep.expected_sign,
        "residual": rep.residual,
        "predicted_amplitudes": None if rep.expected_amplitudes is None else list(rep.expected_amplitudes),
    }


def _fr_entry(chain, tol):
    try:
        rep = verify_fractional_revival(chain, tol=tol)
    except NoRevivalPossible as exc:
        return {"passed": False, "error": str(exc)}
    return {
        "passed": rep.passed,
        "nontrivial": rep.nontrivial,
        "entries": [
            {"ell": e.ell, "tau": e.tau, "measured": list(e.measured),
             "predicted": list(e.predicted), "residual": e.residual, "passed": e.passed}
            for e in rep.entries
        ],
    }


def _declared_spectrum(chain, doc_spectrum=None):
    if doc_spectrum is not None:
        return doc_spectrum
    return modal_model(chain)[1].lambdas


def run_certificates(chain, wanted, tol, doc_spectrum=None, seed=0) -> dict:
    out = {}
    if "spectrum" in wanted:
        cert = spectrum_certificate(chain, _declared_spectrum(chain, doc_spectrum), tol["spectral"])
        if chain.params is not None:
            family = spectrum(chain.params.with_sites(chain.n_sites + len(chain.removed)))
            analytic = family.without(chain.removed).lambdas
            again = spectrum_certificate(chain, analytic, tol["spectral"])
            cert = {"passed": cert["passed"] and again["passed"],
                    "max_rel_error": max(cert["max_rel_error"], again["max_rel_error"])}
        out["spectrum"] = cert
    if "pt" in wanted:
        out["pt"] = _pt_entry(chain, tol["dynamics"])
    if "fr" in wanted:
        out["fr"] = _fr_entry(chain, tol["dynamics"])
    if "mirror" in wanted:
        params = chain.params
        if params is None or not params.perfect_transfer_possible:
            out["mirror"] = {"passed": False, "error": "needs a mirror-symmetric chain with perfect transfer"}
        else:
            rng = np.random.default_rng(seed)
            start = State(0.0, np.zeros(chain.n_sites), rng.standard_normal(chain.n_sites))
            err = mirror_reversal_error(chain, start)
            out["mirror"] = {"passed": err < tol["dynamics"], "error": err, "seed": seed}
    if "conservation" in wanted:
        _, spec, _ = modal_model(chain)
        t_end = 2 * spec.t_star if spec.t_star is not None else 2 * math.pi / spec.omegas[1]
        traj = integrate_ode(chain, pulse(chain.n_sites), t_end)
        rep = conservation_report(traj)
        ok = rep.energy_drift < tol["energy"]
        if chain.boundary is Boundary.FREE_FREE:
            ok = ok and rep.momentum_drift < 1e-10
        out["conservation"] = {"passed": ok, "energy_drift": rep.energy_drift,
                               "momentum_drift": rep.momentum_drift}
    return out


def _sweep_point(point):
    boundary, N, mu, rho, Z, tol = point
    key = {"boundary": boundary, "N": N, "mu": mu, "rho": rho, "Z": Z}
    try:
        if boundary == Boundary.FREE_FREE.value:
            params = ChainParams.free_free(N + 1, rho, Z)
        else:
            params = ChainParams.fixed_fixed(N + 1, mu, rho, Z)
        certs = run_certificates(build_chain(params), ("spectrum", "pt", "fr"), tol)
    except CradleError as exc:
        return {**key, "passed": False, "error": str(exc)}
    return {**key, "passed": all(c["passed"] for c in certs.values()), "certificates": certs}


def cmd_sweep(args, tol) -> int:
    boundaries = {"free-free": [Boundary.FREE_FREE], "fixed-fixed": [Boundary.FIXED_FIXED],
                  "both": [Boundary.FREE_FREE, Boundary.FIXED_FIXED]}[args.sweep]
    points = []
    for boundary in boundaries:
        grid = FREE_FREE_SWEEP if boundary is Boundary.FREE_FREE else FIXED_FIXED_SWEEP
        for N in range(args.n_min, args.n_max + 1):
            for mu, rho, Z in grid:
                points.append((boundary.value, N, mu, rho, Z, tol))
    if args.workers == 1:
        results = [_sweep_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_point, points))
    results.sort(key=lambda r: (r["boundary"], r["N"], r["mu"], r["rho"], r["Z"]))
    report = {"passed": all(r["passed"] for r in results), "points": results}
    _emit(report, args.report)
    failed = sum(not r["passed"] for r in results)
    print(f"sweep: {len(results) - failed}/{len(results)} points pass", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _emit(report, path):
    text = dumps(report)
    if path:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)


def cmd_verify(args) -> int:
    tol = tolerances()
    if args.sweep:
        return cmd_sweep(args, tol)
    if args.document is None:
        raise InvalidParameters("verify needs a document (or --sweep)")
    doc = ChainDocument.load(args.document)
    chain = doc.to_chain()
    wanted = [name for name in ("spectrum", "pt", "fr", "mirror", "conservation") if getattr(args, name)]
    if not wanted:
        wanted = ["spectrum"]
        if chain.params is not None and chain.params.is_rational:
            wanted += ["pt", "fr"]
            if chain.params.perfect_transfer_possible:
                wanted.append("mirror")
    certs = run_certificates(chain, wanted, tol, doc.spectrum, args.seed)
    report = {"document": str(args.document), "passed": all(c["passed"] for c in certs.values()),
              "certificates": certs}
    _emit(report, args.report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# -- transform --------------------------------------------------------------


def cmd_transform(args) -> int:
    doc = ChainDocument.load(args.document)
    chain = doc.to_chain()
    tol = tolerances()
    if args.deform:
        alpha = args.alpha
        if alpha == Fraction(1, 2):
            new_chain = chain
        elif chain.params is not None and not chain.removed:
            if not chain.params.is_symmetric:
                raise InvalidParameters("the document is already deformed; deform the symmetric chain")
            new_chain = build_chain(chain.params.with_alpha(alpha))
            new_chain = type(new_chain)(
                new_chain.masses * (chain.masses[0] / new_chain.masses[0]),
                new_chain.springs * (chain.masses[0] / new_chain.masses[0]),
                new_chain.boundary, new_chain.params, new_chain.removed,
            )
        elif chain.boundary is Boundary.FREE_FREE:
            jac = deform_jacobi(chain_to_jacobi(chain), alpha)
            params = None if chain.params is None else chain.params.with_alpha(alpha)
            new_chain = jacobi_to_chain_free_free(jac, chain.masses[0], params, chain.removed)
        else:
            raise InvalidParameters("deforming a surgered fixed-fixed chain is not supported")
        declared = _declared_spectrum(chain, doc.spectrum)
        provenance = Provenance.DEFORMED
    else:
        if chain.boundary is not Boundary.FREE_FREE:
            raise InvalidParameters("surgery documents are rebuilt as free-free chains only")
        remove = args.remove_pair if args.remove_pair else [args.remove]
        jac, spec, basis = modal_model(chain)
        new_jac = spectral_surgery(jac, basis, remove)
        lattice = sorted(set(chain.removed) | {int(spec.lattice_index[r]) for r in remove})
        new_chain = jacobi_to_chain_free_free(new_jac, chain.masses[0], chain.params, lattice)
        declared = np.delete(_declared_spectrum(chain, doc.spectrum), remove)
        provenance = Provenance.SURGERY
    cert = spectrum_certificate(new_chain, declared, tol["spectral"])
    out = ChainDocument.from_chain(new_chain, provenance, declared, {"spectrum": cert})
    out.save(args.output)
    print(summary_table(new_chain))
    print(f"wrote {args.output} (spectrum certificate: {'pass' if cert['passed'] else 'FAIL'})")
    return EXIT_OK if cert["passed"] else EXIT_FAIL


def cmd_figures(args) -> int:
    paths = write_figures(args.output, args.N)
    print(f"wrote {len(paths)} files to {args.output} (qualitative reproduction, N = {args.N})")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cradle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a chain and write its JSON document")
    kind = b.add_mutually_exclusive_group(required=True)
    kind.add_argument("--free-free", action="store_true")
    kind.add_argument("--fixed-fixed", action="store_true")
    b.add_argument("-N", type=int, required=True, help="chain has N + 1 masses")
    b.add_argument("--mu", type=int)
    b.add_argument("--rho", type=int)
    b.add_argument("-Z", "--Z", dest="Z", type=int)
    b.add_argument("--a", type=_fraction, help="explicit a (with --c)")
    b.add_argument("--c", type=_fraction, help="explicit c instead of --rho/-Z")
    b.add_argument("--alpha", type=_fraction, default=Fraction(1, 2))
    b.add_argument("--omega-tilde", default="1", help="frequency scale, or '2pi/N'")
    b.add_argument("--scale", type=float, default=1.0, help="mass m_0")
    b.add_argument("--relaxed", action="store_true", help="skip the perfect-transfer parity rules")
    b.add_argument("-o", "--output", default="chain.json")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("simulate", help="evolve a pulse and write a trajectory CSV")
    s.add_argument("document")
    s.add_argument("--engine", choices=("analytic", "ode"), default="analytic")
    s.add_argument("--dt", default="auto")
    s.add_argument("--order", type=int, default=8, help="integrator order (even)")
    s.add_argument("--t-end", type=float, help="default 2 t*")
    s.add_argument("--samples", type=int, default=401)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--site", type=int, default=0)
    s.add_argument("--csv", default="trajectory.csv")
    s.add_argument("--snapshots", help="directory for per-time momentum profiles")
    s.add_argument("--at", choices=("transfer", "revival", "all"), default="all")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check certificates; exit 0 iff all pass")
    v.add_argument("document", nargs="?")
    v.add_argument("--spectrum", action="store_true")
    v.add_argument("--pt", action="store_true", help="perfect transfer")
    v.add_argument("--fr", action="store_true", help="fractional revival")
    v.add_argument("--mirror", action="store_true", help="mirror reversal of random momenta")
    v.add_argument("--conservation", action="store_true", help="ODE energy/momentum drift")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", help="also write the JSON report here")
    v.add_argument("--sweep", choices=("free-free", "fixed-fixed", "both"))
    v.add_argument("--n-min", type=int, default=2)
    v.add_argument("--n-max", type=int, default=12)
    v.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("transform", help="deform or perform spectral surgery")
    t.add_argument("document")
    op = t.add_mutually_exclusive_group(required=True)
    op.add_argument("--deform", action="store_true")
    op.add_argument("--surgery", action="store_true")
    t.add_argument("--alpha", type=_fraction)
    rm = t.add_mutually_exclusive_group()
    rm.add_argument("--remove-pair", type=int, nargs=2, metavar=("K", "K1"))
    rm.add_argument("--remove", type=int, help="single end point, 0 or N")
    t.add_argument("-o", "--output", default="transformed.json")
    t.set_defaults(func=cmd_transform)

    f = sub.add_parser("figures", help="write figure-reproduction datasets")
    f.add_argument("-o", "--output", default="figures")
    f.add_argument("-N", type=int, default=24)
    f.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "transform":
        if args.deform and args.alpha is None:
            parser.error("--deform needs --alpha")
        if args.surgery and args.remove_pair is None and args.remove is None:
            parser.error("--surgery needs --remove-pair or --remove")
    try:
        return args.func(args)
    except (CradleError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
