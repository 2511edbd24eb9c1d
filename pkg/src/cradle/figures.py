"""Plot data: mass/spring profiles and momentum snapshots for seven figures.

Every dataset uses N = 24 and ``omega_tilde = 2 pi / N`` by default, which
keeps the profiles readable.  The datasets are qualitative:
the shapes (smooth profile at ``c - a = 1/2``, central dip or bump otherwise,
fractional revival at the ``tau_ell``) are what matter.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .chains import ChainSpec, build_chain
from .dynamics import analytic_trajectory, pulse
from .spectral import Boundary, ChainParams, spectrum

TRANSFER_FRACTIONS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))


def snapshot_schedule(params: ChainParams, which: str = "all") -> list[tuple[str, float]]:
    """Labelled snapshot times: fractions of ``t*`` and/or every ``tau_ell``."""
    spec = spectrum(params)
    if spec.t_star is None:
        raise ValueError("snapshots need rational parameters")
    out = []
    if which in ("transfer", "all"):
        out += [(f"tstar_{float(f):.2f}", float(f) * spec.t_star) for f in TRANSFER_FRACTIONS]
    if which in ("revival", "all"):
        out += [(f"tau_{ell}", float(t)) for ell, t in enumerate(spec.tau)]
    return out


def write_profile(chain: ChainSpec, path) -> None:
    """Columns ``i, m_i/m_0, K_i/(omega_tilde**2 m_0)``; the last row has no mass."""
    m, K = chain.normalized()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "mass", "spring"])
        for i in range(K.size):
            w.writerow([i, repr(float(m[i])) if i < m.size else "", repr(float(K[i]))])


def write_snapshots(chain: ChainSpec, schedule, directory, prefix: str = "snapshot") -> list[Path]:
    """One CSV per time with columns ``i, q_i, p_i, P_i`` (analytic evolution)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    times = np.array([t for _, t in schedule])
    traj = analytic_trajectory(chain, pulse(chain.n_sites, masses=chain.masses), times)
    paths = []
    for k, (label, _) in enumerate(schedule):
        path = directory / f"{prefix}_{label}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "q", "p", "P"])
            for i in range(chain.n_sites):
                w.writerow([i, repr(float(traj.q[k, i])), repr(float(traj.p[k, i])),
                            repr(float(traj.P[k, i]))])
        paths.append(path)
    return paths


def figure_configs(N: int = 24) -> dict[str, list[tuple[str, ChainParams, str]]]:
    """``figure -> [(panel label, params, kind)]`` with kind in profile/transfer/revival/half."""
    w = 2 * math.pi / N
    ff = lambda c, alpha=Fraction(1, 2): ChainParams(  # noqa: E731
        N + 1, Boundary.FREE_FREE, 0, c, alpha=alpha, omega_tilde=w
    )
    fx = lambda mu, rho, Z, alpha=Fraction(1, 2): ChainParams.fixed_fixed(  # noqa: E731
        N + 1, mu, rho, Z, alpha=alpha, omega_tilde=w
    )
    return {
        "fig1": [(f"c={c}", ff(c), "profile") for c in (Fraction(1, 2), Fraction(1, 4), Fraction(3, 4))],
        "fig2": [(f"c={c}", ff(c), "transfer") for c in (Fraction(1, 2), Fraction(1, 4))],
        "fig3": [(f"alpha={al}", ff(Fraction(3, 8), al), "revival") for al in (Fraction(1, 2), Fraction(1, 4))],
        "fig4": [
            (f"a={Fraction(mu, 10)},c-a={Fraction(rho, 10)}", fx(mu, rho, 10), "profile")
            for mu in (1, 7) for rho in (5, 3, 7)
        ],
        "fig5": [(f"c-a={Fraction(rho, 10)}", fx(1, rho, 10), "transfer") for rho in (5, 3)],
        "fig6": [(f"a={Fraction(mu, 10)}", fx(mu, 5, 10), "half") for mu in (1, 7)],
        "fig7": [(f"alpha={al}", fx(1, 3, 8, al), "revival") for al in (Fraction(1, 2), Fraction(1, 4))],
    }


def _slug(label: str) -> str:
    return label.replace("/", "_").replace(",", "_").replace("=", "")


def write_figures(directory, N: int = 24) -> list[Path]:
    """Regenerate every figure dataset under ``directory``; returns the files written."""
    directory = Path(directory)
    written = []
    for fig, panels in figure_configs(N).items():
        for label, params, kind in panels:
            chain = build_chain(params)
            stem = f"{fig}_{_slug(label)}"
            if kind == "profile":
                path = directory / f"{stem}.csv"
                directory.mkdir(parents=True, exist_ok=True)
                write_profile(chain, path)
                written.append(path)
                continue
            if kind == "half":
                t_star = spectrum(params).t_star
                schedule = [("tstar_0.50", 0.5 * t_star)]
            else:
                schedule = snapshot_schedule(params, kind)
            written += write_snapshots(chain, schedule, directory, stem)
    return written
