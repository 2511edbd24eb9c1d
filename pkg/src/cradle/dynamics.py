"""Time evolution of mass-spring chains and the transfer/revival certificates.

Two independent routes are provided:

* :func:`evolve_analytic` sums normal modes of the Jacobi matrix, using the
  analytic eigenvalues and the polynomial eigenvectors;
* :func:`integrate_ode` steps Hamilton's equations for the physical
  coordinates ``(Q, P)`` with a symplectic composition of leapfrog steps and
  never looks at the eigenvectors.

States are expressed in mass-weighted variables ``q = sqrt(m) Q`` and
``p = P / sqrt(m)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .chains import ChainSpec, chain_to_jacobi
from .exceptions import NoRevivalPossible, StepTooLarge
from .spectral import (
    DYNAMICS_TOL,
    BiLatticeSpectrum,
    Boundary,
    EigenBasis,
    JacobiSpec,
    dense_eigenvalues,
    eigenbasis,
    spectrum,
)

__all__ = [
    "State",
    "Trajectory",
    "TransferReport",
    "RevivalEntry",
    "RevivalReport",
    "ConservationReport",
    "pulse",
    "modal_model",
    "evolve_analytic",
    "analytic_trajectory",
    "integrate_ode",
    "verify_perfect_transfer",
    "verify_fractional_revival",
    "predicted_revival",
    "mirror_reversal_check",
    "mirror_reversal_error",
    "conservation_report",
]


@dataclass(frozen=True, eq=False)
class State:
    """Mass-weighted displacements ``q`` and momenta ``p`` at time ``t``."""

    t: float
    q: np.ndarray
    p: np.ndarray
    masses: np.ndarray | None = None

    @property
    def P(self) -> np.ndarray:
        """True momenta ``sqrt(m_i) p_i``."""
        if self.masses is None:
            raise ValueError("true momenta need the masses")
        return np.sqrt(self.masses) * self.p


def pulse(n_sites: int, amplitude: float = 1.0, site: int = 0, masses=None) -> State:
    """Chain at rest with a momentum kick ``amplitude`` on one mass."""
    p = np.zeros(n_sites)
    p[site] = amplitude
    return State(0.0, np.zeros(n_sites), p, None if masses is None else np.asarray(masses))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled evolution; ``q`` and ``p`` have shape ``(len(t), n_sites)``."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    masses: np.ndarray
    springs: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self) -> Iterator[State]:
        for i in range(self.t.size):
            yield self.state(i)

    def state(self, i: int) -> State:
        return State(float(self.t[i]), self.q[i], self.p[i], self.masses)

    @property
    def P(self) -> np.ndarray:
        return self.p * np.sqrt(self.masses)

    def energy(self) -> np.ndarray:
        Q = self.q / np.sqrt(self.masses)
        K = self.springs
        stretch = np.diff(np.pad(Q, ((0, 0), (1, 1))), axis=1)
        return 0.5 * np.sum(self.p**2, axis=1) + 0.5 * np.sum(K * stretch**2, axis=1)

    def to_csv(self, path) -> None:
        """Write columns ``t, p_0..p_N, P_0..P_N, E``."""
        n = self.masses.size
        header = ["t"] + [f"p_{i}" for i in range(n)] + [f"P_{i}" for i in range(n)] + ["E"]
        P = self.P
        E = self.energy()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for k in range(self.t.size):
                row = [self.t[k], *self.p[k], *P[k], E[k]]
                writer.writerow([repr(float(x)) for x in row])


def modal_model(chain: ChainSpec) -> tuple[JacobiSpec, BiLatticeSpectrum, EigenBasis]:
    """Jacobi matrix, analytic spectrum and eigenbasis of a chain.

    Chains without parameters fall back to the dense eigenvalues (no transfer
    time is then known).
    """
    jac = chain_to_jacobi(chain)
    if chain.params is None:
        lam = dense_eigenvalues(jac)
        lam = np.where(np.abs(lam) < 1e-14 * max(1.0, lam.max()), 0.0, lam)
        spec = BiLatticeSpectrum(
            lambdas=lam,
            omegas=np.sqrt(np.clip(lam, 0, None)),
            t_star=None,
            tau=np.array([]),
            k=None,
            lattice_index=np.arange(lam.size),
        )
    else:
        spec = spectrum(chain.params.with_sites(chain.n_sites + len(chain.removed)))
        spec = spec.without(chain.removed)
    return jac, spec, eigenbasis(jac, spec)


def _modal_evolution(basis, omegas, q0, p0, times):
    U = basis.U
    qt = U @ q0
    pt = U @ p0
    wt = np.outer(times, omegas)
    cos, sin = np.cos(wt), np.sin(wt)
    zero = omegas == 0
    safe = np.where(zero, 1.0, omegas)
    sinc = np.where(zero, times[:, None], sin / safe)
    q_modes = qt * cos + pt * sinc
    p_modes = -qt * omegas * sin + pt * cos
    return q_modes @ U, p_modes @ U


def evolve_analytic(basis: EigenBasis, spec, initial: State, t: float) -> State:
    """State at time ``t`` by exact normal-mode summation.

    The zero-frequency (translation) mode advances as ``q + p t``.
    ``spec`` may be None, in which case ``omega_n = sqrt(lambda_n)``.
    """
    omegas = np.sqrt(np.clip(basis.lambdas, 0, None)) if spec is None else spec.omegas
    q, p = _modal_evolution(basis, omegas, initial.q, initial.p, np.array([float(t)]))
    return State(float(t), q[0], p[0], initial.masses)


def analytic_trajectory(chain: ChainSpec, initial: State, times) -> Trajectory:
    _, spec, basis = modal_model(chain)
    times = np.asarray(times, dtype=float)
    q, p = _modal_evolution(basis, spec.omegas, initial.q, initial.p, times)
    return Trajectory(times, q, p, chain.masses, chain.springs)


def _composition_weights(order: int) -> np.ndarray:
    # Triple-jump composition: each level raises the order of the symmetric
    # base method by two.
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    w = np.array([1.0])
    k = 2
    while k < order:
        x1 = 1.0 / (2.0 - 2.0 ** (1.0 / (k + 1)))
        x0 = 1.0 - 2.0 * x1
        w = np.concatenate([w * x1, w * x0, w * x1])
        k += 2
    return w


def max_frequency(chain: ChainSpec) -> float:
    return float(math.sqrt(max(dense_eigenvalues(chain_to_jacobi(chain))[-1], 0.0)))


def integrate_ode(
    chain: ChainSpec,
    initial: State,
    t_end: float,
    dt: float | None = None,
    order: int = 8,
    record_every: int = 1,
) -> Trajectory:
    """Integrate Hamilton's equations with kick-drift-kick leapfrog steps.

    ``order=2`` is plain leapfrog; higher even orders compose leapfrog
    sub-steps (triple jump).  The default step is ``(2 pi / omega_max) / 200``,
    rounded down so that ``t_end`` is hit exactly.

    Raises
    ------
    StepTooLarge
        If ``dt >= 0.1 / omega_max``.
    """
    omega_max = max_frequency(chain)
    if dt is None:
        dt = 2 * math.pi / omega_max / 200 if omega_max > 0 else t_end
    # small slack so dt = 0.1 / omega_N from the analytic spectrum is caught
    if omega_max > 0 and dt * omega_max >= 0.1 * (1 - 1e-9):
        raise StepTooLarge(f"dt = {dt:.3g} must be below 0.1 / omega_max = {0.1 / omega_max:.3g}")
    n_steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else 0.0

    w = _composition_weights(order)
    kicks = np.empty(w.size + 1)
    kicks[0] = w[0] / 2
    kicks[1:-1] = (w[:-1] + w[1:]) / 2
    kicks[-1] = w[-1] / 2
    kicks *= h
    drifts = w * h

    m = chain.masses
    sqrt_m = np.sqrt(m)
    K = chain.stiffness_matrix()
    inv_m = 1.0 / m
    Q = initial.q / sqrt_m
    P = initial.p * sqrt_m

    n_rec = n_steps // record_every + 1 + (1 if n_steps % record_every else 0)
    ts = np.empty(n_rec)
    qs = np.empty((n_rec, m.size))
    ps = np.empty((n_rec, m.size))
    ts[0], qs[0], ps[0] = 0.0, Q * sqrt_m, P / sqrt_m
    r = 1
    for step in range(1, n_steps + 1):
        for kc, dc in zip(kicks[:-1], drifts):
            P = P - kc * (K @ Q)
            Q = Q + dc * inv_m * P
        P = P - kicks[-1] * (K @ Q)
        if step % record_every == 0 or step == n_steps:
            ts[r], qs[r], ps[r] = step * h, Q * sqrt_m, P / sqrt_m
            r += 1
    return Trajectory(ts[:r], qs[:r], ps[:r], m.copy(), chain.springs.copy())


# -- certificates -----------------------------------------------------------


@dataclass(frozen=True)
class TransferReport:
    achieved: bool
    t_star: float | None
    terminal_amplitudes: tuple[float, float]
    sign: int
    residual: float
    expected_sign: int = 1
    expected_amplitudes: tuple[float, float] | None = None


@dataclass(frozen=True)
class RevivalEntry:
    ell: int
    tau: float
    measured: tuple[float, float]
    predicted: tuple[float, float]
    residual: float
    passed: bool


@dataclass(frozen=True)
class RevivalReport:
    entries: list[RevivalEntry] = field(default_factory=list)
    passed: bool = True
    nontrivial: bool = False


class ConservationReport(NamedTuple):
    energy_drift: float
    momentum_drift: float


def revival_mirror_free_free(c, ell: int) -> tuple[float, float]:
    """Shares of the pulse on the end masses at ``tau_ell``, mirror-symmetric free-free chain."""
    x = ell * float(c) * math.pi
    return math.cos(x) ** 2, math.sin(x) ** 2


def revival_deformed_free_free(c, ell: int, alpha) -> tuple[float, float]:
    alpha = float(alpha)
    s2 = math.sin(ell * float(c) * math.pi) ** 2
    return 1 - 2 * alpha * s2, 2 * math.sqrt(alpha * (1 - alpha)) * s2


def revival_mirror_fixed_fixed(a, c, ell: int) -> tuple[float, float]:
    a, c = float(a), float(c)
    return (
        math.cos((c + a) * ell * math.pi) * math.cos((c - a) * ell * math.pi),
        math.sin((c + a) * ell * math.pi) * math.sin((c - a) * ell * math.pi),
    )


def revival_deformed_fixed_fixed(a, c, ell: int, alpha) -> tuple[float, float]:
    a, c, alpha = float(a), float(c), float(alpha)
    ca, cc = math.cos(2 * ell * a * math.pi), math.cos(2 * ell * c * math.pi)
    return (1 - alpha) * ca + alpha * cc, math.sqrt(alpha * (1 - alpha)) * (ca - cc)


def predicted_revival(params, ell: int) -> tuple[float, float]:
    """Closed-form ``(p_0, p_N) / p_bar`` at ``tau_ell`` for the regime of ``params``."""
    if params.boundary is Boundary.FREE_FREE:
        if params.is_symmetric:
            return revival_mirror_free_free(params.c, ell)
        return revival_deformed_free_free(params.c, ell, params.alpha)
    if params.is_symmetric:
        return revival_mirror_fixed_fixed(params.a, params.c, ell)
    return revival_deformed_fixed_fixed(params.a, params.c, ell, params.alpha)


def _pulse_momenta(chain: ChainSpec, times, amplitude: float) -> tuple[np.ndarray, BiLatticeSpectrum]:
    _, spec, basis = modal_model(chain)
    start = pulse(chain.n_sites, amplitude)
    _, p = _modal_evolution(basis, spec.omegas, start.q, start.p, np.asarray(times, dtype=float))
    return p / amplitude, spec


def verify_perfect_transfer(
    chain: ChainSpec, amplitude: float = 1.0, tol: float = DYNAMICS_TOL
) -> TransferReport:
    """Send a pulse from mass 0 and inspect the chain at ``t*``.

    Perfect transfer means ``p_N(t*) = sign * p_bar`` with every other mass at
    rest; ``sign = (-1)**mu`` (always +1 for free-free chains).
    """
    params = chain.params
    _, spec, _ = modal_model(chain)
    expected_sign = params.transfer_sign if params is not None else 1
    if spec.t_star is None:
        return TransferReport(False, None, (math.nan, math.nan), 0, math.nan, expected_sign)
    p, _ = _pulse_momenta(chain, [spec.t_star], amplitude)
    p = p[0]
    interior = np.abs(p[1:-1])
    residual = float(interior.max()) if interior.size else 0.0
    sign = int(np.sign(p[-1])) or 1
    achieved = bool(
        abs(p[-1] - expected_sign) < tol and abs(p[0]) < tol and residual < tol
    )
    expected = None
    if params is not None and params.Z is not None and params.Z % 2 == 0:
        expected = predicted_revival(params, params.Z // 2)
    return TransferReport(
        achieved=achieved,
        t_star=spec.t_star,
        terminal_amplitudes=(float(p[0]), float(p[-1])),
        sign=sign,
        residual=residual,
        expected_sign=expected_sign,
        expected_amplitudes=expected,
    )


def verify_fractional_revival(
    chain: ChainSpec,
    amplitude: float = 1.0,
    tol: float = DYNAMICS_TOL,
    require_revival: bool = False,
) -> RevivalReport:
    """Compare the end-mass momenta at every ``tau_ell`` with the closed forms.

    Raises
    ------
    NoRevivalPossible
        When the parameters are irrational (no revival times), or when
        ``require_revival`` is set and ``Z <= 2`` so that no ``tau_ell`` lies
        strictly between 0 and ``t*``.
    """
    params = chain.params
    if params is None or params.Z is None:
        raise NoRevivalPossible("revival times need rational parameters")
    Z = params.Z
    if require_revival and Z <= 2:
        raise NoRevivalPossible(
            f"Z = {Z}: the only revival times are 0 and t*, nothing in between"
        )
    _, spec, _ = modal_model(chain)
    p, _ = _pulse_momenta(chain, spec.tau, amplitude)
    entries = []
    for ell, (tau, row) in enumerate(zip(spec.tau, p)):
        predicted = predicted_revival(params, ell)
        measured = (float(row[0]), float(row[-1]))
        residual = float(np.abs(row[1:-1]).max()) if row.size > 2 else 0.0
        ok = (
            abs(measured[0] - predicted[0]) < tol
            and abs(measured[1] - predicted[1]) < tol
            and residual < tol
        )
        entries.append(RevivalEntry(ell, float(tau), measured, predicted, residual, ok))
    return RevivalReport(
        entries=entries,
        passed=all(e.passed for e in entries),
        nontrivial=Z > 2,
    )


def mirror_reversal_error(chain: ChainSpec, initial: State) -> float:
    """``max_i |p_i(t*) - sign * p_{N-i}(0)|`` relative to the largest initial momentum."""
    _, spec, basis = modal_model(chain)
    if spec.t_star is None:
        return math.inf
    final = evolve_analytic(basis, spec, initial, spec.t_star)
    sign = chain.params.transfer_sign
    ref = max(float(np.abs(initial.p).max()), np.finfo(float).tiny)
    return float(np.abs(final.p - sign * initial.p[::-1]).max() / ref)


def mirror_reversal_check(chain: ChainSpec, initial: State, tol: float = DYNAMICS_TOL) -> bool:
    """True when the momenta at ``t*`` are the mirror image of the initial ones."""
    params = chain.params
    if params is None or not params.perfect_transfer_possible:
        return False
    return mirror_reversal_error(chain, initial) < tol


def conservation_report(trajectory: Trajectory) -> ConservationReport:
    """Relative energy drift and drift of the total true momentum.

    The momentum figure only means something for free-free chains; walls
    exchange momentum with fixed-fixed ones.
    """
    E = trajectory.energy()
    E0 = E[0]
    energy_drift = float(np.max(np.abs(E - E0)) / E0) if E0 > 0 else float(np.max(np.abs(E)))
    P = trajectory.P
    total = P.sum(axis=1)
    ref = float(np.abs(P[0]).sum())
    drift = float(np.max(np.abs(total - total[0])))
    return ConservationReport(energy_drift, drift / ref if ref > 0 else drift)
