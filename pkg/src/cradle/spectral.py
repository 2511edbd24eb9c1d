"""Para-Racah Jacobi matrices on a quadratic bi-lattice.

Everything here works at the level of the mass-weighted stiffness matrix

    A = tridiag(-sqrt(u_n), b_n, -sqrt(u_n)),

whose eigenvalues ``lambda_n = omega_n**2`` are the squared normal-mode
frequencies of a mass-spring chain.  The spectrum interleaves two quadratic
sequences, ``omega_tilde**2 (s + a)**2`` and ``omega_tilde**2 (s + c)**2``.

Rational inputs (``Fraction`` or strings such as ``"1/4"``) are carried
exactly through the closed-form recurrence coefficients and only converted to
floats at the end.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .exceptions import (
    DegenerateParameters,
    DegenerateSpectrum,
    InvalidParameters,
    PersymmetryRequired,
    PositivityViolation,
    SpectrumMismatch,
    UnsupportedSurgery,
)

STRUCTURAL_TOL = 1e-12
SPECTRAL_TOL = 1e-10
DYNAMICS_TOL = 1e-8

Number = Union[Fraction, float]

__all__ = [
    "Boundary",
    "ChainParams",
    "JacobiSpec",
    "BiLatticeSpectrum",
    "EigenBasis",
    "spectrum",
    "recurrence_coefficients",
    "para_racah_jacobi",
    "eval_monic_polynomials",
    "eigenbasis",
    "deform_jacobi",
    "deformed_eigenbasis",
    "spectral_surgery",
    "dense_eigenvalues",
]


class Boundary(str, enum.Enum):
    FREE_FREE = "free-free"
    FIXED_FIXED = "fixed-fixed"


def to_number(value, exact: bool = True) -> Number:
    """Coerce ``value`` to a Fraction, or leave it a float when ``exact`` is False.

    Strings are parsed by :class:`fractions.Fraction`, so ``"3/8"`` and
    ``"0.375"`` are both accepted.
    """
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value)
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameters(f"non-finite parameter {value!r}")
    return Fraction(value) if exact else value


def _is_exact(x) -> bool:
    return isinstance(x, Fraction)


@dataclass(frozen=True)
class ChainParams:
    """Parameters of a para-Racah chain.

    Parameters
    ----------
    n_sites : int
        Number of masses, ``N + 1``.
    boundary : Boundary or str
        ``"free-free"`` or ``"fixed-fixed"``.
    a, c : rational
        Bi-lattice offsets.  Free-free chains have ``a = 0`` and ``0 < c < 1``;
        fixed-fixed chains have ``a > -1/2``, ``a != 0`` and ``0 < c - a < 1``
        with ``c > -a``.
    alpha : rational
        Deformation parameter in ``(0, 1)``; ``1/2`` gives a mirror-symmetric chain.
    omega_tilde : float
        Frequency scale in rad/s.
    scale : float
        ``m_0`` (the mass of the first site).
    relaxed : bool
        Drop the parity conditions on ``c = rho / Z`` (and allow float
        ``a``/``c``).  Such chains show fractional revival but no perfect
        transfer.
    """

    n_sites: int
    boundary: Boundary = Boundary.FREE_FREE
    a: Number = Fraction(0)
    c: Number = Fraction(1, 2)
    alpha: Number = Fraction(1, 2)
    omega_tilde: float = 1.0
    scale: float = 1.0
    relaxed: bool = False

    def __post_init__(self):
        boundary = Boundary(self.boundary)
        exact = not self.relaxed
        a = to_number(self.a, exact)
        c = to_number(self.c, exact)
        alpha = to_number(self.alpha, exact)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "omega_tilde", float(self.omega_tilde))
        object.__setattr__(self, "scale", float(self.scale))

        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise InvalidParameters("n_sites must be an integer >= 2")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if not self.omega_tilde > 0:
            raise InvalidParameters("omega_tilde must be positive")
        if not self.scale > 0:
            raise InvalidParameters("scale must be positive")
        if alpha <= 0 or alpha >= 1:
            raise DegenerateParameters(
                f"alpha = {alpha} must lie strictly inside (0, 1); "
                "alpha in {0, 1} leaves no mass to send or receive the pulse"
            )

        if boundary is Boundary.FREE_FREE:
            if a != 0:
                raise InvalidParameters("free-free chains require a = 0 (translation mode)")
            if c == 0 or c == 1:
                raise DegenerateParameters(f"c = {c} degenerates the chain; need 0 < c < 1")
            if not 0 < c < 1:
                raise InvalidParameters(f"c = {c} outside (0, 1)")
        else:
            if a == 0:
                raise InvalidParameters(
                    "fixed-fixed chains require a != 0; a = 0 is the free-free chain"
                )
            if not a > Fraction(-1, 2):
                raise InvalidParameters(f"a = {a} must exceed -1/2")
            gap = c - a
            if gap == 0 or gap == 1 or c == -a:
                raise DegenerateParameters(f"(a, c) = ({a}, {c}) gives a degenerate spectrum")
            if not 0 < gap < 1:
                raise InvalidParameters(f"c - a = {gap} must lie in (0, 1)")
            if not c > -a:
                raise InvalidParameters(f"c = {c} must exceed -a = {-a}")

        if not self.relaxed:
            if not (_is_exact(a) and _is_exact(c)):
                raise InvalidParameters("a and c must be rational unless relaxed=True")
            if self.Z % 2:
                raise InvalidParameters(
                    f"Z = {self.Z} must be even for perfect transfer (c - a = {self.rho}/{self.Z})"
                )
            if self.rho % 2 == 0:
                raise InvalidParameters(
                    f"rho = {self.rho} must be odd for perfect transfer (c - a = {self.rho}/{self.Z})"
                )

    # constructors -------------------------------------------------------

    @classmethod
    def free_free(cls, n_sites, rho, Z, **kwargs):
        """Free-free chain with ``c = rho / Z``; ``rho`` and ``Z`` must be coprime."""
        if math.gcd(int(rho), int(Z)) != 1:
            raise InvalidParameters(f"gcd(rho, Z) = gcd({rho}, {Z}) != 1")
        return cls(n_sites, Boundary.FREE_FREE, 0, Fraction(int(rho), int(Z)), **kwargs)

    @classmethod
    def fixed_fixed(cls, n_sites, mu, rho, Z, **kwargs):
        """Fixed-fixed chain with ``a = mu / Z`` and ``c = (mu + rho) / Z``."""
        mu, rho, Z = int(mu), int(rho), int(Z)
        if math.gcd(math.gcd(mu, rho), Z) != 1:
            raise InvalidParameters(f"mu, rho and Z share a common factor ({mu}, {rho}, {Z})")
        return cls(
            n_sites, Boundary.FIXED_FIXED, Fraction(mu, Z), Fraction(mu + rho, Z), **kwargs
        )

    # derived quantities -------------------------------------------------

    @property
    def N(self) -> int:
        return self.n_sites - 1

    @property
    def j(self) -> int:
        return self.N // 2

    @property
    def is_rational(self) -> bool:
        return _is_exact(self.a) and _is_exact(self.c)

    @property
    def Z(self) -> int | None:
        """Common denominator of ``a`` and ``c - a``; None for irrational parameters."""
        if not self.is_rational:
            return None
        return math.lcm(self.a.denominator, (self.c - self.a).denominator)

    @property
    def mu(self) -> int | None:
        return None if self.Z is None else int(self.a * self.Z)

    @property
    def rho(self) -> int | None:
        return None if self.Z is None else int((self.c - self.a) * self.Z)

    @property
    def is_symmetric(self) -> bool:
        return self.alpha == Fraction(1, 2)

    @property
    def perfect_transfer_possible(self) -> bool:
        Z = self.Z
        return Z is not None and Z % 2 == 0 and self.rho % 2 == 1 and self.is_symmetric

    @property
    def transfer_sign(self) -> int:
        """Direction of the transferred pulse, ``(-1)**mu``."""
        return -1 if (self.mu or 0) % 2 else 1

    def with_alpha(self, alpha) -> "ChainParams":
        return replace(self, alpha=alpha)

    def with_sites(self, n_sites: int) -> "ChainParams":
        return replace(self, n_sites=n_sites)


@dataclass(frozen=True, eq=False)
class JacobiSpec:
    """Diagonal ``b`` (length N+1) and squared off-diagonal ``u`` (length N)."""

    b: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        u = np.array(self.u, dtype=float).reshape(-1)
        if b.ndim != 1 or b.size < 1 or u.size != b.size - 1:
            raise ValueError(f"inconsistent shapes b{b.shape}, u{u.shape}")
        if np.any(u <= 0):
            raise PositivityViolation(f"off-diagonal squares must be positive, got {u}")
        b.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "u", u)

    @property
    def size(self) -> int:
        return self.b.size

    @property
    def N(self) -> int:
        return self.b.size - 1

    @property
    def offdiag(self) -> np.ndarray:
        return np.sqrt(self.u)

    @property
    def norm_scale(self) -> float:
        """Cheap bound on the spectral radius, used to make tolerances relative."""
        off = self.offdiag
        return float(np.max(np.abs(self.b)) + 2 * (off.max() if off.size else 0.0))

    def matrix(self) -> np.ndarray:
        off = -self.offdiag
        return np.diag(self.b) + np.diag(off, 1) + np.diag(off, -1)

    def persymmetry_defect(self) -> float:
        db = np.max(np.abs(self.b - self.b[::-1]))
        du = np.max(np.abs(self.u - self.u[::-1])) if self.u.size else 0.0
        return float(db + du)

    def is_persymmetric(self, tol: float = STRUCTURAL_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.b))), float(np.max(self.u, initial=0.0)))
        return self.persymmetry_defect() <= tol * scale

    def allclose(self, other: "JacobiSpec", tol: float = SPECTRAL_TOL) -> bool:
        if other.size != self.size:
            return False
        scale = max(1.0, self.norm_scale)
        return bool(
            np.max(np.abs(self.b - other.b)) <= tol * scale
            and np.max(np.abs(self.u - other.u), initial=0.0) <= tol * scale**2
        )


@dataclass(frozen=True, eq=False)
class BiLatticeSpectrum:
    """Eigenvalues, frequencies and transfer/revival times of a chain.

    ``lattice_index`` records which points of the full bi-lattice survive; it
    is ``arange(N + 1)`` unless points were removed by spectral surgery.
    ``k`` holds the integer multiples ``omega_n = k_n * omega_tilde / Z``
    (signed, so ``k_0 = mu`` may be negative); None for irrational parameters.
    """

    lambdas: np.ndarray
    omegas: np.ndarray
    t_star: float | None
    tau: np.ndarray
    k: np.ndarray | None
    lattice_index: np.ndarray

    @property
    def size(self) -> int:
        return self.lambdas.size

    def without(self, remove: Iterable[int]) -> "BiLatticeSpectrum":
        remove = set(int(r) for r in remove)
        keep = np.array([i for i in range(self.size) if i not in remove], dtype=int)
        return BiLatticeSpectrum(
            lambdas=self.lambdas[keep],
            omegas=self.omegas[keep],
            t_star=self.t_star,
            tau=self.tau,
            k=None if self.k is None else self.k[keep],
            lattice_index=self.lattice_index[keep],
        )


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Row ``n`` of ``U`` is the unit eigenvector for ``lambdas[n]``, gauged so ``U[n, 0] > 0``."""

    U: np.ndarray
    weights: np.ndarray
    lambdas: np.ndarray

    @property
    def N(self) -> int:
        return self.U.shape[0] - 1


def _lattice_values(params: ChainParams) -> list[Number]:
    """Bi-lattice points in units of omega_tilde**2, in lattice order."""
    a, c = params.a, params.c
    return [(n // 2 + (a if n % 2 == 0 else c)) ** 2 for n in range(params.n_sites)]


def spectrum(params: ChainParams) -> BiLatticeSpectrum:
    """Quadratic bi-lattice spectrum of a para-Racah chain.

    >>> spec = spectrum(ChainParams(2, c="1/2", omega_tilde=2.0))
    >>> spec.lambdas.tolist(), spec.omegas.tolist(), round(spec.t_star, 12)
    ([0.0, 1.0], [0.0, 1.0], 3.14159265359)
    """
    w2 = params.omega_tilde**2
    lam = np.array([float(x) for x in _lattice_values(params)]) * w2
    offsets = [params.a if n % 2 == 0 else params.c for n in range(params.n_sites)]
    omegas = np.array(
        [params.omega_tilde * abs(float(n // 2 + off)) for n, off in enumerate(offsets)]
    )
    gaps = np.diff(lam)
    if np.any(gaps <= SPECTRAL_TOL * max(1.0, lam.max())):
        raise DegenerateSpectrum(f"spectrum is not strictly increasing: {lam}")

    Z = params.Z
    if Z is None:
        t_star, tau, k = None, np.array([]), None
    else:
        t_star = math.pi * Z / params.omega_tilde
        tau = np.array([2 * ell * t_star / Z for ell in range(Z // 2 + 1)])
        k = np.array([int((n // 2 + off) * Z) for n, off in enumerate(offsets)])
    return BiLatticeSpectrum(
        lambdas=lam,
        omegas=omegas,
        t_star=t_star,
        tau=tau,
        k=k,
        lattice_index=np.arange(params.n_sites),
    )


def _normalized_coefficients(N: int, a: Number, c: Number) -> tuple[list, list]:
    """Recurrence coefficients for ``omega_tilde = 1`` and ``alpha = 1/2``.

    One set of formulas per parity of N, valid for any ``a`` (``a = 0`` gives
    the free-free chain).  Exact when ``a`` and ``c`` are Fractions.
    """
    j = N // 2
    half = Fraction(1, 2)
    if N % 2:
        b = [half * (a * (a + j) + c * (c + j) + n * (N - n)) for n in range(N + 1)]
        u = [
            Fraction(n * (N + 1 - n), 4 * (N - 2 * n) * (N - 2 * n + 2))
            * (N - n + a + c)
            * (n - 1 + a + c)
            * ((n - j - 1) ** 2 - (a - c) ** 2)
            for n in range(1, N + 1)
        ]
    else:
        b = [
            Fraction(N - n, 2 * (2 * n + 1 - N)) * (n + a + c) * (n + a - c - j + 1)
            + Fraction(n, 2 * (2 * n - 1 - N)) * (N - n + a + c) * (n - j - 1 + c - a)
            + a * a
            for n in range(N + 1)
        ]
        u = [
            Fraction(n * (N + 1 - n), 4 * (N - 2 * n + 1) ** 2)
            * (a + c + n - 1)
            * (a - c + j - n + 1)
            * (c - a + j - n)
            * (a + c + N - n)
            for n in range(1, N + 1)
        ]
    return b, u


def recurrence_coefficients(params: ChainParams) -> JacobiSpec:
    """Persymmetric (``alpha = 1/2``) para-Racah Jacobi matrix for ``params``.

    Raises
    ------
    InvalidParameters
        If ``params.alpha != 1/2`` (use :func:`para_racah_jacobi`) or if some
        ``u_n`` is not positive.
    """
    if not params.is_symmetric:
        raise InvalidParameters(
            "recurrence_coefficients builds the alpha = 1/2 matrix; "
            "use para_racah_jacobi or deform_jacobi for other alpha"
        )
    b, u = _normalized_coefficients(params.N, params.a, params.c)
    if any(x <= 0 for x in u):
        raise InvalidParameters(
            f"parameters (a={params.a}, c={params.c}, N={params.N}) violate positivity of u_n"
        )
    w2 = params.omega_tilde**2
    return JacobiSpec(
        np.array([float(x) for x in b]) * w2,
        np.array([float(x) for x in u]) * w2**2,
    )


def para_racah_jacobi(params: ChainParams) -> JacobiSpec:
    """Jacobi matrix for any ``alpha``: the persymmetric one, deformed if needed."""
    base = recurrence_coefficients(params.with_alpha(Fraction(1, 2)))
    if params.is_symmetric:
        return base
    return deform_jacobi(base, params.alpha)


def dense_eigenvalues(jac: JacobiSpec) -> np.ndarray:
    """Eigenvalues from LAPACK's symmetric tridiagonal solver (ascending)."""
    if jac.size == 1:
        return jac.b.copy()
    return eigvalsh_tridiagonal(jac.b, -jac.offdiag)


def eval_monic_polynomials(jac: JacobiSpec, x2: float) -> np.ndarray:
    """Values ``P_0(x2), ..., P_{N+1}(x2)`` of the monic recurrence polynomials.

    ``P_{n+1} = (x2 - b_n) P_n - u_n P_{n-1}``, so ``P_{N+1}`` is the
    characteristic polynomial of the matrix.
    """
    P = np.empty(jac.size + 1)
    P[0] = 1.0
    prev = 0.0
    for n in range(jac.size):
        u_n = jac.u[n - 1] if n > 0 else 0.0
        P[n + 1] = (x2 - jac.b[n]) * P[n] - u_n * prev
        prev = P[n]
    return P


def _twisted_eigenvector(b: np.ndarray, u: np.ndarray, lam: float) -> np.ndarray:
    # Forward and backward pivots of A - lam I meet at the index where the
    # twist is smallest; recursing outward from there is stable in both
    # directions, unlike the plain three-term recurrence.
    N = b.size - 1
    if N == 0:
        return np.ones(1)
    a = np.sqrt(u)
    d = b - lam
    tiny = np.finfo(float).eps * max(1.0, float(np.max(np.abs(b)) + np.max(a)))
    dp = np.empty(N + 1)
    dm = np.empty(N + 1)
    dp[0] = d[0]
    for i in range(1, N + 1):
        prev = dp[i - 1] if dp[i - 1] != 0 else tiny
        dp[i] = d[i] - u[i - 1] / prev
    dm[N] = d[N]
    for i in range(N - 1, -1, -1):
        nxt = dm[i + 1] if dm[i + 1] != 0 else tiny
        dm[i] = d[i] - u[i] / nxt
    k = int(np.argmin(np.abs(dp + dm - d)))
    z = np.zeros(N + 1)
    z[k] = 1.0
    for i in range(k - 1, -1, -1):
        z[i] = a[i] * z[i + 1] / (dp[i] if dp[i] != 0 else tiny)
    for i in range(k + 1, N + 1):
        z[i] = a[i - 1] * z[i - 1] / (dm[i] if dm[i] != 0 else tiny)
    z /= np.linalg.norm(z)
    return z if z[0] > 0 else -z


def _lambdas_of(spec) -> np.ndarray:
    if isinstance(spec, (BiLatticeSpectrum, EigenBasis)):
        return spec.lambdas
    return np.asarray(spec, dtype=float)


def eigenbasis(jac: JacobiSpec, spec, tol: float = SPECTRAL_TOL) -> EigenBasis:
    """Orthonormal eigenvectors of ``jac`` at the given eigenvalues.

    Row ``n`` is proportional to ``(-1)**i P_i(lambda_n) / sqrt(u_1 ... u_i)``;
    the weights ``w_n = U[n, 0]**2`` are the Christoffel numbers of the
    discrete orthogonality measure.

    Raises
    ------
    SpectrumMismatch
        If some supplied value is not an eigenvalue of ``jac`` to ``tol``
        (relative to the matrix scale).
    """
    lambdas = _lambdas_of(spec)
    if lambdas.size != jac.size:
        raise SpectrumMismatch(f"{lambdas.size} eigenvalues for a {jac.size}x{jac.size} matrix")
    U = np.array([_twisted_eigenvector(jac.b, jac.u, lam) for lam in lambdas])
    A = jac.matrix()
    residual = np.max(np.abs(A @ U.T - U.T * lambdas), axis=0)
    scale = max(1.0, jac.norm_scale)
    bad = np.flatnonzero(residual > tol * scale)
    if bad.size:
        raise SpectrumMismatch(
            f"lambda_{bad[0]} = {lambdas[bad[0]]} is not an eigenvalue "
            f"(residual {residual[bad[0]]:.3e})"
        )
    return EigenBasis(U=U, weights=U[:, 0] ** 2, lambdas=np.array(lambdas, dtype=float))


def _check_alpha(alpha) -> float:
    alpha = float(to_number(alpha, exact=False))
    if not 0 < alpha < 1:
        raise DegenerateParameters(f"alpha = {alpha} must lie strictly inside (0, 1)")
    return alpha


def deform_jacobi(jac: JacobiSpec, alpha) -> JacobiSpec:
    """Isospectral deformation ``V A V`` of a persymmetric Jacobi matrix.

    Only the entries around the middle change.  For N odd (``N = 2j + 1``)::

        u[j+1] -> 4 alpha (1 - alpha) u[j+1]
        b[j]   -> b[j] - (1 - 2 alpha) sqrt(u[j+1])
        b[j+1] -> b[j] + (1 - 2 alpha) sqrt(u[j+1])

    and for N even (``N = 2j``) ``u[j] -> 2 (1 - alpha) u[j]``,
    ``u[j+1] -> 2 alpha u[j]``.  The sign of the diagonal shift corresponds to
    negative off-diagonal entries in ``A``, i.e. the physical stiffness
    matrix.  With alpha < 1/2 the right half of the chain becomes lighter.
    """
    alpha = _check_alpha(alpha)
    if not jac.is_persymmetric():
        raise PersymmetryRequired(
            f"deformation needs a persymmetric matrix (defect {jac.persymmetry_defect():.3e})"
        )
    if alpha == 0.5:
        return jac
    b = jac.b.copy()
    u = jac.u.copy()
    N = jac.N
    j = N // 2
    if N % 2:
        shift = (1 - 2 * alpha) * math.sqrt(u[j])
        b[j + 1] = b[j] + shift
        b[j] = b[j] - shift
        u[j] = 4 * alpha * (1 - alpha) * u[j]
    else:
        mid = u[j - 1]
        u[j - 1] = 2 * (1 - alpha) * mid
        u[j] = 2 * alpha * mid
    return JacobiSpec(b, u)


def _mirror_parity_defect(U: np.ndarray) -> float:
    signs = (-1.0) ** np.arange(U.shape[0])
    return float(np.max(np.abs(U[:, ::-1] - signs[:, None] * U)))


def deformed_eigenbasis(basis: EigenBasis, alpha) -> EigenBasis:
    """Eigenbasis of ``deform_jacobi(jac, alpha)`` from the basis of ``jac``.

    Entries in the left half are scaled by ``sqrt(1 + (-1)**n (1 - 2 alpha))``,
    those in the right half by ``sqrt(1 - (-1)**n (1 - 2 alpha))`` and, for
    N even, the middle column is left alone.
    """
    alpha = _check_alpha(alpha)
    if _mirror_parity_defect(basis.U) > SPECTRAL_TOL:
        raise PersymmetryRequired("basis rows do not alternate between mirror-symmetric and antisymmetric")
    N = basis.N
    j = N // 2
    parity = (-1.0) ** np.arange(N + 1)
    left = np.sqrt(1 + parity * (1 - 2 * alpha))[:, None]
    right = np.sqrt(1 - parity * (1 - 2 * alpha))[:, None]
    cols = np.arange(N + 1)[None, :]
    if N % 2:
        factor = np.where(cols <= j, left, right)
    else:
        factor = np.where(cols < j, left, np.where(cols == j, 1.0, right))
    U = basis.U * factor
    return EigenBasis(U=U, weights=U[:, 0] ** 2, lambdas=basis.lambdas)


# -- spectral surgery -------------------------------------------------------


def _christoffel_step(b: list, u: list, lam: float, scale: float):
    """Remove ``lam`` from the spectrum; None when the recurrence breaks down.

    ``E_n = P_{n+1}(lam) / P_n(lam)``; the new coefficients are
    ``b'_n = b_{n+1} + E_{n+1} - E_n`` and ``u'_n = u_n E_n / E_{n-1}``.
    Intermediate ``u'`` may be negative when an interior point is removed.
    """
    N = len(b) - 1
    guard = math.sqrt(np.finfo(float).eps) * scale
    # Forward pivots lose accuracy where P_n(lam) decays, so the ratios are
    # twisted: forward below index t, backward (E_n = u_{n+1} / D_{n+1}) above.
    fwd = [lam - b[0]]
    for n in range(1, N + 1):
        prev = fwd[-1] if abs(fwd[-1]) >= guard else math.copysign(guard, fwd[-1] or 1.0)
        fwd.append((lam - b[n]) - u[n - 1] / prev)
    bwd = [0.0] * (N + 1)
    bwd[N] = lam - b[N]
    for n in range(N - 1, -1, -1):
        nxt = bwd[n + 1] if abs(bwd[n + 1]) >= guard else math.copysign(guard, bwd[n + 1] or 1.0)
        bwd[n] = (lam - b[n]) - u[n] / nxt
    twist = min(range(N + 1), key=lambda n: abs(fwd[n] + bwd[n] - (lam - b[n])))
    E = []
    for n in range(N + 1):
        if n < twist:
            E.append(fwd[n])
        elif n == N:
            E.append(0.0)
        else:
            E.append(u[n] / bwd[n + 1] if abs(bwd[n + 1]) >= guard else math.inf)
    if any(abs(e) < guard or not math.isfinite(e) for e in E[:-1]):
        return None
    new_b = [b[n + 1] + E[n + 1] - E[n] for n in range(N)]
    new_u = [u[n - 1] * E[n] / E[n - 1] for n in range(1, N)]
    return new_b, new_u


def _lanczos(nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi matrix of the discrete measure ``sum_s weights[s] delta(x - nodes[s])``."""
    n = nodes.size
    q = np.sqrt(weights / weights.sum())
    Q = np.zeros((n, n))
    Q[0] = q
    b = np.zeros(n)
    beta = np.zeros(max(n - 1, 0))
    for k in range(n):
        v = nodes * Q[k]
        b[k] = Q[k] @ v
        if k == n - 1:
            break
        v = v - b[k] * Q[k] - (beta[k - 1] * Q[k - 1] if k else 0.0)
        for _ in range(2):
            v -= Q[: k + 1].T @ (Q[: k + 1] @ v)
        beta[k] = np.linalg.norm(v)
        Q[k + 1] = v / beta[k]
    return b, beta**2


def _validate_removal(remove, size: int) -> list[int]:
    idx = sorted(set(int(r) for r in remove))
    N = size - 1
    if not idx or idx[0] < 0 or idx[-1] > N:
        raise UnsupportedSurgery(f"removal indices {idx} outside 0..{N}")
    if len(idx) >= size:
        raise UnsupportedSurgery("cannot remove every spectral point")
    if len(idx) == 1:
        if idx[0] not in (0, N):
            raise PositivityViolation(
                f"removing the single interior point {idx[0]} breaks positivity of the weights; "
                "remove a consecutive pair instead"
            )
    elif len(idx) == 2:
        if idx[1] != idx[0] + 1:
            raise UnsupportedSurgery(f"interior removals must be a consecutive pair, got {idx}")
    else:
        raise UnsupportedSurgery("remove a single end point or one consecutive pair at a time")
    return idx


def _modified_weights(basis: EigenBasis, idx: list[int]) -> tuple[np.ndarray, np.ndarray]:
    lambdas = basis.lambdas
    keep = np.array([s for s in range(lambdas.size) if s not in idx])
    factor = np.prod([lambdas[keep] - lambdas[k] for k in idx], axis=0)
    weights = factor * basis.weights[keep]
    weights = weights / weights.sum()
    if np.any(weights <= 0):
        raise PositivityViolation("modified weights are not positive")
    return lambdas[keep], weights


def spectral_surgery(jac: JacobiSpec, basis: EigenBasis, remove, method: str = "weights") -> JacobiSpec:
    """Christoffel transform deleting spectral points from ``jac``.

    ``remove`` is ``{0}``, ``{N}`` or a consecutive pair ``{k, k+1}``.

    With ``method="weights"`` (default) the measure is multiplied by
    ``prod_k (x - lambda_k)`` and the new matrix is rebuilt by Lanczos with
    full reorthogonalization.  ``method="recurrence"`` runs the three-term
    Christoffel update once per removed point; when it breaks down
    (``P_n(lambda_k)`` vanishes for some ``n``) the other removal order is
    tried and then the weights route.  Both give the same matrix, but the
    recurrence can lose several digits of persymmetry near a breakdown.
    """
    idx = _validate_removal(remove, jac.size)
    if method not in ("weights", "recurrence"):
        raise ValueError(f"unknown surgery method {method!r}")
    lambdas = basis.lambdas
    scale = max(1.0, jac.norm_scale)

    result = None
    if method == "recurrence":
        for order in (idx, idx[::-1]):
            b, u = list(jac.b), list(jac.u)
            for k in order:
                step = _christoffel_step(b, u, lambdas[k], scale)
                if step is None:
                    break
                b, u = step
            else:
                result = (np.array(b), np.array(u))
                break
            if len(idx) == 1:
                break
    if result is None:
        result = _lanczos(*_modified_weights(basis, idx))

    b, u = result
    if np.any(u <= 0):
        raise PositivityViolation(f"surgery produced non-positive off-diagonal squares {u}")
    return JacobiSpec(b, u)
