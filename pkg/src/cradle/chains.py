"""Masses and springs from spectral data, and back.

A chain is stored as ``N + 1`` masses and ``N + 2`` spring constants
``K_0 .. K_{N+1}``; the outer two are the wall springs (zero for free-free
chains).  Its Jacobi matrix has ``b_i = (K_i + K_{i+1}) / m_i`` and
``u_i = K_i**2 / (m_{i-1} m_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exceptions import InvalidParameters, NotRealizable, PositivityViolation
from .spectral import (
    SPECTRAL_TOL,
    Boundary,
    ChainParams,
    EigenBasis,
    JacobiSpec,
    Number,
    eigenbasis,
    recurrence_coefficients,
    spectrum,
    to_number,
)

__all__ = [
    "ChainSpec",
    "AuxiliaryRecurrence",
    "pochhammer",
    "para_racah_blocks",
    "auxiliary_recurrence",
    "free_free_ratios",
    "dual_hahn_ratios",
    "build_free_free",
    "build_fixed_fixed",
    "build_deformed",
    "build_chain",
    "chain_to_jacobi",
    "jacobi_to_chain_free_free",
    "jacobi_to_chain_fixed_fixed",
    "gamma_vector",
    "deformation_ratios",
]


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Physical chain: masses ``m_0..m_N`` and springs ``K_0..K_{N+1}``.

    ``params`` records the para-Racah parameters the chain was built from
    (None for externally supplied chains) and ``removed`` the lattice indices
    deleted by spectral surgery.
    """

    masses: np.ndarray
    springs: np.ndarray
    boundary: Boundary
    params: ChainParams | None = None
    removed: tuple[int, ...] = ()

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        K = np.array(self.springs, dtype=float)
        boundary = Boundary(self.boundary)
        if m.ndim != 1 or m.size < 1 or K.shape != (m.size + 1,):
            raise InvalidParameters(
                f"need N+1 masses and N+2 springs, got {m.size} and {K.size}"
            )
        if np.any(m <= 0):
            raise InvalidParameters("masses must be positive")
        if np.any(K[1:-1] <= 0):
            raise InvalidParameters("interior springs must be positive")
        if boundary is Boundary.FREE_FREE and (K[0] != 0 or K[-1] != 0):
            raise InvalidParameters("free-free chains have K_0 = K_{N+1} = 0")
        if boundary is Boundary.FIXED_FIXED and (K[0] <= 0 or K[-1] <= 0):
            raise InvalidParameters("fixed-fixed chains need positive wall springs")
        m.flags.writeable = False
        K.flags.writeable = False
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "springs", K)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "removed", tuple(int(r) for r in self.removed))

    @property
    def n_sites(self) -> int:
        return self.masses.size

    @property
    def N(self) -> int:
        return self.masses.size - 1

    def stiffness_matrix(self) -> np.ndarray:
        """Stiffness matrix ``K`` with the wall springs on the corners."""
        K = self.springs
        main = K[:-1] + K[1:]
        off = -K[1:-1]
        return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)

    def normalized(self, omega_tilde: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``m_i / m_0`` and ``K_i / (omega_tilde**2 m_0)``."""
        if omega_tilde is None:
            omega_tilde = self.params.omega_tilde if self.params is not None else 1.0
        m0 = self.masses[0]
        return self.masses / m0, self.springs / (omega_tilde**2 * m0)

    def is_mirror_symmetric(self, tol: float = SPECTRAL_TOL) -> bool:
        m, K = self.masses, self.springs
        return bool(
            np.max(np.abs(m - m[::-1])) <= tol * m.max()
            and np.max(np.abs(K - K[::-1])) <= tol * K.max()
        )


@dataclass(frozen=True)
class AuxiliaryRecurrence:
    """``y_i = K_{i+1} / m_i`` together with the para-Racah blocks ``A_n``, ``C_n``."""

    y: np.ndarray
    A_seq: np.ndarray
    C_seq: np.ndarray


def pochhammer(x, k: int):
    """Rising factorial ``x (x + 1) ... (x + k - 1)``; exact for Fractions."""
    out = Fraction(1) if isinstance(x, (int, Fraction)) else 1.0
    for i in range(k):
        out *= x + i
    return out


def para_racah_blocks(N: int, c: Number) -> tuple[list, list]:
    """Free-free building blocks ``A_n`` and ``C_n`` for ``omega_tilde = 1``.

    ``b_n = A_n + C_n`` and ``u_n = A_{n-1} C_n``.
    """
    j = N // 2
    if N % 2:
        A = [Fraction(N - n, 2 * (2 * n - N)) * (n + c) * (n - c - j) for n in range(N + 1)]
        C = [Fraction(n, 2 * (2 * n - N)) * (N - n + c) * (n - j - 1 + c) for n in range(N + 1)]
    else:
        A = [Fraction(N - n, 2 * (2 * n + 1 - N)) * (n + c) * (n - c - j + 1) for n in range(N + 1)]
        C = [Fraction(n, 2 * (2 * n - 1 - N)) * (N - n + c) * (n - j - 1 + c) for n in range(N + 1)]
    return A, C


def _y_sequence(jac: JacobiSpec) -> np.ndarray:
    y = np.empty(jac.size)
    y[0] = jac.b[0]
    for i in range(1, jac.size):
        y[i] = jac.b[i] - jac.u[i - 1] / y[i - 1] if y[i - 1] != 0 else np.nan
    return y


def auxiliary_recurrence(params: ChainParams) -> AuxiliaryRecurrence:
    """``y_i`` from the Jacobi matrix, next to the closed-form blocks."""
    if params.boundary is not Boundary.FREE_FREE:
        raise InvalidParameters("the A_n / C_n blocks are defined for free-free chains")
    jac = recurrence_coefficients(params.with_alpha(Fraction(1, 2)))
    A, C = para_racah_blocks(params.N, params.c)
    w2 = params.omega_tilde**2
    return AuxiliaryRecurrence(
        y=_y_sequence(jac)[:-1],
        A_seq=np.array([float(x) for x in A]) * w2,
        C_seq=np.array([float(x) for x in C]) * w2,
    )


def free_free_ratios(N: int, c: Number, method: str = "closed_form") -> tuple[list, list]:
    """Normalized free-free chain, ``m_i / m_0`` and ``K_i / (omega_tilde**2 m_0)``.

    ``method="closed_form"`` uses the Pochhammer expressions,
    ``method="product"`` the products of ``A_n`` over ``u_n``.  Spring lists
    run over ``K_1..K_N``.  Exact when ``c`` is a Fraction.
    """
    j = N // 2
    A, C = para_racah_blocks(N, c)
    if method == "product":
        u = [A[n - 1] * C[n] for n in range(1, N + 1)]
        masses = [Fraction(1)]
        for i in range(1, N + 1):
            masses.append(masses[-1] * A[i - 1] ** 2 / u[i - 1])
        springs = [A[i - 1] * masses[i - 1] for i in range(1, N + 1)]
        return masses, springs
    if method != "closed_form":
        raise ValueError(f"unknown method {method!r}")
    masses = []
    for i in range(N + 1):
        if N % 2:
            num = pochhammer(Fraction(-N), i) * pochhammer(c, i) * pochhammer(-j - c, i)
            extra = Fraction(N - 2 * i, N)
        else:
            num = pochhammer(Fraction(-N), i) * pochhammer(c, i) * pochhammer(-j - c + 1, i)
            extra = 1
        den = math.factorial(i) * pochhammer(-N + 1 - c, i) * pochhammer(-j + c, i)
        masses.append(num / den * extra)
    denom = (lambda i: 2 * (2 * i - N)) if N % 2 else (lambda i: 2 * (2 * i - 1 - N))
    springs = [
        Fraction(i, denom(i)) * (N - i + c) * (i - j - 1 + c) * masses[i] for i in range(1, N + 1)
    ]
    return masses, springs


def dual_hahn_ratios(N: int) -> tuple[list[Fraction], list[Fraction]]:
    """Binomial form of the ``c = 1/2`` chain (normalized as in :func:`free_free_ratios`)."""
    masses = [Fraction(math.comb(N, i) ** 2, math.comb(2 * N, 2 * i)) for i in range(N + 1)]
    springs = [
        Fraction(N * N * math.comb(N - 1, i - 1) ** 2, 4 * math.comb(2 * N, 2 * i - 1))
        for i in range(1, N + 1)
    ]
    return masses, springs


def _require(params: ChainParams, boundary: Boundary):
    if params.boundary is not boundary:
        raise InvalidParameters(f"expected {boundary.value} parameters, got {params.boundary.value}")


def build_free_free(params: ChainParams, method: str = "closed_form") -> ChainSpec:
    """Mirror-symmetric free-free chain with perfect transfer.

    The closed-form masses are checked against the product form before
    returning; both are exact for rational ``c``.
    """
    _require(params, Boundary.FREE_FREE)
    if not params.is_symmetric:
        raise InvalidParameters("build_free_free makes alpha = 1/2 chains; use build_deformed")
    m, K = free_free_ratios(params.N, params.c, method)
    other = "product" if method == "closed_form" else "closed_form"
    m2, K2 = free_free_ratios(params.N, params.c, other)
    for x, y in zip(m + K, m2 + K2):
        if abs(float(x) - float(y)) > SPECTRAL_TOL * max(1.0, abs(float(x))):
            raise ArithmeticError(f"closed form and product form disagree ({x} vs {y})")
    m0 = params.scale
    w2 = params.omega_tilde**2
    masses = np.array([float(x) for x in m]) * m0
    springs = np.concatenate([[0.0], np.array([float(x) for x in K]) * w2 * m0, [0.0]])
    return ChainSpec(masses, springs, Boundary.FREE_FREE, params)


def gamma_vector(basis: EigenBasis) -> np.ndarray:
    """``gamma_i = sum over even n of U[n, i] U[n, 0] / lambda_n``."""
    even = slice(0, None, 2)
    U = basis.U[even]
    return (U * (U[:, :1] / basis.lambdas[even, None])).sum(axis=0)


def jacobi_to_chain_fixed_fixed(
    jac: JacobiSpec, basis: EigenBasis, m0: float = 1.0, params: ChainParams | None = None,
    removed: Sequence[int] = (),
) -> ChainSpec:
    """Mirror-symmetric fixed-fixed chain realizing a persymmetric, nonsingular ``jac``.

    ``m_i = m_0 (gamma_i / gamma_0)**2``,
    ``K_i = m_0 gamma_{i-1} gamma_i sqrt(u_i) / gamma_0**2`` and
    ``K_0 = K_{N+1} = m_0 / (2 gamma_0)``.
    """
    if not jac.is_persymmetric():
        raise NotRealizable("gamma-sum reconstruction needs a persymmetric matrix")
    if np.any(basis.lambdas <= 0):
        raise NotRealizable("fixed-fixed chains need a positive definite matrix")
    gamma = gamma_vector(basis)
    if not (np.all(gamma > 0) or np.all(gamma < 0)):
        raise PositivityViolation(f"gamma changes sign: {gamma}")
    ratio = gamma / gamma[0]
    masses = m0 * ratio**2
    inner = m0 * ratio[:-1] * ratio[1:] * np.sqrt(jac.u)
    wall = m0 / (2 * gamma[0])
    if wall <= 0:
        raise PositivityViolation(f"wall spring K_0 = {wall} is not positive")
    springs = np.concatenate([[wall], inner, [wall]])
    return ChainSpec(masses, springs, Boundary.FIXED_FIXED, params, tuple(removed))


def build_fixed_fixed(params: ChainParams, scale_by: str = "m0") -> ChainSpec:
    """Mirror-symmetric fixed-fixed chain from the gamma sums.

    ``scale_by="m0"`` reads ``params.scale`` as the first mass;
    ``scale_by="K0"`` reads it as the wall spring ``K_0``.
    """
    _require(params, Boundary.FIXED_FIXED)
    if not params.is_symmetric:
        raise InvalidParameters("build_fixed_fixed makes alpha = 1/2 chains; use build_deformed")
    jac = recurrence_coefficients(params)
    basis = eigenbasis(jac, spectrum(params))
    chain = jacobi_to_chain_fixed_fixed(jac, basis, 1.0, params)
    if scale_by == "m0":
        factor = params.scale
    elif scale_by == "K0":
        factor = params.scale / chain.springs[0]
    else:
        raise ValueError(f"scale_by must be 'm0' or 'K0', got {scale_by!r}")
    return ChainSpec(chain.masses * factor, chain.springs * factor, Boundary.FIXED_FIXED, params)


def deformation_ratios(N: int, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers taking the alpha = 1/2 chain to the deformed one.

    Returns factors for ``m_0..m_N`` and ``K_0..K_{N+1}``; the wall springs
    follow the same rule, so a fixed-fixed chain keeps ``K_0`` and gets
    ``K_{N+1} = alpha / (1 - alpha) K_0``.
    """
    alpha = float(to_number(alpha, exact=False))
    j = N // 2
    r = alpha / (1 - alpha)
    i_m = np.arange(N + 1)
    i_k = np.arange(N + 2)
    if N % 2:
        fm = np.where(i_m <= j, 1.0, r)
        fk = np.where(i_k <= j, 1.0, np.where(i_k == j + 1, 2 * alpha, r))
    else:
        fm = np.where(i_m <= j - 1, 1.0, np.where(i_m == j, 1 / (2 * (1 - alpha)), r))
        fk = np.where(i_k <= j, 1.0, r)
    return fm, fk


def build_deformed(params: ChainParams, symmetric: bool = False) -> ChainSpec:
    """Isospectrally deformed chain for ``params.alpha``.

    The mirror-symmetric chain is built first and then reweighted: for N odd
    the right half of the masses is multiplied by ``alpha / (1 - alpha)`` and
    the middle spring by ``2 alpha``.  With ``symmetric=True`` everything is
    further multiplied by ``2 (1 - alpha)``.
    """
    from .spectral import _check_alpha

    alpha = _check_alpha(params.alpha)
    base_params = params.with_alpha(Fraction(1, 2))
    base = build_chain(base_params)
    if alpha == 0.5:
        return ChainSpec(base.masses, base.springs, base.boundary, params)
    fm, fk = deformation_ratios(params.N, alpha)
    overall = 2 * (1 - alpha) if symmetric else 1.0
    return ChainSpec(base.masses * fm * overall, base.springs * fk * overall, base.boundary, params)


def build_chain(params: ChainParams) -> ChainSpec:
    """Dispatch on boundary type and alpha."""
    if not params.is_symmetric:
        return build_deformed(params)
    if params.boundary is Boundary.FREE_FREE:
        return build_free_free(params)
    return build_fixed_fixed(params)


def chain_to_jacobi(chain: ChainSpec) -> JacobiSpec:
    m, K = chain.masses, chain.springs
    b = (K[:-1] + K[1:]) / m
    u = K[1:-1] ** 2 / (m[:-1] * m[1:])
    return JacobiSpec(b, u)


def jacobi_to_chain_free_free(
    jac: JacobiSpec, m0: float = 1.0, params: ChainParams | None = None,
    removed: Sequence[int] = (), tol: float = SPECTRAL_TOL,
) -> ChainSpec:
    """Free-free chain with Jacobi matrix ``jac``.

    Runs ``y_0 = b_0``, ``y_i = b_i - u_i / y_{i-1}`` and sets
    ``m_{i+1} = m_i y_i**2 / u_{i+1}``, ``K_{i+1} = y_i m_i``.  The final
    ``y_N`` must vanish (zero eigenvalue) for the chain to be free at both ends.

    Raises
    ------
    NotRealizable
        If some ``y_i <= 0`` or ``jac`` is singular in the wrong way.
    """
    y = _y_sequence(jac)
    if np.any(~np.isfinite(y[:-1])) or np.any(y[:-1] <= 0):
        raise NotRealizable(f"y sequence not positive: {y[:-1]}")
    if abs(y[-1]) > tol * max(1.0, jac.norm_scale):
        raise NotRealizable(f"matrix has no zero eigenvalue (y_N = {y[-1]:.3e})")
    masses = np.empty(jac.size)
    masses[0] = m0
    for i in range(jac.N):
        masses[i + 1] = masses[i] * y[i] ** 2 / jac.u[i]
    springs = np.concatenate([[0.0], y[:-1] * masses[:-1], [0.0]])
    return ChainSpec(masses, springs, Boundary.FREE_FREE, params, tuple(removed))
