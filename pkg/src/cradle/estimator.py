"""scikit-learn style wrapper around chain construction and evolution."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .chains import build_chain
from .dynamics import _modal_evolution, modal_model
from .spectral import Boundary, ChainParams


class NewtonCradle(TransformerMixin, BaseEstimator):
    """Mass-spring chain engineered from a para-Racah spectrum.

    ``fit`` builds the chain; ``transform`` maps initial mass-weighted momenta
    (one row per sample, chain at rest) to the momenta at ``time``.  With the
    default ``time=None`` the transfer time ``t*`` is used, so a mirror-symmetric
    chain returns every row reversed (up to the sign ``(-1)**mu``).

    Parameters
    ----------
    n_sites : int
        Number of masses.
    boundary : {"free-free", "fixed-fixed"}
    a, c, alpha : rational or str
        Spectral parameters, e.g. ``c="1/4"``.
    omega_tilde, scale : float
        Frequency scale and first mass.
    relaxed : bool
        Skip the perfect-transfer parity rules.
    time : float, optional
        Evolution time for ``transform``.

    Attributes
    ----------
    chain_ : ChainSpec
    jacobi_ : JacobiSpec
    spectrum_ : BiLatticeSpectrum
    basis_ : EigenBasis
    masses_, springs_ : ndarray
    t_star_ : float or None

    Examples
    --------
    >>> import numpy as np
    >>> est = NewtonCradle(n_sites=4, c="1/2").fit()
    >>> np.round(est.transform(np.eye(4)[:1]), 12) + 0.0
    array([[0., 0., 0., 1.]])
    """

    def __init__(
        self,
        n_sites=4,
        boundary="free-free",
        a="0",
        c="1/2",
        alpha="1/2",
        omega_tilde=1.0,
        scale=1.0,
        relaxed=False,
        time=None,
    ):
        self.n_sites = n_sites
        self.boundary = boundary
        self.a = a
        self.c = c
        self.alpha = alpha
        self.omega_tilde = omega_tilde
        self.scale = scale
        self.relaxed = relaxed
        self.time = time

    def _params(self) -> ChainParams:
        def num(x):
            return Fraction(x) if isinstance(x, str) else x

        return ChainParams(
            n_sites=self.n_sites,
            boundary=Boundary(self.boundary),
            a=num(self.a),
            c=num(self.c),
            alpha=num(self.alpha),
            omega_tilde=self.omega_tilde,
            scale=self.scale,
            relaxed=self.relaxed,
        )

    def fit(self, X=None, y=None):
        """Build the chain.  ``X`` is only checked for its width when given."""
        params = self._params()
        if X is not None:
            X = check_array(X)
            if X.shape[1] != params.n_sites:
                raise ValueError(f"X has {X.shape[1]} columns, the chain has {params.n_sites} masses")
        self.chain_ = build_chain(params)
        self.jacobi_, self.spectrum_, self.basis_ = modal_model(self.chain_)
        self.masses_ = np.array(self.chain_.masses)
        self.springs_ = np.array(self.chain_.springs)
        self.t_star_ = self.spectrum_.t_star
        self.n_features_in_ = params.n_sites
        return self

    def _time(self) -> float:
        if self.time is not None:
            return float(self.time)
        if self.t_star_ is None:
            raise ValueError("no transfer time for irrational parameters; set time=")
        return self.t_star_

    def transform(self, X):
        """Momenta at ``time`` for initial momenta ``X`` (shape ``(n_samples, n_sites)``)."""
        check_is_fitted(self, "chain_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        t = np.array([self._time()])
        zeros = np.zeros(X.shape[1])
        return np.vstack(
            [_modal_evolution(self.basis_, self.spectrum_.omegas, zeros, row, t)[1][0] for row in X]
        )
