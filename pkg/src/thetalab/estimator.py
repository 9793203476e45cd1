"""Scikit-learn compatible transformer: torus coordinates in, moment-map
simplex coordinates of the theta embedding out."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .abelian import AbelianVariety, section_basis
from .embedding import amoeba_points
from .kummer import invariant_basis
from .theta import PeriodMatrix, TruncationPolicy


class ThetaEmbedding(BaseEstimator, TransformerMixin):
    """Maps torus points (x, y) to the simplex image of the level-k theta
    embedding.

    Parameters
    ----------
    omega : array-like (n, n) complex period matrix (default [[1j]]).
    family : "abelian" or "kummer".
    level : embedding level k.
    eps : truncation tolerance for the underlying lattice sums.
    """

    def __init__(self, omega=None, family="abelian", level=2, eps=1e-12):
        self.omega = omega
        self.family = family
        self.level = level
        self.eps = eps

    def fit(self, X=None, y=None):
        omega = np.array([[1j]]) if self.omega is None else np.asarray(
            self.omega, dtype=complex)
        if self.family not in ("abelian", "kummer"):
            raise ValueError(f"family must be abelian|kummer, "
                             f"got {self.family!r}")
        if int(self.level) < 1:
            raise ValueError("level must be >= 1")
        pol = TruncationPolicy(eps=self.eps)
        self.variety_ = AbelianVariety(PeriodMatrix(omega))
        if self.family == "kummer":
            self.basis_ = invariant_basis(self.variety_, int(self.level),
                                          pol=pol)
        else:
            self.basis_ = section_basis(self.variety_, int(self.level),
                                        pol=pol)
        self.n_features_in_ = 2 * self.variety_.n
        self.n_components_ = self.basis_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        n = self.variety_.n
        if X.shape[1] != 2 * n:
            raise ValueError(f"expected {2 * n} columns (x..., y...), "
                             f"got {X.shape[1]}")
        return amoeba_points(self.variety_, self.basis_, X[:, :n], X[:, n:])
