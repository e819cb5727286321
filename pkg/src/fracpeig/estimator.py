"""scikit-learn style wrapper around the solvers.

``fit`` takes the weight values (one per interior cell) and stores the
first two eigenpairs as fitted attributes. There is no ``predict``; this is
only meant to make parameter sweeps with ``get_params``/``set_params`` and
``sklearn.base.clone`` convenient.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .eigensolvers import SolverConfig, p2_oracle_spectrum, solve_lambda1, solve_lambda2_path
from .energy import WeightField
from .grid import DomainSpec, build_grid
from .kernel import assemble_kernel


class FractionalEigensolver(BaseEstimator):
    """First two weighted eigenvalues on an interval, rectangle or disk.

    Parameters
    ----------
    s, p : float
        Fractional order and exponent.
    shape : {"interval", "rectangle", "disk"}
    n : int
        Cells per axis of the bounding box.
    second : bool
        Also compute ``lambda_2`` (the expensive part).
    use_oracle : bool
        For ``p == 2``, take both eigenpairs from the exact linear solver.
    seed, tol
        Forwarded to :class:`SolverConfig`.

    Attributes
    ----------
    lambda1_, eigenfunction1_ : float, ndarray
    lambda2_, eigenfunction2_ : float, ndarray
        Only when ``second`` is true.
    converged_ : bool
    domain_, kernel_ : fitted discretization
    """

    def __init__(self, s=0.4, p=2.0, shape="interval", n=32, second=True, use_oracle=False, seed=0, tol=1e-8):
        self.s = s
        self.p = p
        self.shape = shape
        self.n = n
        self.second = second
        self.use_oracle = use_oracle
        self.seed = seed
        self.tol = tol

    def _domain(self):
        if self.shape == "interval":
            return build_grid(DomainSpec.interval(0.0, 1.0, self.n))
        if self.shape == "rectangle":
            return build_grid(DomainSpec.rectangle(n=self.n))
        if self.shape == "disk":
            return build_grid(DomainSpec.disk(n=self.n))
        raise ValueError(f"unknown shape {self.shape!r}")

    def fit(self, X, y=None):
        """Solve with weight ``X`` (shape ``(n_cells,)`` or ``(n_cells, 1)``)."""
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected one weight value per cell, got shape {X.shape}")
            X = X[:, 0]
        domain = self._domain()
        if X.shape[0] != domain.n_cells:
            raise ValueError(f"weight has {X.shape[0]} values, grid has {domain.n_cells} cells")
        weight = WeightField(X, domain.cell_volume, "estimator input")
        kernel = assemble_kernel(domain, self.s, self.p)
        config = SolverConfig(tol_residual=self.tol, seed=self.seed)

        if self.use_oracle:
            pairs = p2_oracle_spectrum(kernel, weight, 2 if self.second else 1)
            first = pairs[0]
            second = pairs[1] if self.second and len(pairs) > 1 else None
            converged = not pairs.truncated
        else:
            first = solve_lambda1(kernel, weight, self.p, config)
            converged = first.converged
            second = None
            if self.second:
                est, path = solve_lambda2_path(kernel, weight, self.p, first.u, config)
                second = type(first)(est, path.max_point.copy(), path.residual, path.iterations, path.converged)
                converged = converged and path.converged

        self.domain_ = domain
        self.kernel_ = kernel
        self.lambda1_ = first.lam
        self.eigenfunction1_ = first.u
        if second is not None:
            self.lambda2_ = second.lam
            self.eigenfunction2_ = second.u
        self.converged_ = bool(converged)
        self.n_features_in_ = 1
        return self

    def eigenvalues(self) -> np.ndarray:
        check_is_fitted(self, "lambda1_")
        vals = [self.lambda1_]
        if hasattr(self, "lambda2_"):
            vals.append(self.lambda2_)
        return np.array(vals)
