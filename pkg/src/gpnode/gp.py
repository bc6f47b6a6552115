"""Exact Gaussian-process regression with an ARD squared-exponential kernel.

A :class:`LocalGP` holds a set of training pairs, the lower-triangular
Cholesky factor of the noise-regularized Gram matrix, and one weight vector
per output dimension. Points can be added one at a time: the factor is
extended by a single row (one triangular solve plus one scalar square root)
instead of being recomputed from scratch.

``sigma_f`` and ``sigma_n`` are standard deviations; they enter the math as
``sigma_f**2`` and ``sigma_n**2``. The prior mean is zero, so an empty model
predicts the zero vector with variance ``sigma_f**2``. All arithmetic is in
64-bit floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.linalg import solve_triangular as _solve_triangular

__all__ = [
    "FactorizationError",
    "Hyperparameters",
    "LocalGP",
    "kernel_eval",
    "fit",
]

# Diagonal jitter escalation: first retry adds JITTER_BASE * sigma_f**2,
# each further retry multiplies by JITTER_GROWTH, at most JITTER_RETRIES tries.
JITTER_BASE = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 4

_INITIAL_CAPACITY = 16


class FactorizationError(RuntimeError):
    """Gram factorization failed even after diagonal jitter escalation."""

    def __init__(self, jitters):
        self.jitters = tuple(jitters)
        levels = ", ".join(f"{j:.3e}" for j in self.jitters)
        super().__init__(
            f"Cholesky factorization failed; attempted jitter levels: [{levels}]"
        )


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Kernel and noise parameters shared by all outputs of one model.

    Parameters
    ----------
    sigma_f : float
        Signal standard deviation (> 0).
    length_scales : array_like
        One positive length scale per input dimension, shape ``(d_in,)``.
    sigma_n : float
        Noise standard deviation (> 0).
    d_in : int
        Input dimension.
    d_out : int
        Output dimension.
    """

    sigma_f: float
    length_scales: np.ndarray
    sigma_n: float
    d_in: int
    d_out: int

    def __post_init__(self):
        ls = np.asarray(self.length_scales, dtype=np.float64)
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "sigma_f", float(self.sigma_f))
        object.__setattr__(self, "sigma_n", float(self.sigma_n))
        if not isinstance(self.d_in, int) or self.d_in < 1:
            raise ValueError(f"d_in must be a positive integer, got {self.d_in!r}")
        if not isinstance(self.d_out, int) or self.d_out < 1:
            raise ValueError(f"d_out must be a positive integer, got {self.d_out!r}")
        if ls.ndim != 1 or ls.shape[0] != self.d_in:
            raise ValueError(
                f"length_scales must have shape ({self.d_in},), got {ls.shape}"
            )
        if not np.all(np.isfinite(ls)) or not np.all(ls > 0.0):
            raise ValueError("every length scale must be finite and > 0")
        if not (math.isfinite(self.sigma_f) and self.sigma_f > 0.0):
            raise ValueError(f"sigma_f must be finite and > 0, got {self.sigma_f}")
        if not (math.isfinite(self.sigma_n) and self.sigma_n > 0.0):
            raise ValueError(f"sigma_n must be finite and > 0, got {self.sigma_n}")


def _check_input(x, d_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d_in,):
        raise ValueError(f"input vector must have shape ({d_in},), got {x.shape}")
    return x


def kernel_eval(x, x2, hp: Hyperparameters) -> float:
    """ARD-SE kernel: sigma_f^2 * exp(-1/2 * sum_d (x_d - x2_d)^2 / l_d^2)."""
    x = _check_input(x, hp.d_in)
    x2 = _check_input(x2, hp.d_in)
    with np.errstate(over="ignore"):  # overflow to inf means k -> 0
        d = (x - x2) / hp.length_scales
        return hp.sigma_f**2 * math.exp(-0.5 * float(d @ d))


def _kernel_vector(X: np.ndarray, x: np.ndarray, hp: Hyperparameters) -> np.ndarray:
    """k(X, x) for row-stacked inputs X, shape (n,)."""
    with np.errstate(over="ignore"):
        d = (X - x) / hp.length_scales
        return hp.sigma_f**2 * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))


def _kernel_matrix(X: np.ndarray, hp: Hyperparameters) -> np.ndarray:
    # pairwise differences, not the expanded square: the latter turns huge
    # finite coordinates into inf - inf = nan on the diagonal
    with np.errstate(over="ignore"):
        s = X / hp.length_scales
        diff = s[:, None, :] - s[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        return hp.sigma_f**2 * np.exp(-0.5 * d2)


class LocalGP:
    """One exact GP: shared kernel/Cholesky factor, one weight vector per output.

    Not safe for concurrent mutation; serialize reads against writes.
    """

    def __init__(self, hp: Hyperparameters):
        self.hp = hp
        self._n = 0
        cap = _INITIAL_CAPACITY
        self._X = np.zeros((cap, hp.d_in))
        self._Y = np.zeros((cap, hp.d_out))
        self._L = np.zeros((cap, cap))
        self._beta = np.zeros((cap, hp.d_out))  # forward-solved L^-1 Y
        self._alpha = np.zeros((0, hp.d_out))  # (K + sigma_n^2 I)^-1 Y

    @property
    def n_points(self) -> int:
        return self._n

    @property
    def X(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def Y(self) -> np.ndarray:
        return self._Y[: self._n]

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular factor of K(X, X) + sigma_n^2 I."""
        return np.tril(self._L[: self._n, : self._n])

    @property
    def alphas(self) -> np.ndarray:
        """Weight vectors, shape (n, d_out); column j solves (K + sigma_n^2 I) a = Y[:, j]."""
        return self._alpha

    def _grow(self, n_new: int):
        cap = self._X.shape[0]
        if n_new <= cap:
            return
        while cap < n_new:
            cap *= 2
        for name in ("_X", "_Y", "_beta"):
            old = getattr(self, name)
            buf = np.zeros((cap, old.shape[1]))
            buf[: self._n] = old[: self._n]
            setattr(self, name, buf)
        L = np.zeros((cap, cap))
        L[: self._n, : self._n] = self._L[: self._n, : self._n]
        self._L = L

    def add_point(self, x, y) -> "LocalGP":
        """Add one training pair; equivalent to refitting on the enlarged set.

        Extends the Cholesky factor by one row, then refreshes the weight
        vectors with a backward solve. Returns self.
        """
        x = _check_input(x, self.hp.d_in)
        y = _check_input(y, self.hp.d_out)
        n = self._n
        self._grow(n + 1)
        kxx = self.hp.sigma_f**2 + self.hp.sigma_n**2
        if n == 0:
            diag2 = self._escalate(kxx, 0.0)
            d = math.sqrt(diag2)
            self._L[0, 0] = d
            self._beta[0] = y / d
        else:
            k = _kernel_vector(self._X[:n], x, self.hp)
            c = _solve_triangular(self._L[:n, :n], k, lower=True)
            diag2 = self._escalate(kxx, float(c @ c))
            d = math.sqrt(diag2)
            self._L[n, :n] = c
            self._L[n, n] = d
            self._beta[n] = (y - c @ self._beta[:n]) / d
        self._X[n] = x
        self._Y[n] = y
        self._n = n + 1
        self._refresh_alpha()
        return self

    def _escalate(self, kxx: float, csq: float) -> float:
        """New diagonal entry squared, with jitter escalation if it is not positive."""
        diag2 = kxx - csq
        if diag2 > 0.0:
            return diag2
        jitter = JITTER_BASE * self.hp.sigma_f**2
        attempted = []
        for _ in range(JITTER_RETRIES):
            attempted.append(jitter)
            diag2 = kxx + jitter - csq
            if diag2 > 0.0:
                return diag2
            jitter *= JITTER_GROWTH
        raise FactorizationError(attempted)

    def _refresh_alpha(self):
        n = self._n
        self._alpha = _solve_triangular(
            self._L[:n, :n], self._beta[:n], lower=True, trans="T"
        )

    def predict_mean(self, x) -> np.ndarray:
        """Posterior mean at x, shape (d_out,); zero vector for an empty model."""
        x = _check_input(x, self.hp.d_in)
        if self._n == 0:
            return np.zeros(self.hp.d_out)
        k = _kernel_vector(self._X[: self._n], x, self.hp)
        return k @ self._alpha

    def predict_var(self, x) -> float:
        """Posterior variance at x; the prior sigma_f^2 for an empty model."""
        x = _check_input(x, self.hp.d_in)
        kxx = self.hp.sigma_f**2
        if self._n == 0:
            return kxx
        n = self._n
        k = _kernel_vector(self._X[:n], x, self.hp)
        v = _solve_triangular(self._L[:n, :n], k, lower=True)
        return kxx - float(v @ v)


def fit(X, Y, hp: Hyperparameters) -> LocalGP:
    """Fit a model in one shot: factor K(X, X) + sigma_n^2 I and solve for weights."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    n = X.shape[0]
    if n == 0:
        raise ValueError("fit requires at least one training pair")
    if X.shape != (n, hp.d_in):
        raise ValueError(f"X must have shape ({n}, {hp.d_in}), got {X.shape}")
    if Y.shape != (n, hp.d_out):
        raise ValueError(f"Y must have shape ({n}, {hp.d_out}), got {Y.shape}")

    K = _kernel_matrix(X, hp)
    jitters = [0.0] + [
        JITTER_BASE * hp.sigma_f**2 * JITTER_GROWTH**i for i in range(JITTER_RETRIES)
    ]
    L = None
    for jitter in jitters:
        try:
            A = K + (hp.sigma_n**2 + jitter) * np.eye(n)
            L = _cholesky(A, lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if L is None:
        raise FactorizationError(jitters[1:])

    model = LocalGP(hp)
    model._grow(n)
    model._X[:n] = X
    model._Y[:n] = Y
    model._L[:n, :n] = L
    model._beta[:n] = _solve_triangular(L, Y, lower=True)
    model._n = n
    model._refresh_alpha()
    return model
