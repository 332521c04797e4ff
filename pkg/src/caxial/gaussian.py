"""Exact Gaussian integration over affine constraint surfaces.

A QuadraticDensity is c * exp(-1/2 <v, F v> + <l, v>) on a coordinate space;
an AffineSurface is {v : K v = b} carried with an orthonormal basis of
ker K and a particular solution.  All integrals are reduced to the kernel
coordinates, where the Gaussian is finite-dimensional and explicit.

Two measure conventions are supported for delta-function constraints:

* "surface" -- the Lebesgue measure induced by the orthonormal kernel
  basis on the surface (the default; basis-independent);
* "dirac"   -- true delta semantics: integrating delta(Kv - b) over the
  ambient space equals the surface integral divided by sqrt(det(K K^T)),
  which requires the constraint rows to be linearly independent.

Identities that track multiplicative constants through a chain of
delta-function insertions only close under the "dirac" convention; results
that are normalized (moments, covariances, minimizers) are convention-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

RANK_TOL = 1e-9
LOG_2PI = float(np.log(2.0 * np.pi))


class IndefiniteOnSurface(Exception):
    """The quadratic form is not positive definite on the constraint surface."""


class SingularOperator(Exception):
    """An operator expected to be invertible is numerically singular."""


def kernel_basis(K: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical null space of K.

    Singular values below tol * sigma_max count as zero.  Deterministic
    given K (SVD right singular vectors).
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] == 0:
        return np.eye(K.shape[1])
    _, s, vt = np.linalg.svd(K)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vt[rank:].T


@dataclass
class QuadraticDensity:
    """c * exp(-1/2 <v, form v> + <linear, v>) with log c = log_const."""

    form: np.ndarray
    linear: np.ndarray = None
    log_const: float = 0.0

    def __post_init__(self):
        self.form = np.asarray(self.form, dtype=float)
        n = self.form.shape[0]
        if self.linear is None:
            self.linear = np.zeros(n)
        self.linear = np.asarray(self.linear, dtype=float)
        asym = np.abs(self.form - self.form.T).max()
        scale = max(1.0, np.abs(self.form).max())
        if asym > 1e-12 * scale:
            raise ValueError(f"form is not symmetric (residual {asym:g})")
        self.form = 0.5 * (self.form + self.form.T)

    @property
    def dim(self) -> int:
        return self.form.shape[0]

    def log_value(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return self.log_const - 0.5 * v @ self.form @ v + self.linear @ v


@dataclass
class AffineSurface:
    """{v : constraint v = offset} with cached kernel basis and particular point."""

    constraint: np.ndarray
    offset: np.ndarray
    basis: np.ndarray
    particular: np.ndarray
    row_rank: int
    log_gram: float  # logdet(K_r K_r^T) over the independent rows

    @classmethod
    def from_constraints(cls, K, b=None, tol: float = RANK_TOL):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        if b is None:
            b = np.zeros(K.shape[0])
        b = np.asarray(b, dtype=float)
        basis = kernel_basis(K, tol)
        if K.shape[0] == 0:
            particular = np.zeros(K.shape[1])
            rank, log_gram = 0, 0.0
        else:
            particular, *_ = np.linalg.lstsq(K, b, rcond=None)
            res = np.abs(K @ particular - b).max()
            if res > 1e-8 * max(1.0, np.abs(b).max()):
                raise SingularOperator(
                    f"constraints inconsistent (residual {res:g})")
            s = np.linalg.svd(K, compute_uv=False)
            rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
            log_gram = float(2.0 * np.sum(np.log(s[:rank])))
        return cls(K, b, basis, particular, rank, log_gram)

    @classmethod
    def unconstrained(cls, n: int):
        return cls.from_constraints(np.zeros((0, n)))

    @property
    def full_row_rank(self) -> bool:
        return self.row_rank == self.constraint.shape[0]

    @property
    def surface_dim(self) -> int:
        return self.basis.shape[1]


def _reduced_form(density: QuadraticDensity, surface: AffineSurface):
    B = surface.basis
    R = B.T @ density.form @ B
    g = B.T @ (density.linear - density.form @ surface.particular)
    return 0.5 * (R + R.T), g


def _check_positive(R: np.ndarray) -> np.ndarray:
    """Cholesky of the reduced form, via an explicit smallest-eigenvalue check."""
    if R.shape[0] == 0:
        return np.zeros((0, 0))
    w = np.linalg.eigvalsh(R)
    if w[0] <= 0:
        raise IndefiniteOnSurface(
            f"reduced form has nonpositive eigenvalue {w[0]:g}")
    return np.linalg.cholesky(R)


def surface_min_eig(density: QuadraticDensity, surface: AffineSurface) -> float:
    """Smallest eigenvalue of the form on the surface directions."""
    R, _ = _reduced_form(density, surface)
    if R.shape[0] == 0:
        return np.inf
    return float(np.linalg.eigvalsh(R)[0])


def constrained_minimize(density: QuadraticDensity,
                         surface: AffineSurface) -> np.ndarray:
    """Unique minimizer of 1/2 <v,Fv> - <l,v> subject to the constraints."""
    R, g = _reduced_form(density, surface)
    chol = _check_positive(R)
    if R.shape[0] == 0:
        return surface.particular.copy()
    t = sla.cho_solve((chol, True), g)
    return surface.particular + surface.basis @ t


def log_partition(density: QuadraticDensity, surface: AffineSurface,
                  convention: str = "surface") -> float:
    """Log of the Gaussian integral of the density over the surface."""
    R, _ = _reduced_form(density, surface)
    chol = _check_positive(R)
    n = R.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol)))) if n else 0.0
    vstar = constrained_minimize(density, surface)
    value = (0.5 * n * LOG_2PI - 0.5 * logdet
             - 0.5 * vstar @ density.form @ vstar + density.linear @ vstar
             + density.log_const)
    if convention == "dirac":
        if not surface.full_row_rank:
            raise SingularOperator(
                "dirac convention needs independent constraint rows")
        value -= 0.5 * surface.log_gram
    elif convention != "surface":
        raise ValueError(f"unknown convention {convention!r}")
    return float(value)


def subspace_covariance(density: QuadraticDensity,
                        surface: AffineSurface) -> np.ndarray:
    """Ambient covariance of the surface Gaussian (kills the row space of K)."""
    R, _ = _reduced_form(density, surface)
    chol = _check_positive(R)
    B = surface.basis
    if R.shape[0] == 0:
        return np.zeros((density.dim, density.dim))
    Rinv = sla.cho_solve((chol, True), np.eye(R.shape[0]))
    cov = B @ Rinv @ B.T
    return 0.5 * (cov + cov.T)


def moment_generating(density: QuadraticDensity, surface: AffineSurface,
                      J: np.ndarray) -> float:
    """log E[exp(<v,J>)] under the normalized surface Gaussian."""
    J = np.asarray(J, dtype=float)
    mean = constrained_minimize(density, surface)
    cov = subspace_covariance(density, surface)
    return float(mean @ J + 0.5 * J @ cov @ J)


def minimizer_map(form: np.ndarray, K: np.ndarray, E: np.ndarray,
                  tol: float = RANK_TOL) -> np.ndarray:
    """Matrix H with H @ A = argmin 1/2 <v, form v> subject to K v = E A.

    The minimizer of a homogeneous quadratic on the fiber {K v = E A} is
    linear in A; this returns that linear map explicitly.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    B = kernel_basis(K, tol)
    W = np.linalg.pinv(K, rcond=tol) @ np.asarray(E, dtype=float)
    R = B.T @ form @ B
    chol = _check_positive(0.5 * (R + R.T))
    if R.shape[0] == 0:
        return W
    return W - B @ sla.cho_solve((chol, True), B.T @ form @ W)


def push_constraint(density: QuadraticDensity, K: np.ndarray, E: np.ndarray,
                    tol: float = RANK_TOL,
                    convention: str = "surface") -> QuadraticDensity:
    """Integrate the density over the fibers {v : K v = E A}.

    Returns the quadratic density of the coarse variable A.  The fibers are
    parallel affine surfaces, so the reduced factorization is shared; the
    A-dependence enters only through the particular solution W A with
    W = pinv(K) E.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    E = np.asarray(E, dtype=float)
    F, l = density.form, density.linear
    B = kernel_basis(K, tol)
    W = np.linalg.pinv(K, rcond=tol) @ E
    R = B.T @ F @ B
    R = 0.5 * (R + R.T)
    chol = _check_positive(R)
    n = R.shape[0]
    if n:
        Rinv = sla.cho_solve((chol, True), np.eye(n))
        M = B @ Rinv @ B.T
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    else:
        M = np.zeros((K.shape[1], K.shape[1]))
        logdet = 0.0
    FW = F @ W
    phi = W.T @ FW - FW.T @ M @ FW
    psi = W.T @ l - FW.T @ M @ l
    const = (density.log_const + 0.5 * l @ M @ l
             + 0.5 * n * LOG_2PI - 0.5 * logdet)
    if convention == "dirac":
        s = np.linalg.svd(K, compute_uv=False)
        rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
        if rank < K.shape[0]:
            raise SingularOperator(
                "dirac convention needs independent constraint rows")
        const -= float(np.sum(np.log(s[:rank])))
    elif convention != "surface":
        raise ValueError(f"unknown convention {convention!r}")
    return QuadraticDensity(0.5 * (phi + phi.T), psi, float(const))
