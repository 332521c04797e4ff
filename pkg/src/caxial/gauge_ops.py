"""Regularized Green's functions, gauge projectors, minimizers, and the
fluctuation-covariance representation identities.

A GaugeContext fixes a level k of the flow on an N-level torus: the fine
lattice has spacing L**-k and the coarse (unit) lattice is its k-fold
blocking.  On top of it live

* the scalar Green's function G = (-Lap + a Q^T Q)^-1,
* the projector R onto Lap(ker Q) and its complement P,
* the constrained minimizers of the curl energy (axial constraints) and of
  the curl energy plus the projected-divergence penalty (Feynman form),
* the effective coarse form Delta and the fluctuation covariance
  (C^T Delta C + x)^-1 in the in-block/non-central parametrization,
* the bond-space Green's functions whose compression reproduces that
  covariance, and the integral representation of its square root.
"""

from __future__ import annotations

from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.special import roots_legendre

from . import averaging as av
from .fields import ext_d_matrix, grad_matrix, laplacian_matrix
from .gaussian import (IndefiniteOnSurface, SingularOperator, kernel_basis,
                       minimizer_map)
from .lattice import LatticeSpec, build_lattice


class GaugeContext:
    """Operators of one RG level: fine torus at spacing L**-k, unit blocking."""

    def __init__(self, dim, L, n_levels, level, a=1.0, alpha=1.0):
        # level == n_levels is allowed: the unit lattice degenerates to a
        # single site and only the minimizer machinery remains meaningful
        if not 0 <= level <= n_levels:
            raise ValueError("level must satisfy 0 <= level <= n_levels")
        if a <= 0:
            raise SingularOperator(
                "regulator a must be positive: constants are in ker(-Lap)")
        self.dim = dim
        self.L = L
        self.n_levels = n_levels
        self.level = level
        self.a = float(a)
        self.alpha = float(alpha)
        self.fine = build_lattice(LatticeSpec(dim, L, level, n_levels - level))
        self.unit = build_lattice(LatticeSpec(dim, L, 0, n_levels - level))

    # -- raw ingredients ----------------------------------------------------

    @cached_property
    def weight(self) -> float:
        """Inner-product weight eta**dim of the fine lattice."""
        return self.fine.spacing**self.dim

    @cached_property
    def grad_fine(self) -> np.ndarray:
        return np.asarray(grad_matrix(self.fine))

    @cached_property
    def curl_fine(self) -> np.ndarray:
        return np.asarray(ext_d_matrix(self.fine))

    @cached_property
    def lap_fine(self) -> np.ndarray:
        """Matrix of -Laplacian on fine scalars (positive semidefinite)."""
        return laplacian_matrix(self.fine)

    @cached_property
    def curl_form(self) -> np.ndarray:
        """Quadratic form of the curl energy on fine bonds."""
        return self.weight * self.curl_fine.T @ self.curl_fine

    @cached_property
    def scalar_average(self) -> np.ndarray:
        """Q: fine scalars -> unit scalars (k levels of blocking)."""
        return av.scalar_average_matrix(self.fine, self.level)

    @cached_property
    def scalar_average_adj(self) -> np.ndarray:
        """Weighted adjoint of Q; equals injection constant on blocks."""
        return float(self.L) ** (self.level * self.dim) * self.scalar_average.T

    @cached_property
    def bond_average(self) -> np.ndarray:
        """Bond blocking fine -> unit (identity at level 0)."""
        return av.bond_average_matrix(self.fine, self.level)

    @cached_property
    def bond_average_next(self) -> np.ndarray:
        """Bond blocking fine -> one level above the unit lattice."""
        return av.bond_average_matrix(self.fine, self.level + 1)

    @cached_property
    def scalar_average_next(self) -> np.ndarray:
        return av.scalar_average_matrix(self.fine, self.level + 1)

    @cached_property
    def axial_stack(self) -> np.ndarray:
        """Hierarchical path-average constraints below the unit scale."""
        return av.axial_constraint_stack(self.fine, self.level).matrix

    @cached_property
    def axial_surface(self) -> np.ndarray:
        """Constraint matrix of the axial minimization (averages + stack)."""
        return np.vstack([self.bond_average, self.axial_stack])

    @cached_property
    def recovery(self) -> np.ndarray:
        """Scalar-recovery operator on the unit lattice."""
        return av.scalar_recovery_matrix(self.unit)

    @cached_property
    def one_plus_grad_recovery(self) -> np.ndarray:
        """I + grad o recovery on unit bonds."""
        return np.eye(self.unit.n_bonds) \
            + np.asarray(grad_matrix(self.unit)) @ self.recovery

    @cached_property
    def chi_star(self) -> np.ndarray:
        return av.fluctuation_split(self.unit).chi_star

    @cached_property
    def fluct_basis(self) -> np.ndarray:
        return av.fluctuation_basis(self.unit)

    # -- scalar Green's function and projectors -----------------------------

    def _green_for(self, q: np.ndarray, q_adj: np.ndarray) -> np.ndarray:
        op = self.lap_fine + self.a * q_adj @ q
        try:
            chol = np.linalg.cholesky(0.5 * (op + op.T))
        except np.linalg.LinAlgError:
            raise SingularOperator("-Lap + a Q^T Q is not positive definite")
        return sla.cho_solve((chol, True), np.eye(op.shape[0]))

    @cached_property
    def green_scalar(self) -> np.ndarray:
        """G = (-Lap + a Q^T Q)^-1 on fine scalars."""
        return self._green_for(self.scalar_average, self.scalar_average_adj)

    def _projectors_for(self, q, q_adj):
        g = self._green_for(q, q_adj)
        core = q @ g @ g @ q_adj
        p = g @ q_adj @ np.linalg.solve(core, q @ g)
        return 0.5 * (p + p.T), np.eye(p.shape[0]) - 0.5 * (p + p.T)

    @cached_property
    def _pr(self):
        return self._projectors_for(self.scalar_average,
                                    self.scalar_average_adj)

    @property
    def proj_range(self) -> np.ndarray:
        """P: orthogonal projector onto range(G Q^T)."""
        return self._pr[0]

    @property
    def proj_div(self) -> np.ndarray:
        """R = I - P: orthogonal projector onto Lap(ker Q)."""
        return self._pr[1]

    @cached_property
    def proj_div_next(self) -> np.ndarray:
        """R built from the (k+1)-level scalar average."""
        q = self.scalar_average_next
        q_adj = float(self.L) ** ((self.level + 1) * self.dim) * q.T
        return self._projectors_for(q, q_adj)[1]

    # -- minimizers and the effective form ----------------------------------

    @cached_property
    def axial_minimizer(self) -> np.ndarray:
        """Unit bonds -> fine bonds: least curl energy on the axial surface."""
        K = self.axial_surface
        E = np.vstack([np.eye(self.unit.n_bonds),
                       np.zeros((self.axial_stack.shape[0],
                                 self.unit.n_bonds))])
        return minimizer_map(self.curl_form, K, E)

    def feynman_minimizer(self, alpha=None) -> np.ndarray:
        """Least curl energy + projected-divergence penalty, averages fixed."""
        if alpha is None:
            alpha = self.alpha
        dg = self.grad_fine
        form = self.curl_form + (self.weight / alpha) * \
            dg @ self.proj_div @ dg.T
        return minimizer_map(form, self.bond_average,
                             np.eye(self.unit.n_bonds))

    def effective_form(self, which: str = "axial") -> np.ndarray:
        """Delta: the curl energy of the minimizer, as a unit-bond form."""
        h = {"axial": lambda: self.axial_minimizer,
             "feynman": self.feynman_minimizer}[which]()
        d = 0.5 * (h.T @ self.curl_form @ h + (h.T @ self.curl_form @ h).T)
        return d

    @cached_property
    def delta(self) -> np.ndarray:
        return self.effective_form("axial")

    # -- fluctuation covariance ---------------------------------------------

    @cached_property
    def reduced_delta(self) -> np.ndarray:
        """C^T Delta C on the fluctuation parameters."""
        C = self.fluct_basis
        m = C.T @ self.delta @ C
        return 0.5 * (m + m.T)

    def fluct_cov(self, x: float = 0.0) -> np.ndarray:
        """(C^T Delta C + x)^-1; x = 0 gives the fluctuation covariance."""
        m = self.reduced_delta + x * np.eye(self.reduced_delta.shape[0])
        w = np.linalg.eigvalsh(m)
        if w[0] <= 0:
            raise IndefiniteOnSurface(
                f"reduced fluctuation form has eigenvalue {w[0]:g}")
        return np.linalg.inv(m)

    # -- scalar potential for the covariance representation -----------------

    def lambda0_map(self) -> np.ndarray:
        """Unit scalars -> fine scalars solving Q lambda = mu, R Lap lambda = 0."""
        g = self.green_scalar
        q, qt = self.scalar_average, self.scalar_average_adj
        g2qt = g @ g @ qt
        core = q @ g2qt
        first = g2qt @ np.linalg.solve(
            core, np.eye(core.shape[0]) - self.a * q @ g @ qt)
        return first + self.a * g @ qt

    # -- bond-space Green's functions ---------------------------------------

    def _x_map(self) -> np.ndarray:
        """chi* (I + grad recovery) compressed through the bond average."""
        return (self.chi_star[:, None] * self.one_plus_grad_recovery) \
            @ self.bond_average

    def fine_green(self, x: float = 0.0) -> np.ndarray:
        """Inverse of the regularized bond operator used in the covariance
        representation: curl part + projected divergence part + average
        regulator + x times the gauge-fixed compression term."""
        dg = self.grad_fine
        op = (self.curl_form + self.weight * dg @ self.proj_div_next @ dg.T
              + self.a * self.bond_average_next.T @ self.bond_average_next)
        if x:
            xm = self._x_map()
            op = op + x * xm.T @ xm
        op = 0.5 * (op + op.T)
        w = np.linalg.eigvalsh(op)
        if w[0] <= 0:
            raise SingularOperator(
                f"regularized bond operator has eigenvalue {w[0]:g}")
        return np.linalg.inv(op)

    def tilde_green(self, x: float = 0.0) -> np.ndarray:
        """Green's function constrained to the kernel of the next averaging."""
        g = self.fine_green(x)
        qn = self.bond_average_next
        core = qn @ g @ qn.T
        out = g - g @ qn.T @ np.linalg.solve(core, qn @ g)
        return 0.5 * (out + out.T)

    def rep_check(self, xs=(0.0,)) -> dict:
        """Relative residuals of C (C^T Delta C + x)^-1 C^T against the
        compressed Green's-function representation, per x."""
        C = self.fluct_basis
        ipd = self.one_plus_grad_recovery
        qb = self.bond_average
        out = {}
        for x in xs:
            lhs = C @ self.fluct_cov(x) @ C.T
            rhs = ipd @ qb @ self.tilde_green(x) @ qb.T @ ipd.T
            out[x] = np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2)
        return out

    # -- square root of the fluctuation covariance --------------------------

    def cov_sqrt_spectral(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.reduced_delta)
        if w[0] <= 0:
            raise IndefiniteOnSurface("reduced form not positive definite")
        return (v / np.sqrt(w)) @ v.T

    def cov_sqrt_quadrature(self, npoints: int = 200) -> np.ndarray:
        """Evaluate (1/pi) int_0^inf x^{-1/2} (S + x)^-1 dx for S the reduced
        form, via x = tan^2(theta) and Gauss-Legendre on (0, pi/2)."""
        s = self.reduced_delta
        n = s.shape[0]
        nodes, weights = roots_legendre(npoints)
        theta = 0.25 * np.pi * (nodes + 1.0)
        out = np.zeros_like(s)
        for t, w in zip(theta, weights):
            out += w * np.linalg.inv(np.cos(t) ** 2 * s
                                     + np.sin(t) ** 2 * np.eye(n))
        return (0.25 * np.pi) * (2.0 / np.pi) * out

    # -- change of gauge (Feynman vs Landau) --------------------------------

    def div_range_basis(self, projector=None) -> np.ndarray:
        """Orthonormal basis of the range of R (columns)."""
        r = self.proj_div if projector is None else projector
        w, v = np.linalg.eigh(r)
        return v[:, w > 0.5]

    def gauge_bijection_matrix(self) -> np.ndarray:
        """The square map lambda -> (Q lambda, R(-Lap) lambda)."""
        u = self.div_range_basis()
        return np.vstack([self.scalar_average,
                          u.T @ self.proj_div @ self.lap_fine])

    def feynman_to_landau(self) -> np.ndarray:
        """The substitution map A -> A - grad G R div A."""
        dg = self.grad_fine
        return np.eye(self.fine.n_bonds) \
            - dg @ self.green_scalar @ self.proj_div @ dg.T


@lru_cache(maxsize=None)
def get_context(dim, L, n_levels, level, a=1.0, alpha=1.0) -> GaugeContext:
    return GaugeContext(dim, L, n_levels, level, a, alpha)


def change_of_gauge_check(ctx: GaugeContext, coarse_field: np.ndarray) -> dict:
    """Feynman vs Landau gauge: the substitution map carries the moments of
    the penalized Gaussian (averages fixed) to those of the Gaussian on the
    divergence-projected surface.

    Returns the dimension check of the underlying scalar bijection, its
    condition number, and the relative mean/covariance residuals.
    """
    from .gaussian import (AffineSurface, QuadraticDensity,
                           constrained_minimize, subspace_covariance)
    m = ctx.gauge_bijection_matrix()
    square = m.shape[0] == m.shape[1] == ctx.fine.n_sites
    cond = float(np.linalg.cond(m)) if square else np.inf
    qb = ctx.bond_average
    dg = ctx.grad_fine
    form_f = ctx.curl_form + ctx.weight * dg @ ctx.proj_div @ dg.T
    surf_f = AffineSurface.from_constraints(qb, coarse_field)
    mean_f = constrained_minimize(QuadraticDensity(form_f), surf_f)
    cov_f = subspace_covariance(QuadraticDensity(form_f), surf_f)
    u = ctx.div_range_basis()
    k_landau = np.vstack([qb, u.T @ dg.T])
    b_landau = np.concatenate([coarse_field, np.zeros(u.shape[1])])
    surf_l = AffineSurface.from_constraints(k_landau, b_landau)
    mean_l = constrained_minimize(QuadraticDensity(ctx.curl_form), surf_l)
    cov_l = subspace_covariance(QuadraticDensity(ctx.curl_form), surf_l)
    t = ctx.feynman_to_landau()
    mean_res = np.linalg.norm(t @ mean_f - mean_l) \
        / max(np.linalg.norm(mean_l), 1e-300)
    cov_res = np.linalg.norm(t @ cov_f @ t.T - cov_l, 2) \
        / max(np.linalg.norm(cov_l, 2), 1e-300)
    n_div = int(np.round(np.trace(ctx.proj_div)))
    return {
        "square": square,
        "condition": cond,
        "dims_match": ctx.unit.n_sites + n_div == ctx.fine.n_sites,
        "mean_residual": float(mean_res),
        "covariance_residual": float(cov_res),
    }


def _element_points(lattice, kind: str) -> np.ndarray:
    """Physical coordinates of sites, or of bond midpoints."""
    if kind == "site":
        return np.asarray(lattice.sites, dtype=float) * lattice.spacing
    pts = np.empty((lattice.n_bonds, lattice.dim))
    for b, (s, mu) in enumerate(lattice.bonds):
        c = np.array(lattice.site_coords(s), dtype=float)
        c[mu] += 0.5
        pts[b] = c * lattice.spacing
    return pts


def decay_profile(matrix: np.ndarray, row_lattice, col_lattice,
                  floor: float = 1e-13, kind: str = "bond") -> dict:
    """Max |kernel entry| per torus-distance class and the fitted log-slope.

    Distances are Euclidean between element positions (bond midpoints by
    default, sites with kind="site") in physical units with the
    minimum-image convention; both lattices must cover the same torus.
    """
    period = row_lattice.n_side * row_lattice.spacing
    if abs(col_lattice.n_side * col_lattice.spacing - period) > 1e-12:
        raise ValueError("lattices cover different tori")
    rp = _element_points(row_lattice, kind)
    cp = _element_points(col_lattice, kind)
    diff = rp[:, None, :] - cp[None, :, :]
    diff -= period * np.round(diff / period)
    dist = np.sqrt((diff**2).sum(axis=2))
    classes = {}
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            d = round(dist[i, j], 9)
            v = abs(matrix[i, j])
            cur = classes.get(d)
            if cur is None:
                classes[d] = [v, 1]
            else:
                cur[0] = max(cur[0], v)
                cur[1] += 1
    table = sorted((d, mx, n) for d, (mx, n) in classes.items())
    xs = np.array([d for d, mx, _ in table if mx > floor])
    ys = np.array([np.log(mx) for _, mx, _ in table if mx > floor])
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        corr = float(np.corrcoef(xs, ys)[0, 1])
    else:
        slope, intercept, corr = 0.0, 0.0, 0.0
    return {"table": table, "slope": float(slope), "correlation": corr}
