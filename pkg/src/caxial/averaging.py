"""Averaging and gauge-fixing operators.

Block averages for scalars and bond fields, toron (winding-loop) averages,
path averages from block centers (single-path and all-orderings versions),
the stacked hierarchical constraint map, the scalar-recovery operator that
turns a bond field into the gauge potential solving the path-average
equations, and the in-block/linking-bond fluctuation parametrization.

All builders return plain coefficient matrices in canonical ordinals
together with the lattices involved; field-level wrappers are provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import Lattice, LatticeError, build_lattice
from .fields import (BOND, SITE, BondField, LinearMap, ScalarField,
                     SpaceDescriptor)


@lru_cache(maxsize=None)
def coarsened(lattice: Lattice, n: int = 1) -> Lattice:
    lat = lattice
    for _ in range(n):
        lat = build_lattice(lat.spec.coarsened())
    return lat


def _fine_center(fine: Lattice, coarse: Lattice, y_ord: int, n: int = 1):
    return tuple(fine.L**n * c for c in coarse.site_coords(y_ord))


# -- block averages ----------------------------------------------------------

@lru_cache(maxsize=None)
def scalar_average_matrix(fine: Lattice, n: int = 1) -> np.ndarray:
    """Block average of site fields over side-L**n blocks, weight L**(-dim*n)."""
    coarse = coarsened(fine, n)
    w = float(fine.L) ** (-fine.dim * n)
    out = np.zeros((coarse.n_sites, fine.n_sites))
    for y in range(coarse.n_sites):
        for x in fine.block_members(_fine_center(fine, coarse, y, n), n):
            out[y, x] += w
    return out


@lru_cache(maxsize=None)
def _bond_average_one(fine: Lattice) -> np.ndarray:
    """One level of bond blocking: average of straight-path sums.

    Row (y, mu): weight L**-(dim+1) times the sum over block sites x of the
    unweighted sum of the L bonds on the straight path from x to x + L e_mu.
    """
    coarse = coarsened(fine)
    L, dim = fine.L, fine.dim
    w = float(L) ** (-(dim + 1))
    out = np.zeros((coarse.n_bonds, fine.n_bonds))
    for cb, (y, mu) in enumerate(coarse.bonds):
        center = _fine_center(fine, coarse, y)
        for x in fine.block_members(center, 1):
            path = fine.straight_path(fine.site_coords(x), mu, L)
            for b, sign in path.steps:
                out[cb, b] += w * sign
    return out


@lru_cache(maxsize=None)
def bond_average_matrix(fine: Lattice, n: int = 1) -> np.ndarray:
    """n-fold bond blocking (composition of single levels)."""
    if n == 0:
        return np.eye(fine.n_bonds)
    if n == 1:
        return _bond_average_one(fine)
    return _bond_average_one(coarsened(fine, n - 1)) \
        @ bond_average_matrix(fine, n - 1)


def bond_average_direct_matrix(fine: Lattice, n: int) -> np.ndarray:
    """Direct n-level form: paths of length L**n, weight L**-(dim+1)n.

    Equal to the composed form; kept as an independent cross-check.
    """
    coarse = coarsened(fine, n)
    L, dim = fine.L, fine.dim
    w = float(L) ** (-(dim + 1) * n)
    out = np.zeros((coarse.n_bonds, fine.n_bonds))
    for cb, (y, mu) in enumerate(coarse.bonds):
        center = _fine_center(fine, coarse, y, n)
        for x in fine.block_members(center, n):
            path = fine.straight_path(fine.site_coords(x), mu, L**n)
            for b, sign in path.steps:
                out[cb, b] += w * sign
    return out


# -- toron averages ----------------------------------------------------------

@lru_cache(maxsize=None)
def toron_average_matrix(lattice: Lattice) -> np.ndarray:
    """dim x n_bonds matrix of site-averaged winding-loop sums."""
    if not lattice.is_torus:
        raise LatticeError("toron averages require a torus")
    w = 1.0 / lattice.n_sites
    out = np.zeros((lattice.dim, lattice.n_bonds))
    for mu in range(lattice.dim):
        for x in range(lattice.n_sites):
            loop = lattice.toron_loop(lattice.site_coords(x), mu)
            for b, sign in loop.steps:
                out[mu, b] += w * sign
    return out


def toron_average_full_matrix(fine: Lattice, n_levels: int) -> np.ndarray:
    """Toron average after n_levels - 1 bond blockings (the last-step map)."""
    qb = bond_average_matrix(fine, n_levels - 1)
    return toron_average_matrix(coarsened(fine, n_levels - 1)) @ qb


# -- path averages from block centers ---------------------------------------

@dataclass(frozen=True)
class PathAverageMap:
    """Rows indexed by (coarse site ordinal, fine site ordinal), x != center."""

    matrix: np.ndarray
    rows: tuple
    fine: Lattice
    coarse: Lattice


def _path_average_build(fine: Lattice, all_orders: bool) -> PathAverageMap:
    coarse = coarsened(fine)
    rows = []
    data = []
    for y in range(coarse.n_sites):
        center = _fine_center(fine, coarse, y)
        for off in fine.block_offsets(1):
            if all(o == 0 for o in off):
                continue
            x_coords = tuple(c + o for c, o in zip(center, off))
            rows.append((y, fine.site_ordinal(x_coords)))
            row = np.zeros(fine.n_bonds)
            if all_orders:
                fam = fine.path_family(center, x_coords)
                w = 1.0 / len(fam)
            else:
                fam = [fine.rectilinear_path(center, x_coords)]
                w = 1.0
            for path in fam:
                for b, sign in path.steps:
                    row[b] += w * sign
            data.append(row)
    return PathAverageMap(np.array(data), tuple(rows), fine, coarse)


@lru_cache(maxsize=None)
def path_average_matrix(fine: Lattice) -> PathAverageMap:
    """All-orderings path average from each block center (1/dim! weights)."""
    return _path_average_build(fine, all_orders=True)


@lru_cache(maxsize=None)
def tree_path_matrix(fine: Lattice) -> PathAverageMap:
    """Single-path (identity axis order) version; its bonds form the tree."""
    return _path_average_build(fine, all_orders=False)


def path_average(A: BondField, all_orders: bool = True) -> np.ndarray:
    """Values (tau A)(y, x) in the row order of the corresponding map."""
    pam = (path_average_matrix if all_orders else tree_path_matrix)(A.lattice)
    return pam.matrix @ A.values


# -- hierarchical constraint stack ------------------------------------------

@dataclass(frozen=True)
class ConstraintStack:
    """Stack of per-level path-average constraints on a fine bond field.

    Level j rows are the all-orderings path averages of the j-fold bond
    blocking of the field; level row counts telescope so that together with
    one global average they exhaust the scalar degrees of freedom.
    """

    levels: tuple          # per level: coefficient matrix on fine bonds
    fine: Lattice

    @property
    def matrix(self) -> np.ndarray:
        if not self.levels:
            return np.zeros((0, self.fine.n_bonds))
        return np.vstack(self.levels)

    @property
    def rows_per_level(self) -> tuple:
        return tuple(m.shape[0] for m in self.levels)


def axial_constraint_stack(fine: Lattice, k: int) -> ConstraintStack:
    levels = []
    for j in range(k):
        level_lat = coarsened(fine, j)
        tau = path_average_matrix(level_lat)
        levels.append(tau.matrix @ bond_average_matrix(fine, j))
    return ConstraintStack(tuple(levels), fine)


def hierarchical_scalar_bijection_matrix(fine: Lattice,
                                         n_levels: int) -> np.ndarray:
    """Square change of variables on fine scalars: one fully blocked average
    plus, per level j, the in-block differences of the level-j averages
    against their block centers.

    Row counts telescope: 1 + sum_j (s_{N-j} - s_{N-j-1}) = n_sites, so the
    map is square; invertibility certifies that the hierarchy of averages
    determines the scalar field.
    """
    rows = [scalar_average_matrix(fine, n_levels)]
    for j in range(n_levels):
        lat_j = coarsened(fine, j)
        qj = scalar_average_matrix(fine, j) if j else np.eye(fine.n_sites)
        coarse = coarsened(lat_j, 1)
        for y in range(coarse.n_sites):
            center_coords = _fine_center(lat_j, coarse, y)
            center = lat_j.site_ordinal(center_coords)
            for x in lat_j.block_members(center_coords, 1):
                if x != center:
                    rows.append((qj[x] - qj[center])[None, :])
    return np.vstack(rows)


# -- scalar recovery ---------------------------------------------------------

@lru_cache(maxsize=None)
def scalar_recovery_matrix(lattice: Lattice) -> np.ndarray:
    """Site x bond matrix turning Z into the potential mu with
    path-average(Z + grad mu) = 0 on every block and block-average(mu) = 0.

    mu(x) = -(tau Z)(y,x) + L**-dim * sum_{x' != y} (tau Z)(y,x') for x in
    the block of y, and at centers mu(y) = L**-dim * sum_{x' != y}(tau Z).
    """
    tau = path_average_matrix(lattice)
    dim, L = lattice.dim, lattice.L
    w = float(L) ** (-dim)
    out = np.zeros((lattice.n_sites, lattice.n_bonds))
    block_sum = {}
    for (y, x), row in zip(tau.rows, tau.matrix):
        block_sum.setdefault(y, np.zeros(lattice.n_bonds))
        block_sum[y] += row
    for (y, x), row in zip(tau.rows, tau.matrix):
        out[x] = -row + w * block_sum[y]
    coarse = tau.coarse
    for y in range(coarse.n_sites):
        center = lattice.site_ordinal(_fine_center(lattice, coarse, y))
        out[center] = w * block_sum[y]
    return out


def scalar_recovery(Z: BondField) -> ScalarField:
    return ScalarField(Z.lattice, scalar_recovery_matrix(Z.lattice) @ Z.values)


# -- fluctuation parametrization --------------------------------------------

@dataclass(frozen=True)
class FluctuationSplit:
    """Partition of unit-lattice bonds for the fluctuation integral.

    in_block  -- bonds inside blocks (both endpoints in one block)
    linking   -- bonds joining adjacent blocks, grouped by coarse bond
    central   -- central[j] is the central bond of coarse bond j
    noncentral-- linking bonds that are not central
    chi_star  -- 0/1 diagonal vector zeroing exactly the central bonds
    """

    in_block: tuple
    linking: tuple
    central: tuple
    noncentral: tuple
    chi_star: np.ndarray
    lattice: Lattice
    coarse: Lattice


@lru_cache(maxsize=None)
def fluctuation_split(lattice: Lattice) -> FluctuationSplit:
    coarse = coarsened(lattice)
    if coarse.n_sites == lattice.n_sites:
        raise LatticeError("lattice has no blocking level")
    linking = []
    central = []
    for cb, (y, mu) in enumerate(coarse.bonds):
        bonds, c = lattice.boundary_bonds(coarse, y, mu)
        linking.extend(bonds)
        central.append(c)
    linking_set = set(linking)
    in_block = tuple(b for b in range(lattice.n_bonds)
                     if b not in linking_set)
    noncentral = tuple(b for b in linking if b not in set(central))
    chi = np.ones(lattice.n_bonds)
    chi[list(central)] = 0.0
    return FluctuationSplit(in_block, tuple(linking), tuple(central),
                            noncentral, chi, lattice, coarse)


def solve_central(lattice: Lattice, values: np.ndarray) -> np.ndarray:
    """Central-bond values making every coarse bond average vanish.

    The coarse-bond average is linear with coefficient L**-dim on its central
    bond, so each central value is determined locally by the other bonds of
    the two blocks it joins.
    """
    split = fluctuation_split(lattice)
    qb = bond_average_matrix(lattice, 1)
    v = np.array(values, dtype=float)
    v[list(split.central)] = 0.0
    out = np.empty(len(split.central))
    for cb, c in enumerate(split.central):
        c0 = qb[cb, c]
        if c0 == 0:
            raise LatticeError("central bond has zero averaging coefficient")
        out[cb] = -(qb[cb] @ v) / c0
    return out


def _orthonormal_kernel(mat: np.ndarray, tol: float) -> np.ndarray:
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vt[rank:].T


@lru_cache(maxsize=None)
def fluctuation_basis(lattice: Lattice, tol: float = 1e-9) -> np.ndarray:
    """Columns parametrizing {bond average = 0, path average = 0}.

    First columns: an orthonormal basis of the path-average kernel on
    in-block bonds, completed by the induced central values; remaining
    columns: one per non-central linking bond, again with central values
    solved for.  The map is injective and its range is exactly the
    homogeneous constraint surface.
    """
    split = fluctuation_split(lattice)
    tau = path_average_matrix(lattice).matrix
    z1 = list(split.in_block)
    if np.any(tau[:, [b for b in range(lattice.n_bonds)
                      if b not in set(z1)]] != 0):
        raise LatticeError("path averages touch linking bonds")
    kernel = _orthonormal_kernel(tau[:, z1], tol)
    cols = []
    for t in kernel.T:
        v = np.zeros(lattice.n_bonds)
        v[z1] = t
        v[list(split.central)] = solve_central(lattice, v)
        cols.append(v)
    for b in split.noncentral:
        v = np.zeros(lattice.n_bonds)
        v[b] = 1.0
        v[list(split.central)] = solve_central(lattice, v)
        cols.append(v)
    return np.array(cols).T


def fluctuation_parametrize(lattice: Lattice, values, tol: float = 1e-9,
                            check_tol: float = 1e-9) -> BondField:
    """Complete a bond field (central entries ignored) to the constraint
    surface; the in-block part must already satisfy the path averages."""
    v = np.array(values, dtype=float)
    split = fluctuation_split(lattice)
    tau = path_average_matrix(lattice).matrix
    probe = v.copy()
    probe[list(split.linking)] = 0.0
    res = np.abs(tau @ probe).max()
    scale = max(1.0, np.abs(v).max())
    if res > check_tol * scale:
        raise LatticeError(
            f"in-block part is not in the path-average kernel (residual {res:g})")
    v[list(split.central)] = solve_central(lattice, v)
    return BondField(lattice, v)


# -- field-level wrappers ----------------------------------------------------

def q_scalar(f: ScalarField, n: int = 1) -> ScalarField:
    return ScalarField(coarsened(f.lattice, n),
                       scalar_average_matrix(f.lattice, n) @ f.values)


def q_bond(A: BondField, n: int = 1) -> BondField:
    return BondField(coarsened(A.lattice, n),
                     bond_average_matrix(A.lattice, n) @ A.values)


def q_toron(A: BondField) -> np.ndarray:
    return toron_average_matrix(A.lattice) @ A.values


def scalar_average_map(fine: Lattice, n: int = 1) -> LinearMap:
    coarse = coarsened(fine, n)
    return LinearMap(scalar_average_matrix(fine, n),
                     SpaceDescriptor(fine, SITE), SpaceDescriptor(coarse, SITE))


def bond_average_map(fine: Lattice, n: int = 1) -> LinearMap:
    coarse = coarsened(fine, n)
    return LinearMap(bond_average_matrix(fine, n),
                     SpaceDescriptor(fine, BOND), SpaceDescriptor(coarse, BOND))
