"""Fields on lattice elements and the discrete exterior calculus.

Conventions (fixed once, used by every other module):

* derivatives are divided differences: (grad f)(x, x+eta*e_mu) =
  (f(x+eta*e_mu) - f(x)) / eta, and the plaquette curl carries the same
  1/eta factor;
* inner products are weighted by eta**dim, so that on unit lattices they
  reduce to plain sums;
* the adjoint of a map between same-spacing spaces is the plain matrix
  transpose (the uniform weights cancel); between different spacings it
  picks up the ratio of the weights.

These are the unique choices under which block averaging commutes with
the gradient, path averages of gradients telescope with an L**k factor,
and the curl energy is invariant under field rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .lattice import Lattice, LatticeError, Path, build_lattice

SITE = "site"
BOND = "bond"
PLAQUETTE = "plaquette"

# Assembled operators are dense below this ambient dimension, sparse above.
DENSE_LIMIT = 5000


def element_count(lattice: Lattice, kind: str) -> int:
    return {SITE: lattice.n_sites, BOND: lattice.n_bonds,
            PLAQUETTE: lattice.n_plaquettes}[kind]


@dataclass(frozen=True)
class SpaceDescriptor:
    """A field space: a lattice together with the element kind."""

    lattice: Lattice
    kind: str

    @property
    def size(self) -> int:
        return element_count(self.lattice, self.kind)

    @property
    def weight(self) -> float:
        """Inner-product weight eta**dim of this space."""
        return self.lattice.spacing**self.lattice.dim


class Field:
    kind = None

    def __init__(self, lattice: Lattice, values):
        values = np.asarray(values, dtype=float)
        n = element_count(lattice, self.kind)
        if values.shape != (n,):
            raise LatticeError(
                f"{type(self).__name__} needs {n} values, got {values.shape}")
        self.lattice = lattice
        self.values = values

    @classmethod
    def zeros(cls, lattice: Lattice):
        return cls(lattice, np.zeros(element_count(lattice, cls.kind)))

    @property
    def descriptor(self) -> SpaceDescriptor:
        return SpaceDescriptor(self.lattice, self.kind)

    def copy(self):
        return type(self)(self.lattice, self.values.copy())

    def __add__(self, other):
        self._check_same(other)
        return type(self)(self.lattice, self.values + other.values)

    def __sub__(self, other):
        self._check_same(other)
        return type(self)(self.lattice, self.values - other.values)

    def __mul__(self, c):
        return type(self)(self.lattice, self.values * float(c))

    __rmul__ = __mul__

    def _check_same(self, other):
        if other.lattice is not self.lattice or other.kind != self.kind:
            raise LatticeError("field descriptors do not match")

    def to_json(self) -> dict:
        return {"lattice": self.lattice.spec.to_json(), "kind": self.kind,
                "values": self.values.tolist()}


class ScalarField(Field):
    kind = SITE

    def at(self, coords) -> float:
        return self.values[self.lattice.site_ordinal(coords)]


class BondField(Field):
    kind = BOND

    def on_bond(self, site_ordinal: int, axis: int, sign: int = 1) -> float:
        """Value on the oriented bond from the site along +-axis."""
        if sign > 0:
            return self.values[self.lattice.bond_ordinal(site_ordinal, axis)]
        prev = self.lattice.shift_site(site_ordinal, axis, -1)
        return -self.values[self.lattice.bond_ordinal(prev, axis)]


class PlaquetteField(Field):
    kind = PLAQUETTE


FIELD_CLASS = {SITE: ScalarField, BOND: BondField, PLAQUETTE: PlaquetteField}


@dataclass
class LinearMap:
    """A linear operator between field spaces with explicit coefficients."""

    matrix: np.ndarray
    domain: SpaceDescriptor
    codomain: SpaceDescriptor

    def __post_init__(self):
        m = self.matrix
        shape = (self.codomain.size, self.domain.size)
        if m.shape != shape:
            raise LatticeError(f"matrix shape {m.shape} != {shape}")

    @property
    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else m

    def __call__(self, field: Field) -> Field:
        if field.descriptor != self.domain:
            raise LatticeError("field does not match operator domain")
        out = self.matrix @ field.values
        return FIELD_CLASS[self.codomain.kind](self.codomain.lattice,
                                               np.asarray(out).ravel())

    def adjoint(self) -> "LinearMap":
        """Adjoint with respect to the weighted inner products."""
        ratio = self.codomain.weight / self.domain.weight
        return LinearMap(ratio * self.matrix.T, self.codomain, self.domain)

    def compose(self, other: "LinearMap") -> "LinearMap":
        if other.codomain != self.domain:
            raise LatticeError("operator domains do not chain")
        return LinearMap(self.matrix @ other.matrix, other.domain,
                         self.codomain)


# -- operator assembly -------------------------------------------------------

def _maybe_dense(mat: sp.spmatrix) -> np.ndarray:
    if max(mat.shape) <= DENSE_LIMIT:
        return mat.toarray()
    return mat.tocsr()


@lru_cache(maxsize=None)
def grad_matrix(lattice: Lattice) -> np.ndarray:
    """Bonds x sites matrix of the divided-difference gradient."""
    inv_eta = 1.0 / lattice.spacing
    rows, cols, vals = [], [], []
    for b, (s, mu) in enumerate(lattice.bonds):
        t = lattice.shift_site(s, mu)
        rows += [b, b]
        cols += [s, t]
        vals += [-inv_eta, inv_eta]
    mat = sp.coo_matrix((vals, (rows, cols)),
                        shape=(lattice.n_bonds, lattice.n_sites))
    return _maybe_dense(mat)


@lru_cache(maxsize=None)
def ext_d_matrix(lattice: Lattice) -> np.ndarray:
    """Plaquettes x bonds matrix of the oriented boundary sum over 1/eta."""
    inv_eta = 1.0 / lattice.spacing
    rows, cols, vals = [], [], []
    for p, (s, mu, nu) in enumerate(lattice.plaquettes):
        s_mu = lattice.shift_site(s, mu)
        s_nu = lattice.shift_site(s, nu)
        for bond, sign in (((s, mu), 1), ((s_mu, nu), 1),
                           ((s_nu, mu), -1), ((s, nu), -1)):
            rows.append(p)
            cols.append(lattice.bond_ordinal(*bond))
            vals.append(sign * inv_eta)
    mat = sp.coo_matrix((vals, (rows, cols)),
                        shape=(lattice.n_plaquettes, lattice.n_bonds))
    return _maybe_dense(mat)


def laplacian_matrix(lattice: Lattice) -> np.ndarray:
    """Matrix of -Laplacian = (codiff of grad) of grad; positive semidefinite."""
    g = grad_matrix(lattice)
    return np.asarray((g.T @ g).todense()) if sp.issparse(g) else g.T @ g


def as_matrix(name: str, lattice: Lattice) -> LinearMap:
    """Named calculus operator as an explicit LinearMap."""
    sd = lambda kind: SpaceDescriptor(lattice, kind)
    if name == "grad":
        return LinearMap(grad_matrix(lattice), sd(SITE), sd(BOND))
    if name == "ext_d":
        return LinearMap(ext_d_matrix(lattice), sd(BOND), sd(PLAQUETTE))
    if name == "codiff_bond":
        return as_matrix("grad", lattice).adjoint()
    if name == "codiff_plaquette":
        return as_matrix("ext_d", lattice).adjoint()
    raise LatticeError(f"unknown operator {name!r}")


def codiff(kind: str, lattice: Lattice) -> LinearMap:
    """Weighted adjoint of grad (kind='bond') or of ext_d (kind='plaquette')."""
    if kind == BOND:
        return as_matrix("codiff_bond", lattice)
    if kind == PLAQUETTE:
        return as_matrix("codiff_plaquette", lattice)
    raise LatticeError(f"codiff undefined for kind {kind!r}")


# -- field-level operations --------------------------------------------------

def grad(f: ScalarField) -> BondField:
    return BondField(f.lattice, grad_matrix(f.lattice) @ f.values)


def ext_d(A: BondField) -> PlaquetteField:
    return PlaquetteField(A.lattice, ext_d_matrix(A.lattice) @ A.values)


def gauge_transform(A: BondField, f: ScalarField) -> BondField:
    """A minus the gradient of f; leaves ext_d(A) unchanged."""
    if f.lattice is not A.lattice:
        raise LatticeError("field lattices do not match")
    return BondField(A.lattice, A.values - grad_matrix(A.lattice) @ f.values)


def path_sum(A: BondField, path: Path, weighted: bool = False) -> float:
    total = 0.0
    for bond, sign in path.steps:
        total += sign * A.values[bond]
    if weighted:
        total *= A.lattice.spacing
    return total


def inner(f: Field, g: Field) -> float:
    """Weighted inner product eta**dim * sum(f*g)."""
    f._check_same(g)
    return f.descriptor.weight * float(f.values @ g.values)


def norm_sq(f: Field) -> float:
    return inner(f, f)


def scale_field(A: BondField, n: int) -> BondField:
    """Reinterpret a bond field at spacing finer by L**n.

    In centered integer coordinates the bond sets coincide, so the map is a
    relabeling of the descriptor with values multiplied by L**(n(dim-2)/2).
    Negative n inverts the operation.  The curl energy is invariant.
    """
    lat = A.lattice
    new_lat = build_lattice(lat.spec.rescaled(n))
    factor = float(lat.L) ** (n * (lat.dim - 2) / 2.0)
    return BondField(new_lat, factor * A.values)


def apply_symmetry(r, A):
    """Transformed field A_r with A_r(b) = A(r^{-1} b), signs included.

    Works for ScalarField (plain relabeling) and BondField (orientation
    signs from the signed axis permutation).
    """
    lat = A.lattice
    out = np.empty_like(A.values)
    if A.kind == SITE:
        dest = lat.site_permutation(r)
        out[dest] = A.values
        return ScalarField(lat, out)
    if A.kind == BOND:
        for b in range(lat.n_bonds):
            img, sgn = lat.bond_image(r, b)
            out[img] = sgn * A.values[b]
        return BondField(lat, out)
    raise LatticeError("symmetry action implemented for site and bond fields")


def random_field(lattice: Lattice, kind: str, rng) -> Field:
    return FIELD_CLASS[kind](lattice,
                             rng.standard_normal(element_count(lattice, kind)))
