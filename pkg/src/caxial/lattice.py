"""Finite lattice geometry: sites, bonds, plaquettes, blocks, paths, trees.

Lattices are either a torus or an open cube, always with an odd block side L
and sites indexed by integer coordinates in units of the lattice spacing.
Both boundary types share a fundamental domain centered on the origin, so an
open cube and a torus of the same side have identical site coordinates.

Canonical ordinals: sites are ordered lexicographically by coordinates,
bonds by (site ordinal, axis), plaquettes by (site ordinal, axis pair).
Every matrix built elsewhere in this package uses this ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

TORUS = "torus"
OPEN_CUBE = "open"


class LatticeError(ValueError):
    """Invalid lattice parameters or an operation unsupported on this boundary."""


@dataclass(frozen=True)
class LatticeSpec:
    """Descriptor of a finite lattice.

    dim       -- spatial dimension, 2 or 3
    L         -- odd block side >= 3
    scale_exp -- k, spacing is L**-k (may be negative for coarsened lattices)
    size_exp  -- M, so a torus has L**(M+k) sites per side and an open cube
                 has L**(M+k+1) sites per side (M=k=0 gives the basic L-cube)
    boundary  -- "torus" or "open"
    """

    dim: int
    L: int
    scale_exp: int = 0
    size_exp: int = 0
    boundary: str = TORUS

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise LatticeError(f"dim must be 2 or 3, got {self.dim}")
        if self.L < 3 or self.L % 2 == 0:
            raise LatticeError(f"L must be an odd integer >= 3, got {self.L}")
        if self.boundary not in (TORUS, OPEN_CUBE):
            raise LatticeError(f"unknown boundary {self.boundary!r}")
        if self.size_exp < 0:
            raise LatticeError("size_exp must be >= 0")

    @property
    def spacing(self) -> float:
        return float(self.L) ** (-self.scale_exp)

    @property
    def n_side(self) -> int:
        exp = self.size_exp + self.scale_exp
        if self.boundary == OPEN_CUBE:
            exp += 1
        if exp < 0:
            raise LatticeError("lattice has fewer than one site per side")
        return self.L**exp

    def coarsened(self) -> "LatticeSpec":
        """Spec of the lattice one blocking level up (spacing multiplied by L)."""
        return LatticeSpec(self.dim, self.L, self.scale_exp - 1, self.size_exp,
                           self.boundary)

    def rescaled(self, n: int) -> "LatticeSpec":
        """Relabel spacing by L**-n at fixed site count (torus T^0_M -> T^-n_{M-n})."""
        return LatticeSpec(self.dim, self.L, self.scale_exp + n, self.size_exp - n,
                           self.boundary)

    def to_json(self) -> dict:
        return {"dim": self.dim, "L": self.L, "scale_exp": self.scale_exp,
                "size_exp": self.size_exp, "boundary": self.boundary}

    @staticmethod
    def from_json(obj: dict) -> "LatticeSpec":
        return LatticeSpec(obj["dim"], obj["L"], obj["scale_exp"],
                           obj["size_exp"], obj["boundary"])


@dataclass(frozen=True)
class Path:
    """An oriented lattice path: a list of (bond ordinal, +-1) steps."""

    steps: tuple
    start: int
    end: int

    def __len__(self):
        return len(self.steps)

    @property
    def closed(self) -> bool:
        return self.start == self.end

    def bond_multiset(self):
        return tuple(sorted(self.steps))


@dataclass(frozen=True)
class LatticeSymmetry:
    """Signed axis permutation fixing the origin: r e_mu = signs[mu] e_perm[mu]."""

    perm: tuple
    signs: tuple

    def matrix(self) -> np.ndarray:
        dim = len(self.perm)
        m = np.zeros((dim, dim), dtype=int)
        for mu in range(dim):
            m[self.perm[mu], mu] = self.signs[mu]
        return m

    def apply_site(self, coords) -> tuple:
        out = [0] * len(self.perm)
        for mu, c in enumerate(coords):
            out[self.perm[mu]] = self.signs[mu] * c
        return tuple(out)

    def inverse(self) -> "LatticeSymmetry":
        dim = len(self.perm)
        inv_perm = [0] * dim
        inv_signs = [0] * dim
        for mu in range(dim):
            inv_perm[self.perm[mu]] = mu
            inv_signs[self.perm[mu]] = self.signs[mu]
        return LatticeSymmetry(tuple(inv_perm), tuple(inv_signs))


class Lattice:
    """Concrete lattice with enumerated sites, bonds and plaquettes."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.dim = spec.dim
        self.L = spec.L
        self.n_side = spec.n_side
        self.half = (self.n_side - 1) // 2
        rng = range(-self.half, self.half + 1)
        self.sites = np.array(list(itertools.product(rng, repeat=self.dim)),
                              dtype=int)
        self._site_lookup = {tuple(c): i for i, c in enumerate(self.sites)}

        bonds = []
        for s in range(self.n_sites):
            for mu in range(self.dim):
                if self.shift_site(s, mu) is not None:
                    bonds.append((s, mu))
        self.bonds = bonds
        self._bond_lookup = {b: i for i, b in enumerate(bonds)}

        plaqs = []
        for s in range(self.n_sites):
            for mu in range(self.dim):
                for nu in range(mu + 1, self.dim):
                    if (self.shift_site(s, mu) is not None
                            and self.shift_site(s, nu) is not None):
                        plaqs.append((s, mu, nu))
        self.plaquettes = plaqs

    # -- basic counts -------------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def n_plaquettes(self) -> int:
        return len(self.plaquettes)

    @property
    def spacing(self) -> float:
        return self.spec.spacing

    @property
    def is_torus(self) -> bool:
        return self.spec.boundary == TORUS

    # -- coordinates --------------------------------------------------------

    def wrap(self, coords):
        """Reduce coordinates to the centered fundamental domain (torus only)."""
        n = self.n_side
        return tuple((c + self.half) % n - self.half for c in coords)

    def site_ordinal(self, coords) -> int:
        coords = tuple(int(c) for c in coords)
        if self.is_torus:
            coords = self.wrap(coords)
        try:
            return self._site_lookup[coords]
        except KeyError:
            raise LatticeError(f"site {coords} not on lattice") from None

    def site_coords(self, ordinal: int) -> tuple:
        return tuple(self.sites[ordinal])

    def shift_site(self, ordinal: int, axis: int, steps: int = 1):
        """Ordinal of the site displaced by steps*e_axis, or None if outside."""
        c = list(self.sites[ordinal])
        c[axis] += steps
        if self.is_torus:
            return self._site_lookup[self.wrap(c)]
        return self._site_lookup.get(tuple(c))

    def centered_delta(self, y_coords, x_coords):
        """Displacement x - y, wrapped into the centered window on a torus."""
        d = [int(x) - int(y) for y, x in zip(y_coords, x_coords)]
        if self.is_torus:
            n = self.n_side
            d = [(c + n // 2) % n - n // 2 for c in d]
        return tuple(d)

    # -- bonds --------------------------------------------------------------

    def bond_ordinal(self, site_ordinal: int, axis: int) -> int:
        try:
            return self._bond_lookup[(site_ordinal, axis)]
        except KeyError:
            raise LatticeError("no such bond") from None

    def step(self, site_ordinal: int, axis: int, direction: int):
        """One oriented step from a site; returns (bond ordinal, sign, new site)."""
        if direction > 0:
            nxt = self.shift_site(site_ordinal, axis)
            if nxt is None:
                raise LatticeError("step leaves the lattice")
            return self.bond_ordinal(site_ordinal, axis), 1, nxt
        nxt = self.shift_site(site_ordinal, axis, -1)
        if nxt is None:
            raise LatticeError("step leaves the lattice")
        return self.bond_ordinal(nxt, axis), -1, nxt

    def bonds_at(self, site_ordinal: int):
        """All canonical bonds incident to a site, with incidence sign."""
        out = []
        for mu in range(self.dim):
            if (site_ordinal, mu) in self._bond_lookup:
                out.append((self._bond_lookup[(site_ordinal, mu)], 1))
            prev = self.shift_site(site_ordinal, mu, -1)
            if prev is not None and (prev, mu) in self._bond_lookup:
                out.append((self._bond_lookup[(prev, mu)], -1))
        return out

    # -- paths --------------------------------------------------------------

    def walk(self, start_coords, deltas_by_axis, axis_order) -> Path:
        """Move each coordinate to its target in the given axis order."""
        cur = self.site_ordinal(start_coords)
        start = cur
        steps = []
        for axis in axis_order:
            d = deltas_by_axis[axis]
            sgn = 1 if d > 0 else -1
            for _ in range(abs(d)):
                b, s, cur = self.step(cur, axis, sgn)
                steps.append((b, s))
        return Path(tuple(steps), start, cur)

    def rectilinear_path(self, y_coords, x_coords, perm=None) -> Path:
        """Coordinate-ordered path from y to x (identity order by default).

        On a torus the displacement is the minimal centered representative,
        so paths within blocks never wrap ambiguously.
        """
        if perm is None:
            perm = tuple(range(self.dim))
        delta = self.centered_delta(y_coords, x_coords)
        return self.walk(y_coords, delta, perm)

    def path_family(self, y_coords, x_coords):
        """All dim! coordinate-ordered paths from y to x, with multiplicity."""
        return [self.rectilinear_path(y_coords, x_coords, perm)
                for perm in itertools.permutations(range(self.dim))]

    def straight_path(self, x_coords, axis, length) -> Path:
        """Straight path of the given number of +axis steps starting at x."""
        deltas = [0] * self.dim
        deltas[axis] = length
        return self.walk(x_coords, deltas, (axis,))

    def toron_loop(self, x_coords, axis) -> Path:
        """Closed path winding once around the torus through x along an axis."""
        if not self.is_torus:
            raise LatticeError("toron loops require a torus")
        return self.straight_path(x_coords, axis, self.n_side)

    # -- trees --------------------------------------------------------------

    def axial_tree(self):
        """Bond ordinals of the comb tree spanned by the origin paths.

        The tree is the union of the identity-order rectilinear paths from
        the origin to every other site.  On a torus the same (non-wrapping)
        tree is used; it cannot include the wrap bonds.
        """
        tree = set()
        origin = (0,) * self.dim
        for s in range(self.n_sites):
            coords = self.site_coords(s)
            if coords == origin:
                continue
            # Plain (unwrapped) deltas keep the tree inside the fundamental
            # domain on a torus as well.
            delta = tuple(coords)
            path = self.walk(origin, delta, tuple(range(self.dim)))
            tree.update(b for b, _ in path.steps)
        return tree

    # -- blocks -------------------------------------------------------------

    def block_offsets(self, n: int = 1):
        half = (self.L**n - 1) // 2
        rng = range(-half, half + 1)
        return list(itertools.product(rng, repeat=self.dim))

    def block_members(self, y_coords, n: int = 1):
        """Ordinals of the L^n-cube of fine sites centered on a coarse center y."""
        for c in y_coords:
            if int(c) % self.L**n != 0:
                raise LatticeError(f"{tuple(y_coords)} is not a level-{n} center")
        out = []
        for off in self.block_offsets(n):
            coords = tuple(int(y) + o for y, o in zip(y_coords, off))
            out.append(self.site_ordinal(coords))
        return out

    def coarsen(self) -> "Lattice":
        return Lattice(self.spec.coarsened())

    def boundary_bonds(self, coarse: "Lattice", y_ord: int, axis: int):
        """Fine bonds leaving the block of coarse site y through its +axis face.

        Returns (list of bond ordinals, central bond ordinal).  The central
        bond starts at the face center; it is unique because L is odd.
        """
        half = (self.L - 1) // 2
        yf = [self.L * c for c in coarse.site_coords(y_ord)]
        bonds = []
        central = None
        trans_axes = [m for m in range(self.dim) if m != axis]
        for off in itertools.product(range(-half, half + 1),
                                     repeat=self.dim - 1):
            face = list(yf)
            face[axis] += half
            for ax, o in zip(trans_axes, off):
                face[ax] += o
            b = self.bond_ordinal(self.site_ordinal(face), axis)
            bonds.append(b)
            if all(o == 0 for o in off):
                central = b
        return bonds, central

    def linking_bonds(self, coarse: "Lattice", y_ord: int, yp_ord: int):
        """Fine bonds joining the blocks of adjacent coarse sites y, y'.

        Returns (list of bond ordinals, central bond ordinal); the bonds are
        oriented from B(y) to B(y') along the separating axis when y' = y +
        e_axis, i.e. in canonical orientation when the displacement is +1.
        """
        y = coarse.site_coords(y_ord)
        yp = coarse.site_coords(yp_ord)
        delta = coarse.centered_delta(y, yp)
        if sorted(abs(d) for d in delta) != [0] * (self.dim - 1) + [1]:
            raise LatticeError("coarse sites are not nearest neighbors")
        axis = max(range(self.dim), key=lambda m: abs(delta[m]))
        if delta[axis] > 0:
            return self.boundary_bonds(coarse, y_ord, axis)
        return self.boundary_bonds(coarse, yp_ord, axis)

    # -- symmetries ---------------------------------------------------------

    def symmetries(self):
        """All signed axis permutations (they fix the origin and the lattice)."""
        out = []
        for perm in itertools.permutations(range(self.dim)):
            for signs in itertools.product((1, -1), repeat=self.dim):
                out.append(LatticeSymmetry(perm, signs))
        return out

    def site_permutation(self, r: LatticeSymmetry) -> np.ndarray:
        """dest[i] = ordinal of r(site i)."""
        dest = np.empty(self.n_sites, dtype=int)
        for s in range(self.n_sites):
            dest[s] = self.site_ordinal(r.apply_site(self.site_coords(s)))
        return dest

    def bond_image(self, r: LatticeSymmetry, bond_ordinal: int):
        """Image of a canonical bond under r: (canonical ordinal, sign)."""
        s, mu = self.bonds[bond_ordinal]
        y = list(r.apply_site(self.site_coords(s)))
        nu = r.perm[mu]
        sgn = r.signs[mu]
        if sgn > 0:
            return self.bond_ordinal(self.site_ordinal(y), nu), 1
        y[nu] -= 1
        return self.bond_ordinal(self.site_ordinal(y), nu), -1

    def __repr__(self):
        return (f"Lattice(dim={self.dim}, L={self.L}, "
                f"scale_exp={self.spec.scale_exp}, size_exp={self.spec.size_exp}, "
                f"{self.spec.boundary}, {self.n_sites} sites)")


_lattice_cache: dict = {}


def build_lattice(spec: LatticeSpec) -> Lattice:
    """Construct (and memoize) the lattice for a spec."""
    if spec not in _lattice_cache:
        _lattice_cache[spec] = Lattice(spec)
    return _lattice_cache[spec]


def open_cube(dim: int, L: int) -> Lattice:
    """The basic open cube B(0) with L sites per side."""
    return build_lattice(LatticeSpec(dim, L, 0, 0, OPEN_CUBE))


def unit_torus(dim: int, L: int, levels: int) -> Lattice:
    """Unit-spacing torus with L**levels sites per side."""
    return build_lattice(LatticeSpec(dim, L, 0, levels, TORUS))


def fine_torus(dim: int, L: int, scale: int, levels: int) -> Lattice:
    """Torus with spacing L**-scale and L**(levels+scale) sites per side."""
    return build_lattice(LatticeSpec(dim, L, scale, levels, TORUS))
