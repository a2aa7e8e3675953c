"""Honeycomb geometries: zig-zag strips (open in x, periodic in y) and open flakes.

Conventions (lattice constant a, nearest-neighbor distance d = a/sqrt(3)):
the three A->B bond vectors are
    delta_1 = d*(1/2,  sqrt(3)/2)
    delta_2 = d*(1/2, -sqrt(3)/2)
    delta_3 = d*(-1, 0)
which puts the Dirac cones at K_pm = (2*pi/(sqrt(3)*a), +-2*pi/(3*a)) and makes
the zig-zag edge run along y with periodicity a.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

SUBLATTICE_A = 0
SUBLATTICE_B = 1

# transverse pattern of one zig-zag line, repeated every 4 sites / 3d in x
_XPAT = (0.0, 0.5, 1.5, 2.0)   # units of d
_YPAT = (0.0, 0.5, 0.5, 0.0)   # units of a


@dataclass(frozen=True)
class LatticeParams:
    """Geometry parameters: nx transverse sites, ny cells (momenta) along y."""
    nx: int
    ny: int
    a: float = 1.0

    @property
    def d(self):
        return self.a / np.sqrt(3.0)

    def validate(self):
        if self.nx % 2 != 0:
            raise ValueError(f"nx must be even (half filling per k), got {self.nx}")
        if self.nx < 4:
            raise ValueError(f"nx must be >= 4, got {self.nx}")
        if self.ny < 1:
            raise ValueError(f"ny must be >= 1, got {self.ny}")
        if self.a <= 0:
            raise ValueError("lattice constant must be positive")


@dataclass(frozen=True)
class Site:
    index: int
    x: float
    y: float
    sublattice: int  # SUBLATTICE_A or SUBLATTICE_B


@dataclass(frozen=True)
class Bond:
    """Directed bond, stored once; Hermitian partners are added at assembly.

    For nn bonds `from` is always the A site and direction_class indexes
    (delta_1, delta_2, delta_3).  For nnn bonds chirality is +1 when the
    two-hop path through the shared neighbor turns clockwise; the sign is
    oriented so that t2 > 0 with phi_H = +pi/2 gives marker +1 (see tests).
    x_mid is the transverse midpoint coordinate, used by spatial envelopes.
    """
    i: int            # from
    j: int            # to
    dx: float
    dy: float
    order: str        # "nn" | "nnn"
    direction_class: int | None = None
    chirality: int = 0
    x_mid: float = 0.0

    @property
    def length(self):
        return float(np.hypot(self.dx, self.dy))


def delta_vectors(d):
    """The three A->B nearest-neighbor vectors."""
    return np.array([
        [0.5 * d, 0.5 * np.sqrt(3.0) * d],
        [0.5 * d, -0.5 * np.sqrt(3.0) * d],
        [-d, 0.0],
    ])


def _nnn_canonical(d, a):
    """Half of the six next-nearest-neighbor vectors, with A-sublattice chirality."""
    return [
        (np.array([0.0, a]), -1),
        (np.array([1.5 * d, -0.5 * a]), -1),
        (np.array([1.5 * d, 0.5 * a]), +1),
    ]


def _line_sites(params):
    """Site positions of one transverse zig-zag line, x strictly increasing."""
    d, a = params.d, params.a
    xs = np.empty(params.nx)
    ys = np.empty(params.nx)
    subs = np.empty(params.nx, dtype=int)
    for j in range(params.nx):
        block, r = divmod(j, 4)
        xs[j] = (3.0 * block + _XPAT[r]) * d
        ys[j] = _YPAT[r] * a
        subs[j] = SUBLATTICE_A if j % 2 == 0 else SUBLATTICE_B
    return xs, ys, subs


@dataclass(frozen=True)
class RibbonGeometry:
    """Zig-zag strip: nx sites across, periodic along y with ny momenta."""
    params: LatticeParams
    sites: tuple
    nn_bonds: tuple
    nnn_bonds: tuple
    momenta: np.ndarray = field(repr=False)

    @property
    def nx(self):
        return self.params.nx

    @property
    def x(self):
        return np.array([s.x for s in self.sites])

    @property
    def sublattice_sign(self):
        """+1 on A sites, -1 on B sites (the sign of the staggered potential)."""
        return np.array([1 if s.sublattice == SUBLATTICE_A else -1 for s in self.sites])

    @property
    def width(self):
        x = self.x
        return float(x.max() - x.min())

    @property
    def k_dirac(self):
        """Bulk-projected Dirac point K_+ = 2*pi/(3a) on the ribbon momentum axis."""
        return 2.0 * np.pi / (3.0 * self.params.a)

    @property
    def k_zone_edge(self):
        """Zone edge K_f = pi/a."""
        return np.pi / self.params.a


@dataclass(frozen=True)
class FlakeGeometry:
    """Open-boundary rectangular honeycomb flake (nx sites by ny lines)."""
    params: LatticeParams
    sites: tuple
    nn_bonds: tuple
    nnn_bonds: tuple

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def x(self):
        return np.array([s.x for s in self.sites])

    @property
    def y(self):
        return np.array([s.y for s in self.sites])

    @property
    def sublattice_sign(self):
        return np.array([1 if s.sublattice == SUBLATTICE_A else -1 for s in self.sites])

    @property
    def width(self):
        x = self.x
        return float(x.max() - x.min())

    @property
    def unit_cell_area(self):
        return 0.5 * np.sqrt(3.0) * self.params.a ** 2

    @property
    def site_cells(self):
        """(n_sites, 2) integer cell coordinates; cells pair an (A, B) along a line."""
        nx = self.params.nx
        idx = np.arange(self.n_sites)
        return np.stack([(idx % nx) // 2, idx // nx], axis=1)

    @property
    def n_cells(self):
        return (self.params.nx // 2, self.params.ny)


def _match_x(xs, target, tol):
    hits = np.nonzero(np.abs(xs - target) < tol)[0]
    if len(hits) == 0:
        return None
    if len(hits) > 1:
        raise RuntimeError("ambiguous transverse coordinate match")
    return int(hits[0])


def build_ribbon(params: LatticeParams) -> RibbonGeometry:
    """Construct a zig-zag strip with open x-boundaries and y-periodicity a.

    Bonds within the transverse line carry the real-space displacement of the
    bond they represent; the y-component enters Bloch factors exp(i*k*dy).
    """
    params.validate()
    d, a = params.d, params.a
    xs, ys, subs = _line_sites(params)
    tol = 1e-9 * a

    sites = tuple(Site(j, float(xs[j]), float(ys[j]), int(subs[j]))
                  for j in range(params.nx))

    deltas = delta_vectors(d)
    nn = []
    for i in range(params.nx):
        if subs[i] != SUBLATTICE_A:
            continue
        for c, dl in enumerate(deltas):
            j = _match_x(xs, xs[i] + dl[0], tol)
            if j is None:
                continue  # open boundary cuts this bond
            # y must close modulo the period a
            wrap = (ys[i] + dl[1]) - ys[j]
            if abs(wrap / a - round(wrap / a)) > 1e-9:
                raise RuntimeError("nn bond does not close modulo the y-period")
            nn.append(Bond(i, j, float(dl[0]), float(dl[1]), "nn", direction_class=c,
                           x_mid=float(xs[i] + 0.5 * dl[0])))

    nnn = []
    for i in range(params.nx):
        sgn = 1 if subs[i] == SUBLATTICE_A else -1
        for v, chi in _nnn_canonical(d, a):
            j = _match_x(xs, xs[i] + v[0], tol)
            if j is None:
                continue
            nnn.append(Bond(i, j, float(v[0]), float(v[1]), "nnn",
                            chirality=sgn * chi, x_mid=float(xs[i] + 0.5 * v[0])))

    momenta = 2.0 * np.pi * np.arange(params.ny) / (params.ny * a)
    return RibbonGeometry(params, sites, tuple(nn), tuple(nnn), momenta)


def build_flake(params: LatticeParams) -> FlakeGeometry:
    """Construct an open-boundary flake of ny zig-zag lines, nx sites each.

    Site index = line * nx + transverse index.  Bonds are found by a
    distance search (d for nn, a for nnn) so no bond can wrap a boundary.
    """
    params.validate()
    if params.ny < 4:
        raise ValueError(f"flake requires ny >= 4, got {params.ny}")
    d, a = params.d, params.a
    lx, ly, lsub = _line_sites(params)

    n = params.nx * params.ny
    xs = np.tile(lx, params.ny)
    ys = np.concatenate([ly + m * a for m in range(params.ny)])
    subs = np.tile(lsub, params.ny)
    sites = tuple(Site(i, float(xs[i]), float(ys[i]), int(subs[i])) for i in range(n))

    tree = cKDTree(np.stack([xs, ys], axis=1))
    nn_pairs = sorted(tree.query_pairs(d * (1.0 + 1e-6)))
    nnn_pairs = sorted(tree.query_pairs(a * (1.0 + 1e-6)) - set(nn_pairs))

    nn = []
    for p, q in nn_pairs:
        i, j = (p, q) if subs[p] == SUBLATTICE_A else (q, p)
        dl = np.array([xs[j] - xs[i], ys[j] - ys[i]])
        c = int(np.argmin(np.linalg.norm(delta_vectors(d) - dl, axis=1)))
        nn.append(Bond(int(i), int(j), float(dl[0]), float(dl[1]), "nn",
                       direction_class=c, x_mid=float(0.5 * (xs[i] + xs[j]))))

    canon = _nnn_canonical(d, a)
    nnn = []
    for i, j in nnn_pairs:
        if subs[i] != subs[j]:
            raise RuntimeError("nnn pair on different sublattices")
        dl = np.array([xs[j] - xs[i], ys[j] - ys[i]])
        chi = 0
        for v, c in canon:
            if np.linalg.norm(dl - v) < 1e-6 * a:
                chi = c
            elif np.linalg.norm(dl + v) < 1e-6 * a:
                chi = -c
        if chi == 0:
            raise RuntimeError("nnn displacement not in the canonical set")
        if subs[i] == SUBLATTICE_B:
            chi = -chi
        nnn.append(Bond(int(i), int(j), float(dl[0]), float(dl[1]), "nnn",
                        chirality=chi, x_mid=float(0.5 * (xs[i] + xs[j]))))

    return FlakeGeometry(params, sites, tuple(nn), tuple(nnn))


def transverse_pair(bond: Bond, nx: int) -> int:
    """Transverse link index of a strip nn bond: bond between sites (p, p+1) -> p."""
    u, v = bond.i % nx, bond.j % nx
    return min(u, v)
