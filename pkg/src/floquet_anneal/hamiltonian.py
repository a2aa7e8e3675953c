"""Hamiltonian assembly for strips and flakes, driven or static chiral.

Matrix-element conventions (hbar = 1, energies in |t1|):
  nn bond (i -> j):   t1 * exp(-i*Phi_ij(t)) * exp(i*(k + kappa_y)*dy_ij)
  nnn bond (i -> j):  t2 * exp(i*chirality*phi_H) * exp(i*(k + kappa_y)*dy_ij)
  diagonal:           +Delta_AB on A sites, -Delta_AB on B sites
Each stored bond contributes its element plus the Hermitian conjugate.  The
flux twist kappa_y exists only to define the current operator d H / d kappa_y.

Reference builders assemble one matrix with an explicit bond loop; the
Assembler classes produce the same matrices batched over the momentum grid
(strip) or as sparse CSR (flake) for the time stepper.
"""

import numpy as np
from scipy import sparse

from .drive import DriveParams, Schedule, HaldaneSchedule, envelope_profile, \
    effective_haldane_params
from .lattice import RibbonGeometry, FlakeGeometry, delta_vectors


def _drive_phases(bonds, t, drive, schedule):
    """Peierls phases of the listed nn bonds at time t (vectorized)."""
    dx = np.array([b.dx for b in bonds])
    dy = np.array([b.dy for b in bonds])
    d = np.hypot(dx, dy)
    env = envelope_profile(np.array([b.x_mid for b in bonds]), drive)
    w = drive.hw
    return schedule.lam(t) * env * (
        (dx / d) * np.sin(w * t) + (dy / d) * np.sin(w * t - drive.phi))


def strip_hamiltonian(geom: RibbonGeometry, k, t, drive: DriveParams,
                      schedule: Schedule, t1=-1.0, kappa_y=0.0):
    """Single k-resolved strip matrix of the driven nn model (reference path)."""
    n = geom.nx
    h = np.zeros((n, n), dtype=complex)
    phases = _drive_phases(geom.nn_bonds, t, drive, schedule)
    for b, phi in zip(geom.nn_bonds, phases):
        el = t1 * np.exp(-1j * phi) * np.exp(1j * (k + kappa_y) * b.dy)
        h[b.j, b.i] += el
        h[b.i, b.j] += np.conj(el)
    np.fill_diagonal(h, h.diagonal() + schedule.delta_ab(t) * geom.sublattice_sign)
    return h


def haldane_strip_hamiltonian(geom: RibbonGeometry, k, t1, t2, phi_h,
                              delta_ab=0.0, kappa_y=0.0):
    """Single k-resolved strip matrix of the static chiral model (reference path)."""
    n = geom.nx
    h = np.zeros((n, n), dtype=complex)
    for b in geom.nn_bonds:
        el = t1 * np.exp(1j * (k + kappa_y) * b.dy)
        h[b.j, b.i] += el
        h[b.i, b.j] += np.conj(el)
    for b in geom.nnn_bonds:
        el = t2 * np.exp(1j * b.chirality * phi_h) * np.exp(1j * (k + kappa_y) * b.dy)
        h[b.j, b.i] += el
        h[b.i, b.j] += np.conj(el)
    np.fill_diagonal(h, h.diagonal() + delta_ab * geom.sublattice_sign)
    return h


def bloch_hamiltonian(kvec, t, drive: DriveParams, schedule: Schedule,
                      t1=-1.0, a=1.0):
    """2x2 bulk Bloch matrix of the driven model at 2d momentum kvec.

    Basis (A, B); off-diagonal element H_BA = t1 * sum_delta exp(-i*Phi_delta(t))
    * exp(i k . delta) over the three nn vectors, uniform envelope.
    """
    d = a / np.sqrt(3.0)
    lam = schedule.lam(t)
    w = drive.hw
    f = 0.0j
    for dl in delta_vectors(d):
        phi = lam * ((dl[0] / d) * np.sin(w * t) +
                     (dl[1] / d) * np.sin(w * t - drive.phi))
        f += t1 * np.exp(-1j * phi) * np.exp(1j * (kvec[0] * dl[0] + kvec[1] * dl[1]))
    delta = schedule.delta_ab(t)
    return np.array([[delta, np.conj(f)], [f, -delta]])


def flake_hamiltonian(geom: FlakeGeometry, t=0.0, mode="driven", drive=None,
                      schedule=None, t1=-1.0, t2=0.0, phi_h=0.0, delta_ab=None):
    """Dense flake matrix; mode "driven" (nn Peierls) or "haldane" (static chiral)."""
    n = geom.n_sites
    h = np.zeros((n, n), dtype=complex)
    if mode == "driven":
        if drive is None or schedule is None:
            raise ValueError("driven mode needs drive and schedule")
        phases = _drive_phases(geom.nn_bonds, t, drive, schedule)
        for b, phi in zip(geom.nn_bonds, phases):
            el = t1 * np.exp(-1j * phi)
            h[b.j, b.i] += el
            h[b.i, b.j] += np.conj(el)
        dval = schedule.delta_ab(t) if delta_ab is None else delta_ab
    elif mode == "haldane":
        for b in geom.nn_bonds:
            h[b.j, b.i] += t1
            h[b.i, b.j] += t1
        for b in geom.nnn_bonds:
            el = t2 * np.exp(1j * b.chirality * phi_h)
            h[b.j, b.i] += el
            h[b.i, b.j] += np.conj(el)
        dval = 0.0 if delta_ab is None else delta_ab
    else:
        raise ValueError(f"unknown mode '{mode}'")
    np.fill_diagonal(h, h.diagonal() + dval * geom.sublattice_sign)
    return h


def _directed_arrays(bonds):
    """Stored bonds doubled into directed entries (bond, then conjugate)."""
    i = np.array([b.i for b in bonds], dtype=int)
    j = np.array([b.j for b in bonds], dtype=int)
    dy = np.array([b.dy for b in bonds])
    row = np.concatenate([j, i])
    col = np.concatenate([i, j])
    base = np.concatenate([np.arange(len(bonds)), np.arange(len(bonds))])
    sign = np.concatenate([np.ones(len(bonds)), -np.ones(len(bonds))])
    return i, j, dy, row, col, base, sign


def _scatter_groups(row, col, n):
    """Partition directed entries so each group hits unique (row, col) slots.

    Needed because fancy-index += drops duplicate contributions; the double
    bonds between adjacent transverse sites (and wrapped self-bonds) collide.
    """
    keys = row * n + col
    groups = []
    remaining = list(range(len(keys)))
    while remaining:
        seen = set()
        take, defer = [], []
        for e in remaining:
            if keys[e] in seen:
                defer.append(e)
            else:
                seen.add(keys[e])
                take.append(e)
        groups.append(np.array(take, dtype=int))
        remaining = defer
    return groups


def _bond_pairs(i, j, nx):
    """Transverse link index (p, p+1) each bond's current is accounted to."""
    return np.minimum(np.minimum(i, j), nx - 2)


class StripAssembler:
    """Batched k-resolved strip matrices H[k] plus current-operator pieces.

    coupling_fn(t) gives the k-independent complex coupling of each stored
    bond; diagonal_fn(t) the real staggered diagonal.  Static couplings are
    scattered once and cached.
    """

    def __init__(self, geom, bonds, coupling_fn, diagonal_fn,
                 momenta=None, static_bonds=False):
        self.geom = geom
        self.bonds = tuple(bonds)
        self.coupling_fn = coupling_fn
        self.diagonal_fn = diagonal_fn
        self.momenta = np.asarray(geom.momenta if momenta is None else momenta,
                                  dtype=float)
        n = geom.nx
        self.n = n
        (self._bi, self._bj, self._bdy, self._row, self._col,
         self._base, self._sign) = _directed_arrays(self.bonds)
        self._sdy = self._sign * self._bdy[self._base]
        # exp(i k dy) for every directed entry and for the stored bonds alone
        self._bloch = np.exp(1j * self.momenta[:, None] * self._sdy[None, :])
        self._bloch_base = np.exp(1j * self.momenta[:, None] * self._bdy[None, :])
        self._groups = _scatter_groups(self._row, self._col, n)
        self._pair = _bond_pairs(self._bi, self._bj, n)
        self._diag_idx = np.arange(n)
        self._static = static_bonds
        self._cached_bond_part = None

    @property
    def nk(self):
        return len(self.momenta)

    def _bond_part(self, t, kappa_y):
        if self._static and kappa_y == 0.0 and self._cached_bond_part is not None:
            return self._cached_bond_part.copy()
        c = np.asarray(self.coupling_fn(t), dtype=complex)
        cd = np.concatenate([c, np.conj(c)])
        z = cd[None, :] * self._bloch
        if kappa_y != 0.0:
            z = z * np.exp(1j * kappa_y * self._sdy)[None, :]
        h = np.zeros((self.nk, self.n, self.n), dtype=complex)
        for idx in self._groups:
            h[:, self._row[idx], self._col[idx]] += z[:, idx]
        if self._static and kappa_y == 0.0:
            self._cached_bond_part = h.copy()
        return h

    def assemble(self, t, kappa_y=0.0):
        """H(k, t) for every k on the grid, shape (nk, nx, nx)."""
        h = self._bond_part(t, kappa_y)
        h[:, self._diag_idx, self._diag_idx] += self.diagonal_fn(t)[None, :]
        return h

    def at(self, t):
        return self.assemble(t)

    def eye(self):
        return np.broadcast_to(np.eye(self.n, dtype=complex),
                               (self.nk, self.n, self.n)).copy()

    def current_matrix(self, t):
        """(1/hbar) dH/d kappa_y at kappa_y = 0, batched over k."""
        c = np.asarray(self.coupling_fn(t), dtype=complex)
        cd = np.concatenate([c, np.conj(c)])
        z = (1j * self._sdy)[None, :] * cd[None, :] * self._bloch
        m = np.zeros((self.nk, self.n, self.n), dtype=complex)
        for idx in self._groups:
            m[:, self._row[idx], self._col[idx]] += z[:, idx]
        return m

    def current_terms(self, t):
        """Per-bond current elements J[j,i](k,t) = i*dy*H[j,i] with link labels.

        Returns (i, j, link, jel) with jel of shape (nk, n_bonds); the current
        sample is sum_k 2 Re[jel * rho_ij] accumulated per link.
        """
        c = np.asarray(self.coupling_fn(t), dtype=complex)
        jel = (1j * self._bdy)[None, :] * c[None, :] * self._bloch_base
        return self._bi, self._bj, self._pair, jel


def driven_strip_assembler(geom, drive, schedule, t1=-1.0, momenta=None):
    bonds = geom.nn_bonds
    dx = np.array([b.dx for b in bonds])
    dy = np.array([b.dy for b in bonds])
    d = np.hypot(dx, dy)
    env = envelope_profile(np.array([b.x_mid for b in bonds]), drive)
    ux, uy = dx / d, dy / d
    w = drive.hw
    sgn = geom.sublattice_sign.astype(float)

    def coupling(t):
        phi = schedule.lam(t) * env * (ux * np.sin(w * t) + uy * np.sin(w * t - drive.phi))
        return t1 * np.exp(-1j * phi)

    def diagonal(t):
        return schedule.delta_ab(t) * sgn

    return StripAssembler(geom, bonds, coupling, diagonal, momenta=momenta)


def haldane_strip_assembler(geom, sched: HaldaneSchedule, momenta=None,
                            delta_ab=None):
    """Static chiral strip; the staggered diagonal follows the ramp schedule.

    Passing delta_ab pins the diagonal to a constant instead.
    """
    bonds = tuple(geom.nn_bonds) + tuple(geom.nnn_bonds)
    static_c = np.array(
        [sched.t1 if b.order == "nn"
         else sched.t2 * np.exp(1j * b.chirality * sched.phi_h) for b in bonds])
    sgn = geom.sublattice_sign.astype(float)

    def coupling(t):
        return static_c

    if delta_ab is None:
        def diagonal(t):
            return sched.delta_ab(t) * sgn
    else:
        def diagonal(t):
            return delta_ab * sgn

    return StripAssembler(geom, bonds, coupling, diagonal, momenta=momenta,
                          static_bonds=True)


class FlakeAssembler:
    """Sparse flake matrices with a fixed CSR pattern and in-place data refresh."""

    def __init__(self, geom, bonds, coupling_fn, diagonal_fn, static_bonds=False):
        self.geom = geom
        self.bonds = tuple(bonds)
        self.coupling_fn = coupling_fn
        self.diagonal_fn = diagonal_fn
        n = geom.n_sites
        self.n = n
        (self._bi, self._bj, self._bdy, row, col,
         self._base, self._sign) = _directed_arrays(self.bonds)
        keys = np.concatenate([row * n + col, np.arange(n) * n + np.arange(n)])
        ukeys, slot = np.unique(keys, return_inverse=True)
        self._slot_dir = slot[:len(row)]
        self._slot_diag = slot[len(row):]
        urow, ucol = np.divmod(ukeys, n)
        indptr = np.searchsorted(urow, np.arange(n + 1))
        self._template = sparse.csr_matrix(
            (np.zeros(len(ukeys), dtype=complex), ucol.astype(np.int32),
             indptr.astype(np.int32)), shape=(n, n))
        self._static = static_bonds
        self._cached_data = None

    def _data(self, t):
        if self._static and self._cached_data is not None:
            data = self._cached_data.copy()
        else:
            c = np.asarray(self.coupling_fn(t), dtype=complex)
            data = np.zeros(self._template.nnz, dtype=complex)
            np.add.at(data, self._slot_dir, np.concatenate([c, np.conj(c)]))
            if self._static:
                self._cached_data = data.copy()
        data[self._slot_diag] += self.diagonal_fn(t)
        return data

    def assemble(self, t):
        """CSR flake matrix at time t (fresh data on the shared pattern)."""
        m = self._template.copy()
        m.data = self._data(t)
        return m

    def at(self, t):
        return self.assemble(t)

    def assemble_dense(self, t):
        return self.assemble(t).toarray()

    def eye(self):
        return np.eye(self.n, dtype=complex)


def driven_flake_assembler(geom, drive, schedule, t1=-1.0):
    bonds = geom.nn_bonds
    dx = np.array([b.dx for b in bonds])
    dy = np.array([b.dy for b in bonds])
    d = np.hypot(dx, dy)
    env = envelope_profile(np.array([b.x_mid for b in bonds]), drive)
    ux, uy = dx / d, dy / d
    w = drive.hw
    sgn = geom.sublattice_sign.astype(float)

    def coupling(t):
        phi = schedule.lam(t) * env * (ux * np.sin(w * t) + uy * np.sin(w * t - drive.phi))
        return t1 * np.exp(-1j * phi)

    def diagonal(t):
        return schedule.delta_ab(t) * sgn

    return FlakeAssembler(geom, bonds, coupling, diagonal)


def haldane_flake_assembler(geom, t1, t2, phi_h, delta_of_t):
    """Static chiral flake; delta_of_t(t) drives the staggered diagonal."""
    bonds = tuple(geom.nn_bonds) + tuple(geom.nnn_bonds)
    static_c = np.array(
        [t1 if b.order == "nn" else t2 * np.exp(1j * b.chirality * phi_h)
         for b in bonds])
    sgn = geom.sublattice_sign.astype(float)

    def coupling(t):
        return static_c

    def diagonal(t):
        return delta_of_t(t) * sgn

    return FlakeAssembler(geom, bonds, coupling, diagonal, static_bonds=True)


def effective_haldane_strip(geom, lam, drive: DriveParams, t1=-1.0,
                            delta_ab=0.0, momenta=None):
    """Static strip assembler for the Bessel-mapped model at amplitude lam.

    Diagnostic oracle for the driven dynamics, not a simulation backend.
    """
    t1e, t2e, phie = effective_haldane_params(lam, drive.hw, t1, drive.phi)
    sched = HaldaneSchedule(t1=t1e, t2=t2e, phi_h=phie, tau_qa=1.0,
                            ratio_start=0.0, ratio_end=0.0)
    return haldane_strip_assembler(geom, sched, momenta=momenta,
                                   delta_ab=delta_ab)
