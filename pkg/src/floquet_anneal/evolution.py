"""Time stepping of Slater sectors and one-period propagators (classical RK4).

States are arrays of occupied orbitals: strip sectors (nk, nx, n_occ) batched
over momentum, flake states (n_sites, n_occ).  The Hamiltonian source is any
object with .at(t) returning a matrix (dense batch or sparse) supporting @.

hbar = 1 throughout: i dpsi/dt = H(t) psi.
"""

import numpy as np


class NumericalAbort(RuntimeError):
    """Integration produced non-finite amplitudes (step too large or bad input)."""


GRAM_TOL = 1e-8


def gram_deviation(psi):
    """Max deviation of the occupied-orbital Gram matrix from identity."""
    psi = np.asarray(psi)
    g = np.swapaxes(psi, -1, -2).conj() @ psi
    m = psi.shape[-1]
    return float(np.max(np.abs(g - np.eye(m))))


def orthonormalize(psi):
    """QR-based re-orthonormalization of each sector (gauge fix within the span)."""
    q, r = np.linalg.qr(psi)
    # keep the orbital phases stable: absorb the sign of r's diagonal
    d = np.sign(np.real(np.einsum('...ii->...i', r)))
    d[d == 0] = 1.0
    return q * d[..., None, :]


class EvolutionMonitor:
    """Tracks orthonormality during long evolutions and logs corrective events.

    Production runs are expected to stay below GRAM_TOL without intervention;
    any re-orthonormalization is recorded so a run can be flagged.
    """

    def __init__(self, gram_tol=GRAM_TOL, check_every=200):
        self.gram_tol = gram_tol
        self.check_every = check_every
        self.events = []
        self.max_gram_deviation = 0.0

    def inspect(self, t, psi):
        dev = gram_deviation(psi)
        self.max_gram_deviation = max(self.max_gram_deviation, dev)
        if dev > self.gram_tol:
            self.events.append({"t": float(t), "kind": "reorthonormalize",
                                "gram_deviation": dev})
            return orthonormalize(psi)
        return psi


def rk4_step(a0, am, a1, psi, dt):
    """One RK4 step of i dpsi/dt = H psi with H sampled at t, t+dt/2, t+dt."""
    k1 = -1j * (a0 @ psi)
    k2 = -1j * (am @ (psi + (0.5 * dt) * k1))
    k3 = -1j * (am @ (psi + (0.5 * dt) * k2))
    k4 = -1j * (a1 @ (psi + dt * k3))
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_steps(t0, t1, dt):
    span = t1 - t0
    n = int(round(span / dt))
    if n < 0 or abs(n * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"dt = {dt} does not divide the window [{t0}, {t1}]")
    return n


def rk4_evolve(op, psi, t0, t1, dt, monitor=None, finite_every=500):
    """Advance the state from t0 to t1; dt must divide the window exactly."""
    n = _check_steps(t0, t1, dt)
    if n == 0:
        return psi
    a_right = op.at(t0)
    for s in range(n):
        t = t0 + s * dt
        a0 = a_right
        am = op.at(t + 0.5 * dt)
        a_right = op.at(t + dt)
        psi = rk4_step(a0, am, a_right, psi, dt)
        if (s + 1) % finite_every == 0 and not np.all(np.isfinite(psi)):
            raise NumericalAbort(
                f"non-finite amplitudes at t = {t + dt:.6g} (dt = {dt} too large?)")
        if monitor is not None and (s + 1) % monitor.check_every == 0:
            psi = monitor.inspect(t + dt, psi)
    if not np.all(np.isfinite(psi)):
        raise NumericalAbort(f"non-finite amplitudes at t = {t1:.6g}")
    return psi


def one_period_propagator(op, t_start, period, n_steps, snapshot_steps=()):
    """U(t_start + period, t_start) by RK4 on the identity columns.

    snapshot_steps: sorted step counts m at which partial propagators
    U(t_start + m*dt, t_start) are also returned (for intra-period sampling).
    """
    dt = period / n_steps
    u = op.eye()
    snaps = {}
    want = set(int(m) for m in snapshot_steps)
    if 0 in want:
        snaps[0] = u.copy()
    a_right = op.at(t_start)
    for s in range(n_steps):
        t = t_start + s * dt
        a0 = a_right
        am = op.at(t + 0.5 * dt)
        a_right = op.at(t + dt)
        u = rk4_step(a0, am, a_right, u, dt)
        if (s + 1) in want:
            snaps[s + 1] = u.copy()
    if not np.all(np.isfinite(u)):
        raise NumericalAbort("non-finite propagator entries")
    if snapshot_steps:
        return u, [snaps[int(m)] for m in snapshot_steps]
    return u


def unitarity_defect(u):
    """max |U^dag U - 1| over the batch."""
    u = np.asarray(u)
    g = np.swapaxes(u, -1, -2).conj() @ u
    return float(np.max(np.abs(g - np.eye(u.shape[-1]))))


def ground_state(h, n_occ, positions=None, degeneracy_tol=1e-12):
    """Lowest n_occ orthonormal eigenvectors of a Hermitian matrix.

    Within numerically degenerate clusters the basis is fixed by diagonalizing
    the transverse position operator, so edge doublets at exact Delta_AB = 0
    resolve into left/right-localized orbitals deterministically.
    """
    e, v = np.linalg.eigh(h)
    if positions is not None:
        start = 0
        n = len(e)
        while start < n:
            stop = start + 1
            while stop < n and e[stop] - e[stop - 1] < degeneracy_tol:
                stop += 1
            if stop - start > 1:
                block = v[:, start:stop]
                xb = block.conj().T @ (positions[:, None] * block)
                _, w = np.linalg.eigh(0.5 * (xb + xb.conj().T))
                v[:, start:stop] = block @ w
            start = stop
    # phase convention: largest-magnitude component real positive
    occ = v[:, :n_occ]
    lead = np.argmax(np.abs(occ), axis=0)
    phase = occ[lead, np.arange(occ.shape[1])]
    phase = phase / np.abs(phase)
    return e[:n_occ], occ / phase[None, :]


def strip_ground_state(assembler, t=0.0, n_occ=None, positions=None):
    """Half-filled ground sector of every k of a strip assembler."""
    h = assembler.assemble(t)
    nk, n = h.shape[0], h.shape[1]
    if n_occ is None:
        n_occ = n // 2
    psi = np.empty((nk, n, n_occ), dtype=complex)
    energies = np.empty((nk, n_occ))
    for q in range(nk):
        energies[q], psi[q] = ground_state(h[q], n_occ, positions=positions)
    return energies, psi
