"""Quasi-energy spectra, Floquet modes, gaps, and mode occupations.

Quasi-energies live in the Floquet zone [-hbar*w/2, hbar*w/2); modes are the
eigenvectors of the one-period propagator U(tau), extracted through a complex
Schur decomposition so the returned basis is orthonormal to machine precision
even for (near-)degenerate eigenphases.
"""

import warnings

import numpy as np
from scipy.linalg import schur

UNITARITY_REJECT = 1e-6


def fold_energy(e, hw):
    """Map energies to the Floquet zone [-hw/2, hw/2) by mod-hw reduction."""
    return (np.asarray(e) + 0.5 * hw) % hw - 0.5 * hw


def floquet_spectrum(u, hw, h_ref=None, degeneracy_tol=1e-10):
    """Quasi-energies (ascending) and orthonormal Floquet modes of one propagator.

    h_ref: Hermitian matrix used to fix the basis inside degenerate eigenphase
    clusters (splitting < degeneracy_tol in eigenphase), for reproducibility.
    """
    u = np.asarray(u)
    n = u.shape[0]
    defect = np.max(np.abs(u.conj().T @ u - np.eye(n)))
    if defect > UNITARITY_REJECT:
        raise ValueError(f"propagator is not unitary (defect {defect:.2e})")
    tau = 2.0 * np.pi / hw
    t, q = schur(u, output='complex')
    theta = np.angle(np.diagonal(t))          # in (-pi, pi]
    eps = -theta / tau                        # in [-hw/2, hw/2)
    order = np.argsort(eps, kind='stable')
    eps = eps[order]
    modes = q[:, order]
    # resolve degenerate clusters against a reference Hamiltonian
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and (eps[stop] - eps[stop - 1]) * tau < degeneracy_tol:
            stop += 1
        if stop - start > 1 and h_ref is not None:
            block = modes[:, start:stop]
            hb = block.conj().T @ h_ref @ block
            _, w = np.linalg.eigh(0.5 * (hb + hb.conj().T))
            modes[:, start:stop] = block @ w
        start = stop
    lead = np.argmax(np.abs(modes), axis=0)
    phase = modes[lead, np.arange(n)]
    modes = modes / (phase / np.abs(phase))[None, :]
    return eps, modes


def floquet_spectrum_batch(u, hw, h_ref=None):
    """floquet_spectrum over a stack of propagators (nk, n, n)."""
    nk, n = u.shape[0], u.shape[1]
    eps = np.empty((nk, n))
    modes = np.empty((nk, n, n), dtype=complex)
    for q in range(nk):
        ref = None if h_ref is None else h_ref[q]
        eps[q], modes[q] = floquet_spectrum(u[q], hw, h_ref=ref)
    return eps, modes


def floquet_gap(ea, eb, hw):
    """min over m in {-1, 0, 1} of |ea - eb + m*hw| (zone-wrapped distance)."""
    d = np.abs(np.asarray(ea) - np.asarray(eb))
    return np.minimum(d, hw - d)


def floquet_ground_state(eps, modes, n_expected=None):
    """Modes with negative quasi-energy (the [-hw/2, 0) half of the zone).

    Warns when the count differs from n_expected (sub-bandwidth regime where
    folded conduction states cross into the negative half).
    """
    sel = eps < 0.0
    if n_expected is not None and int(np.sum(sel)) != n_expected:
        warnings.warn(
            f"Floquet ground state holds {int(np.sum(sel))} modes, expected "
            f"{n_expected}: quasi-energy folding has mixed the bands", stacklevel=2)
    return modes[:, sel]


def occupations(psi, modes):
    """n_alpha = sum_j |<phi_alpha|psi_j>|^2 for one sector (or batched)."""
    ov = np.swapaxes(modes, -1, -2).conj() @ psi
    return np.sum(np.abs(ov) ** 2, axis=-1)


def connect_bands(modes_by_k, threshold=0.5):
    """Greedy band labels across the momentum grid by maximal mode overlap.

    modes_by_k: (nk, n, n); returns integer labels (nk, n).  A band continues
    to the partner of largest squared overlap when it exceeds threshold,
    otherwise a fresh label starts (bands plotted as connected curves).
    """
    nk, n = modes_by_k.shape[0], modes_by_k.shape[1]
    labels = np.full((nk, n), -1, dtype=int)
    labels[0] = np.arange(n)
    next_label = n
    for q in range(1, nk):
        ov = np.abs(modes_by_k[q - 1].conj().T @ modes_by_k[q]) ** 2
        taken = np.zeros(n, dtype=bool)
        # visit strongest overlaps first so clean continuations win contention
        for a in np.argsort(-np.max(ov, axis=1), kind='stable'):
            b = int(np.argmax(ov[a]))
            if ov[a, b] >= threshold and not taken[b]:
                labels[q, b] = labels[q - 1, a]
                taken[b] = True
        for b in range(n):
            if labels[q, b] < 0:
                labels[q, b] = next_label
                next_label += 1
    return labels
