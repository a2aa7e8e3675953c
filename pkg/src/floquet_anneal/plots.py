"""Figure rendering for experiment reports (headless Agg backend).

Every function takes the target directory first, writes one PNG, and returns
its path; experiment drivers call these alongside the delimited outputs.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, fig_dir, name):
    path = os.path.join(fig_dir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_kz_scaling(fig_dir, taus, eps_bulk, eps_edge, lz, exponent):
    """Log-log residual-energy densities vs ramp time with the fitted slope."""
    taus = np.asarray(taus, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(taus, eps_bulk, "s-", label="bulk density")
    ax.loglog(taus, eps_edge, "o-", label="edge density")
    ref = eps_bulk[0] * (taus / taus[0]) ** exponent
    ax.loglog(taus, ref, "k--", lw=0.8,
              label=f"fit slope {exponent:+.2f}")
    if lz:
        ax.axhline(lz, color="gray", lw=0.8, ls=":",
                   label="edge Landau-Zener limit")
    ax.set_xlabel(r"ramp time $\tau_{QA}$  [$\hbar/|t_1|$]")
    ax.set_ylabel("residual energy density")
    ax.legend(fontsize=8)
    return _save(fig, fig_dir, "kz_scaling.png")


def plot_spectrum(fig_dir, momenta, eps, occ, hw, name="spectrum.png"):
    """Quasi-energy bands with dot size proportional to occupation."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    k = np.repeat(momenta, eps.shape[1])
    ax.scatter(k, eps.ravel(), s=1.0 + 18.0 * occ.ravel().clip(0.0, 1.0),
               c=occ.ravel(), cmap="viridis", vmin=0.0, vmax=1.0, lw=0)
    ax.set_xlabel(r"$k$  [$1/a$]")
    ax.set_ylabel(r"quasi-energy  [$|t_1|$]")
    ax.set_ylim(-0.55 * hw, 0.55 * hw)
    fig.colorbar(ax.collections[0], ax=ax, label="occupation")
    return _save(fig, fig_dir, name)


def plot_current_profile(fig_dir, bonds, j_av, j_min, j_max):
    """Window-averaged bond currents across the strip with min/max band."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.fill_between(bonds, j_min, j_max, alpha=0.25, label="intra-period range")
    ax.plot(bonds, j_av, "o-", ms=3, label="window average")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("transverse link index")
    ax.set_ylabel(r"$J$  [$|t_1|/\hbar$]")
    ax.legend(fontsize=8)
    return _save(fig, fig_dir, "current_profile.png")


def plot_micromotion(fig_dir, times, profiles, period, n_periods=3):
    """Dense edge-current traces over the last few hold periods."""
    times = np.asarray(times)
    sel = times >= times[-1] - n_periods * period
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(times[sel], profiles[sel, 0], label="left edge")
    ax.plot(times[sel], profiles[sel, -1], label="right edge")
    ax.set_xlabel(r"$t$  [$\hbar/|t_1|$]")
    ax.set_ylabel(r"$J_{\rm edge}(t)$")
    ax.legend(fontsize=8)
    return _save(fig, fig_dir, "micromotion.png")


def plot_c_bulk_traces(fig_dir, traces, lam_cr, cfg):
    """C_bulk(t) for each flake size; a vertical line marks lambda_cr."""
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    for L, trace in traces:
        ax.plot(trace[:, 0], trace[:, 1], lw=0.9, label=f"L = {L}")
    period = 2.0 * np.pi / cfg.hw
    t_cr = (lam_cr / cfg.lam_f) * round(cfg.tau_qa) * period
    ax.axvline(t_cr, color="gray", ls=":", lw=0.8,
               label=r"$\lambda(t) = \lambda_{cr}$")
    ax.axvline(round(cfg.tau_qa) * period, color="gray", ls="--", lw=0.8)
    ax.set_xlabel(r"$t$  [$\hbar/|t_1|$]")
    ax.set_ylabel(r"$C_{\rm bulk}(t)$")
    ax.legend(fontsize=8)
    return _save(fig, fig_dir, "c_bulk_traces.png")


def plot_marker_map(fig_dir, geom, marker, L):
    """Final local-marker field over the flake cells."""
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(marker.T, origin="lower", cmap="RdBu_r", vmin=-1.5,
                   vmax=1.5, interpolation="nearest")
    ax.set_xlabel("cell x")
    ax.set_ylabel("cell y")
    fig.colorbar(im, ax=ax, label=r"$C(\mathbf{r})$")
    return _save(fig, fig_dir, f"marker_map_L{L}.png")


def plot_occupation_comparison(fig_dir, sub, ref):
    """Occupation-weighted quasi-energy bands, drive vs reference frequency."""
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.6), sharey=False)
    for ax, run in zip(axes, (sub, ref)):
        k = np.repeat(run["momenta"], run["eps"].shape[1])
        ax.scatter(k, run["eps"].ravel(),
                   s=1.0 + 15.0 * run["occ"].ravel().clip(0.0, 1.0),
                   c=run["occ"].ravel(), cmap="viridis", vmin=0, vmax=1, lw=0)
        ax.set_title(rf"$\hbar\omega = {run['hw']:g}\,|t_1|$, "
                     rf"$M = {run['metallicity']:.3f}$", fontsize=9)
        ax.set_xlabel(r"$k$  [$1/a$]")
    axes[0].set_ylabel(r"quasi-energy  [$|t_1|$]")
    return _save(fig, fig_dir, "occupations_sub_vs_reference.png")
