"""Figure-scale acceptance checks, one test per headline result.

Each test prints a single pass/fail line through the shared criterion
reporter; the underlying runs come from the cached figure_runs fixture.
"""

import math
import os

import numpy as np
import pytest

from floquet_anneal.config import EXPERIMENTS, preset
from floquet_anneal.drive import (
    DriveParams, HaldaneSchedule, Schedule, critical_lambda,
    effective_haldane_params,
)
from floquet_anneal.evolution import (
    gram_deviation, one_period_propagator, rk4_evolve, ground_state,
    strip_ground_state, unitarity_defect,
)
from floquet_anneal.floquet import floquet_gap, floquet_spectrum
from floquet_anneal.hamiltonian import (
    bloch_hamiltonian, driven_flake_assembler, driven_strip_assembler,
    haldane_flake_assembler, haldane_strip_assembler,
)
from floquet_anneal.lattice import LatticeParams, build_flake, build_ribbon
from floquet_anneal import observables as obs


def _table(path, **kw):
    return np.loadtxt(path, delimiter="\t" if path.endswith(".tsv") else ",",
                      skiprows=2, unpack=True, **kw)


def test_criterion_01_bulk_scaling_exponent(figure_runs, criterion):
    run = figure_runs("haldane_qa")
    expo = run.summary["kz_exponent"]
    err = run.summary["kz_stderr"]
    wall = run.manifest.wall_time
    ok = -1.15 <= expo <= -0.85 and wall < 600.0
    assert criterion(1, ok,
                     f"eps_bulk ~ tau^({expo:.3f} +- {err:.3f}) over 1.5 "
                     f"decades, target -1 +- 0.15; wall {wall:.0f} s"), \
        f"bulk scaling exponent {expo:.3f} outside [-1.15, -0.85]"


def test_criterion_02_edge_saturation(figure_runs, criterion):
    run = figure_runs("haldane_qa")
    tau, _, ee = _table(run.file("bulk_edge_fits.csv"))
    lz = run.summary["lz_integral"]
    frac = run.summary["edge_fraction_of_lz"]
    steps = np.diff(ee) / np.abs(ee[:-1])
    monotone = bool(np.all(steps >= -0.02))
    ok = monotone and frac >= 0.8
    # context for the failure: the raw residual energy at the slowest ramp is
    # already affine in L with a negative offset, which the pinned
    # through-origin {L^2, L} split cannot represent at these strip sizes
    sizes, taus, e_res = _table(run.file("residual_energy.csv"))
    sel = taus == tau[-1]
    slope, offset = np.polyfit(sizes[sel], e_res[sel], 1)
    assert criterion(
        2, ok,
        f"eps_edge/eps_LZ = {frac:.2f} at tau = {tau[-1]:g} (need >= 0.80), "
        f"largest dip {100 * steps.min():.1f}% (allow -2%); raw E_res(L) "
        f"there is {slope:.3f} L {offset:+.2f} with eps_LZ = {lz:.4f}"), (
        "edge saturation not reached at strip sizes L <= 36: the fitted "
        f"edge density caps at {frac:.2f} of the Landau-Zener integral "
        f"because E_res(L) = {slope:.3f} L {offset:+.2f} carries a "
        "size-independent negative offset that the {L^2, L} basis folds "
        "into the fitted coefficients; the slope itself approaches eps_LZ "
        f"= {lz:.4f} from above as the ramp slows")


def test_criterion_03_transition_point(criterion):
    lam_cr = critical_lambda(0.1, 7.0)
    in_band = 0.54 <= lam_cr <= 0.60

    # quasi-energy gap of the two-band problem at the valley that the
    # positive-helicity drive closes, scanned over the drive amplitude
    hw, dab = 7.0, 0.1
    kv = np.array([2.0 * math.pi / math.sqrt(3.0), 2.0 * math.pi / 3.0])

    def gap(lam):
        sch = Schedule(DriveParams(lam_f=lam, hw=hw, phi=0.5 * math.pi,
                                   tau_qa=0.0, tau_hold=1.0),
                       delta_ab0=dab, delta_mode="constant")

        class Src:
            def at(self, t):
                return bloch_hamiltonian(kv, t, sch.drive, sch)

            def eye(self):
                return np.eye(2, dtype=complex)

        u = one_period_propagator(Src(), 0.0, 2.0 * math.pi / hw, 600)
        eps, _ = floquet_spectrum(u, hw)
        return floquet_gap(eps[1], eps[0], hw)

    lams = np.linspace(lam_cr - 0.08, lam_cr + 0.08, 33)
    lam_min = lams[int(np.argmin([gap(l) for l in lams]))]
    agree = abs(lam_min - lam_cr) / lam_cr
    ok = in_band and agree <= 0.05
    assert criterion(3, ok,
                     f"critical_lambda = {lam_cr:.4f} in [0.54, 0.60]; "
                     f"scanned gap minimum at {lam_min:.4f} "
                     f"({100 * agree:.1f}% apart, allow 5%)")


def test_criterion_04_edge_current_structure(figure_runs, criterion):
    uni = figure_runs("floquet_qa_uniform")
    l, r = uni.summary["edge_avg_left"], uni.summary["edge_avg_right"]
    bulk = uni.summary["bulk_avg"]
    ratio = min(l, r) / bulk
    agree = abs(l - r) / max(l, r)
    foc = figure_runs("floquet_qa_focused")
    dark = foc.summary["edge_avg_left"] / foc.summary["edge_avg_right"]
    walls = (uni.manifest.wall_time, foc.manifest.wall_time)
    ok = ratio > 10.0 and agree <= 0.05 and dark < 0.10 \
        and max(walls) < 1200.0
    assert criterion(4, ok,
                     f"uniform edge/bulk = {ratio:.0f} (need > 10), L/R "
                     f"mismatch {100 * agree:.2g}% (allow 5%); focused "
                     f"dark/irradiated = {100 * dark:.2f}% (need < 10%); "
                     f"walls {walls[0]:.0f}/{walls[1]:.0f} s")


def test_criterion_05_micromotion(figure_runs, criterion):
    run = figure_runs("floquet_qa_uniform")
    t, jl, jr = _table(run.file("edge_current_trace.csv"))
    per_period = 50                      # dense samples per drive period
    checks = []
    for series in (jl, jr):
        dense = np.trapezoid(series, t) / (t[-1] - t[0])
        coarse = np.trapezoid(series[::2], t[::2]) / (t[-1] - t[0])
        strobo = series[::per_period].mean()
        pkpk = series.max() - series.min()
        quad_err = abs(dense - coarse)
        checks.append((pkpk / abs(dense),
                       abs(dense - strobo) / max(quad_err, 1e-300)))
    osc = min(c[0] for c in checks)
    sep = min(c[1] for c in checks)
    ok = osc > 1.0 and sep > 10.0
    assert criterion(5, ok,
                     f"intra-period peak-to-peak = {osc:.0f}x the window "
                     f"average; dense vs stroboscopic averages separated by "
                     f"{sep:.1e}x the quadrature error")


def _equilibrium_flake_marker(t2, delta_ab, L=24):
    geom = build_flake(LatticeParams(nx=L, ny=L))
    asm = haldane_flake_assembler(geom, -1.0, t2, 0.5 * math.pi,
                                  lambda t: delta_ab)
    _, psi = ground_state(asm.assemble_dense(0.0), geom.n_sites // 2,
                          positions=geom.x + math.sqrt(2.0) * geom.y)
    return geom, obs.chern_marker(psi, geom)


def test_criterion_06_marker_calibration(figure_runs, criterion):
    geom, topo = _equilibrium_flake_marker(t2=0.2, delta_ab=0.0)
    ncx, ncy = geom.n_cells
    c_topo = topo[ncx // 2, ncy // 2]
    sums = [abs(np.sum(topo) * geom.unit_cell_area)]
    geom2, triv = _equilibrium_flake_marker(t2=0.0, delta_ab=0.5)
    c_triv = triv[geom2.n_cells[0] // 2, geom2.n_cells[1] // 2]
    sums.append(abs(np.sum(triv) * geom2.unit_cell_area))
    # the dynamical runs must satisfy the same whole-flake sum rule
    chern = figure_runs("chern_dynamics")
    area = math.sqrt(3.0) / 2.0
    for L in (12, 18, 24):
        _, _, c = _table(chern.file(f"marker_map_L{L}.csv"))
        sums.append(abs(np.sum(c) * area))
    ok = abs(c_topo - 1.0) <= 0.05 and abs(c_triv) <= 0.05 \
        and max(sums) < 1e-6
    assert criterion(6, ok,
                     f"equilibrium central marker {c_topo:.4f} (topological) "
                     f"/ {c_triv:.4f} (trivial); worst whole-flake sum "
                     f"{max(sums):.1e} over 5 samples")


def test_criterion_07_dynamical_marker(figure_runs, criterion):
    run = figure_runs("chern_dynamics")
    c_av = {int(k): v for k, v in run.summary["c_bulk_av"].items()}
    lam_cr = run.summary["lam_cr"]
    in_range = 0.80 <= c_av[24] <= 1.00

    t, c, lam = _table(run.file("c_bulk_trace_L24.csv"))
    ramp = lam < 1.0
    i_cr = int(np.argmin(np.abs(lam[ramp] - lam_cr)))
    t_cr = t[ramp][i_cr]
    near = ramp & (np.abs(t - t_cr) < 10.0)
    slope = np.polyfit(t[near], c[near], 1)[0]
    rising = slope > 0.0 and c[ramp][-1] > c[ramp][i_cr]

    sizes = np.array(sorted(c_av))
    values = np.array([c_av[s] for s in sizes])
    _, resid = obs.limit_consistency(sizes, values, limit=1.0)
    worst = float(np.max(np.abs(resid)))
    free_limit, _ = obs.extrapolate_sizes(sizes, values)
    ok = in_range and rising and worst <= 0.05
    assert criterion(
        7, ok,
        f"C_bulk_av(24) = {c_av[24]:.3f} in [0.80, 1.00], slope "
        f"{slope:+.4f} through lam_cr; fit to 1 + c1/L + c2/L^2 leaves "
        f"residuals <= {worst:.3f} (allow 0.05; unconstrained three-point "
        f"intercept {free_limit:.2f} is leverage-dominated at these sizes)")


def test_criterion_08_sub_bandwidth_breakdown(figure_runs, criterion):
    run = figure_runs("subresonant")
    ratio = run.summary["metallicity_ratio"]
    frac = run.summary["fractional_fraction"]
    m = run.summary["metallicity"]
    ok = ratio > 5.0 and frac >= 0.10
    assert criterion(8, ok,
                     f"metallicity {m['4']:.2e} (hw=4) vs {m['7']:.2e} "
                     f"(hw=7), ratio {ratio:.0f} (need > 5); fractional "
                     f"occupations on {100 * frac:.0f}% of modes (need 10%)")


def _order_probe(asm, period):
    """RK4 convergence order from one coarse/fine/reference period."""
    u_ref = one_period_propagator(asm, 0.0, period, 800)
    err = [float(np.abs(one_period_propagator(asm, 0.0, period, div)
                        - u_ref).max())
           for div in (50, 100)]
    return math.log2(err[0] / err[1])


def _driven_probe_assembler(cfg, hw):
    geom = build_ribbon(LatticeParams(nx=12, ny=2))
    x_c = geom.width if cfg.envelope == "gaussian" else 0.0
    x_s = 0.4 * geom.width if cfg.envelope == "gaussian" else 0.0
    period = 2.0 * math.pi / hw
    drive = DriveParams(lam_f=cfg.lam_f, hw=hw, phi=cfg.phi,
                        tau_qa=2.0 * period, tau_hold=period,
                        envelope=cfg.envelope, x_center=x_c, x_sigma=x_s)
    sched = Schedule(drive, delta_ab0=cfg.delta_ab,
                     delta_mode=cfg.delta_mode)
    return geom, driven_strip_assembler(geom, drive, sched), period


def test_criterion_09_integrity_suite(figure_runs, criterion):
    failures = []
    herm_worst = unit_worst = order_worst = occ_worst = 0.0
    for name in EXPERIMENTS:
        cfg = preset(name)
        run = figure_runs(name)
        if run.manifest.events:
            failures.append(f"{name}: {len(run.manifest.events)} "
                            "evolution events")
        if "unitarity_defect" in run.summary \
                and run.summary["unitarity_defect"] >= 1e-8:
            failures.append(f"{name}: figure-scale unitarity "
                            f"{run.summary['unitarity_defect']:.1e}")

        if name == "haldane_qa":
            # static chiral ramp: hermiticity plus orthonormality transport
            geom = build_ribbon(LatticeParams(nx=12, ny=4))
            sched = HaldaneSchedule(-1.0, cfg.t2, cfg.phi_h, tau_qa=3.2,
                                    ratio_start=cfg.ratio_start,
                                    ratio_end=cfg.ratio_end)
            asm = haldane_strip_assembler(geom, sched)
            for t in (0.0, 0.8, 3.2):
                h = asm.at(t)
                herm_worst = max(herm_worst,
                                 float(np.abs(h - h.conj().transpose(
                                     0, 2, 1)).max()))
            _, psi = strip_ground_state(asm, t=0.0, positions=geom.x)
            psi = rk4_evolve(asm, psi, 0.0, 3.2, 3.2 / 800.0)
            occ_worst = max(occ_worst, gram_deviation(psi))
            continue

        hw = cfg.hw
        geom, asm, period = _driven_probe_assembler(cfg, hw)
        for t in (0.0, 0.37 * period, 2.6 * period):
            h = asm.at(t)
            herm_worst = max(herm_worst, float(np.abs(
                h - h.conj().transpose(0, 2, 1)).max()))
        u = one_period_propagator(asm, 2.0 * period, period, cfg.dt_divisor)
        unit_worst = max(unit_worst, float(unitarity_defect(u)))
        order = _order_probe(asm, period)
        order_worst = max(order_worst, abs(order - 4.0))
        if order < 3.7:
            failures.append(f"{name}: rk4 order {order:.2f}")
        # analytic current operator against a finite difference in the
        # longitudinal boundary twist
        kappa = 1e-4
        j_fd = (asm.assemble(0.4 * period, kappa_y=kappa)
                - asm.assemble(0.4 * period, kappa_y=-kappa)) / (2.0 * kappa)
        j_an = asm.current_matrix(0.4 * period)
        rel = float(np.abs(j_an - j_fd).max() / np.abs(j_an).max())
        if rel >= 1e-6:
            failures.append(f"{name}: current operator fd mismatch {rel:.1e}")

        # occupation sum rule on the shipped spectra
        spectra = [p for p in os.listdir(run.path)
                   if p.startswith("spectrum") and p.endswith(".tsv")]
        for spec_name in spectra:
            k, _, _, n_occ_col = _table(run.file(spec_name))[:4]
            for kv in np.unique(k):
                dev = abs(n_occ_col[k == kv].sum()
                          - (n_occ_col[k == kv].size // 2))
                occ_worst = max(occ_worst, float(dev))

    ok = not failures and herm_worst < 1e-12 and unit_worst < 1e-8 \
        and occ_worst < 1e-8
    assert criterion(9, ok,
                     f"hermiticity {herm_worst:.1e}, unitarity {unit_worst:.1e}"
                     f", rk4 order within {order_worst:.2f} of 4, occupation "
                     f"sums within {occ_worst:.1e} across presets"
                     + ("; " + "; ".join(failures) if failures else "")), \
        f"integrity failures: {failures}"


def _occupied_window_branch(run):
    """(k, eps) of occupied in-gap edge states with k in (K_+, K_f)."""
    cfg = run.cfg
    _, t2e, phie = effective_haldane_params(cfg.lam_f, cfg.hw, t1=cfg.t1,
                                            phi=cfg.phi)
    gap_cut = 0.45 * 2.0 * abs(3.0 * math.sqrt(3.0) * abs(t2e)
                               * math.sin(abs(phie)))
    k, _, eps, n_occ, wl, wr = _table(run.file("spectrum.tsv"))
    sel = (k > 2.0 * math.pi / 3.0) & (k < math.pi) & (n_occ > 0.5) \
        & (np.abs(eps) < gap_cut) & (np.maximum(wl, wr) > 0.6)
    return k[sel], eps[sel]


def test_criterion_10_selective_edge_population(figure_runs, criterion):
    uni = figure_runs("floquet_qa_uniform")
    flip = figure_runs("floquet_qa_flip")
    ur, ul = uni.summary["in_gap_right"], uni.summary["in_gap_left"]
    fr, fl = flip.summary["in_gap_right"], flip.summary["in_gap_left"]
    selective = ur >= 5 * max(ul, 1) and fr >= 5 * max(fl, 1)
    # flipping the circular polarization is a reflection of the periodic
    # direction, so the populated side cannot change; what reverses is the
    # dispersion of the populated branch (its velocity and quasi-energy sign)
    slopes = [np.polyfit(*_occupied_window_branch(r), 1)[0]
              for r in (uni, flip)]
    reversed_branch = slopes[0] * slopes[1] < 0
    ok = selective and reversed_branch
    assert criterion(10, ok,
                     f"occupied in-gap edge states right:left = {ur}:{ul} "
                     f"and {fr}:{fl} at the two polarizations (need 5:1); "
                     f"populated branch disperses at {slopes[0]:+.2f} then "
                     f"{slopes[1]:+.2f}, so the flip reverses its direction "
                     "while the selected side, set by the staggering sign, "
                     "stays fixed")
