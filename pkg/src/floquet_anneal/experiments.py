"""Experiment drivers: figure-scale annealing protocols at desk scale.

Each driver takes a validated ExperimentConfig, runs the sweep sequentially,
writes delimited tables (one '#' header line carrying the full parameter set
and the config hash) plus rendered figures, and returns a RunManifest whose
``results`` dict holds the in-memory arrays used by the test suite.

Long driven runs checkpoint the evolved amplitudes at period boundaries and
can be resumed from the manifest.
"""

import dataclasses
import json
import math
import os
import time

import numpy as np

from . import observables
from .config import config_hash, parse_config, validate_config
from .drive import (DriveParams, HaldaneSchedule, Schedule, critical_lambda,
                    effective_haldane_params)
from .evolution import (EvolutionMonitor, ground_state, one_period_propagator,
                        rk4_evolve, strip_ground_state)
from .floquet import floquet_spectrum_batch, occupations
from .hamiltonian import (driven_flake_assembler, driven_strip_assembler,
                          haldane_strip_assembler)
from .lattice import LatticeParams, build_flake, build_ribbon

DENSE_PER_PERIOD = 50
MARKER_PER_PERIOD = 4


@dataclasses.dataclass
class RunManifest:
    config_text: str
    config_hash: str
    out_dir: str
    outputs: list = dataclasses.field(default_factory=list)
    events: list = dataclasses.field(default_factory=list)
    wall_time: float = 0.0
    status: str = "running"
    summary: dict = dataclasses.field(default_factory=dict)
    results: dict = dataclasses.field(default_factory=dict, repr=False)

    @property
    def path(self):
        return os.path.join(self.out_dir, "manifest.json")

    def save(self):
        payload = {
            "config_hash": self.config_hash,
            "config_text": self.config_text,
            "out_dir": self.out_dir,
            "outputs": self.outputs,
            "events": self.events,
            "wall_time": self.wall_time,
            "status": self.status,
            "summary": self.summary,
        }
        os.makedirs(self.out_dir, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    m = RunManifest(payload["config_text"], payload["config_hash"],
                    payload.get("out_dir", os.path.dirname(path) or "."))
    m.outputs = payload.get("outputs", [])
    m.events = payload.get("events", [])
    m.wall_time = payload.get("wall_time", 0.0)
    m.status = payload.get("status", "unknown")
    m.summary = payload.get("summary", {})
    return m


# ---------------------------------------------------------------------------
# delimited output

def _header_line(cfg):
    params = cfg.to_text().strip().replace("\n", "; ")
    return f"# {params}; config_hash = {config_hash(cfg)}"


def write_table(path, cfg, columns, rows, formats):
    """One '#' parameter header line, a column line, formatted data rows."""
    sep = "\t" if path.endswith(".tsv") else ","
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header_line(cfg) + "\n")
        fh.write(sep.join(columns) + "\n")
        for row in rows:
            fh.write(sep.join(f % v for f, v in zip(formats, row)) + "\n")


def read_table(path):
    """(header, columns, data array) of a file written by write_table."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        sep = "\t" if path.endswith(".tsv") else ","
        columns = fh.readline().rstrip("\n").split(sep)
        data = np.loadtxt(fh, delimiter=sep, ndmin=2)
    return header, columns, data


# ---------------------------------------------------------------------------
# checkpoints

def save_state(path, psi, t, cfg_hash, label=""):
    """Text header (dimensions, time, schedule hash), then raw '<c16' bytes."""
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    header = (f"shape {' '.join(str(s) for s in psi.shape)}\n"
              f"t {t!r}\n"
              f"label {label}\n"
              f"schedule-hash {cfg_hash}\n"
              f"end-header\n")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(psi.astype("<c16").tobytes())
    os.replace(tmp, path)


def load_state(path):
    """(psi, t, label, schedule_hash) from save_state output."""
    with open(path, "rb") as fh:
        meta = {}
        while True:
            line = fh.readline().decode("ascii").rstrip("\n")
            if line == "end-header":
                break
            if not line:
                raise ValueError(f"truncated checkpoint header in {path}")
            key, _, val = line.partition(" ")
            meta[key] = val
        shape = tuple(int(s) for s in meta["shape"].split())
        psi = np.frombuffer(fh.read(), dtype="<c16").reshape(shape).copy()
    return psi, float(meta["t"]), meta.get("label", ""), meta.get("schedule-hash", "")


# ---------------------------------------------------------------------------
# shared evolution plumbing

class StagePaused(Exception):
    """Raised by _PeriodLoop.run when stop_after interrupts a stage."""


class _PeriodLoop:
    """Evolve whole periods with optional checkpointing and resume."""

    def __init__(self, cfg, out_dir, monitor, label):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.monitor = monitor
        self.label = label
        self.ckpt = os.path.join(out_dir, f"checkpoint_{label}.bin") \
            if cfg.checkpoint_every > 0 else None

    def resume_point(self, t0, period, n_periods):
        """(start_period, psi) if a matching checkpoint exists, else None."""
        if self.ckpt is None or not os.path.exists(self.ckpt):
            return None
        psi, t, label, h = load_state(self.ckpt)
        if h != self.hash or label != self.label:
            return None
        done = (t - t0) / period
        n = int(round(done))
        if abs(done - n) > 1e-9 or not 0 < n <= n_periods:
            return None
        return n, psi

    def run(self, asm, psi, t0, period, n_periods, n_steps, stop_after=None,
            on_period=None, start=0):
        dt = period / n_steps
        for n in range(start, n_periods):
            t = t0 + n * period
            psi = rk4_evolve(asm, psi, t, t + period, dt, monitor=self.monitor)
            if on_period is not None:
                on_period(n + 1, psi)
            if self.ckpt and (n + 1) % self.cfg.checkpoint_every == 0:
                save_state(self.ckpt, psi, t + period, self.hash, self.label)
            if stop_after is not None and n + 1 >= stop_after and n + 1 < n_periods:
                raise StagePaused(n + 1)
        return psi


def _progress(progress, msg):
    if progress is not None:
        progress(msg)


def _fig_dir(out_dir):
    d = os.path.join(out_dir, "figures")
    os.makedirs(d, exist_ok=True)
    return d


def _render(manifest, fn, *args, **kwargs):
    """Render one figure, recording the output; import pyplot lazily."""
    from . import plots
    path = fn(_fig_dir(manifest.out_dir), *args, **kwargs)
    manifest.outputs.append(os.path.relpath(path, manifest.out_dir))


# ---------------------------------------------------------------------------
# haldane_qa: static Haldane ramp, residual-energy scaling

def _haldane_single(cfg, L, tau_qa, n_trace=25):
    """One (L, tau_qa) ramp; returns the E_res(t) trace and final value."""
    geom = build_ribbon(LatticeParams(nx=L, ny=L, a=cfg.a))
    sched = HaldaneSchedule(t1=cfg.t1, t2=cfg.t2, phi_h=cfg.phi_h,
                            tau_qa=tau_qa, ratio_start=cfg.ratio_start,
                            ratio_end=cfg.ratio_end)
    asm = haldane_strip_assembler(geom, sched)
    monitor = EvolutionMonitor()
    _, psi = strip_ground_state(asm, t=0.0, positions=geom.x)
    n_steps = int(round(tau_qa / cfg.dt))
    dt = tau_qa / n_steps
    bounds = np.unique(np.round(np.linspace(0, n_steps, n_trace + 1)).astype(int))
    trace = [(0.0, 0.0)]
    for s0, s1 in zip(bounds[:-1], bounds[1:]):
        psi = rk4_evolve(asm, psi, s0 * dt, s1 * dt, dt, monitor=monitor)
        t = s1 * dt
        trace.append((t, observables.residual_energy(psi, asm.at(t))))
    return np.array(trace), monitor


def run_haldane_qa(cfg, out_dir, progress=None, stop_after=None):
    manifest = _new_manifest(cfg, out_dir)
    sizes = list(cfg.l_values) if cfg.l_values else [cfg.nx]
    taus = list(cfg.tau_qa_values) if cfg.tau_qa_values else [cfg.tau_qa]
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)

    e_res = np.zeros((len(taus), len(sizes)))
    rows = []
    for i, tau in enumerate(taus):
        for j, L in enumerate(sizes):
            _progress(progress, f"haldane_qa: L={L} tau_qa={tau:g}")
            trace, monitor = _haldane_single(cfg, L, tau)
            manifest.events.extend(monitor.events)
            e_res[i, j] = trace[-1, 1]
            rows.append((L, tau, e_res[i, j]))
            name = os.path.join("traces", f"e_res_L{L}_tau{tau:g}.csv")
            write_table(os.path.join(out_dir, name), cfg, ("t", "e_res"),
                        trace, ("%.6f", "%.12e"))
            manifest.outputs.append(name)

    write_table(os.path.join(out_dir, "residual_energy.csv"), cfg,
                ("L", "tau_qa", "e_res"), rows, ("%d", "%g", "%.12e"))
    manifest.outputs.append("residual_energy.csv")

    eps_bulk = np.zeros(len(taus))
    eps_edge = np.zeros(len(taus))
    for i in range(len(taus)):
        eps_bulk[i], eps_edge[i], _ = observables.fit_bulk_edge(sizes, e_res[i])
    write_table(os.path.join(out_dir, "bulk_edge_fits.csv"), cfg,
                ("tau_qa", "eps_bulk", "eps_edge"),
                zip(taus, eps_bulk, eps_edge), ("%g", "%.12e", "%.12e"))
    manifest.outputs.append("bulk_edge_fits.csv")

    if len(taus) >= 3:
        exponent, stderr = observables.kz_exponent(taus, eps_bulk)
    else:
        exponent = stderr = np.nan
    delta_final = cfg.ratio_end * abs(cfg.t2)
    lz = observables.edge_lz_integral(cfg.t1, cfg.t2, cfg.phi_h, delta_final,
                                      nx=max(sizes), a=cfg.a)
    manifest.results.update(
        sizes=sizes, taus=taus, e_res=e_res, eps_bulk=eps_bulk,
        eps_edge=eps_edge, kz_exponent=exponent, kz_stderr=stderr,
        lz_integral=lz, edge_fraction_of_lz=eps_edge[-1] / lz if lz else np.nan)
    manifest.summary.update(
        kz_exponent=float(exponent), kz_stderr=float(stderr),
        lz_integral=float(lz),
        edge_fraction_of_lz=float(manifest.results["edge_fraction_of_lz"]))

    from .plots import plot_kz_scaling
    _render(manifest, plot_kz_scaling, taus, eps_bulk, eps_edge, lz, exponent)
    return _finish(manifest)


# ---------------------------------------------------------------------------
# floquet_qa_uniform / floquet_qa_focused: driven ramp, currents, occupations

def _drive_params(cfg):
    period = 2.0 * math.pi / cfg.hw
    return DriveParams(lam_f=cfg.lam_f, hw=cfg.hw, phi=cfg.phi,
                       tau_qa=round(cfg.tau_qa) * period,
                       tau_hold=round(cfg.tau_f) * period,
                       envelope=cfg.envelope, x_center=cfg.x_center,
                       x_sigma=cfg.x_sigma)


def _floquet_modes(asm, u, cfg, t_ref):
    """Per-k quasi-energies and modes, ordered, resolved against H(t_ref)."""
    return floquet_spectrum_batch(u, cfg.hw, h_ref=asm.at(t_ref))


def _spectrum_rows(geom, eps, modes, occ):
    rows = []
    for ik, k in enumerate(geom.momenta):
        wl, wr = observables.edge_weight(modes[ik].T)
        for alpha in range(eps.shape[1]):
            rows.append((k, alpha, eps[ik, alpha], occ[ik, alpha],
                         wl[alpha], wr[alpha]))
    return rows


def _in_gap_edge_counts(geom, eps, occ, modes, gap_cut):
    """Occupied in-gap edge-state counts (left, right) over k in (K_+, K_f)."""
    window = (geom.momenta > geom.k_dirac + 1e-12) \
        & (geom.momenta < geom.k_zone_edge - 1e-12)
    n_left = n_right = 0
    for ik in np.nonzero(window)[0]:
        wl, wr = observables.edge_weight(modes[ik].T)
        sel = (occ[ik] > 0.5) & (np.abs(eps[ik]) < gap_cut)
        n_left += int(np.sum(sel & (wl > observables.EDGE_WEIGHT_THRESHOLD)))
        n_right += int(np.sum(sel & (wr > observables.EDGE_WEIGHT_THRESHOLD)))
    return n_left, n_right


def run_floquet_qa(cfg, out_dir, progress=None, stop_after=None):
    manifest = _new_manifest(cfg, out_dir)
    geom = build_ribbon(LatticeParams(nx=cfg.nx, ny=cfg.ny, a=cfg.a))
    drive = _drive_params(cfg)
    sched = Schedule(drive, delta_ab0=cfg.delta_ab, delta_mode=cfg.delta_mode)
    asm = driven_strip_assembler(geom, drive, sched)
    monitor = EvolutionMonitor()
    period = drive.period
    n_qa, n_f = int(round(cfg.tau_qa)), int(round(cfg.tau_f))
    divisor = cfg.dt_divisor

    loop = _PeriodLoop(cfg, out_dir, monitor, "ramp")
    resume = loop.resume_point(0.0, period, n_qa)
    if resume is None:
        _, psi = strip_ground_state(asm, t=0.0, positions=geom.x)
        start = 0
    else:
        start, psi = resume
        _progress(progress, f"{cfg.experiment}: resuming ramp at period {start}")
    _progress(progress, f"{cfg.experiment}: ramp {n_qa} periods")
    try:
        psi = loop.run(asm, psi, 0.0, period, n_qa, divisor,
                       stop_after=stop_after, start=start)
    except StagePaused:
        manifest.events.extend(monitor.events)
        manifest.status = "interrupted"
        manifest.save()
        return manifest

    t_hold = n_qa * period
    _progress(progress, f"{cfg.experiment}: one-period propagator")
    stride = divisor // DENSE_PER_PERIOD
    u, snaps = one_period_propagator(asm, t_hold, period, divisor,
                                     snapshot_steps=range(0, divisor, stride))
    manifest.results["unitarity_defect"] = max(
        float(np.abs(uk @ uk.conj().T - np.eye(uk.shape[0])).max()) for uk in u)

    eps, modes = _floquet_modes(asm, u, cfg, t_hold)
    occ = occupations(psi, modes)
    write_table(os.path.join(out_dir, "spectrum.tsv"), cfg,
                ("k", "alpha", "eps", "n", "edge_weight_left",
                 "edge_weight_right"),
                _spectrum_rows(geom, eps, modes, occ),
                ("%.12f", "%d", "%.12e", "%.12e", "%.12e", "%.12e"))
    manifest.outputs.append("spectrum.tsv")

    # dense current samples across the hold window (trapezoid average)
    _progress(progress, f"{cfg.experiment}: hold {n_f} periods with currents")
    times, profiles = [], []

    def sample(t, state):
        times.append(t)
        profiles.append(observables.current_profile_sample(asm, state, t))

    for n in range(n_f):
        t_n = t_hold + n * period
        for m, v in enumerate(snaps):
            sample(t_n + m * stride * (period / divisor),
                   v @ psi if m else psi)
        psi = u @ psi
    sample(t_hold + n_f * period, psi)
    times = np.array(times)
    profiles = np.array(profiles)  # (n_samples, nx - 1)

    manifest.results["occupation_drift"] = float(
        np.abs(occupations(psi, modes) - occ).max()) if n_f else 0.0

    j_av, j_min, j_max = observables.current_window_stats(times, profiles)
    bonds = np.arange(profiles.shape[1])
    write_table(os.path.join(out_dir, "current_profile.csv"), cfg,
                ("bond_index", "J_av", "J_min", "J_max"),
                zip(bonds, j_av, j_min, j_max),
                ("%d", "%.12e", "%.12e", "%.12e"))
    manifest.outputs.append("current_profile.csv")

    edge_trace = np.column_stack([times, profiles[:, 0], profiles[:, -1]])
    write_table(os.path.join(out_dir, "edge_current_trace.csv"), cfg,
                ("t", "j_left_edge", "j_right_edge"), edge_trace,
                ("%.6f", "%.12e", "%.12e"))
    manifest.outputs.append("edge_current_trace.csv")

    # micromotion bookkeeping on the outermost bonds
    res = manifest.results
    res.update(times=times, profiles=profiles, j_av=j_av, j_min=j_min,
               j_max=j_max, eps=eps, occ=occ, momenta=geom.momenta)
    if n_f:
        for side, col in (("left", 0), ("right", profiles.shape[1] - 1)):
            series = profiles[:, col]
            dense = observables.window_average(times, series)
            strobo = series[::DENSE_PER_PERIOD].mean()
            coarse = observables.window_average(
                times[::2], series[::2])
            res[f"micromotion_{side}"] = {
                "dense_average": float(dense),
                "stroboscopic_average": float(strobo),
                "peak_to_peak": float(series.max() - series.min()),
                "quadrature_error": float(abs(dense - coarse)),
            }

    # occupied in-gap edge states over the (K_+, K_f) window
    t1e, t2e, phie = effective_haldane_params(cfg.lam_f, cfg.hw, t1=cfg.t1,
                                              phi=cfg.phi)
    delta_f = sched.delta_ab(drive.tau_qa + drive.tau_hold)
    bulk_gap = 2.0 * abs(3.0 * math.sqrt(3.0) * abs(t2e)
                         * math.sin(abs(phie)) - abs(delta_f))
    gap_cut = 0.45 * bulk_gap
    n_left, n_right = _in_gap_edge_counts(geom, eps, occ, modes, gap_cut)
    res.update(in_gap_left=n_left, in_gap_right=n_right, gap_cut=gap_cut)

    # per-edge averages for the focused protocol (irradiated vs dark edge)
    depth = observables.EDGE_DEPTH
    res["edge_avg_left"] = float(np.abs(j_av[:depth]).mean())
    res["edge_avg_right"] = float(np.abs(j_av[-depth:]).mean())
    core = profiles.shape[1] // 3
    res["bulk_avg"] = float(np.abs(j_av[core:2 * core]).max())

    manifest.events.extend(monitor.events)
    manifest.summary.update(
        in_gap_left=n_left, in_gap_right=n_right,
        edge_avg_left=res["edge_avg_left"],
        edge_avg_right=res["edge_avg_right"], bulk_avg=res["bulk_avg"],
        unitarity_defect=res["unitarity_defect"])

    from .plots import plot_current_profile, plot_micromotion, plot_spectrum
    _render(manifest, plot_spectrum, geom.momenta, eps, occ, cfg.hw)
    _render(manifest, plot_current_profile, bonds, j_av, j_min, j_max)
    if n_f:
        _render(manifest, plot_micromotion, times, profiles, period)
    return _finish(manifest)


# ---------------------------------------------------------------------------
# chern_dynamics: driven flake, dynamical Chern marker

def _chern_single(cfg, L, n_qa, n_f, out_dir, manifest, progress, stop_after):
    geom = build_flake(LatticeParams(nx=L, ny=L, a=cfg.a))
    period = 2.0 * math.pi / cfg.hw
    drive = DriveParams(lam_f=cfg.lam_f, hw=cfg.hw, phi=cfg.phi,
                        tau_qa=n_qa * period, tau_hold=n_f * period,
                        envelope=cfg.envelope, x_center=cfg.x_center,
                        x_sigma=cfg.x_sigma)
    sched = Schedule(drive, delta_ab0=cfg.delta_ab, delta_mode=cfg.delta_mode)
    asm = driven_flake_assembler(geom, drive, sched)
    monitor = EvolutionMonitor()
    mask = observables.bulk_cell_mask(geom)
    divisor = cfg.dt_divisor
    label = f"chern_L{L}"

    loop = _PeriodLoop(cfg, out_dir, monitor, label)
    trace = []

    def record(t, state):
        marker = observables.chern_marker(state, geom)
        trace.append((t, observables.bulk_marker_average(marker, mask),
                      sched.lam(t)))
        return marker

    resume = loop.resume_point(0.0, period, n_qa)
    if resume is None:
        h0 = asm.assemble_dense(0.0)
        positions = geom.x + math.sqrt(2.0) * geom.y
        _, psi = ground_state(h0, geom.n_sites // 2, positions=positions)
        record(0.0, psi)
        start = 0
    else:
        start, psi = resume
        _progress(progress, f"chern_dynamics: resuming L={L} at period {start}")
    _progress(progress, f"chern_dynamics: L={L} ramp {n_qa} periods")

    def on_period(n, state):
        record(n * period, state)

    try:
        psi = loop.run(asm, psi, 0.0, period, n_qa, divisor,
                       stop_after=stop_after, start=start, on_period=on_period)
    except StagePaused:
        manifest.events.extend(monitor.events)
        return None

    _progress(progress, f"chern_dynamics: L={L} hold {n_f} periods")
    t_hold = n_qa * period
    stride = divisor // MARKER_PER_PERIOD
    u, snaps = one_period_propagator(asm, t_hold, period, divisor,
                                     snapshot_steps=range(0, divisor, stride))
    hold_start = len(trace) - 1  # trace[hold_start] is the t = tau_qa sample
    for n in range(n_f):
        t_n = t_hold + n * period
        for m, v in enumerate(snaps):
            if n == 0 and m == 0:
                continue  # t = tau_qa already recorded by the ramp loop
            record(t_n + m * stride * (period / divisor), v @ psi if m else psi)
        psi = u @ psi
    marker = record(t_hold + n_f * period, psi)

    trace = np.array(trace)
    hold = trace[hold_start:]
    c_av = observables.window_average(hold[:, 0], hold[:, 1]) if n_f else np.nan

    name = f"c_bulk_trace_L{L}.csv"
    write_table(os.path.join(out_dir, name), cfg, ("t", "C_bulk", "lam"),
                trace, ("%.6f", "%.12e", "%.8f"))
    manifest.outputs.append(name)

    ncx, ncy = geom.n_cells
    name = f"marker_map_L{L}.csv"
    write_table(os.path.join(out_dir, name), cfg, ("cell_x", "cell_y", "C"),
                [(cx, cy, marker[cx, cy])
                 for cx in range(ncx) for cy in range(ncy)],
                ("%d", "%d", "%.12e"))
    manifest.outputs.append(name)

    manifest.events.extend(monitor.events)
    return {"L": L, "trace": trace, "c_av": c_av, "marker": marker,
            "geom": geom, "hold_start": hold_start}


def run_chern_dynamics(cfg, out_dir, progress=None, stop_after=None):
    manifest = _new_manifest(cfg, out_dir)
    sizes = list(cfg.l_values) if cfg.l_values else [cfg.nx]
    n_qa, n_f = int(round(cfg.tau_qa)), int(round(cfg.tau_f))
    runs = []
    for L in sizes:
        out = _chern_single(cfg, L, n_qa, n_f, out_dir, manifest, progress,
                            stop_after)
        if out is None:
            manifest.status = "interrupted"
            manifest.save()
            return manifest
        runs.append(out)
    if cfg.full_scale:
        out = _chern_single(cfg, 48, 2 * n_qa, 2 * n_f, out_dir, manifest,
                            progress, stop_after)
        if out is not None:
            runs.append(out)

    c_avs = np.array([r["c_av"] for r in runs])
    sizes_run = np.array([r["L"] for r in runs])
    limit, coeffs = observables.extrapolate_sizes(sizes_run[:len(sizes)],
                                                  c_avs[:len(sizes)])
    _, resid = observables.limit_consistency(sizes_run[:len(sizes)],
                                             c_avs[:len(sizes)], limit=1.0)
    lam_cr = critical_lambda(cfg.delta_ab, cfg.hw, t1=cfg.t1)
    manifest.results.update(runs=runs, sizes=list(sizes_run), c_avs=c_avs,
                            limit=limit, coeffs=coeffs, lam_cr=lam_cr)
    manifest.summary.update(
        c_bulk_av={int(L): float(c) for L, c in zip(sizes_run, c_avs)},
        extrapolated_limit=float(limit),
        unit_limit_residual=float(np.max(np.abs(resid))),
        lam_cr=float(lam_cr))

    from .plots import plot_c_bulk_traces, plot_marker_map
    _render(manifest, plot_c_bulk_traces,
            [(r["L"], r["trace"]) for r in runs], lam_cr, cfg)
    last = runs[len(sizes) - 1]
    _render(manifest, plot_marker_map, last["geom"], last["marker"], last["L"])
    return _finish(manifest)


# ---------------------------------------------------------------------------
# subresonant: sub-bandwidth drive vs above-bandwidth reference

def _subresonant_single(cfg, hw, out_dir, manifest, progress, stop_after):
    geom = build_ribbon(LatticeParams(nx=cfg.nx, ny=cfg.ny, a=cfg.a))
    period = 2.0 * math.pi / hw
    n_qa = int(round(cfg.tau_qa))
    drive = DriveParams(lam_f=cfg.lam_f, hw=hw, phi=cfg.phi,
                        tau_qa=n_qa * period, tau_hold=period,
                        envelope=cfg.envelope, x_center=cfg.x_center,
                        x_sigma=cfg.x_sigma)
    sched = Schedule(drive, delta_ab0=cfg.delta_ab, delta_mode=cfg.delta_mode)
    asm = driven_strip_assembler(geom, drive, sched)
    monitor = EvolutionMonitor()
    label = f"sub_hw{hw:g}"
    loop = _PeriodLoop(cfg, out_dir, monitor, label)
    resume = loop.resume_point(0.0, period, n_qa)
    if resume is None:
        _, psi = strip_ground_state(asm, t=0.0, positions=geom.x)
        start = 0
    else:
        start, psi = resume
    _progress(progress, f"subresonant: hw={hw:g} ramp {n_qa} periods")
    try:
        psi = loop.run(asm, psi, 0.0, period, n_qa, cfg.dt_divisor,
                       stop_after=stop_after, start=start)
    except StagePaused:
        manifest.events.extend(monitor.events)
        return None

    t_hold = n_qa * period
    u = one_period_propagator(asm, t_hold, period, cfg.dt_divisor)
    eps, modes = floquet_spectrum_batch(u, hw, h_ref=asm.at(t_hold))
    occ = occupations(psi, modes)
    name = f"spectrum_hw{hw:g}.tsv"
    write_table(os.path.join(out_dir, name), cfg,
                ("k", "alpha", "eps", "n", "edge_weight_left",
                 "edge_weight_right"),
                _spectrum_rows(geom, eps, modes, occ),
                ("%.12f", "%d", "%.12e", "%.12e", "%.12e", "%.12e"))
    manifest.outputs.append(name)
    manifest.events.extend(monitor.events)
    return {"hw": hw, "eps": eps, "occ": occ,
            "metallicity": observables.metallicity(occ),
            "fractional": observables.occupation_sharpness(occ),
            "momenta": geom.momenta}


def run_subresonant(cfg, out_dir, progress=None, stop_after=None):
    manifest = _new_manifest(cfg, out_dir)
    sub = _subresonant_single(cfg, cfg.hw, out_dir, manifest, progress,
                              stop_after)
    if sub is None:
        manifest.status = "interrupted"
        manifest.save()
        return manifest
    ref = _subresonant_single(cfg, cfg.hw_reference, out_dir, manifest,
                              progress, stop_after)
    if ref is None:
        manifest.status = "interrupted"
        manifest.save()
        return manifest
    ratio = sub["metallicity"] / ref["metallicity"] \
        if ref["metallicity"] else np.inf
    manifest.results.update(sub=sub, ref=ref, metallicity_ratio=ratio)
    manifest.summary.update(
        metallicity={f"{sub['hw']:g}": float(sub["metallicity"]),
                     f"{ref['hw']:g}": float(ref["metallicity"])},
        metallicity_ratio=float(ratio),
        fractional_fraction=float(sub["fractional"]))

    from .plots import plot_occupation_comparison
    _render(manifest, plot_occupation_comparison, sub, ref)
    return _finish(manifest)


# ---------------------------------------------------------------------------
# dispatch

_DRIVERS = {
    "haldane_qa": run_haldane_qa,
    "floquet_qa_uniform": run_floquet_qa,
    "floquet_qa_focused": run_floquet_qa,
    "chern_dynamics": run_chern_dynamics,
    "subresonant": run_subresonant,
}


def _new_manifest(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    m = RunManifest(cfg.to_text(), config_hash(cfg), out_dir)
    m._t0 = time.perf_counter()
    m.save()
    return m


def _finish(manifest):
    manifest.wall_time = time.perf_counter() - manifest._t0
    manifest.status = "done"
    manifest.save()
    return manifest


def run_experiment(cfg, out_dir=None, progress=None, stop_after=None):
    """Validate, run, and write outputs; returns the RunManifest.

    stop_after: evolve at most this many periods per stage, checkpoint, and
    return with status 'interrupted' (used to exercise resume).
    """
    findings = validate_config(cfg)
    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise ValueError("invalid config:\n" + "\n".join(str(f) for f in errors))
    return _DRIVERS[cfg.experiment](cfg, out_dir or cfg.out_dir,
                                    progress=progress, stop_after=stop_after)


def resume_run(manifest_path, progress=None):
    """Rerun the experiment recorded in a manifest, reusing its checkpoints."""
    old = load_manifest(manifest_path)
    cfg = parse_config(old.config_text)
    if config_hash(cfg) != old.config_hash:
        raise ValueError("manifest config hash mismatch")
    out_dir = os.path.dirname(os.path.abspath(manifest_path))
    return run_experiment(cfg, out_dir=out_dir, progress=progress)
