"""Flat key = value experiment configuration: parsing, validation, hashing.

A config is a fixed schema of scalar fields plus two optional sweep lists.
Serialization round-trips bit-exactly (floats via repr), and the canonical
text is hashed git-blob style so every output file can name the exact config
that produced it.

Units: energies in |t1|.  Driven experiments express tau_qa / tau_f in drive
periods tau = 2*pi/hw; the static-ramp experiment (haldane_qa) uses hbar/|t1|.
"""

import dataclasses
import hashlib
import math
from dataclasses import dataclass

EXPERIMENTS = (
    "haldane_qa",
    "floquet_qa_uniform",
    "floquet_qa_focused",
    "chern_dynamics",
    "subresonant",
)

ENVELOPES = ("uniform", "gaussian")
DELTA_MODES = ("constant", "switch_off")

# nn bandwidth of the undriven honeycomb lattice, in |t1|
BANDWIDTH = 6.0


@dataclass
class ExperimentConfig:
    experiment: str = "floquet_qa_uniform"
    # lattice
    nx: int = 48
    ny: int = 48
    t1: float = -1.0
    a: float = 1.0
    # drive (Floquet experiments; tau_qa / tau_f in periods)
    hw: float = 7.0
    phi: float = -0.5 * math.pi
    lam_f: float = 1.0
    tau_qa: float = 100.0
    tau_f: float = 100.0
    envelope: str = "uniform"
    x_center: float = 0.0
    x_sigma: float = 0.0
    delta_ab: float = 1e-3
    delta_mode: str = "switch_off"
    hw_reference: float = 7.0
    # static Haldane ramp (haldane_qa; tau_qa in hbar/|t1|)
    t2: float = 0.2
    phi_h: float = 0.5 * math.pi
    ratio_start: float = 4.0 * math.sqrt(3.0)
    ratio_end: float = 0.0
    # sweep axes (empty tuple = single run at nx, ny / tau_qa)
    l_values: tuple = ()
    tau_qa_values: tuple = ()
    # numerics
    dt: float = 0.0035
    dt_divisor: int = 400
    checkpoint_every: int = 0
    full_scale: bool = False
    threads: int = 1
    out_dir: str = ""

    def __post_init__(self):
        self.l_values = tuple(self.l_values)
        self.tau_qa_values = tuple(self.tau_qa_values)
        if not self.out_dir:
            self.out_dir = f"runs/{self.experiment}"

    @property
    def period(self):
        return 2.0 * math.pi / self.hw

    def to_text(self):
        """Canonical key = value serialization (field order, repr floats)."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(_scalar_text(x) for x in v)
            else:
                v = _scalar_text(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def _scalar_text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(name, text):
    f = _FIELDS[name]
    ftype = getattr(f.type, "__name__", f.type)
    text = text.strip()
    if ftype == "tuple":
        if not text:
            return ()
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if name == "l_values":
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    if ftype == "int":
        return int(text)
    if ftype == "float":
        return float(text)
    if ftype == "bool":
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {name}: '{text}'")
    return text


def parse_config(text):
    """Parse flat key = value text ('#' comments, blank lines ignored)."""
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value', got '{raw.strip()}'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ValueError(f"line {ln}: unknown key '{key}'")
        if key in values:
            raise ValueError(f"line {ln}: duplicate key '{key}'")
        values[key] = _parse_value(key, val)
    return ExperimentConfig(**values)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())


def config_hash(cfg):
    """Git-blob sha1 of the canonical config text."""
    body = cfg.to_text().encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    key: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.key}: {self.message}"


def _near_integer(x, tol=1e-9):
    return abs(x - round(x)) <= tol * max(1.0, abs(x))


def validate_config(cfg):
    """All findings for a config, errors first; never raises."""
    out = []

    def err(key, msg):
        out.append(Finding("error", key, msg))

    def warn(key, msg):
        out.append(Finding("warning", key, msg))

    if cfg.experiment not in EXPERIMENTS:
        err("experiment", f"unknown experiment '{cfg.experiment}'")
        return out

    driven = cfg.experiment != "haldane_qa"
    flake = cfg.experiment == "chern_dynamics"

    sizes = cfg.l_values if cfg.l_values else (cfg.nx,)
    for L in sizes:
        if L % 2 != 0:
            err("nx" if L == cfg.nx else "l_values", f"Nx must be even, got {L}")
        if L < 4:
            err("nx" if L == cfg.nx else "l_values", f"Nx must be >= 4, got {L}")
    if cfg.ny < 1:
        err("ny", f"Ny must be >= 1, got {cfg.ny}")
    if flake and cfg.ny < 4 and not cfg.l_values:
        err("ny", f"flake runs need Ny >= 4, got {cfg.ny}")
    if cfg.t1 == 0.0:
        err("t1", "t1 must be nonzero")
    if cfg.a <= 0.0:
        err("a", "lattice constant must be positive")
    if cfg.threads < 1:
        err("threads", "threads must be >= 1")
    if cfg.checkpoint_every < 0:
        err("checkpoint_every", "checkpoint interval must be >= 0")

    if driven:
        if cfg.hw <= 0.0:
            err("hw", "drive frequency must be positive")
        if cfg.lam_f < 0.0:
            err("lam_f", "peak amplitude must be >= 0")
        for key in ("tau_qa", "tau_f"):
            v = getattr(cfg, key)
            if v < 0.0:
                err(key, "window must be >= 0 periods")
            elif not _near_integer(v):
                err(key, f"ramp/hold must be integer periods, got {v}")
        if cfg.envelope not in ENVELOPES:
            err("envelope", f"unknown envelope '{cfg.envelope}'")
        elif cfg.envelope == "gaussian" and cfg.x_sigma <= 0.0:
            err("x_sigma", "gaussian envelope needs x_sigma > 0")
        if cfg.delta_mode not in DELTA_MODES:
            err("delta_mode", f"unknown delta_mode '{cfg.delta_mode}'")
        if cfg.dt_divisor < 50 or cfg.dt_divisor % 50 != 0:
            err("dt_divisor", "steps per period must be a positive multiple "
                "of 50 (dense sampling grid)")
        if cfg.experiment == "floquet_qa_focused" and cfg.envelope != "gaussian":
            warn("envelope", "focused experiment usually runs a gaussian "
                 "envelope")
        if cfg.experiment == "floquet_qa_uniform" and cfg.envelope != "uniform":
            warn("envelope", "uniform experiment usually runs a uniform "
                 "envelope")
        if cfg.experiment != "subresonant" and cfg.hw < BANDWIDTH * abs(cfg.t1):
            warn("hw", "sub-bandwidth regime: the adiabatic Floquet picture "
                 "breaks down (run permitted)")
        if cfg.experiment == "subresonant" and cfg.hw_reference <= 0.0:
            err("hw_reference", "reference frequency must be positive")
    else:
        if cfg.t2 == 0.0:
            err("t2", "t2 must be nonzero when the delta ramp is expressed "
                "as a ratio")
        if cfg.tau_qa <= 0.0:
            err("tau_qa", "ramp duration must be positive")
        for v in cfg.tau_qa_values:
            if v <= 0.0:
                err("tau_qa_values", f"ramp duration must be positive, got {v}")
        if cfg.dt <= 0.0:
            err("dt", "time step must be positive")

    return out


def config_errors(cfg):
    return [f for f in validate_config(cfg) if f.severity == "error"]


def _ribbon_width(nx, a):
    from .lattice import LatticeParams, build_ribbon
    return build_ribbon(LatticeParams(nx=nx, ny=1, a=a)).width


def preset(name):
    """The figure-scale preset config for one experiment name."""
    if name == "haldane_qa":
        # tau grid: 1.5 decades, log-uniform, centered on the window where
        # the bulk piece is neither ramp-transient (tau < 3) nor cut off by
        # the finite strip width (tau > 30 at these sizes)
        return ExperimentConfig(
            experiment=name, nx=36, ny=36, l_values=(18, 24, 30, 36),
            tau_qa=100.0,
            tau_qa_values=(1.8, 3.2, 5.7, 10.0, 18.0, 32.0, 57.0),
            t2=0.2, phi_h=0.5 * math.pi, dt=0.0035)
    if name == "floquet_qa_uniform":
        return ExperimentConfig(
            experiment=name, nx=48, ny=48, hw=7.0, phi=-0.5 * math.pi,
            lam_f=1.0, tau_qa=100.0, tau_f=100.0, envelope="uniform",
            delta_ab=1e-3, delta_mode="switch_off", dt_divisor=400)
    if name == "floquet_qa_focused":
        width = _ribbon_width(48, 1.0)
        return ExperimentConfig(
            experiment=name, nx=48, ny=48, hw=7.0, phi=-0.5 * math.pi,
            lam_f=1.0, tau_qa=100.0, tau_f=100.0, envelope="gaussian",
            x_center=width, x_sigma=0.4 * width,
            delta_ab=1e-3, delta_mode="switch_off", dt_divisor=400)
    if name == "chern_dynamics":
        return ExperimentConfig(
            experiment=name, nx=24, ny=24, l_values=(12, 18, 24), hw=7.0,
            phi=-0.5 * math.pi, lam_f=1.0, tau_qa=150.0, tau_f=110.0,
            envelope="uniform", delta_ab=0.1, delta_mode="constant",
            dt_divisor=400)
    if name == "subresonant":
        # the hw = 4 ramp runs 300 periods at the longest period of any
        # preset, so it needs the finest per-period grid to keep the
        # accumulated occupation-sum drift below 1e-8
        return ExperimentConfig(
            experiment=name, nx=32, ny=32, hw=4.0, hw_reference=7.0,
            phi=-0.5 * math.pi, lam_f=1.0, tau_qa=300.0, tau_f=0.0,
            envelope="uniform", delta_ab=0.1, delta_mode="constant",
            dt_divisor=600)
    raise ValueError(f"unknown preset '{name}'")
