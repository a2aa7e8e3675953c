"""Shared fixtures: cached figure-scale runs and the criteria report.

The acceptance tests exercise the five shipped presets (plus a
polarization-flipped clone of the uniform drive).  Completed runs are reused
from the cache directory when their physics configuration matches, so a full
fresh pytest invocation pays the ~25 minute simulation cost once; set
FLOQUET_ANNEAL_ACCEPTANCE_DIR to relocate or share the cache.
"""

import os
import sys

import pytest

_CRITERIA_LINES = []


def report_criterion(number, ok, detail):
    """One pass/fail line per acceptance criterion, echoed at session end."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    _CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA_LINES):
        terminalreporter.write_line(line)


class AcceptanceRun:
    def __init__(self, cfg, manifest, path):
        self.cfg = cfg
        self.manifest = manifest
        self.path = path  # directory holding manifest.json and outputs

    def file(self, name):
        return os.path.join(self.path, name)

    @property
    def summary(self):
        return self.manifest.summary


def _neutral_hash(cfg):
    """Config hash with the execution-only knobs blanked out."""
    from floquet_anneal.config import config_hash
    return config_hash(cfg.replace(out_dir="x", checkpoint_every=0, threads=1))


class AcceptanceRuns:
    """Lazily runs (or reuses) the figure-scale runs the criteria need."""

    def __init__(self, root):
        self.root = root
        self.cache = {}

    def _config(self, name):
        from floquet_anneal.config import preset
        if name == "floquet_qa_flip":
            cfg = preset("floquet_qa_uniform")
            return cfg.replace(phi=-cfg.phi)
        return preset(name)

    def __call__(self, name):
        if name in self.cache:
            return self.cache[name]
        from floquet_anneal.config import parse_config
        from floquet_anneal.experiments import load_manifest, run_experiment
        cfg = self._config(name)
        out = os.path.join(self.root, name)
        manifest_path = os.path.join(out, "manifest.json")
        if os.path.exists(manifest_path):
            manifest = load_manifest(manifest_path)
            if manifest.status == "done" and \
                    _neutral_hash(parse_config(manifest.config_text)) \
                    == _neutral_hash(cfg):
                run = AcceptanceRun(cfg, manifest, out)
                self.cache[name] = run
                return run
        print(f"\n[acceptance] running {name} (this can take minutes)",
              file=sys.stderr, flush=True)
        manifest = run_experiment(cfg.replace(out_dir=out))
        run = AcceptanceRun(cfg, manifest, out)
        self.cache[name] = run
        return run


@pytest.fixture(scope="session")
def figure_runs():
    root = os.environ.get("FLOQUET_ANNEAL_ACCEPTANCE_DIR")
    if not root:
        root = os.path.join(os.path.dirname(os.path.dirname(
            os.path.abspath(__file__))), ".acceptance_cache")
    os.makedirs(root, exist_ok=True)
    return AcceptanceRuns(root)


@pytest.fixture(scope="session")
def criterion():
    return report_criterion
