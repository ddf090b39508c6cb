"""JSON run configuration: one file per experiment, strict keys, no env vars."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class RunConfig:
    scenario: str = ""
    field: dict = field(default_factory=lambda: {"name": "example"})
    potential: dict = field(default_factory=lambda: {"name": "harmonic"})
    window: list | None = None
    times: list = field(default_factory=lambda: [0.5])
    levels: list = field(default_factory=lambda: [1.0])
    energies: list = field(default_factory=lambda: [0.5])
    psi: dict = field(default_factory=lambda: {"name": "identity"})
    betas: list = field(default_factory=lambda: ["id", "square", "arctan"])
    moment_degree: int = 3
    u0: dict = field(default_factory=lambda: {"name": "x1_upper"})
    u_tilde: dict = field(default_factory=lambda: {"name": "same"})
    px: dict = field(default_factory=dict)
    chart: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    measure: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    out_dir: str = "out"
    threads: int = 1
    tolerances: dict = field(default_factory=dict)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


def load_config(path) -> RunConfig:
    """Parse and validate a config file; unknown keys are rejected."""
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**raw)
    for spec in (cfg.field, cfg.potential):
        table = spec.get("table")
        if table is not None and not Path(table).is_file():
            raise ValueError(f"table path does not exist: {table}")
    return cfg


def prepare_out_dir(out_dir) -> Path:
    """Resolve and create the output directory; fail before any computation."""
    out = Path(out_dir).resolve()
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()
    return out
