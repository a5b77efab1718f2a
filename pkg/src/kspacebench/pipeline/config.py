"""Experiment configuration loaded from a TOML file.

Unknown keys anywhere are rejected. See ``docs/config.md`` for the schema.
"""

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..artifacts import MotionEvent, OrderKind
from ..core import ValidationError
from ..recon import CascadeConfig
from ..sampling import DEFAULT_ACS_FRACTIONS, Strategy

ARTIFACTS = ("none", "noise", "motion", "noise+motion")


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "phantom"
    count: int = 20
    size: int = 256
    texture: float = 0.02
    baseline_snr: float = 40.0
    paths: tuple = ()


@dataclass(frozen=True)
class NoiseConfig:
    snr_factor: float = 0.5
    sigma: float = None


@dataclass(frozen=True)
class MotionConfig:
    order: OrderKind = OrderKind.LINEAR
    events: tuple = (MotionEvent(0.6, 3.0, (2.0, -1.0)),)


@dataclass(frozen=True)
class ReconSpec:
    name: str
    kind: str  # "zero_filled" or "cascade"
    cascade: CascadeConfig = None


@dataclass(frozen=True)
class MatrixBlock:
    strategies: tuple
    accelerations: tuple
    artifacts: tuple = ("none",)
    recon: tuple = ("zero_filled", "cascade")


@dataclass(frozen=True)
class Cell:
    strategy: Strategy
    acceleration: float
    artifact: str

    @property
    def cell_id(self):
        return f"{self.strategy.value}-R{self.acceleration:g}-{self.artifact.replace('+', '_')}"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str = "results"
    source: SourceConfig = SourceConfig()
    noise: NoiseConfig = NoiseConfig()
    motion: MotionConfig = MotionConfig()
    recon: tuple = (ReconSpec("zero_filled", "zero_filled"),
                    ReconSpec("cascade", "cascade", CascadeConfig()))
    matrix: tuple = ()
    acs_fractions: dict = field(default_factory=lambda: dict(DEFAULT_ACS_FRACTIONS))
    gradient_alpha: float = 2.0
    per_image_masks: bool = False
    write_images: bool = False

    def recon_by_name(self, name):
        for r in self.recon:
            if r.name == name:
                return r
        raise ConfigError(f"unknown recon {name!r}")

    def acs_fraction(self, acceleration):
        for r, f in self.acs_fractions.items():
            if float(r) == float(acceleration):
                return f
        raise ConfigError(f"no ACS fraction configured for acceleration {acceleration:g}")

    def cells(self):
        """Ordered, de-duplicated ``(Cell, recon names)`` pairs of the matrix."""
        out = {}
        for block in self.matrix:
            for s in block.strategies:
                for r in block.accelerations:
                    for a in block.artifacts:
                        names = out.setdefault(Cell(Strategy(s), float(r), a), [])
                        names.extend(n for n in block.recon if n not in names)
        return list(out.items())

    def validate(self):
        if not self.matrix or not self.cells():
            raise ConfigError("experiment matrix is empty")
        names = [r.name for r in self.recon]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate recon names")
        for cell, recons in self.cells():
            self.acs_fraction(cell.acceleration)
            if cell.artifact not in ARTIFACTS:
                raise ConfigError(f"unknown artifact {cell.artifact!r}; choose from {ARTIFACTS}")
            for n in recons:
                self.recon_by_name(n)
        if self.source.kind not in ("phantom", "kcpx"):
            raise ConfigError(f"unknown source kind {self.source.kind!r}")
        if self.source.kind == "kcpx" and not self.source.paths:
            raise ConfigError("kcpx source needs paths")
        if (self.noise.sigma is None) == (self.noise.snr_factor is None):
            raise ConfigError("noise needs exactly one of sigma / snr_factor")
        return self


def _table(d, where, allowed):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a table")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")
    return d


def _events(raw):
    events = []
    for i, ev in enumerate(raw):
        _table(ev, f"motion.events[{i}]", ("onset", "rotation", "shift", "transient"))
        events.append(MotionEvent(float(ev["onset"]), float(ev.get("rotation", 0.0)),
                                  tuple(ev.get("shift", (0.0, 0.0))),
                                  bool(ev.get("transient", False))))
    return tuple(events)


def _recon(name, d):
    d = _table(d, f"recon.{name}", ("kind", "k_stage", "i_stage", "tv_lambda", "tv_steps",
                                    "iterations"))
    kind = d.get("kind", "cascade")
    if kind == "zero_filled":
        if len(d) > 1:
            raise ConfigError(f"recon.{name}: zero_filled takes no options")
        return ReconSpec(name, kind)
    if kind != "cascade":
        raise ConfigError(f"recon.{name}: unknown kind {kind!r}")
    opts = {k: v for k, v in d.items() if k != "kind"}
    return ReconSpec(name, kind, CascadeConfig(**opts))


def parse_config(data):
    top = _table(data, "config", ("seed", "out_dir", "write_images", "per_image_masks",
                                  "source", "sampling", "noise", "motion", "recon", "matrix"))
    if "seed" not in top:
        raise ConfigError("config needs a master 'seed'")
    kw = {"seed": int(top["seed"])}
    for key in ("out_dir", "write_images", "per_image_masks"):
        if key in top:
            kw[key] = top[key]
    if "source" in top:
        src = _table(top["source"], "source", SourceConfig.__dataclass_fields__)
        if "paths" in src:
            src = dict(src, paths=tuple(src["paths"]))
        kw["source"] = SourceConfig(**src)
    if "sampling" in top:
        s = _table(top["sampling"], "sampling", ("acs_fractions", "gradient_alpha"))
        if "acs_fractions" in s:
            kw["acs_fractions"] = {float(k): float(v) for k, v in s["acs_fractions"].items()}
        if "gradient_alpha" in s:
            kw["gradient_alpha"] = float(s["gradient_alpha"])
    if "noise" in top:
        n = _table(top["noise"], "noise", ("snr_factor", "sigma"))
        kw["noise"] = NoiseConfig(snr_factor=n.get("snr_factor"), sigma=n.get("sigma"))
    if "motion" in top:
        m = _table(top["motion"], "motion", ("order", "events"))
        kw["motion"] = MotionConfig(OrderKind(m.get("order", "linear")),
                                    _events(m.get("events", ())))
    if "recon" in top:
        kw["recon"] = tuple(_recon(name, d) for name, d in
                            _table(top["recon"], "recon", top["recon"]).items())
    blocks = []
    for i, b in enumerate(top.get("matrix", ())):
        _table(b, f"matrix[{i}]", MatrixBlock.__dataclass_fields__)
        blocks.append(MatrixBlock(**{k: tuple(v) for k, v in b.items()}))
    kw["matrix"] = tuple(blocks)
    try:
        return ExperimentConfig(**kw).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
