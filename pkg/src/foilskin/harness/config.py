"""Run configuration: an INI-style ``key = value`` file with sections.

Every key is optional; missing keys fall back to the library defaults.
Unknown sections or keys are rejected so typos cannot pass silently.

Seeds: one root seed (``[run] seed``) feeds every random consumer through
``derive_seed(root, name)``: the first eight bytes of
``sha256(f"{root}/{name}")`` read as a little-endian unsigned integer.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..estimator import TrainConfig
from ..ingestion import DEFAULT_TOLERANCE
from ..plant import PlantParams
from ..protocol import TrainingProtocol
from ..sensing import SkinModelParams

SEED_CONSUMERS = ("protocol", "skin", "split", "init", "shuffle", "control")


def derive_seed(root: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(root)}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class ControlSuite:
    """Closed-loop experiment settings."""

    cycles: int = 20  # periods simulated per tracking run
    step_trials: int = 10
    mean: float = 4.25
    amplitudes: tuple = (2.0, 5.0)
    periods: tuple = (20.0, 10.0, 5.0)
    waveforms: tuple = ("sine", "triangle")
    feedback: str = "estimator"
    dt: float = 0.0  # 0 -> plant time step

    def __post_init__(self):
        if self.cycles < 2 or self.step_trials < 1:
            raise ValueError("need at least two cycles and one step trial")
        if self.feedback not in ("estimator", "truth"):
            raise ValueError("feedback must be 'estimator' or 'truth'")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    plant: PlantParams = field(default_factory=PlantParams)
    skin: SkinModelParams = field(default_factory=SkinModelParams)
    protocol: TrainingProtocol = field(default_factory=TrainingProtocol)
    train: TrainConfig = field(default_factory=TrainConfig)
    tolerance: float = DEFAULT_TOLERANCE
    control: ControlSuite = field(default_factory=ControlSuite)
    source: str = ""  # config text, hashed into manifests

    def seed_for(self, name: str) -> int:
        return derive_seed(self.seed, name)

    def seeds(self) -> dict:
        return {"root": self.seed, **{n: self.seed_for(n) for n in SEED_CONSUMERS}}

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def canonical(self) -> str:
        """Normalised, parseable text of every effective setting (overrides included).

        Derived seeds are left out; they follow from the root seed.
        """
        parts = [f"[run]\nseed = {self.seed}\ntolerance = {self.tolerance!r}"]
        for name in ("plant", "skin", "protocol", "train", "control"):
            obj = getattr(self, name)
            body = "\n".join(f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)
                             if f.name not in _FIXED.get(name, ()))
            parts.append(f"[{name}]\n{body}")
        return "\n".join(parts) + "\n"


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return value if isinstance(value, str) else repr(value)


_SECTIONS = {"plant": PlantParams, "skin": SkinModelParams, "protocol": TrainingProtocol,
             "train": TrainConfig, "control": ControlSuite}
# the seed of each sub-config comes from the root seed, never from the file
_FIXED = {"skin": {"seed"}, "train": {"seed"}}


def _convert(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(s) for s in items)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _build(cls, section: dict, name: str):
    defaults = cls()
    known = {f.name for f in fields(cls)} - _FIXED.get(name, set())
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        kwargs[key] = _convert(raw, getattr(defaults, key), f"[{name}] {key}")
    try:
        return replace(defaults, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    unknown = set(parser.sections()) - set(_SECTIONS) - {"run"}
    if unknown:
        raise ConfigError(f"{origin}: unknown section(s) {', '.join(sorted(unknown))}")
    run = dict(parser["run"]) if parser.has_section("run") else {}
    extra = set(run) - {"seed", "tolerance"}
    if extra:
        raise ConfigError(f"[run] unknown key(s) {', '.join(sorted(extra))}")
    seed = _convert(run.get("seed", "0"), 0, "[run] seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("[run] seed must be an unsigned 64-bit integer")
    tol = _convert(run.get("tolerance", repr(DEFAULT_TOLERANCE)), 0.0, "[run] tolerance")
    if not tol > 0:
        raise ConfigError("[run] tolerance must be positive")
    parts = {name: _build(cls, dict(parser[name]) if parser.has_section(name) else {}, name)
             for name, cls in _SECTIONS.items()}
    cfg = RunConfig(seed=seed, tolerance=tol, source=text, **parts)
    return with_seed(cfg, seed)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Re-derive every consumer seed from a new root."""
    if not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg = replace(cfg, seed=int(seed))
    return replace(cfg, skin=replace(cfg.skin, seed=cfg.seed_for("skin")),
                   train=replace(cfg.train, seed=cfg.seed_for("shuffle")))


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config("")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def default_config_text() -> str:
    return parse_config("").canonical()
