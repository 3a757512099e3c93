"""Run configuration: defaults, ``key = value`` files and engine wiring."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .engine import EngineConfig, PTAVEngine
from .tracker import CorrelationTracker, TrackerConfig
from .verifier import CorrelationVerifier, DetectionConfig

# file key -> attribute name, where they differ
_ALIASES = {"lambda": "lam", "S": "num_scales", "a": "scale_step", "L": "latency"}
_REVERSE = {v: k for k, v in _ALIASES.items()}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # tracker
    lam: float = 0.01
    eta: float = 0.025
    padding: float = 2.0
    sigma_factor: float = 1.0 / 16.0
    cell_size: int = 4
    pca_dim: int = 5
    num_scales: int = 17
    scale_step: float = 1.02
    scale_sigma: float = 1.0
    subcell: bool = False
    # verification schedule
    V: int = 10
    V_min: int = 1
    # verifier / detection
    verifier: str = "correlation"  # correlation | none
    tau1: float = 1.0
    tau2: float = 1.6
    beta: float = 1.5
    beta_max: float = 4.0
    beta_step: float = 0.5
    stride: int = 0  # 0: max(1, floor(min(w, h) / 8))
    candidate_scales: tuple[float, ...] = (0.95, 1.0, 1.05)
    template_size: int = 32
    # engine
    mode: str = "deterministic"
    latency: int = 2
    verifier_delay_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.verifier not in ("correlation", "none"):
            raise ConfigError(f"verifier: expected 'correlation' or 'none', got {self.verifier!r}")
        if self.template_size < self.cell_size:
            raise ConfigError("template_size: must be >= cell_size")
        if self.stride < 0:
            raise ConfigError("stride: must be >= 0")
        try:
            self.tracker_config()
            self.engine_config()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            lam=self.lam,
            eta=self.eta,
            padding=self.padding,
            sigma_factor=self.sigma_factor,
            cell_size=self.cell_size,
            pca_dim=self.pca_dim,
            num_scales=self.num_scales,
            scale_step=self.scale_step,
            scale_sigma=self.scale_sigma,
            subcell=self.subcell,
        )

    def detection_config(self) -> DetectionConfig:
        return DetectionConfig(
            tau1=self.tau1,
            tau2=self.tau2,
            beta=self.beta,
            beta_default=self.beta,
            beta_max=self.beta_max,
            beta_step=self.beta_step,
            stride=self.stride or None,
            candidate_scales=tuple(self.candidate_scales),
        )

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            V_default=self.V,
            V_min=self.V_min,
            mode=self.mode,
            latency=self.latency,
            verifier_delay=self.verifier_delay_ms / 1000.0,
            detection=self.detection_config(),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["candidate_scales"] = list(self.candidate_scales)
        return {_REVERSE.get(k, k): v for k, v in d.items()}

    def dumps(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                value = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **values) -> "RunConfig":
        return replace(self, **coerce_values(values))


def _parse_bool(raw: str) -> bool:
    low = str(raw).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def coerce_values(values: dict) -> dict:
    """Map file keys to attributes and parse string values to field types."""
    defaults = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    out = {}
    for key, raw in values.items():
        name = _ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"{key}: unknown config key")
        default = getattr(defaults, name)
        try:
            if not isinstance(raw, str):
                value = raw
            elif isinstance(default, bool):
                value = _parse_bool(raw)
            elif isinstance(default, tuple):
                value = tuple(float(p) for p in raw.split(",") if p.strip())
            elif isinstance(default, int):
                value = int(raw)
            elif isinstance(default, float):
                value = float(raw)
            else:
                value = raw.strip()
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if isinstance(default, tuple):
            value = tuple(float(v) for v in value)
        elif isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        out[name] = value
    return out


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value
    return values


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then file values, then ``overrides`` (highest precedence)."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(coerce_values(parse_key_values(p.read_text(), str(p))))
    values.update(coerce_values({k: v for k, v in overrides.items() if v is not None}))
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def build_engine(config: RunConfig, tracker=None, verifier=None) -> PTAVEngine:
    if tracker is None:
        tracker = CorrelationTracker(config.tracker_config())
    if verifier is None and config.verifier == "correlation":
        size = (config.template_size, config.template_size)
        verifier = CorrelationVerifier(canonical_size=size, cell_size=config.cell_size)
    return PTAVEngine(tracker=tracker, verifier=verifier, config=config.engine_config())
