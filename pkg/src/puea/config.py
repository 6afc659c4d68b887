"""Run configuration: flat ``key = value`` files plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .oneclass import DetectorKind, DetectorParams, IForestParams, LofParams, McdParams, OcsvmParams
from .scenario import ChannelParams, Placement


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    n_sus: int = 40
    n_slots: int = 10_000
    region: float = 100.0
    alpha: float = 4.0
    min_distance: float = 0.5
    pt_pu: float = 10.0
    sigma2_pu: float = 8.0
    pt_attacker: float = 10.0
    sigma2_attacker: tuple[float, ...] = (4.0, 8.0, 12.0)
    d_list: tuple[float, ...] = (5.0, 10.0, 20.0)
    placements: tuple[Placement, ...] = (Placement.INSIDE, Placement.OUTSIDE)
    outside_pu_x: float = 150.0
    outside_pu_y: float = 150.0
    puea_pct: tuple[float, ...] = (10.0, 20.0)
    detectors: tuple[DetectorKind, ...] = tuple(DetectorKind)
    k_list: tuple[int, ...] = (2, 5, 10, 20)
    contamination: float = 0.05
    iforest_trees: int = 100
    iforest_subsample: int = 256
    ocsvm_nu: float = 0.05
    ocsvm_gamma: float | str = "scale"
    ocsvm_tolerance: float = 1e-4
    ocsvm_max_iter: int = 100_000
    mcd_support_fraction: float | None = None
    mcd_subsets: int = 500
    lof_k: int = 20
    seed: int = 2021
    out: Path = field(default=Path("out"))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive_ints = ("n_sus", "n_slots", "iforest_trees", "mcd_subsets", "lof_k", "ocsvm_max_iter")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {getattr(self, name)}")
        if self.n_sus < 2:
            raise ConfigError(f"n_sus: need at least 2 SUs, got {self.n_sus}")
        if self.iforest_subsample < 2:
            raise ConfigError(f"iforest_subsample: must be >= 2, got {self.iforest_subsample}")
        for name in ("region", "alpha", "min_distance", "pt_pu", "pt_attacker", "ocsvm_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be > 0, got {getattr(self, name)}")
        if self.sigma2_pu < 0 or any(s < 0 for s in self.sigma2_attacker):
            raise ConfigError("sigma2: shadowing variances must be >= 0")
        for name in ("sigma2_attacker", "d_list", "placements", "puea_pct", "detectors", "k_list"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name}: list must not be empty")
        if any(d <= 0 for d in self.d_list):
            raise ConfigError(f"d_list: distances must be > 0, got {list(self.d_list)}")
        if any(not 0 < p < 100 for p in self.puea_pct):
            raise ConfigError(f"puea_pct: percentages must lie in (0, 100), got {list(self.puea_pct)}")
        if any(k < 2 for k in self.k_list):
            raise ConfigError(f"k_list: fold counts must be >= 2, got {list(self.k_list)}")
        if not 0 < self.contamination < 0.5:
            raise ConfigError(f"contamination: must lie in (0, 0.5), got {self.contamination}")
        if not 0 < self.ocsvm_nu <= 1:
            raise ConfigError(f"ocsvm_nu: must lie in (0, 1], got {self.ocsvm_nu}")
        g = self.ocsvm_gamma
        if not (g == "scale" or (isinstance(g, (int, float)) and g > 0)):
            raise ConfigError(f"ocsvm_gamma: must be 'scale' or > 0, got {g!r}")
        sf = self.mcd_support_fraction
        if sf is not None and not 0 < sf <= 1:
            raise ConfigError(f"mcd_support_fraction: must lie in (0, 1], got {sf}")

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.alpha, self.min_distance)

    def detector_params(self) -> DetectorParams:
        return DetectorParams(
            contamination=self.contamination,
            iforest=IForestParams(self.iforest_trees, self.iforest_subsample, self.seed),
            ocsvm=OcsvmParams(self.ocsvm_nu, self.ocsvm_gamma, self.ocsvm_tolerance, self.ocsvm_max_iter),
            mcd=McdParams(self.mcd_support_fraction, self.mcd_subsets, self.seed),
            lof=LofParams(self.lof_k),
        )

    def replace(self, **changes) -> RunConfig:
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _as_float_list(text):
    return tuple(float(v) for v in _split(text))


def _split(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v.strip() for v in str(text).replace(";", ",").split(",") if v.strip()]


def _gamma(text):
    if isinstance(text, (int, float)):
        return float(text)
    return "scale" if str(text).strip().lower() == "scale" else float(text)


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("none", "default", ""):
        return None
    return float(text)


_PARSERS = {
    "n_sus": int,
    "n_slots": int,
    "region": float,
    "alpha": float,
    "min_distance": float,
    "pt_pu": float,
    "sigma2_pu": float,
    "pt_attacker": float,
    "sigma2_attacker": _as_float_list,
    "d_list": _as_float_list,
    "placements": lambda t: tuple(Placement(v.lower()) for v in _split(t)),
    "outside_pu_x": float,
    "outside_pu_y": float,
    "puea_pct": _as_float_list,
    "detectors": lambda t: tuple(DetectorKind.parse(v) for v in _split(t)),
    "k_list": lambda t: tuple(int(v) for v in _split(t)),
    "contamination": float,
    "iforest_trees": int,
    "iforest_subsample": int,
    "ocsvm_nu": float,
    "ocsvm_gamma": _gamma,
    "ocsvm_tolerance": float,
    "ocsvm_max_iter": int,
    "mcd_support_fraction": _optional_float,
    "mcd_subsets": int,
    "lof_k": int,
    "seed": int,
    "out": Path,
}

KEYS = tuple(_PARSERS)


def parse_value(key: str, raw) -> object:
    if key not in _PARSERS:
        raise ConfigError(f"{key}: unknown configuration key")
    try:
        return _PARSERS[key](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, raw = (s.strip() for s in line.partition("="))
        key = key.replace("-", "_")
        try:
            values[key] = parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (already-typed or raw strings)."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config: file not found: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    for key, raw in overrides.items():
        if raw is None:
            continue
        values[key] = parse_value(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(x.value if hasattr(x, "value") else format(x, "g") if isinstance(x, float) else str(x) for x in v)
        elif v is None:
            v = "none"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
