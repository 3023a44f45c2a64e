"""Training configuration: a flat key = value file mirrored by a dataclass."""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..errors import ParseError
from ..geometry import RIG_SUBSETS

POOL_POSITIONS = ("d2", "d1", "d0", "code")


@dataclass
class TrainConfig:
    resolution: int = 32
    levels: int = 5
    channels: tuple[int, ...] = (16, 32, 64, 128, 128)
    views: int = 8
    model: str = "mvcn"  # "mvcn" or "vcn" (no cross-view descriptor)
    pooling: str = "max"  # "max" or "mean"
    pool_position: str = "d2"
    lam: float = 1.0
    pixel_loss: str = "l1"  # "l1" or "l2"
    use_cgan: bool = True
    lr_g: float = 0.0006
    lr_d: float = 0.000006
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 32
    steps: int = 500
    seed: int = 0
    dropout: float = 0.5
    memory_reset: str = "epoch"  # "epoch" or "never"
    disc_channels: int = 32
    disc_layers: int = 3

    def validate(self) -> None:
        if self.resolution != 2**self.levels:
            raise ValueError(
                f"resolution {self.resolution} must equal 2**levels (levels={self.levels})"
            )
        if len(self.channels) != self.levels:
            raise ValueError(f"need {self.levels} channel widths, got {len(self.channels)}")
        if self.views not in RIG_SUBSETS:
            raise ValueError(f"unsupported view count {self.views}")
        if self.model not in ("mvcn", "vcn"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.pooling not in ("max", "mean"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.pool_position not in POOL_POSITIONS:
            raise ValueError(f"unknown pool position {self.pool_position!r}")
        if self.pool_position != "code":
            # position dP taps the output of module D_{P+1}
            depth = int(self.pool_position[1])
            if self.levels < depth + 2:
                raise ValueError(
                    f"pool position {self.pool_position} needs at least {depth + 2} levels"
                )
        if self.pixel_loss not in ("l1", "l2"):
            raise ValueError(f"unknown pixel loss {self.pixel_loss!r}")
        if self.memory_reset not in ("epoch", "never"):
            raise ValueError(f"unknown memory_reset {self.memory_reset!r}")
        if self.batch_size < 1 or self.steps < 1 or self.disc_layers < 2:
            raise ValueError("batch_size, steps, and disc_layers must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "channels":
                value = ",".join(str(c) for c in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path=None) -> "TrainConfig":
        kwargs = {}
        known = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path=path, line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ParseError(f"unknown config key {key!r}", path=path, line=lineno)
            try:
                kwargs[key] = _parse_value(known[key].type, value)
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {exc}", path=path, line=lineno) from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), path=path)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def _parse_value(annot: str, value: str):
    if annot == "int":
        return int(value)
    if annot == "float":
        return float(value)
    if annot == "bool":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if annot.startswith("tuple"):
        return tuple(int(v) for v in value.split(",") if v.strip())
    return value
