"""Strict experiment configuration (JSON, versioned, unknown fields rejected)."""
import json
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .catalog import LEFT_FAMILIES, RIGHT_FAMILIES, SYSTEMS, make_system
from .measures import CONTINUOUS_LAWS, DiscreteMeasure

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DiscreteMeasureConfig(_Strict):
    kind: Literal["discrete"]
    atoms: List[float] = Field(min_length=1)
    weights: List[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.atoms) != len(self.weights):
            raise ValueError("atoms and weights must have equal length")
        if abs(sum(self.weights) - 1.0) > 1e-10:
            raise ValueError("weights must sum to 1")
        return self

    def build(self):
        return DiscreteMeasure(tuple(self.atoms), tuple(self.weights))


class ContinuousMeasureConfig(_Strict):
    kind: Literal["continuous"]
    law: Literal["uniform", "power", "pareto"]
    params: List[float]
    nodes: int = Field(default=256, ge=8, le=65536)

    @model_validator(mode="after")
    def _buildable(self):
        try:
            self.build()
        except TypeError:
            raise ValueError(f"wrong number of params for law {self.law!r}") from None
        return self

    def build(self):
        return CONTINUOUS_LAWS[self.law](*self.params, nodes=self.nodes)


MeasureConfig = Union[DiscreteMeasureConfig, ContinuousMeasureConfig]


class ValidateKnobs(_Strict):
    grid_size: int = Field(default=1024, ge=64, le=10**6)
    quadrature_nodes: int = Field(default=256, ge=8, le=65536)
    ceiling: float = Field(default=1e12, gt=1)


class SequenceKnobs(_Strict):
    alpha: Optional[float] = None
    beta: Optional[float] = None
    N: int = Field(default=100, ge=1, le=10**6)
    M: Optional[int] = Field(default=None, ge=1, le=10**6)
    predict: bool = True


class InducedKnobs(_Strict):
    points: List[float] = Field(default_factory=lambda: [0.6, 0.75, 0.9])
    beta: Optional[float] = None
    cap: int = Field(default=10**4, ge=1, le=10**8)
    n_returns: int = Field(default=10**4, ge=10**3, le=10**8)


class UlamKnobs(_Strict):
    y_cells: int = Field(default=256, ge=2, le=10**5)
    samples_per_cell: int = Field(default=10**4, ge=100, le=10**7)
    cap: int = Field(default=10**4, ge=100, le=10**8)
    tol: float = Field(default=1e-4, gt=0, lt=1)
    max_iters: int = Field(default=10**5, ge=1, le=10**8)
    alpha: Optional[float] = None
    x_cells: int = Field(default=20, ge=1, le=10**4)
    split: int = Field(default=4, ge=1, le=1000)
    N_trunc: int = Field(default=200, ge=1, le=10**6)
    extend: bool = True


class SimulateKnobs(_Strict):
    x0: float = Field(default=0.7, gt=0, le=1)
    steps: int = Field(default=10**6, ge=10**4, le=10**10)
    alpha: Optional[float] = None
    n_cells: int = Field(default=12, ge=1, le=10**4)
    n_shards: int = Field(default=16, ge=1, le=4096)
    chains_per_shard: int = Field(default=64, ge=1, le=10**5)


class AsymptoticsKnobs(_Strict):
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    c: float = Field(default=0.4, gt=0, lt=0.5)
    n_lo: int = Field(default=100, ge=2)
    n_hi: int = Field(default=10**4, ge=4, le=10**6)
    points: int = Field(default=40, ge=4, le=10**4)


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    family: str
    left: Optional[str] = None
    right: Optional[str] = None
    nu_A: Optional[MeasureConfig] = Field(default=None, discriminator="kind")
    nu_B: Optional[MeasureConfig] = Field(default=None, discriminator="kind")
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    out: str = "out"
    threads: int = Field(default=1, ge=0, le=1024)
    validate_: ValidateKnobs = Field(default_factory=ValidateKnobs, alias="validate")
    sequences: SequenceKnobs = Field(default_factory=SequenceKnobs)
    induced: InducedKnobs = Field(default_factory=InducedKnobs)
    ulam: UlamKnobs = Field(default_factory=UlamKnobs)
    simulate: SimulateKnobs = Field(default_factory=SimulateKnobs)
    asymptotics: AsymptoticsKnobs = Field(default_factory=AsymptoticsKnobs)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _known_family(self):
        if self.family not in SYSTEMS:
            raise ValueError(f"unknown family {self.family!r}; known: {sorted(SYSTEMS)}")
        if self.left is not None and self.left not in LEFT_FAMILIES:
            raise ValueError(f"unknown left family {self.left!r}")
        if self.right is not None and self.right not in RIGHT_FAMILIES:
            raise ValueError(f"unknown right family {self.right!r}")
        left, right = SYSTEMS[self.family][:2]
        left = LEFT_FAMILIES[self.left] if self.left else left
        right = RIGHT_FAMILIES[self.right] if self.right else right
        for name, fam, mcfg in (("nu_A", left, self.nu_A), ("nu_B", right, self.nu_B)):
            if mcfg is None:
                continue
            if fam.param_free:
                raise ValueError(f"{name} given but branch family {fam.name!r} takes no parameter")
            try:
                lo, hi = mcfg.build().support
            except (TypeError, ValueError) as e:
                raise ValueError(f"{name}: {e}") from None
            for p in (lo, hi):
                if np.isfinite(p) and not fam.domain(p):
                    raise ValueError(f"{name} support endpoint {p!r} outside the domain of {fam.name!r}")
        return self

    def build_system(self):
        kw = {}
        if self.left:
            kw["left"] = self.left
        if self.right:
            kw["right"] = self.right
        return make_system(self.family, self.nu_A.build() if self.nu_A else None,
                           self.nu_B.build() if self.nu_B else None, **kw)

    def to_json(self):
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, indent=2) + "\n"


class ConfigError(ValueError):
    """Invalid configuration, with one diagnostic line per problem."""

    def __init__(self, lines):
        self.lines = list(lines)
        super().__init__("\n".join(self.lines))


def _line_of(text, key):
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def parse_config(text):
    """Parse and validate config text; raises ConfigError with line/field diagnostics."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"line {e.lineno}, column {e.colno}: {e.msg}"]) from None
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        lines = []
        for err in e.errors():
            loc = [str(p) for p in err["loc"]]
            key = next((p for p in reversed(loc) if not p.isdigit() and p not in ("discrete", "continuous")), "")
            if not key:
                # model-level checks name the offending top-level field in the message
                key = next((f for f in ("nu_A", "nu_B", "left", "right", "family") if f in err["msg"]), "")
            ln = _line_of(text, key) if key else None
            where = f"line {ln}, " if ln else ""
            lines.append(f"{where}field {'.'.join(loc) or '<root>'}: {err['msg']}")
        raise ConfigError(lines) from None


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
