# Path: core/space_file.py
"""
Space-definition files.

    [weights]
    m = [2, 4, 8, 16]
    n = [4, 8, 16, 32]
    tail_rule = "doubling"          # or "none"

    [ground]
    dim = 1
    norming_set = [["1"], ["-1"]]   # rationals as integers or "p/q" strings
    partition = "round_robin"       # or [1, 2, 2], or {prefix = [...], period = [...]}

    [[experiments]]
    name = "prop43"
    kind = "quotient"               # quotient | blocks | cesaro | ell1
    z = ["1"]
    j0 = 1

Unknown keys are rejected. Floats are rejected: write them as "p/q".
"""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, StrictInt, StrictStr, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from core.config import WeightConfig, parse_weight_config
from core.errors import ParseError
from core.ground import FiniteVector, GroundSpace, Partition
from core.rational import fmt, parse_rational

RationalText = Union[StrictInt, StrictStr]


def _rational(value: RationalText) -> str:
    return fmt(parse_rational(value))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WeightsSection(_Strict):
    m: List[StrictInt]
    n: List[StrictInt]
    tail_rule: Literal["none", "doubling"] = "none"


class PartitionSpec(_Strict):
    prefix: List[StrictInt] = []
    period: List[StrictInt]


class GroundSection(_Strict):
    dim: StrictInt
    norming_set: List[List[RationalText]]
    partition: Union[Literal["round_robin"], List[StrictInt], PartitionSpec] = "round_robin"
    check_bimonotone: bool = True

    @field_validator("norming_set")
    @classmethod
    def _canonical(cls, rows):
        return [[_rational(c) for c in row] for row in rows]


ExperimentKind = Literal["quotient", "blocks", "cesaro", "ell1"]


class ExperimentSpec(_Strict):
    name: StrictStr
    kind: ExperimentKind
    z: Optional[List[RationalText]] = None
    j0: Optional[StrictInt] = None
    vectors: Optional[List[StrictStr]] = None
    unit_blocks: Optional[StrictInt] = None
    alternating: bool = False
    p: List[RationalText] = [2]
    counts: Optional[List[StrictInt]] = None
    grid: Optional[List[List[RationalText]]] = None
    width: RationalText = "1/1000000000"
    seed: StrictInt = 0

    @field_validator("z", "p")
    @classmethod
    def _canonical_list(cls, values):
        return None if values is None else [_rational(v) for v in values]

    @field_validator("width")
    @classmethod
    def _canonical_width(cls, value):
        width = parse_rational(value)
        if width <= 0:
            raise ValueError("width must be positive")
        return fmt(width)

    @model_validator(mode="after")
    def _required_fields(self):
        if self.kind == "quotient" and (self.z is None or self.j0 is None):
            raise ValueError(f"experiment {self.name!r}: kind 'quotient' needs z and j0")
        if self.kind in ("blocks", "cesaro", "ell1") and not self.vectors and not self.unit_blocks:
            raise ValueError(f"experiment {self.name!r}: kind {self.kind!r} needs vectors or unit_blocks")
        return self

    def family(self) -> List[FiniteVector]:
        """The vectors of the manifest; unit_blocks = N means e_1, ..., e_N (signs alternate if asked)."""
        if self.vectors:
            return [parse_vector(v, f"experiments.{self.name}.vectors[{i}]") for i, v in enumerate(self.vectors)]
        return [FiniteVector.unit(k, (-1) ** k if self.alternating else 1) for k in range(1, self.unit_blocks + 1)]


class SpaceDefinition(_Strict):
    weights: WeightsSection
    ground: GroundSection
    experiments: List[ExperimentSpec] = []

    @model_validator(mode="after")
    def _unique_names(self):
        names = [e.name for e in self.experiments]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ValueError(f"duplicate experiment names: {sorted(dup)}")
        return self

    def weight_config(self) -> WeightConfig:
        return parse_weight_config(self.weights.m, self.weights.n, self.weights.tail_rule)

    def ground_space(self) -> GroundSpace:
        g = self.ground
        if g.partition == "round_robin":
            partition = None
        elif isinstance(g.partition, PartitionSpec):
            partition = Partition(tuple(g.partition.period), tuple(g.partition.prefix))
        else:
            partition = Partition(tuple(g.partition))
        norming_set = tuple(tuple(parse_rational(c) for c in row) for row in g.norming_set)
        return GroundSpace(g.dim, norming_set, partition, g.check_bimonotone)

    def build(self) -> Tuple[WeightConfig, GroundSpace]:
        return self.weight_config(), self.ground_space()

    def experiment(self, name: str) -> ExperimentSpec:
        for e in self.experiments:
            if e.name == name:
                return e
        raise KeyError(name)

    def digest(self) -> str:
        """sha256 of the canonical JSON form, embedded in every report."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _loc(source: str, loc: Tuple[Any, ...]) -> str:
    path = ".".join(str(p) for p in loc)
    return f"{source}: {path}" if path else source


def space_from_dict(data: Dict[str, Any], source: str = "space") -> SpaceDefinition:
    try:
        return SpaceDefinition.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ParseError(first["msg"], _loc(source, first["loc"]))


def load_space_file(path: Union[str, Path]) -> SpaceDefinition:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ParseError("file not found", str(path))
    except tomllib.TOMLDecodeError as e:
        raise ParseError(str(e), str(path))
    return space_from_dict(data, str(path))


def parse_vector(text: str, location: Optional[str] = None) -> FiniteVector:
    """
    Whitespace-separated rationals. A token "k:v" places v at coordinate k;
    a bare token goes to the coordinate after the previous one. '#' starts a comment.
    """
    entries: Dict[int, Fraction] = {}
    k = 0
    for lineno, line in enumerate(str(text).splitlines() or [""], start=1):
        line = line.split("#", 1)[0]
        for col, token in enumerate(line.split(), start=1):
            where = f"{location or 'vector'}:{lineno}:{col}"
            if ":" in token:
                idx, val = token.split(":", 1)
                try:
                    k = int(idx)
                except ValueError:
                    raise ParseError(f"bad coordinate {idx!r}", where)
                if k < 1:
                    raise ParseError(f"coordinates start at 1, got {k}", where)
            else:
                k, val = k + 1, token
            if k in entries:
                raise ParseError(f"coordinate {k} given twice", where)
            entries[k] = parse_rational(val, where)
    return FiniteVector.from_mapping(entries)


def load_vector(path_or_text: str) -> FiniteVector:
    """A vector file path, or the vector itself when no such file exists."""
    path = Path(path_or_text)
    try:
        if path.is_file():
            return parse_vector(path.read_text(encoding="utf-8"), str(path))
    except OSError:
        pass
    return parse_vector(path_or_text, "argument")
