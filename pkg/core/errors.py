# Path: core/errors.py
"""Domain exceptions. Each one specialises the builtin callers already catch."""
from __future__ import annotations

from typing import Optional, Tuple


class ConfigError(ValueError):
    """Invalid weight configuration; the message names the violated invariant."""


class GroundSpaceError(ValueError):
    """Invalid base space (symmetry, spanning, normalization, bimonotonicity)."""


class DimensionError(ValueError):
    pass


class RepresentativeError(ValueError):
    pass


class TreeValidationError(ValueError):
    def __init__(self, clause: str, address: Tuple[int, ...] = (), detail: str = ""):
        self.clause = clause
        self.address = tuple(address)
        where = "root" if not self.address else ".".join(str(a) for a in self.address)
        msg = f"{clause} at node {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NotWeightedError(ValueError):
    pass


class UnsupportedError(RuntimeError):
    """The question cannot be decided under the declared tail rule."""


class ContractionError(ValueError):
    pass


class EnumerationCapError(RuntimeError):
    def __init__(self, estimate: int, cap: int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(f"enumeration refused: estimated {estimate} functionals exceeds cap {cap}")


class ParseError(ValueError):
    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class PreconditionError(ValueError):
    """Hypotheses of a lemma checker are not met."""
