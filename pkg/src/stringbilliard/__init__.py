"""String billiards on stellated regular polygons."""

from .dynamics import launch, trace, trace_many
from .errors import BilliardError, DomainError
from .table import build_table, hexagon_table, string_length

__all__ = ["BilliardError", "DomainError", "build_table", "hexagon_table", "launch",
           "string_length", "trace", "trace_many"]
