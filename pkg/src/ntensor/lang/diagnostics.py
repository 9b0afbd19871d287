"""Diagnostics and language-level errors, all carrying source positions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

from ..errors import NamedTensorError


@dataclass
class Diagnostic:
    """A checker finding: severity, 1-based position, message, shapes involved."""

    severity: str
    line: int
    col: int
    message: str
    shapes: Tuple = field(default_factory=tuple)

    def __str__(self):
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


class ParseError(NamedTensorError):
    """A syntax error with its source position."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: error: {message}")
        self.line = line
        self.col = col
        self.bare_message = message


class RunError(NamedTensorError):
    """A runtime failure attributed to a source position."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: error: {message}")
        self.line = line
        self.col = col
        self.bare_message = message
