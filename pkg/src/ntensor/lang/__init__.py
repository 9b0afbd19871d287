"""Textual expression language: parser, shape checker, evaluator, gradients."""

from .check import check
from .diagnostics import Diagnostic, ParseError, RunError
from .parse import (
    AxisDecl,
    Binding,
    Directive,
    Program,
    ShapeDecl,
    format_expr,
    format_program,
    parse,
)
from .run import ProgramRun, evaluate_program, grad_program, run_program

__all__ = [
    "parse",
    "check",
    "format_program",
    "format_expr",
    "evaluate_program",
    "run_program",
    "grad_program",
    "Program",
    "ProgramRun",
    "AxisDecl",
    "ShapeDecl",
    "Binding",
    "Directive",
    "Diagnostic",
    "ParseError",
    "RunError",
]
