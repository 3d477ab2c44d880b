"""Multiplicative Poisson lambda-brackets on one difference variable."""
from .diffalg import DiffExpr, SymbolTable, TowerDepthError
from .exprtext import ParseError, format_expr, parse_expr
from .families import FamilySpec, build_family, catalog, twisted_pair
from .hamops import DiffOperator, adjoint, apply_op, op_mul, structure_to_operator
from .lambda_bracket import BracketStructure, jacobi_residual, master_bracket, skew_residual
from .scalars import Coefficient, EpsSpec

__all__ = [
    "BracketStructure", "Coefficient", "DiffExpr", "DiffOperator", "EpsSpec", "FamilySpec",
    "ParseError", "SymbolTable", "TowerDepthError", "adjoint", "apply_op", "build_family",
    "catalog", "format_expr", "jacobi_residual", "master_bracket", "op_mul", "parse_expr",
    "skew_residual", "structure_to_operator", "twisted_pair",
]
