"""Prophet inequalities with a quantile oracle: policies, simulation,
factor-revealing LPs and hard-instance upper bounds."""

from prophet_lab.dist import Distribution, DomainError
from prophet_lab.lp import LpModel, LpSolution, Status, solve

__all__ = ["Distribution", "DomainError", "LpModel", "LpSolution", "Status", "solve"]
__version__ = "0.1.0"
