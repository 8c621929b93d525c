"""PID-based analysis of knowledge distillation at desk scale."""

from .info_core import Joint2, Joint3, InvalidDistribution, cond_mutual_info, entropy, mutual_info
from .pid_broja import PidAtoms, SolverOptions, pid, solve_unique

__all__ = ["Joint2", "Joint3", "InvalidDistribution", "entropy", "mutual_info", "cond_mutual_info",
           "PidAtoms", "SolverOptions", "pid", "solve_unique"]
