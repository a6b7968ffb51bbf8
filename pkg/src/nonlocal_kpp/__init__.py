"""Spreading speeds and front dynamics for nonlocal KPP equations with time-dependent growth.

``u_t = K*u - Kbar u + u f(t, u)`` on the line: kernel functionals, least
means of the growth rate, the speed curve and its minimum, a semi-discrete
solver, front tracking and residual certificates for sub/super-solutions.
"""
from . import dynamics, env, fronts, kernel, speed, verify
from .errors import NonlocalKPPError

__all__ = ["dynamics", "env", "fronts", "kernel", "speed", "verify", "NonlocalKPPError"]
__version__ = "0.1.0"
