"""Poisson solver for complex geometries via coordinate transformation and multigrid.

A physical region is mapped onto a uniform computational grid; the geometry
reappears as an anisotropic material tensor and a scaled source, and the
resulting variable-coefficient problem is solved with SOR or geometric
multigrid.
"""

__version__ = "0.1.0"

from .benchmarks import (CASES, BenchmarkCase, SolverOptions, make_case, run_convergence_study,
                         run_timing_comparison, solve_case)
from .discrete import (ConvergenceError, ProblemInstance, SolveResult, apply_bc, apply_operator,
                       assemble, residual, sor_solve, sor_sweep, stencil_at)
from .fields import (BoundarySpec, Dirichlet, ErrorNorms, NeumannZero, ScalarField, UniformGrid,
                     convergence_slope, error_norms, make_grid)
from .gridgen import SinusoidalDeform, SquareToCircle, boundary_trace, generate_map, quality_report
from .multigrid import build_hierarchy, mg_solve, prolong, restrict, v_cycle
from .transform import (Identity, MaterialTensor, OrientationError, Polar, SinhStretch, Tabulated,
                        jacobian_exact, jacobian_numeric, material_tensor, physical_field,
                        tensor_from_map, transform_source)
