"""L^q best approximation by P1 finite elements.

The package computes best approximations of discontinuous or smooth target
functions in the L^q norm (``1 < q < inf``) by continuous piecewise-linear
functions on interval and triangle meshes, certifies L^1 optimality through
a dual witness, and evaluates the closed-form overshoot results for the
model problems.
"""
from .certify import (CertificateResult, CertVerdict, PsiWitness, area_heuristic_2d,
                      certify_family_jump, certify_l1)
from .errors import (DegenerateElement, DomainError, InvalidMesh, InvalidProblem, LqGibbsError,
                     NonConvergence, NumericalError, OutOfDomain, ParseError, PreconditionError,
                     Unsupported)
from .fespace import (FEFunction, OvershootReport, P1Space, Problem, TargetFunction, build_space,
                      evaluate, nodal_overshoot)
from .kernels import BACKEND
from .mesh import (AffineMap, Mesh1D, Pattern, TriMesh, affine_to_reference, criss_cross_mesh,
                   interval_mesh, jump_mesh, load_mesh, save_mesh, structured_square_mesh,
                   two_element_mesh, uniform_interval_mesh)
from .signsplit import Sign, SignPartition, SubRegion, assemble, lq_error, partition
from .solver import (SolveReport, SolverOptions, SweepRow, extrapolate_to_l1, q_path, solve_l2,
                     solve_lq, sweep_q)
from .theory import (JumpSolution, ThetaSchedule, Verdict, alpha_mesh1_l1, alpha_mesh1_lq,
                     alpha_mesh2_l1, alpha_two_element_l1, alpha_two_element_lq,
                     check_no_overshoot_l1, interior_overshoot_value, jump_family, theta_schedule)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
