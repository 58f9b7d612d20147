"""Geometric multigrid V-cycles on the interior-dof stiffness hierarchy.

The context assembles one stiffness and one mass matrix per hierarchy level,
restricts the mesh prolongations to interior dofs (restriction is exactly
the transpose, so coarse operators are the Galerkin products of fine ones on
nested spaces with matching quadrature) and factors the coarsest stiffness
densely.  A V-cycle smooths, restricts the residual, recurses with an exact
solve at the bottom, corrects and smooths again.

The default smoother is a fixed number of conjugate gradient steps, which
makes the cycle slightly nonlinear in the right-hand side; damped Jacobi and
symmetric Gauss-Seidel are available where a linear cycle is needed.
A running counter accumulates smoothing work as sweeps times level dofs,
the machine-independent cost measure reported by the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .errors import SolverError
from .fem import CoefficientField, DofMap, assemble_mass, assemble_stiffness, interior_dofmap
from .linalg import cg_solve, cho_solve, cholesky_dense
from .mesh import MeshHierarchy

__all__ = ["MGContext", "build_mg_context", "v_cycle", "mg_solve"]

_SMOOTHERS = ("cg", "jacobi", "gs")


@dataclass
class MGContext:
    """Per-level operators and transfer maps for the V-cycle.

    Immutable after construction apart from ``work_units``, the cumulative
    smoothing-work counter (sweeps times level dof count).
    """

    stiffness: list
    mass: list
    transfer: list          # interior-restricted prolongation, level k -> k+1
    dofmaps: list
    nu: int
    smoother: str
    coarse_factor: np.ndarray
    work_units: float = 0.0

    @property
    def n_levels(self) -> int:
        return len(self.stiffness)

    def n_dofs(self, level: int) -> int:
        return self.stiffness[level].shape[0]

    def reset_work(self) -> None:
        self.work_units = 0.0


def build_mg_context(
    hierarchy: MeshHierarchy,
    coeff: CoefficientField,
    nu: int = 2,
    smoother: str = "cg",
) -> MGContext:
    """Assemble level matrices and transfer operators for ``hierarchy``.

    Interior-restricted transfers are obtained by deleting boundary rows and
    columns of the mesh prolongations; interior basis functions vanish on
    the boundary, so nothing is lost.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1, got %r" % (nu,))
    if smoother not in _SMOOTHERS:
        raise ValueError("unknown smoother %r, expected one of %r" % (smoother, _SMOOTHERS))

    dofmaps = [interior_dofmap(mesh) for mesh in hierarchy.meshes]
    stiffness = [
        assemble_stiffness(mesh, dm, coeff)
        for mesh, dm in zip(hierarchy.meshes, dofmaps)
    ]
    mass = [
        assemble_mass(mesh, dm, coeff.rho)
        for mesh, dm in zip(hierarchy.meshes, dofmaps)
    ]
    transfer = []
    for k, full in enumerate(hierarchy.prolongations):
        fine = dofmaps[k + 1].dof_to_vertex
        coarse = dofmaps[k].dof_to_vertex
        transfer.append(full[fine][:, coarse])

    coarse_factor = cholesky_dense(stiffness[0].toarray())
    return MGContext(stiffness, mass, transfer, dofmaps, nu, smoother, coarse_factor)


def _smooth(ctx: MGContext, level: int, f: np.ndarray, x: np.ndarray) -> np.ndarray:
    matrix = ctx.stiffness[level]
    n = matrix.shape[0]
    if ctx.smoother == "cg":
        x, iters, _ = cg_solve(matrix, f, x, max_iters=ctx.nu, tol=0.0)
        ctx.work_units += iters * n
        return x
    if ctx.smoother == "jacobi":
        inv_diag = 1.0 / matrix.diagonal()
        for _ in range(ctx.nu):
            x = x + (2.0 / 3.0) * inv_diag * (f - matrix @ x)
        ctx.work_units += ctx.nu * n
        return x
    # Symmetric Gauss-Seidel: forward then backward triangular sweeps.
    lower = sp.tril(matrix, format="csr")
    upper = sp.triu(matrix, format="csr")
    for _ in range(ctx.nu):
        x = x + scipy.sparse.linalg.spsolve_triangular(lower, f - matrix @ x, lower=True)
        x = x + scipy.sparse.linalg.spsolve_triangular(upper, f - matrix @ x, lower=False)
    ctx.work_units += 2 * ctx.nu * n
    return x


def v_cycle(ctx: MGContext, level: int, f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One V-cycle for the level system, starting from iterate ``x``.

    At the coarsest level this is an exact dense solve.  The input arrays
    are not modified.
    """
    if not 0 <= level < ctx.n_levels:
        raise ValueError("level %d out of range 0..%d" % (level, ctx.n_levels - 1))
    f = np.asarray(f, dtype=float)
    if level == 0:
        return cho_solve(ctx.coarse_factor, f)

    x = np.array(x, dtype=float)
    x = _smooth(ctx, level, f, x)
    residual = f - ctx.stiffness[level] @ x
    coarse_residual = ctx.transfer[level - 1].T @ residual
    correction = v_cycle(
        ctx, level - 1, coarse_residual, np.zeros_like(coarse_residual)
    )
    x = x + ctx.transfer[level - 1] @ correction
    return _smooth(ctx, level, f, x)


def mg_solve(
    ctx: MGContext, level: int, f: np.ndarray, x0: np.ndarray, m: int
) -> np.ndarray:
    """Apply ``m`` V-cycles starting from ``x0``.

    This is the approximate boundary-value solve the eigenvalue correction
    step performs with the scaled mass-weighted eigenvector as right-hand
    side and the current eigenvector as initial guess.
    """
    if m < 1:
        raise ValueError("m must be >= 1, got %r" % (m,))
    x = np.array(x0, dtype=float)
    for _ in range(m):
        x = v_cycle(ctx, level, f, x)
    return x
