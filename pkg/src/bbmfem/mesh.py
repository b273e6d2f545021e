"""Uniform 1D meshes, continuous Lagrange spaces and constant FEM matrices.

A :class:`FemSpace` is a uniform partition of ``[a, b]`` carrying piecewise
polynomials of degree ``r`` with equispaced nodes in every cell. Three
boundary variants are supported: free (all nodes), zero-endpoint (the two
endpoint nodes are removed) and periodic (the endpoint nodes are identified).

All cells have the same width, so every local matrix is computed once on the
reference cell ``[0, 1]`` and scattered through the cell-to-DOF map.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

MAX_DEGREE = 4


class ConfigurationError(ValueError):
    """Invalid mesh, degree or space pairing."""


class Bc(enum.Enum):
    FREE = "free"
    ZERO = "zero"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class UniformMesh:
    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigurationError(f"empty interval [{self.a}, {self.b}]")
        if self.n_cells < 2:
            raise ConfigurationError(f"need at least 2 cells, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def length(self) -> float:
        return self.b - self.a

    def node(self, j):
        """Coordinate of mesh vertex ``j`` (computed directly, never accumulated)."""
        j = np.asarray(j)
        x = self.a + j * self.dx
        return np.where(j == self.n_cells, self.b, x)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss--Legendre rule on the reference cell ``[0, 1]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.nodes)

    @property
    def exact_degree(self) -> int:
        return 2 * self.n_points - 1


@lru_cache(maxsize=None)
def gauss_legendre(n_points: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(n_points)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def quadrature_for(max_poly_degree: int) -> QuadratureRule:
    """Smallest Gauss--Legendre rule integrating degree ``max_poly_degree`` exactly."""
    if max_poly_degree < 0:
        raise ValueError("polynomial degree must be non-negative")
    return gauss_legendre(max(1, math.ceil((max_poly_degree + 1) / 2)))


@lru_cache(maxsize=None)
def _monomial_coefficients(r: int) -> np.ndarray:
    # column k holds the monomial coefficients of the k-th equispaced Lagrange basis polynomial
    xi = np.linspace(0.0, 1.0, r + 1)
    vander = np.vander(xi, r + 1, increasing=True)
    return np.linalg.inv(vander)


def reference_basis(r: int, xi) -> tuple[np.ndarray, np.ndarray]:
    """Values and reference derivatives of the degree-``r`` basis at points ``xi``.

    Returns two arrays of shape ``(len(xi), r + 1)``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    coef = _monomial_coefficients(r)
    powers = np.vander(xi, r + 1, increasing=True)
    vals = powers @ coef
    dcoef = coef[1:] * np.arange(1, r + 1)[:, None]
    dvals = powers[:, :r] @ dcoef
    return vals, dvals


class FemSpace:
    """Continuous Lagrange space of degree ``degree`` on a uniform mesh.

    DOFs are numbered left to right with the interior nodes of each cell
    interleaved between the shared vertex nodes. Removed endpoint DOFs of the
    zero-endpoint variant appear as ``-1`` in :attr:`cell_dofs`.
    """

    def __init__(self, mesh: UniformMesh, degree: int, bc: Bc):
        if not (isinstance(degree, (int, np.integer)) and 1 <= degree <= MAX_DEGREE):
            raise ConfigurationError(f"degree must be in 1..{MAX_DEGREE}, got {degree!r}")
        self.mesh = mesh
        self.degree = int(degree)
        self.bc = Bc(bc)
        r, n = self.degree, mesh.n_cells
        n_global = r * n + 1
        glob = r * np.arange(n)[:, None] + np.arange(r + 1)[None, :]
        all_coords = mesh.a + np.arange(n_global) * (mesh.dx / r)
        all_coords[-1] = mesh.b
        if self.bc is Bc.FREE:
            self.cell_dofs = glob
            self.node_coords = all_coords
        elif self.bc is Bc.ZERO:
            dofs = glob - 1
            dofs[dofs == n_global - 2] = -1
            self.cell_dofs = dofs
            self.node_coords = all_coords[1:-1]
        else:
            self.cell_dofs = glob % (r * n)
            self.node_coords = all_coords[:-1]
        self.cell_dofs.setflags(write=False)
        self.node_coords.setflags(write=False)
        self.dof_count = len(self.node_coords)
        self._cache = {}

    def __repr__(self):
        m = self.mesh
        return f"FemSpace([{m.a}, {m.b}], n_cells={m.n_cells}, r={self.degree}, bc={self.bc.value})"

    @property
    def dx(self) -> float:
        return self.mesh.dx

    @property
    def periodic(self) -> bool:
        return self.bc is Bc.PERIODIC

    def same_mesh(self, other: "FemSpace") -> bool:
        return self.mesh == other.mesh

    def quad_points(self, rule: QuadratureRule) -> np.ndarray:
        """Physical quadrature points, shape ``(n_cells, n_points)``."""
        m = self.mesh
        left = m.a + np.arange(m.n_cells) * m.dx
        return left[:, None] + m.dx * rule.nodes[None, :]

    def quad_weights(self, rule: QuadratureRule) -> np.ndarray:
        """Physical weights flattened to match :meth:`basis_matrix` rows."""
        return np.tile(self.dx * rule.weights, self.mesh.n_cells)

    def basis_matrix(self, rule: QuadratureRule, derivative: bool = False) -> sp.csr_matrix:
        """Sparse map from coefficients to (broken) values at the quadrature points.

        Row ``c * n_points + q`` gives point ``q`` of cell ``c``.
        """
        key = ("basis", rule.n_points, derivative)
        if key not in self._cache:
            vals, dvals = reference_basis(self.degree, rule.nodes)
            local = dvals / self.dx if derivative else vals
            n, nq, nl = self.mesh.n_cells, rule.n_points, self.degree + 1
            rows = np.repeat(np.arange(n * nq), nl)
            cols = np.repeat(self.cell_dofs, nq, axis=0).ravel()
            data = np.tile(local.ravel(), n)
            keep = cols >= 0
            mat = sp.csr_matrix(
                (data[keep], (rows[keep], cols[keep])), shape=(n * nq, self.dof_count)
            )
            self._cache[key] = mat
        return self._cache[key]

    def at_quad(self, values, rule: QuadratureRule, derivative: bool = False) -> np.ndarray:
        return self.basis_matrix(rule, derivative) @ values

    def load(self, fvals, rule: QuadratureRule, derivative: bool = False) -> np.ndarray:
        """``(f, phi_i)`` (or ``(f, phi_i')``) from values of ``f`` at the quadrature points."""
        fvals = np.asarray(fvals).ravel()
        return self.basis_matrix(rule, derivative).T @ (self.quad_weights(rule) * fvals)

    def mass(self) -> sp.csr_matrix:
        if "mass" not in self._cache:
            self._cache["mass"] = assemble_mass(self)
        return self._cache["mass"]

    def stiffness(self) -> sp.csr_matrix:
        if "stiffness" not in self._cache:
            self._cache["stiffness"] = assemble_stiffness(self)
        return self._cache["stiffness"]

    def mass_factor(self):
        if "mass_factor" not in self._cache:
            from .linalg import factor

            self._cache["mass_factor"] = factor(self.mass())
        return self._cache["mass_factor"]

    def wrap(self, x):
        """Map ``x`` into ``[a, b)`` for periodic spaces; identity otherwise."""
        if not self.periodic:
            return x
        m = self.mesh
        return m.a + np.mod(np.asarray(x, dtype=float) - m.a, m.length)


def build_space(a: float, b: float, n_cells: int, r: int, bc) -> FemSpace:
    return FemSpace(UniformMesh(float(a), float(b), int(n_cells)), r, Bc(bc))


@dataclass(frozen=True, eq=False)
class FemFunction:
    """Coefficient vector of one function in a given space (nodal basis)."""

    space: FemSpace
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.space.dof_count:
            raise ValueError(
                f"{len(self.values)} coefficients for a space with {self.space.dof_count} DOFs"
            )

    def __call__(self, x):
        return evaluate(self, x)[0]

    def derivative(self, x):
        return evaluate(self, x)[1]


def _assemble(row_space, col_space, row_deriv, col_deriv):
    if not row_space.same_mesh(col_space) or row_space.degree != col_space.degree:
        raise ConfigurationError("spaces must share mesh and degree")
    r, dx = row_space.degree, row_space.dx
    rule = quadrature_for(2 * r)
    vals, dvals = reference_basis(r, rule.nodes)
    br = dvals / dx if row_deriv else vals
    bc = dvals / dx if col_deriv else vals
    local = dx * (br * rule.weights[:, None]).T @ bc
    n, nl = row_space.mesh.n_cells, r + 1
    rows = np.repeat(row_space.cell_dofs, nl, axis=1).ravel()
    cols = np.tile(col_space.cell_dofs, (1, nl)).ravel()
    data = np.tile(local.ravel(), n)
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix(
        (data[keep], (rows[keep], cols[keep])),
        shape=(row_space.dof_count, col_space.dof_count),
    )
    return mat.tocsr()


def assemble_mass(space: FemSpace) -> sp.csr_matrix:
    """Matrix of ``(phi_i, phi_j)``."""
    return _assemble(space, space, False, False)


def assemble_stiffness(space: FemSpace) -> sp.csr_matrix:
    """Matrix of ``(phi_i', phi_j')``."""
    return _assemble(space, space, True, True)


def assemble_coupling(row_space: FemSpace, col_space: FemSpace) -> sp.csr_matrix:
    """Matrix ``G[i, j] = (chi_i', psi_j)`` with ``chi`` from ``row_space``."""
    return _assemble(row_space, col_space, True, False)


def assemble_cross_mass(row_space: FemSpace, col_space: FemSpace) -> sp.csr_matrix:
    """Matrix of ``(chi_i, psi_j)`` between two spaces on the same mesh."""
    return _assemble(row_space, col_space, False, False)


def transcendental_rule(space: FemSpace) -> QuadratureRule:
    return gauss_legendre(max(2 * space.degree + 2, 6))


def l2_project(space: FemSpace, f, rule: QuadratureRule | None = None) -> FemFunction:
    """L2 projection of a pointwise function ``f(x)`` onto ``space``."""
    rule = rule or transcendental_rule(space)
    fvals = np.asarray(f(space.quad_points(rule)), dtype=float)
    fvals = np.broadcast_to(fvals, (space.mesh.n_cells, rule.n_points))
    c = space.mass_factor().solve(space.load(fvals, rule))
    return FemFunction(space, c)


def project_broken_derivative(source: FemFunction, target: FemSpace) -> FemFunction:
    """L2 projection of the cellwise derivative of ``source`` onto ``target``."""
    if not source.space.same_mesh(target):
        raise ConfigurationError("projection between different meshes")
    rule = quadrature_for(source.space.degree - 1 + target.degree)
    dvals = source.space.at_quad(source.values, rule, derivative=True)
    return FemFunction(target, target.mass_factor().solve(target.load(dvals, rule)))


def project_function(source: FemFunction, target: FemSpace) -> FemFunction:
    """L2 projection of a FEM function onto another space on the same mesh."""
    if not source.space.same_mesh(target):
        raise ConfigurationError("projection between different meshes")
    rule = quadrature_for(source.space.degree + target.degree)
    vals = source.space.at_quad(source.values, rule)
    return FemFunction(target, target.mass_factor().solve(target.load(vals, rule)))


def interpolate(space: FemSpace, f) -> FemFunction:
    """Nodal interpolant of a pointwise function."""
    return FemFunction(space, np.asarray(f(np.array(space.node_coords)), dtype=float))


def evaluate(func: FemFunction, x) -> tuple:
    """Value and derivative of a FEM function at ``x`` (scalar or array).

    At interior vertices the derivative of the left cell is returned; at
    ``x = a`` the first cell is used. Periodic spaces wrap ``x`` first.
    """
    space = func.space
    m = space.mesh
    scalar = np.ndim(x) == 0
    shape = np.shape(x)
    x = np.asarray(x, dtype=float).ravel()
    if space.periodic:
        x = space.wrap(x)
    else:
        tol = 1e-12 * max(1.0, abs(m.a), abs(m.b))
        if np.any(x < m.a - tol) or np.any(x > m.b + tol):
            raise ValueError(f"point outside [{m.a}, {m.b}]")
        x = np.clip(x, m.a, m.b)
    s = (x - m.a) / m.dx
    cell = np.clip(np.ceil(s).astype(int) - 1, 0, m.n_cells - 1)
    xi = s - cell
    vals, dvals = reference_basis(space.degree, xi)
    dofs = space.cell_dofs[cell]
    coef = np.where(dofs >= 0, func.values[np.maximum(dofs, 0)], 0.0)
    value = np.einsum("ij,ij->i", vals, coef)
    deriv = np.einsum("ij,ij->i", dvals, coef) / m.dx
    if scalar:
        return float(value[0]), float(deriv[0])
    return value.reshape(shape), deriv.reshape(shape)
