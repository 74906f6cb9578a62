"""Second-variation quadratic form, the translation kernel and its ODE,
the constrained eigenproblem behind the positivity gap, and the spectral
functional calculus of the capillary operator.

Discretization note. The quadratic form is exposed two ways: second_variation
evaluates the integrand with nodal stencils and Simpson weights (tracks
finite differences of the energy to ~1e-7 relative), while sigma_form
assembles a cell-based stiffness matrix of the same bilinear form. The nodal
route cannot serve as an eigenproblem operator: wide centered stencils are
blind to grid-scale oscillation, which fabricates spurious negative
eigenvalues near -sigma. The cell assembly is free of that mode and agrees
with the nodal quadrature at the shared O(h^2) consistency order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.linalg import eigh, null_space

from .energy import PhysicalParams
from .errors import (
    ConditioningError,
    DimensionMismatchError,
    EigenvalueDomainError,
)
from .geometry import SurfaceProfile, integrate

__all__ = [
    "SigmaForm",
    "SpectralDecomposition",
    "KernelConstruction",
    "shift_function",
    "second_variation",
    "sigma_form",
    "literal_form_discrepancy",
    "constrained_eigen",
    "kernel_ode_residual",
    "build_Q",
    "build_xi56",
    "functional_calculus",
    "spectral_truncation",
    "a_coefficients",
]


@dataclass(frozen=True)
class SigmaForm:
    """Discretized stability scalar product: stiffness and mass matrices plus
    the two constraint vectors (volume direction and translation kernel)."""

    stiffness: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    constraint_rho0: np.ndarray = field(repr=False)
    constraint_xis: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = self.stiffness
        scale = float(np.max(np.abs(a))) or 1.0
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise DimensionMismatchError("stiffness is not symmetric")
        d = np.diag(self.mass)
        if np.any(d <= 0.0):
            raise ConditioningError("mass matrix is not positive definite")

    @property
    def mass_weights(self) -> np.ndarray:
        return np.diag(self.mass)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Generalized eigenpairs of a SigmaForm on a constraint subspace.

    eigenvectors holds mass-orthonormal modes as columns; max_residual is the
    subspace-projected eigen-residual relative to the stiffness scale.
    """

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    subspace: str
    mass_weights: np.ndarray = field(repr=False)
    max_residual: float = 0.0


@dataclass(frozen=True)
class KernelConstruction:
    """Kernel-ODE ingredients: the reduced coefficient Q (masked at the node
    nearest pi/2), the bounded solution branch xi5, the discontinuous branch
    xi6, and the branch constants (C1, C2, D1, D2)."""

    Q_values: np.ndarray = field(repr=False)
    xi5: np.ndarray | None = field(repr=False, default=None)
    xi6: np.ndarray | None = field(repr=False, default=None)
    constants: tuple = (1.0, 1.0, 0.0, 0.0)
    masked_index: int = -1
    chi5: np.ndarray | None = field(repr=False, default=None)
    chi6: np.ndarray | None = field(repr=False, default=None)


def _require_sessile(grid):
    """The translation-kernel theory lives on the full half-plane span."""
    if grid.theta_lo > 1e-12 or grid.theta_hi < np.pi - 1e-12:
        raise ValueError(
            "kernel analysis needs a sessile grid spanning (0, pi); got "
            f"({grid.theta_lo:.6g}, {grid.theta_hi:.6g})"
        )


def shift_function(rho0: SurfaceProfile) -> np.ndarray:
    """Horizontal-translation mode cos(theta) + (rho0'/rho0) sin(theta)."""
    _require_sessile(rho0.grid)
    th = rho0.grid.nodes
    return np.cos(th) + rho0.derivative() / rho0.rho * np.sin(th)


def _form_coefficients(rho0: SurfaceProfile, params: PhysicalParams, literal=False):
    """Nodal coefficients (alpha, beta, gamma_c) of the bilinear form
    alpha x y + beta x' y' + gamma_c (x' y + x y')."""
    th = rho0.grid.nodes
    rho = rho0.rho
    rp = rho0.derivative()
    rpp = rho0.second_derivative()
    d32 = (rho ** 2 + rp ** 2) ** 1.5
    alpha = params.g * rho * np.sin(th) + params.sigma * (rpp * rho - rp ** 2 - rho ** 2) / d32
    if literal:
        beta = params.sigma * rho / d32
        gam = -params.sigma * rp / d32
    else:
        beta = params.sigma * rho ** 2 / d32
        gam = -params.sigma * rho * rp / d32
    return alpha, beta, gam


def second_variation(
    rho0: SurfaceProfile,
    params: PhysicalParams,
    xi: np.ndarray,
    xi_tilde: np.ndarray | None = None,
) -> float:
    """Second-variation bilinear form H(xi, xi_tilde) at an equilibrium;
    H(xi, xi) is the quadratic form whose kernel is spanned by the
    translation mode."""
    from .geometry import derivative_values

    grid = rho0.grid
    xi = grid.require_field(xi)
    xt = xi if xi_tilde is None else grid.require_field(xi_tilde)
    rho = rho0.rho
    rp = rho0.derivative()
    rpp = rho0.second_derivative()
    root = np.sqrt(rho ** 2 + rp ** 2)
    xp = derivative_values(grid, xi)
    xtp = xp if xi_tilde is None else derivative_values(grid, xt)
    integrand = (
        params.g * rho * xi * xt * np.sin(grid.nodes)
        + params.sigma
        * (
            -(rho ** 2 + 2.0 * rp ** 2 - rpp * rho) / root ** 3 * xi * xt
            + (xi * xt + xp * xtp) / root
            - (xi * rho + rp * xp) * (xt * rho + rp * xtp) / root ** 3
        )
    )
    return integrate(grid, integrand)


def _assemble_cell_form(grid, alpha, beta, gam) -> np.ndarray:
    """Cell-based tridiagonal assembly of
    int alpha x y + beta x'y' + gamma_c (x'y + x y') d(theta).

    Midpoint coefficients with endpoint/difference products per cell keep the
    form coercive on oscillatory modes (no checkerboard null vector)."""
    h = grid.spacing
    n = grid.n_cells
    am = 0.5 * (alpha[:-1] + alpha[1:])
    bm = 0.5 * (beta[:-1] + beta[1:])
    gm = 0.5 * (gam[:-1] + gam[1:])

    size = n + 1
    a = np.zeros((size, size))
    idx = np.arange(n)
    # mass-like block: h * am * mean(x) * mean(y)
    quarter = 0.25 * h * am
    np.add.at(a, (idx, idx), quarter)
    np.add.at(a, (idx + 1, idx + 1), quarter)
    np.add.at(a, (idx, idx + 1), quarter)
    np.add.at(a, (idx + 1, idx), quarter)
    # gradient block: bm/h * (x_{j+1}-x_j)(y_{j+1}-y_j)
    stiff = bm / h
    np.add.at(a, (idx, idx), stiff)
    np.add.at(a, (idx + 1, idx + 1), stiff)
    np.add.at(a, (idx, idx + 1), -stiff)
    np.add.at(a, (idx + 1, idx), -stiff)
    # symmetrized cross block: gm * (x_{j+1} y_{j+1} - x_j y_j)
    np.add.at(a, (idx, idx), -gm)
    np.add.at(a, (idx + 1, idx + 1), gm)
    return 0.5 * (a + a.T)


def sigma_form(rho0: SurfaceProfile, params: PhysicalParams) -> SigmaForm:
    """Assemble the stability scalar product at a sessile equilibrium."""
    _require_sessile(rho0.grid)
    grid = rho0.grid
    alpha, beta, gam = _form_coefficients(rho0, params)
    stiffness = _assemble_cell_form(grid, alpha, beta, gam)
    mass = np.diag(grid.weights)
    xis = shift_function(rho0)
    return SigmaForm(
        stiffness=stiffness,
        mass=mass,
        constraint_rho0=grid.weights * rho0.rho,
        constraint_xis=grid.weights * xis,
    )


def literal_form_discrepancy(rho0: SurfaceProfile, params: PhysicalParams, xi: np.ndarray) -> dict:
    """Measure the gap between two coefficient conventions of the stability
    form on a test field (reported as data, not asserted).

    The polarized variant is the one consistent with the energy Hessian; the
    literal variant carries one power of rho0 less in the derivative
    couplings and coincides with it only at unit-radius equilibria.
    """
    grid = rho0.grid
    xi = grid.require_field(xi)
    vals = {}
    for name, literal in (("polarized", False), ("literal", True)):
        alpha, beta, gam = _form_coefficients(rho0, params, literal=literal)
        a = _assemble_cell_form(grid, alpha, beta, gam)
        vals[name] = float(xi @ a @ xi)
    denom = max(abs(vals["polarized"]), abs(vals["literal"]), 1e-300)
    vals["relative_gap"] = abs(vals["polarized"] - vals["literal"]) / denom
    return vals


_SUBSPACES = ("unconstrained", "mass-constrained", "doubly-constrained")


def constrained_eigen(form: SigmaForm, subspace: str = "doubly-constrained") -> SpectralDecomposition:
    """Solve the generalized symmetric eigenproblem on a constraint subspace.

    Builds a mass-orthonormal basis of the subspace (orthogonal to rho0,
    and additionally to the translation mode when doubly constrained),
    projects both matrices, solves densely, and lifts the eigenvectors back.
    """
    if subspace not in _SUBSPACES:
        raise ValueError(f"subspace must be one of {_SUBSPACES}")
    w = form.mass_weights
    if np.max(w) / np.min(w) > 1e12:
        raise ConditioningError("mass matrix condition number exceeds 1e12")

    constraints = []
    if subspace != "unconstrained":
        constraints.append(form.constraint_rho0)
    if subspace == "doubly-constrained":
        constraints.append(form.constraint_xis)

    sqw = np.sqrt(w)
    if constraints:
        v = np.column_stack([c / sqw for c in constraints])
        basis = null_space(v.T)
    else:
        basis = np.eye(len(w))
    z = basis / sqw[:, None]

    a_sub = z.T @ form.stiffness @ z
    a_sub = 0.5 * (a_sub + a_sub.T)
    lam, y = eigh(a_sub)
    vecs = z @ y

    scale = float(np.max(np.abs(form.stiffness))) or 1.0
    res = float(np.max(np.abs(a_sub @ y - y * lam))) / scale
    return SpectralDecomposition(
        eigenvalues=lam,
        eigenvectors=vecs,
        subspace=subspace,
        mass_weights=w,
        max_residual=res,
    )


def kernel_ode_residual(
    rho0: SurfaceProfile,
    params: PhysicalParams,
    xi: np.ndarray,
    c_value: float = 0.0,
) -> np.ndarray:
    """Pointwise residual of the second-order ODE satisfied by kernel modes,
    shifted by the constant c_value (c_value = 0 is the homogeneous case)."""
    from .geometry import derivative_values, second_derivative_values

    grid = rho0.grid
    xi = grid.require_field(xi)
    rho = rho0.rho
    rp = rho0.derivative()
    rpp = rho0.second_derivative()
    d2 = rho ** 2 + rp ** 2
    xp = derivative_values(grid, xi)
    xpp = second_derivative_values(grid, xi)
    s = params.sigma
    out = (
        params.g * xi * np.sin(grid.nodes)
        - s * rho * xpp / d2 ** 1.5
        + s * (rp * rho ** 2 - 2.0 * rp ** 3 + 3.0 * rho * rp * rpp) / d2 ** 2.5 * xp
        + s * (2.0 * rho ** 2 * rpp - rho ** 3 - 4.0 * rho * rp ** 2 - rpp * rp ** 2) / d2 ** 2.5 * xi
    )
    return out - c_value


def _kernel_w_field(rho0: SurfaceProfile) -> np.ndarray:
    """Smooth part subtracted from 2 xi_s'/xi_s in the reduced coefficient Q."""
    rho = rho0.rho
    rp = rho0.derivative()
    rpp = rho0.second_derivative()
    return (rho ** 2 * rp + 3.0 * rho * rp * rpp - 2.0 * rp ** 3) / (rho * (rho ** 2 + rp ** 2))


def build_Q(rho0: SurfaceProfile) -> KernelConstruction:
    """Reduced first-order coefficient Q = 2 xi_s'/xi_s - W, masked (NaN) at
    the node nearest pi/2 where the translation mode vanishes."""
    from .geometry import derivative_values

    _require_sessile(rho0.grid)
    grid = rho0.grid
    xis = shift_function(rho0)
    xisp = derivative_values(grid, xis)
    mask = int(np.argmin(np.abs(grid.nodes - np.pi / 2.0)))
    q = np.empty_like(xis)
    with np.errstate(divide="ignore", invalid="ignore"):
        q[:] = 2.0 * xisp / xis - _kernel_w_field(rho0)
    q[mask] = np.nan
    return KernelConstruction(Q_values=q, masked_index=mask)


def _branch_chi(nodes, e_minus, inner, pole_strength, apex, mask_local, from_left):
    """Cumulative integral of inner(gamma) * e_minus(gamma) along one branch,
    with the double-pole strength/(gamma-apex)^2 removed analytically.

    from_left integrates from nodes[0]; otherwise from nodes[-1] backwards.
    """
    u = nodes - apex
    with np.errstate(divide="ignore", invalid="ignore"):
        rem = inner * e_minus - pole_strength / u ** 2
    if 0 <= mask_local < len(rem):
        # the remainder is bounded through the apex; patch the masked node
        # from its own side of the branch
        if mask_local >= len(rem) - 1:
            rem[mask_local] = rem[mask_local - 1]
        elif mask_local == 0:
            rem[mask_local] = rem[1]
        else:
            rem[mask_local] = 0.5 * (rem[mask_local - 1] + rem[mask_local + 1])
    with np.errstate(divide="ignore"):
        if from_left:
            cum = np.concatenate(([0.0], cumulative_simpson(rem, x=nodes)))
            analytic = pole_strength * (1.0 / (apex - nodes) - 1.0 / (apex - nodes[0]))
        else:
            rev = cumulative_simpson(rem[::-1], x=-nodes[::-1])
            cum = -np.concatenate(([0.0], rev))[::-1]
            analytic = pole_strength * (1.0 / (apex - nodes) - 1.0 / (apex - nodes[-1]))
    return cum + analytic


def build_xi56(rho0: SurfaceProfile, constants: tuple = (1.0, 1.0, 0.0, 0.0)) -> KernelConstruction:
    """Construct the two explicit kernel-ODE solution branches.

    xi5 = (C int exp(-int Q) + D) xi_s stays bounded through pi/2; xi6 uses
    the nested quadrature of exp(+int Q) inside exp(-int Q) and develops a
    jump discontinuity there (it is left NaN at the masked node). The
    singular exp(-int Q) factor is integrated by subtracting its analytic
    double-pole asymptote and quadrating the bounded remainder; the
    exponentials themselves are evaluated exactly through the identity
    int Q = 2 log|xi_s| - int W with W smooth.
    """
    from .geometry import cumulative_integral, derivative_values

    c1, c2, d1, d2 = constants
    grid = rho0.grid
    th = grid.nodes
    apex = np.pi / 2.0
    base = build_Q(rho0)
    mask = base.masked_index
    xis = shift_function(rho0)
    xisp = derivative_values(grid, xis)
    slope = xisp[mask]

    s_w = cumulative_integral(grid, _kernel_w_field(rho0))

    xi5 = np.empty_like(th)
    xi6 = np.empty_like(th)
    chi5 = np.full_like(th, np.nan)
    chi6 = np.full_like(th, np.nan)

    for left in (True, False):
        if left:
            sl = slice(0, mask + 1)
            ref = 0
        else:
            sl = slice(mask, len(th))
            ref = -1
        nodes = th[sl]
        xs = xis[sl]
        sw = s_w[sl] - s_w[sl][ref]
        x_ref = xs[ref]
        with np.errstate(divide="ignore", invalid="ignore"):
            e_minus = (x_ref / xs) ** 2 * np.exp(sw)
            e_plus = (xs / x_ref) ** 2 * np.exp(-sw)
        mask_local = mask if left else 0
        e_plus[mask_local] = 0.0  # xi_s vanishes at the apex

        if left:
            j_cum = np.concatenate(([0.0], cumulative_simpson(e_plus, x=nodes)))
        else:
            rev = cumulative_simpson(e_plus[::-1], x=-nodes[::-1])
            j_cum = -np.concatenate(([0.0], rev))[::-1]

        a_pole = x_ref ** 2 * np.exp(sw[mask_local]) / slope ** 2
        ones = np.ones_like(nodes)
        chi5_b = _branch_chi(nodes, e_minus, ones, a_pole, apex, mask_local, left)
        chi6_b = _branch_chi(nodes, e_minus, j_cum, a_pole * j_cum[mask_local], apex, mask_local, left)

        c_branch, d_branch = (c1, d1) if left else (c2, d2)
        xi5[sl] = (c_branch * chi5_b + d_branch) * xs
        xi6[sl] = chi6_b * xs
        chi5[sl] = chi5_b
        chi6[sl] = chi6_b

    # bounded branch: fill the apex node with its two-sided limit
    xi5[mask] = -c1 * (xis[0] ** 2 * np.exp(s_w[mask] - s_w[0]) / slope ** 2) * slope
    xi6[mask] = np.nan
    chi5[mask] = np.nan
    chi6[mask] = np.nan

    return KernelConstruction(
        Q_values=base.Q_values,
        xi5=xi5,
        xi6=xi6,
        constants=(c1, c2, d1, d2),
        masked_index=mask,
        chi5=chi5,
        chi6=chi6,
    )


def _coefficients(decomp: SpectralDecomposition, u: np.ndarray) -> np.ndarray:
    return decomp.eigenvectors.T @ (decomp.mass_weights * u)


def functional_calculus(decomp: SpectralDecomposition, f, u: np.ndarray) -> np.ndarray:
    """Apply f of the capillary operator to u through the eigenbasis:
    sum_k f(lambda_k) u_hat(k) omega_k."""
    u = np.asarray(u, dtype=float)
    coeff = _coefficients(decomp, u)
    with np.errstate(invalid="ignore", divide="ignore"):
        fl = np.array([f(lam) for lam in decomp.eigenvalues], dtype=float)
    if not np.all(np.isfinite(fl)):
        raise EigenvalueDomainError("spectral function returned a non-finite value")
    return decomp.eigenvectors @ (fl * coeff)


def spectral_truncation(decomp: SpectralDecomposition, j: int, s: float, u: np.ndarray) -> np.ndarray:
    """Truncated fractional calculus: sum_{k<=j} lambda_k^s u_hat(k) omega_k."""
    u = np.asarray(u, dtype=float)
    j = min(int(j), len(decomp.eigenvalues) - 1)
    lam = decomp.eigenvalues[: j + 1]
    if s != int(s) and np.any(lam <= 0.0):
        raise EigenvalueDomainError(
            "fractional power of a nonpositive eigenvalue: positivity failed upstream"
        )
    coeff = _coefficients(decomp, u)[: j + 1]
    return decomp.eigenvectors[:, : j + 1] @ (lam ** s * coeff)


def a_coefficients(rho0: SurfaceProfile, xi, xi_t, xi_tt) -> tuple:
    """Volume-compatibility coefficients of a perturbation and its first two
    time derivatives: the multiples of rho0 that restore mass orthogonality."""
    grid = rho0.grid
    xi = grid.require_field(xi)
    xi_t = grid.require_field(xi_t)
    xi_tt = grid.require_field(xi_tt)
    denom = integrate(grid, rho0.rho ** 2)
    a0 = -0.5 * integrate(grid, xi ** 2) / denom
    a1 = -integrate(grid, xi * xi_t) / denom
    a2 = -(integrate(grid, xi_t ** 2) + integrate(grid, xi_tt * xi)) / denom
    return (a0, a1, a2)
