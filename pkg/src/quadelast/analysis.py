"""Error norms, convergence rates, and stability diagnostics.

Everything here consumes solved fields (or exact callables) and produces
numbers: L2 errors with relative percentages, observed orders between
dyadic mesh levels, the commuting-interpolation residual for the stress
interpolant, a dense inf-sup estimate for the saddle-point system, and
the asymmetry norm of a computed stress.
"""

from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npoly
import scipy.linalg as la
import scipy.sparse as sp

from .fe_space import (
    FEFunction,
    FESpace,
    evaluate_batch,
    evaluate_div_batch,
    unmapped_monomials,
)
from .mapping import (
    BilinearMap,
    gauss_rule,
    gauss_rule_1d,
    geometry_at,
    map_eval,
    map_jacobian,
)
from .problem import ManufacturedSolution
from .reference_elements import EDGE_DIRS, EDGE_NORMALS, EDGE_STARTS, q_element

#: Quadrature order used for error norms; high enough that the measured
#: errors are quadrature-converged for every element family in scope.
NORM_QUAD = 12

#: Largest system size accepted by the dense inf-sup path.
INFSUP_CAP = 3000

QUANTITIES = ("sigma", "div", "u", "p")


@dataclass(frozen=True)
class ErrorReport:
    """L2 errors of one solve, with percentages relative to the exact norms."""

    h: float
    e_sigma: float
    e_div: float
    e_u: float
    e_p: float
    pct_sigma: float
    pct_div: float
    pct_u: float
    pct_p: float

    def errors(self) -> dict:
        return {
            "sigma": self.e_sigma,
            "div": self.e_div,
            "u": self.e_u,
            "p": self.e_p,
        }


@dataclass(frozen=True)
class ConvergenceTable:
    """Error reports ordered by decreasing mesh size."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        hs = [row.h for row in self.rows]
        if any(a <= b for a, b in zip(hs, hs[1:])):
            raise ValueError("rows must be ordered by decreasing h")

    def orders(self) -> dict:
        return convergence_orders(self)


def _pct(err: float, exact: float) -> float:
    if exact == 0.0:
        return 0.0 if err == 0.0 else float("inf")
    return 100.0 * err / exact


def compute_errors(sigma: FEFunction, u: FEFunction, p: FEFunction,
                   exact: ManufacturedSolution,
                   quad: int = NORM_QUAD) -> ErrorReport:
    """L2 errors of a solved triple against a manufactured solution.

    The squared differences are integrated element by element on the
    reference square with a ``quad`` x ``quad`` Gauss rule; the stress
    divergence is evaluated through the same 1/J transform used in
    assembly, and the exact divergence is the load ``exact.f``.
    """
    mesh = sigma.space.mesh
    rule = gauss_rule(quad)
    X, _, J = geometry_at(mesh.element_corners(), rule.points)
    wJ = rule.weights[None, :] * J

    def norm(sq):
        return float(np.sqrt(np.sum(wJ * sq)))

    sig_ex = exact.sigma(X)
    div_ex = exact.f(X)
    u_ex = exact.u(X)
    p_ex = exact.p(X)

    ds = evaluate_batch(sigma, rule.points) - sig_ex
    dd = evaluate_div_batch(sigma, rule.points) - div_ex
    du = evaluate_batch(u, rule.points) - u_ex
    dp = evaluate_batch(p, rule.points) - p_ex

    e_sigma = norm(np.sum(ds ** 2, axis=(-2, -1)))
    e_div = norm(np.sum(dd ** 2, axis=-1))
    e_u = norm(np.sum(du ** 2, axis=-1))
    e_p = norm(dp ** 2)

    return ErrorReport(
        h=mesh.h,
        e_sigma=e_sigma,
        e_div=e_div,
        e_u=e_u,
        e_p=e_p,
        pct_sigma=_pct(e_sigma, norm(np.sum(sig_ex ** 2, axis=(-2, -1)))),
        pct_div=_pct(e_div, norm(np.sum(div_ex ** 2, axis=-1))),
        pct_u=_pct(e_u, norm(np.sum(u_ex ** 2, axis=-1))),
        pct_p=_pct(e_p, norm(p_ex ** 2)),
    )


def convergence_orders(table) -> dict:
    """Observed orders log2(e(2h)/e(h)) between successive rows.

    Accepts a ConvergenceTable or a sequence of ErrorReport rows.  The
    mesh sizes must halve from row to row; anything else is rejected
    because the log2 quotient would not be an order.
    """
    rows = list(table.rows if isinstance(table, ConvergenceTable) else table)
    if len(rows) < 2:
        raise ValueError("need at least two rows to compute orders")
    hs = np.array([row.h for row in rows])
    if not np.allclose(hs[:-1] / hs[1:], 2.0, rtol=1e-9, atol=0.0):
        raise ValueError("mesh sizes must halve between successive rows")
    out = {}
    for name in QUANTITIES:
        errs = np.array([row.errors()[name] for row in rows])
        with np.errstate(divide="ignore", invalid="ignore"):
            out[name] = np.log2(errs[:-1] / errs[1:])
    return out


def _scatter(blocks: np.ndarray, rows: np.ndarray, n: int) -> sp.csr_matrix:
    """Accumulate per-element dense blocks into an n-by-n sparse matrix."""
    ii = np.broadcast_to(rows[:, :, None], blocks.shape)
    jj = np.broadcast_to(rows[:, None, :], blocks.shape)
    out = sp.coo_matrix((blocks.ravel(), (ii.ravel(), jj.ravel())),
                        shape=(n, n))
    return out.tocsr()


def ynorm_gram(stress: FESpace, disp: FESpace, rot: FESpace,
               quad: int | None = None) -> sp.csr_matrix:
    """Block-diagonal Gram matrix of the H(div) x L2 x L2 solution norm.

    The stress block carries (tau, tau) + (div tau, div tau), evaluated
    with the same pullbacks as assembly; the displacement and rotation
    blocks are plain L2 mass matrices.
    """
    mesh = stress.mesh
    k = quad if quad is not None else stress.element.degree + 3
    rule = gauss_rule(k)
    X, DF, J = geometry_at(mesh.element_corners(), rule.points)
    w = rule.weights

    Phi = stress.element.basis.eval(rule.points)
    dPhi = stress.element.basis.div(rule.points)
    UPV = np.einsum("eqcx,kqx->ekqc", DF, Phi)
    woJ = w[None, :] / J
    G = np.einsum("eq,eaqc,ebqc->eab", woJ, UPV, UPV)
    G += np.einsum("eq,aq,bq->eab", woJ, dPhi, dPhi)
    G *= stress.row_signs[:, :, None] * stress.row_signs[:, None, :]
    G_row = _scatter(G, stress.row_dofs, stress.n_row_dofs)

    wJ = w[None, :] * J
    psi = disp.element.basis.eval(rule.points)[..., 0]
    Mv = np.einsum("eq,iq,jq->eij", wJ, psi, psi)
    Mv_row = _scatter(Mv, disp.row_dofs, disp.n_row_dofs)

    mono = unmapped_monomials(rot, X)
    Mq = np.einsum("eq,ieq,jeq->eij", wJ, mono, mono)
    Mq_row = _scatter(Mq, rot.row_dofs, rot.n_row_dofs)

    return sp.block_diag([G_row, G_row, Mv_row, Mv_row, Mq_row],
                         format="csr")


def infsup_estimate(system, gram) -> float:
    """Smallest singular value of the system in the solution norm.

    Computes the spectrum of N^(-1/2) K N^(-1/2) where K is the full
    saddle-point matrix and N the Gram matrix from :func:`ynorm_gram`;
    the smallest magnitude is the discrete inf-sup constant.  Dense
    eigenvalue computation, so the system size is capped.
    """
    if system.n > INFSUP_CAP:
        raise ValueError(
            f"system has {system.n} unknowns; dense inf-sup path is "
            f"capped at {INFSUP_CAP}"
        )
    K = system.full_matrix().toarray()
    N = gram.toarray() if sp.issparse(gram) else np.asarray(gram)
    w, U = la.eigh(N)
    if w.min() <= 0.0:
        raise ValueError("Gram matrix is not positive definite")
    nmh = (U / np.sqrt(w)) @ U.T
    S = nmh @ K @ nmh
    S = 0.5 * (S + S.T)
    return float(np.min(np.abs(la.eigvalsh(S))))


def _pullback_rows(sigma, Fmap: BilinearMap, elem: int):
    """Reference representative of a physical matrix field on one element.

    Returns a callable giving sighat(xhat) with shape (npts, 2, 2); rows
    transform like vector fields under the inverse contravariant map.
    ``sigma`` is either a physical callable or an FEFunction on the mesh.
    """

    def sighat(xhat):
        xhat = np.asarray(xhat, dtype=float)
        if isinstance(sigma, FEFunction):
            vals = sigma(elem, xhat)
        else:
            vals = np.asarray(sigma(map_eval(Fmap, xhat)))
        DF, J = map_jacobian(Fmap, xhat)
        DFinv = np.linalg.inv(DF)
        return J[..., None, None] * np.einsum("...ck,...rk->...rc",
                                              DFinv, vals)

    return sighat


def interpolate_stress(space: FESpace, sigma, quad: int = 10) -> FEFunction:
    """Canonical interpolant of a matrix field into a stress space.

    Applies the reference degrees of freedom to the pulled-back rows on
    each element.  Shared edge dofs are written from both sides; for a
    single-valued field the two values agree because the edge moments are
    intrinsic, which is exactly what the orientation signs encode.
    """
    mesh, elem = space.mesh, space.element
    corners = mesh.element_corners()
    coef = np.zeros(space.n_dofs)
    for e in range(mesh.n_quads):
        sighat = _pullback_rows(sigma, BilinearMap(corners[e]), e)
        for rho in (0, 1):
            local = elem.interpolate(
                lambda xh, r=rho: sighat(xh)[..., r, :], order=quad)
            rows = rho * space.n_row_dofs + space.row_dofs[e]
            coef[rows] = local * space.row_signs[e]
    return FEFunction(space, coef)


def check_commuting_projection(space: FESpace, sigma, quad: int = 10) -> float:
    """Residual of the divergence/interpolation commuting identity.

    Interpolates ``sigma`` row-wise on each element through the reference
    degrees of freedom and measures the L2 norm of the difference between
    the displacement-space projections of div(interpolant) and div(sigma).
    The latter is obtained from reference-square integration by parts, so
    only values of ``sigma`` are needed, never its derivatives.
    """
    mesh, elem = space.mesh, space.element
    psi_basis = q_element(elem.degree - 1).basis
    rule = gauss_rule(quad)
    t1, w1 = gauss_rule_1d(quad)
    corners = mesh.element_corners()

    psi = psi_basis.eval(rule.points)[..., 0]
    dpsi = np.stack(
        [
            npoly.polyval2d(rule.points[:, 0], rule.points[:, 1],
                            npoly.polyder(c[0], axis=axis))
            for c in psi_basis.coeffs
            for axis in (0, 1)
        ]
    ).reshape(len(psi_basis.coeffs), 2, -1)
    div_phi = elem.basis.div(rule.points)

    edge_pts = [EDGE_STARTS[j] + t1[:, None] * EDGE_DIRS[j] for j in range(4)]
    psi_edge = [psi_basis.eval(pts)[..., 0] for pts in edge_pts]

    total = 0.0
    for e in range(mesh.n_quads):
        Fmap = BilinearMap(corners[e])
        sighat = _pullback_rows(sigma, Fmap, e)
        coef = np.stack(
            [
                elem.interpolate(lambda xh, r=rho: sighat(xh)[..., r, :],
                                 order=quad)
                for rho in (0, 1)
            ]
        )
        # projection moments of div(interpolant): the reference divergence
        # integrates against psi without any Jacobian (the 1/J of the
        # divergence transform cancels the volume factor)
        m1 = np.einsum("rk,kq,jq,q->rj", coef, div_phi, psi, rule.weights)

        vals = sighat(rule.points)
        m2 = -np.einsum("qrc,jcq,q->rj", vals, dpsi, rule.weights)
        for j in range(4):
            edge_vals = sighat(edge_pts[j]) @ EDGE_NORMALS[j]
            m2 += np.einsum("qr,jq,q->rj", edge_vals, psi_edge[j], w1)

        _, J = map_jacobian(Fmap, rule.points)
        mass = np.einsum("iq,jq,q->ij", psi, psi, rule.weights * J)
        diff = m1 - m2
        total += float(np.sum(diff * la.solve(mass, diff.T,
                                              assume_a="pos").T))
    return float(np.sqrt(max(total, 0.0)))


def equilibrium_residual(sigma: FEFunction, disp: FESpace, f,
                         quad: int | None = None) -> float:
    """Relative norm of the displacement-space projection of div(sigma) - f.

    For the computed stress this is the discrete equilibrium residual: its
    divergence matches the projection of the load onto the displacement
    space, so the value sits at solver accuracy.  Relative to the L2 norm
    of ``f`` when that is nonzero, absolute otherwise.  The default
    quadrature matches the assembly default; a much coarser rule would
    measure its own integration error instead of the residual.
    """
    mesh = sigma.space.mesh
    k = quad if quad is not None else sigma.space.element.degree + 6
    rule = gauss_rule(k)
    X, _, J = geometry_at(mesh.element_corners(), rule.points)
    wJ = rule.weights[None, :] * J

    diff = evaluate_div_batch(sigma, rule.points) - np.asarray(f(X))
    psi = disp.element.basis.eval(rule.points)[..., 0]
    r = np.einsum("eq,eqr,jq->ejr", wJ, diff, psi)
    mass = np.einsum("eq,iq,jq->eij", wJ, psi, psi)
    sol = np.linalg.solve(mass, r)
    val = float(np.sqrt(max(np.sum(r * sol), 0.0)))

    fnorm = float(np.sqrt(np.sum(wJ * np.sum(np.asarray(f(X)) ** 2, axis=-1))))
    return val / fnorm if fnorm > 0.0 else val


def asymmetry_norm(sigma: FEFunction, quad: int | None = None) -> float:
    """L2 norm of the asymmetry of a stress field.

    Symmetry is imposed only weakly, so this is nonzero for computed
    stresses and should shrink under refinement.
    """
    k = quad if quad is not None else sigma.space.element.degree + 3
    rule = gauss_rule(k)
    _, _, J = geometry_at(sigma.space.mesh.element_corners(), rule.points)
    wJ = rule.weights[None, :] * J
    vals = evaluate_batch(sigma, rule.points)
    askew = vals[..., 0, 1] - vals[..., 1, 0]
    return float(np.sqrt(np.sum(wJ * askew ** 2)))


def normal_jump_norm(sigma: FEFunction, n1d: int = 8) -> float:
    """Interior-edge normal-trace jump norm of a stress field.

    Returns sqrt of the sum over interior edges of the squared L2 norm of
    the jump of ``sigma . n`` across the edge.  Conforming fields give a
    value at roundoff level; a wrong edge-dof orientation shows up as an
    O(1) jump, which makes this the go-to conformity diagnostic.
    """
    mesh = sigma.space.mesh
    t, w = gauss_rule_1d(n1d)
    incidence = {}
    for q in range(mesh.n_quads):
        for j in range(4):
            e, orient = mesh.quad_edges[q, j]
            incidence.setdefault(int(e), []).append((q, j, int(orient)))
    total = 0.0
    for e, users in incidence.items():
        if len(users) != 2:
            continue
        lo, hi = mesh.edges[e]
        tang = mesh.vertices[hi] - mesh.vertices[lo]
        length = float(np.linalg.norm(tang))
        normal = np.array([tang[1], -tang[0]]) / length
        traces = []
        for q, j, orient in users:
            tloc = t if orient == 1 else 1.0 - t
            xhat = EDGE_STARTS[j] + tloc[:, None] * EDGE_DIRS[j]
            traces.append(sigma(q, xhat) @ normal)
        jump = traces[0] - traces[1]
        total += length * float(w @ np.sum(jump ** 2, axis=-1))
    return float(np.sqrt(total))
