"""Geometric exponential tilting: log-partition, likelihood, and MLE solvers.

Conventions. A cell with tilt theta > 0 is geometric with
P(Y = y) = exp(-theta * y - psi(theta)), psi(theta) = -log(1 - e^{-theta}),
so its mean is 1/(e^theta - 1) = -psi'(theta) and its variance is
psi''(theta). The helpers ``psi_prime`` and ``psi_double`` return that mean
and variance directly. Cell tilts are rank one,
theta_ijk = alpha_i + beta_j + gamma_k.

With margins (a, b, c) the log-likelihood of any table in the fiber is

    ell = -(a . alpha + b . beta + c . gamma) - sum_ijk psi(theta_ijk),

strictly concave, with gradient margins(Z) - (a, b, c) where Z is the
expected table. The MLE is where the expected table has the target margins.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.special import xlogy

from .errors import DomainError, InvalidInput, MismatchedTotals, NotConverged, ZeroMargin
from .tables import MarginSpec, RealTable, all_margins, validate_margin_spec

logger = logging.getLogger(__name__)

BC_3WAY = 1.0 / (2.0 ** (2.0 / 3.0) - 1.0)
NEAR_CRITICAL_BAND = 0.05
THETA_FLOOR = 1e-14


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise DomainError("tilt parameters must satisfy theta > 0")
    return theta


def psi(theta):
    """Log-partition -log(1 - e^{-theta}) of the geometric tilt."""
    t = _check_theta(theta)
    with np.errstate(over="ignore"):
        out = np.where(t > math.log(2.0), -np.log1p(-np.exp(-t)), -np.log(-np.expm1(-t)))
    return out[()] if out.ndim == 0 else out


def psi_prime(theta):
    """Cell mean 1/(e^theta - 1)."""
    t = _check_theta(theta)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(t)
    return out[()] if out.ndim == 0 else out


def psi_double(theta):
    """Cell variance e^theta / (e^theta - 1)^2, written to avoid overflow."""
    t = _check_theta(theta)
    with np.errstate(over="ignore"):
        out = 1.0 / (np.expm1(t) * -np.expm1(-t))
    return out[()] if out.ndim == 0 else out


def f_entropy(x):
    """(x + 1) log(x + 1) - x log x, the per-cell term of the typical-table objective."""
    x = np.asarray(x, dtype=float)
    return xlogy(x + 1.0, x + 1.0) - xlogy(x, x)


@dataclass(frozen=True, eq=False)
class Tilting:
    """One parameter vector per axis; cell tilt is their broadcast sum."""

    params: tuple

    def __init__(self, *params):
        if len(params) == 1 and isinstance(params[0], (list, tuple)):
            params = tuple(params[0])
        vecs = tuple(np.array(p, dtype=float).reshape(-1) for p in params)
        if len(vecs) not in (2, 3):
            raise InvalidInput("tilting needs 2 or 3 parameter vectors")
        object.__setattr__(self, "params", vecs)

    @property
    def alpha(self):
        return self.params[0]

    @property
    def beta(self):
        return self.params[1]

    @property
    def gamma(self):
        return self.params[2] if len(self.params) > 2 else None

    @property
    def dims(self):
        return tuple(p.size for p in self.params)

    def theta(self) -> np.ndarray:
        k = len(self.params)
        out = np.zeros(self.dims)
        for d, p in enumerate(self.params):
            shape = [1] * k
            shape[d] = p.size
            out = out + p.reshape(shape)
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate(self.params)

    def gauge_normalized(self) -> "Tilting":
        """Shift so every axis vector has the same mean; cell tilts are unchanged."""
        means = np.array([p.mean() for p in self.params])
        target = means.sum() / len(means)
        return Tilting([p - m + target for p, m in zip(self.params, means)])

    def to_json(self) -> dict:
        names = ["alpha", "beta", "gamma"]
        return {names[d]: [float(v) for v in p] for d, p in enumerate(self.params)}


def expected_table(t: Tilting) -> RealTable:
    return RealTable(psi_prime(t.theta()))


def margin_vectors(spec) -> list[np.ndarray]:
    """Float margin vectors from a MarginSpec or a sequence of real vectors.

    The MLE is defined for real margins too (e.g. B n^2 = 19.2), so solvers
    accept either. Real vectors must be finite, nonnegative and share one
    total to 1e-12 relative.
    """
    if isinstance(spec, MarginSpec):
        validate_margin_spec(spec)
        return [v.astype(float) for v in spec.axis_sums]
    vecs = [np.array(v, dtype=float).reshape(-1) for v in spec]
    if len(vecs) not in (2, 3) or any(v.size == 0 for v in vecs):
        raise InvalidInput("need 2 or 3 nonempty margin vectors")
    if any(not np.all(np.isfinite(v)) or np.any(v < 0) for v in vecs):
        raise InvalidInput("margins must be finite and nonnegative")
    totals = np.array([v.sum() for v in vecs])
    if np.ptp(totals) > 1e-12 * totals.max():
        raise MismatchedTotals(f"axis sums disagree: {totals.tolist()}")
    return vecs


def _spec_vectors(spec, t: Tilting):
    vecs = margin_vectors(spec)
    if tuple(v.size for v in vecs) != t.dims:
        raise InvalidInput(f"margin dims {tuple(v.size for v in vecs)} do not match tilting dims {t.dims}")
    return vecs


def log_likelihood(spec, t: Tilting):
    """Return (ell, gradient) with the gradient as one vector per axis."""
    targets = _spec_vectors(spec, t)
    theta = _check_theta(t.theta())
    value = -sum(float(a @ p) for a, p in zip(targets, t.params)) - float(np.sum(psi(theta)))
    Z = psi_prime(theta)
    grad = [m - a for m, a in zip(all_margins(Z), targets)]
    return value, grad


def _hessian(V: np.ndarray) -> np.ndarray:
    """Hessian of ell in the stacked parameters given cell variances V."""
    k = V.ndim
    dims = V.shape
    offs = np.concatenate([[0], np.cumsum(dims)])
    H = np.zeros((offs[-1], offs[-1]))
    for d in range(k):
        H[offs[d]:offs[d + 1], offs[d]:offs[d + 1]] = -np.diag(V.sum(axis=tuple(a for a in range(k) if a != d)))
        for e in range(d + 1, k):
            block = -V.sum(axis=tuple(a for a in range(k) if a not in (d, e)))
            H[offs[d]:offs[d + 1], offs[e]:offs[e + 1]] = block
            H[offs[e]:offs[e + 1], offs[d]:offs[d + 1]] = block.T
    return H


def _gauge_basis(dims) -> np.ndarray:
    """Orthonormal basis of parameter shifts that leave every cell tilt unchanged."""
    offs = np.concatenate([[0], np.cumsum(dims)])
    cols = []
    for d in range(1, len(dims)):
        g = np.zeros(offs[-1])
        g[offs[0]:offs[1]] = 1.0
        g[offs[d]:offs[d + 1]] = -1.0
        cols.append(g)
    G, _ = np.linalg.qr(np.array(cols).T)
    return G


@dataclass
class SolveReport:
    tilting: Tilting
    expected: RealTable
    residual_inf: float
    iterations: int
    converged: bool
    log_likelihood: float = float("nan")

    def to_json(self) -> dict:
        return {
            "tilting": self.tilting.to_json(),
            "expected": self.expected.to_json(),
            "residual_inf": self.residual_inf,
            "iterations": self.iterations,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
        }


def _relative_residual(grad, targets) -> float:
    return max(float(np.max(np.abs(g) / a)) for g, a in zip(grad, targets))


def solve_mle(spec, tol: float = 1e-10, max_iter: int = 500,
              raise_on_failure: bool = True) -> SolveReport:
    """Maximize ell for the given plane-sum margins by damped Newton.

    Newton steps are taken in the gauge-free directions (the Hessian is
    singular along the gauge shifts), with Armijo backtracking on ell and a
    fraction-to-boundary cap keeping every cell tilt positive. Parameters
    are re-centred after each step so all axis vectors share one mean.

    ``tol`` bounds the largest margin error relative to its target entry.
    """
    targets = margin_vectors(spec)
    for v in targets:
        if np.any(v == 0):
            raise ZeroMargin("a margin entry is zero; drop that slice before solving")
    N = float(targets[0].sum())
    dims = tuple(v.size for v in targets)
    k = len(dims)
    n_cells = int(np.prod(dims))
    theta0 = math.log1p(n_cells / N)
    t = Tilting([np.full(n, theta0 / k) for n in dims])
    G = _gauge_basis(dims)
    offs = np.concatenate([[0], np.cumsum(dims)])

    value, grad = log_likelihood(spec, t)
    res = _relative_residual(grad, targets)
    it = 0
    while res > tol and it < max_iter:
        it += 1
        theta = t.theta()
        g = np.concatenate(grad)
        H = _hessian(psi_double(theta))
        # (H - G G^T) is negative definite; its solve gives the gauge-free Newton step
        step = linalg.cho_solve(linalg.cho_factor(G @ G.T - H), g)
        dtheta = Tilting([step[offs[d]:offs[d + 1]] for d in range(k)]).theta()
        shrinking = dtheta < 0
        t_max = 1.0
        if np.any(shrinking):
            t_max = min(1.0, 0.99 * float(np.min((theta[shrinking] - THETA_FLOOR) / -dtheta[shrinking])))
        slope = float(g @ step)
        alpha = t_max
        x = t.flat()
        accepted = False
        for _ in range(60):
            trial = Tilting([(x + alpha * step)[offs[d]:offs[d + 1]] for d in range(k)])
            try:
                tv, tg = log_likelihood(spec, trial)
            except DomainError:
                alpha *= 0.5
                continue
            tres = _relative_residual(tg, targets)
            if tv >= value + 1e-4 * alpha * slope or tres < res:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            logger.debug("line search stalled at iteration %d (residual %.3e)", it, res)
            break
        t = trial.gauge_normalized()
        value, grad = log_likelihood(spec, t)
        res = _relative_residual(grad, targets)

    report = SolveReport(
        tilting=t,
        expected=expected_table(t),
        residual_inf=res,
        iterations=it,
        converged=res <= tol,
        log_likelihood=value,
    )
    if not report.converged and raise_on_failure:
        raise NotConverged(f"Newton stopped after {it} iterations at residual {res:.3e}", report)
    return report


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"
    NEAR_CRITICAL = "near-critical"


def regime_of(B: float, Bc: float = BC_3WAY, band: float = NEAR_CRITICAL_BAND) -> Regime:
    if abs(B - Bc) < band:
        return Regime.NEAR_CRITICAL
    return Regime.SUBCRITICAL if B < Bc else Regime.SUPERCRITICAL


@dataclass(frozen=True)
class BarvinokSolution:
    """Symmetric MLE for margins (B n^2, n^2, ..., n^2) on every axis.

    ``u`` and ``v`` are log(P - 1) and log(Q - 1); cell values are computed
    from them rather than from P, Q so P - 1 ~ 1e-6 keeps full precision.
    """

    n: int
    B: float
    u: float
    v: float
    residual: float
    iterations: int
    regime: Regime

    @property
    def P(self) -> float:
        return 1.0 + math.exp(self.u)

    @property
    def Q(self) -> float:
        return 1.0 + math.exp(self.v)

    @property
    def log_p(self) -> float:
        return math.log1p(math.exp(self.u))

    @property
    def log_q(self) -> float:
        return math.log1p(math.exp(self.v))

    def cells(self) -> tuple[float, float, float, float]:
        """(Z111, Z121, Z221, Z222)."""
        lp, lq = self.log_p, self.log_q
        return tuple(1.0 / math.expm1(s) for s in (3 * lp, 2 * lp + lq, lp + 2 * lq, 3 * lq))


def _barvinok_system(u, v, n, B):
    """Relative residuals and their Jacobian in (u, v)."""
    lp, lq = math.log1p(math.exp(u)), math.log1p(math.exp(v))
    sp, sq = 1.0 / (1.0 + math.exp(-u)), 1.0 / (1.0 + math.exp(-v))  # d log P / du, d log Q / dv
    s = np.array([3 * lp, 2 * lp + lq, lp + 2 * lq, 3 * lq])
    z = 1.0 / np.expm1(s)
    dz = -z * (1.0 + z)  # dZ/ds
    ds_dlp = np.array([3.0, 2.0, 1.0, 0.0])
    ds_dlq = np.array([0.0, 1.0, 2.0, 3.0])
    m = n - 1
    w1 = np.array([1.0, 2 * m, m * m, 0.0]) / (B * n * n)
    w2 = np.array([0.0, 1.0, 2 * m, m * m]) / (n * n)
    F = np.array([w1 @ z - 1.0, w2 @ z - 1.0])
    J = np.array([
        [w1 @ (dz * ds_dlp) * sp, w1 @ (dz * ds_dlq) * sq],
        [w2 @ (dz * ds_dlp) * sp, w2 @ (dz * ds_dlq) * sq],
    ])
    return F, J


def barvinok_residual(P: float, Q: float, n: int, B: float) -> float:
    """Largest relative residual of the two reduced equations at (P, Q)."""
    F, _ = _barvinok_system(math.log(P - 1.0), math.log(Q - 1.0), n, B)
    return float(np.max(np.abs(F)))


def _initial_guess(n, B):
    v0 = math.log(2.0 ** (1.0 / 3.0) - 1.0)
    if B < BC_3WAY - 1e-3:
        p0 = (1.0 / B + 1.0) / (1.0 / BC_3WAY + 1.0)
        return math.log(p0 - 1.0), v0
    excess = max(B - BC_3WAY, 1.0 / n)
    return math.log(math.expm1(math.log1p(1.0 / (excess * n * n)) / 3.0)), v0


def barvinok_solve(n: int, B: float, tol: float = 1e-10, max_iter: int = 200) -> BarvinokSolution:
    """Solve the two reduced MLE equations for the 3-way Barvinok margin.

    Newton in (log(P-1), log(Q-1)) with backtracking on the squared relative
    residual.
    """
    if n < 2:
        raise InvalidInput("n must be at least 2")
    if not B > 0:
        raise InvalidInput("B must be positive")
    u, v = _initial_guess(n, B)
    F, J = _barvinok_system(u, v, n, B)
    merit = float(F @ F)
    it = 0
    while np.max(np.abs(F)) > tol and it < max_iter:
        it += 1
        step = np.linalg.solve(J, -F)
        # cap the step in log space to keep the exponentials tame
        lam = min(1.0, 2.0 / max(1e-300, float(np.max(np.abs(step)))))
        while lam > 1e-12:
            un, vn = u + lam * step[0], v + lam * step[1]
            Fn, Jn = _barvinok_system(un, vn, n, B)
            mn = float(Fn @ Fn)
            if np.all(np.isfinite(Fn)) and mn <= (1.0 - 1e-4 * lam) * merit:
                break
            lam *= 0.5
        else:
            break
        u, v, F, J, merit = un, vn, Fn, Jn, mn
    res = float(np.max(np.abs(F)))
    sol = BarvinokSolution(n=n, B=float(B), u=u, v=v, residual=res, iterations=it, regime=regime_of(B))
    if res > tol:
        raise NotConverged(
            f"reduced Barvinok system not solved for n={n}, B={B}: residual {res:.3e} after {it} iterations",
            sol,
        )
    return sol


def barvinok_margins(n: int, B: float) -> list[np.ndarray]:
    """Margins (B n^2, n^2, ..., n^2) on all three axes, as real vectors."""
    vec = np.full(n, float(n * n))
    vec[0] = B * n * n
    return [vec.copy(), vec.copy(), vec.copy()]


def barvinok_spec(n: int, B: float) -> MarginSpec:
    """Integer version of ``barvinok_margins``; B n^2 must be an integer."""
    heavy = B * n * n
    if abs(heavy - round(heavy)) > 1e-9:
        raise InvalidInput(f"B n^2 = {heavy} is not an integer")
    vec = [int(round(heavy))] + [n * n] * (n - 1)
    return MarginSpec([vec, vec, vec])


@dataclass
class TypicalTable:
    table: RealTable
    objective: float
    report: SolveReport


def typical_table_2way(r, c, tol: float = 1e-10, max_iter: int = 500) -> TypicalTable:
    """Maximizer of sum f(X_ij) over real tables with margins (r, c).

    Solved through the dual: the maximizer is the expected table of the
    geometric tilting MLE, X_ij = 1/(e^{alpha_i + beta_j} - 1).
    """
    report = solve_mle([r, c], tol=tol, max_iter=max_iter)
    Z = report.expected
    return TypicalTable(Z, float(np.sum(f_entropy(Z.array))), report)
