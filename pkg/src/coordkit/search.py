"""Numerical minimization of a region's common-randomness bound.

Searches over auxiliary conditionals that keep the region's factorization
exact by construction, while a quadratic penalty drives the induced
observable joint onto the requested one.  Multi-start projected coordinate
descent on the conditional pmf simplexes; the result is an upper bound on
the true minimum for targets within `match_residual` of the requested
observables -- global optimality is not claimed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import substream
from .probability import FiniteDist, Kernel, StructureError

_AL_ROUNDS = 14
_LINE_SEARCH_SHRINK = 0.5
_GRAD_EPS = 1e-6


@dataclass
class SearchResult:
    r0: float
    aux_joint: FiniteDist
    info_lhs: float
    info_rhs: float
    match_residual: float  # TV between induced and requested observables
    feasible: bool
    restarts_used: int
    best_restart: int


def _entropy_bits(p: np.ndarray) -> float:
    q = p.reshape(-1)
    nz = q > 1e-300
    return float(-(q[nz] * np.log2(q[nz])).sum())


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of the last axis onto the probability simplex."""
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    cond = u - css / k > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho + 1)[..., None]
    return np.maximum(v - theta, 0.0)


class _Problem:
    """Kind-specific model: parameters -> (r0 bound, match error, info gap)."""

    def __init__(self, kind, base: FiniteDist, w_card: int):
        self.kind = kind
        self.is_uvx = kind.name == "UV_OTIMES_X"
        self.is_inner = kind.name == "INNER_NO_STATE"
        self.w = w_card
        if self.is_uvx:
            for n in ("U", "X", "V"):
                base.axis_index(n)
            self.p_uv = base.marginal(["U", "V"]).permuted(["U", "V"]).pmf
            self.p_x = base.marginal("X").pmf
            self.h_x = _entropy_bits(self.p_x)
            nu, nv = self.p_uv.shape
            self.shapes = [(1, w_card), (w_card, nu), (w_card, nv)]
        elif kind.name in ("INNER_NO_STATE", "OUTER_NO_STATE"):
            for n in ("U", "X", "Y", "V"):
                base.axis_index(n)
            self.obs = base.marginal(["U", "X", "Y", "V"]).permuted(["U", "X", "Y", "V"]).pmf
            self.p_u = base.marginal("U").pmf
            p_xy = base.marginal(["X", "Y"]).permuted(["X", "Y"]).pmf
            px = p_xy.sum(axis=1)
            if np.any(px <= 0):
                raise StructureError("base joint must give every channel input "
                                     "positive probability")
            self.p_y_x = p_xy / px[:, None]
            nu, nx, ny, nv = self.obs.shape
            self.shapes = [(nu, w_card), (nu * w_card, nx), (w_card * ny, nv)]
            self.dims = (nu, nx, ny, nv)
        else:
            raise StructureError(
                f"search_min_r0 supports inner/outer no-state and UV-otimes-X "
                f"regions, not {kind}")

    def init(self, rng: np.random.Generator, alpha: float = 1.0):
        return [self._dirichlet(rng, shape, alpha) for shape in self.shapes]

    @staticmethod
    def _dirichlet(rng, shape, alpha=1.0):
        g = rng.gamma(alpha, size=shape) + 1e-12
        return g / g.sum(axis=-1, keepdims=True)

    def revive_dead_symbols(self, params, rng) -> bool:
        """Split the heaviest auxiliary symbol into any that died.

        Descent can drive an auxiliary symbol's mass to zero, after which
        its conditionals carry no gradient and the fit is stuck with an
        effectively smaller alphabet.
        """
        if self.is_uvx:
            q_w = params[0][0]
            usage = q_w.copy()
        else:
            usage = self.p_u @ params[0]
        dead = np.where(usage < 1e-6)[0]
        if len(dead) == 0:
            return False
        for w in dead:
            heavy = int(np.argmax(usage))
            if self.is_uvx:
                q_w[heavy] /= 2.0
                q_w[w] = q_w[heavy]
                for mat in (params[1], params[2]):
                    mat[w] = _project_simplex(
                        mat[heavy] + 0.05 * rng.standard_normal(mat.shape[1]))
            else:
                params[0][:, heavy] /= 2.0
                params[0][:, w] = params[0][:, heavy]
                nu = params[0].shape[0]
                qx = params[1].reshape(nu, self.w, -1)
                qv = params[2].reshape(self.w, -1, params[2].shape[-1])
                for u in range(nu):
                    qx[u, w] = _project_simplex(
                        qx[u, heavy] + 0.05 * rng.standard_normal(qx.shape[-1]))
                for y in range(qv.shape[1]):
                    qv[w, y] = _project_simplex(
                        qv[heavy, y] + 0.05 * rng.standard_normal(qv.shape[-1]))
            usage = q_w.copy() if self.is_uvx else self.p_u @ params[0]
        return True

    def evaluate(self, params):
        r0, resid, gap, sides = self.full_evaluate(params)
        return r0, float((resid ** 2).sum()), gap, sides

    def full_evaluate(self, params):
        """Returns (r0 bound, observable residual vector, cap gap, (lhs, rhs))."""
        if self.is_uvx:
            q_w, q_u_w, q_v_w = params[0][0], params[1], params[2]
            m = np.einsum("w,wu,wv->uwv", q_w, q_u_w, q_v_w)
            m_uv = m.sum(axis=1)
            resid = (m_uv - self.p_uv).reshape(-1)
            h_w = _entropy_bits(m.sum(axis=(0, 2)))
            h_u = _entropy_bits(m.sum(axis=(1, 2)))
            h_uw = _entropy_bits(m.sum(axis=2))
            i_wu = h_w + h_u - h_uw
            h_uv = _entropy_bits(m_uv)
            i_uvw = h_uv + h_w - _entropy_bits(m)
            return i_uvw, resid, i_wu - self.h_x, (i_wu, self.h_x)
        nu, nx, ny, nv = self.dims
        q_w_u = params[0]
        q_x_uw = params[1].reshape(nu, self.w, nx)
        q_v_wy = params[2].reshape(self.w, ny, nv)
        m = np.einsum("u,uw,uwx,xy,wyv->uwxyv",
                      self.p_u, q_w_u, q_x_uw, self.p_y_x, q_v_wy)
        m_obs = m.sum(axis=1)
        resid = (m_obs - self.obs).reshape(-1)
        h = _entropy_bits
        h_y = h(m.sum(axis=(0, 1, 2, 4)))
        h_wy = h(m.sum(axis=(0, 2, 4)))
        h_uxvy = h(m.sum(axis=1))
        r0 = h_wy + h_uxvy - h(m) - h_y
        h_w = h(m.sum(axis=(0, 2, 3, 4)))
        i_wu = h_w + h(m.sum(axis=(1, 2, 3, 4))) - h(m.sum(axis=(2, 3, 4)))
        if self.is_inner:
            cap = h_w + h_y - h_wy  # I(W;Y)
        else:
            h_x = h(m.sum(axis=(0, 1, 3, 4)))
            h_xy = h(m.sum(axis=(0, 1, 4)))
            cap = h_x + h_y - h_xy  # I(X;Y)
        return r0, resid, i_wu - cap, (i_wu, cap)

    def aux_joint(self, params) -> FiniteDist:
        if self.is_uvx:
            q_w, q_u_w, q_v_w = params[0][0], params[1], params[2]
            m = np.einsum("w,wu,wv->uwv", q_w, q_u_w, q_v_w)
            m = m / m.sum()
            nu, nv = self.p_uv.shape
            d = FiniteDist([("U", nu), ("W", self.w), ("V", nv)], m)
            return d.attach(Kernel([], [("X", len(self.p_x))], self.p_x))
        nu, nx, ny, nv = self.dims
        m = np.einsum("u,uw,uwx,xy,wyv->uwxyv",
                      self.p_u, params[0], params[1].reshape(nu, self.w, nx),
                      self.p_y_x, params[2].reshape(self.w, ny, nv))
        m = m / m.sum()
        return FiniteDist([("U", nu), ("W", self.w), ("X", nx), ("Y", ny), ("V", nv)], m)


def _lagrangian(problem: _Problem, params, lam: np.ndarray, mu: float,
                rho_m: float, rho_c: float) -> float:
    r0, resid, gap, _ = problem.full_evaluate(params)
    cap = max(0.0, mu / rho_c + gap)
    return (r0 + float(lam @ resid) + 0.5 * rho_m * float(resid @ resid)
            + 0.5 * rho_c * cap * cap)


def _row_gradient(value_fn, rows, r) -> np.ndarray:
    grad = np.empty(rows.shape[1])
    for c in range(rows.shape[1]):
        old = rows[r, c]
        rows[r, c] = old + _GRAD_EPS
        up = value_fn()
        lo = max(old - _GRAD_EPS, 0.0)
        rows[r, c] = lo
        down = value_fn()
        rows[r, c] = old
        grad[c] = (up - down) / (old + _GRAD_EPS - lo)
    return grad - grad.mean()  # tangent component along the simplex


def _sweeps(problem, params, flat_rows, steps, iters, value_fn) -> float:
    """Projected-gradient iterations on all rows jointly.

    The gradient is assembled row by row (finite differences on the
    simplex), then a single backtracked step updates every row at once and
    projects each back onto its simplex.  Joint steps are essential: with a
    stiff fit penalty no single-row move can descend, but a coordinated one
    can.
    """
    value = value_fn()
    step = max(float(np.max(steps)), 1e-6)
    stalls = 0
    for _ in range(iters):
        grads = []
        gmax = 0.0
        for rows, r in flat_rows:
            g = _row_gradient(value_fn, rows, r)
            grads.append(g)
            gmax = max(gmax, float(np.abs(g).max()))
        if gmax < 1e-14:
            break
        saved = [rows[r].copy() for rows, r in flat_rows]
        trial = min(max(step, 1e-9), 0.5)
        accepted = False
        for _ in range(30):
            for (rows, r), g, old in zip(flat_rows, grads, saved):
                rows[r] = _project_simplex(old - (trial / gmax) * g)
            candidate = value_fn()
            if candidate < value - 1e-12 * max(1.0, abs(value)):
                value = candidate
                step = min(trial * 2.0, 0.5)
                accepted = True
                stalls = 0
                break
            trial *= _LINE_SEARCH_SHRINK
        if not accepted:
            for (rows, r), old in zip(flat_rows, saved):
                rows[r] = old
            step = max(step * 0.25, 1e-9)
            stalls += 1
            if stalls >= 3:
                break
    steps[:] = step
    return value


def _descend(problem: _Problem, params, iters: int) -> tuple[list, list | None]:
    """Projected descent inside an augmented-Lagrangian loop.

    Multipliers absorb the observable-match equalities and the one-sided
    information cap, so the inner subproblems stay well conditioned while
    the constraint violations are driven toward zero; the rising cap
    multiplier doubles as a continuation schedule.  Returns the final
    parameters and the best near-feasible iterate seen along the way.
    """
    flat_rows = []
    for mat in params:
        rows = mat.reshape(-1, mat.shape[-1])
        for r in range(rows.shape[0]):
            flat_rows.append((rows, r))
    steps = np.full(len(flat_rows), 0.2)

    _, resid, _, _ = problem.full_evaluate(params)
    lam = np.zeros_like(resid)
    mu = 0.0
    rho_m, rho_c = 1e3, 3e2
    prev_viol = np.inf
    best = None
    for _ in range(_AL_ROUNDS):
        steps[:] = np.maximum(steps, 0.02)
        _sweeps(problem, params, flat_rows, steps, iters,
                lambda: _lagrangian(problem, params, lam, mu, rho_m, rho_c))
        r0, resid, gap, _ = problem.full_evaluate(params)
        viol = max(float(np.abs(resid).max()), gap)
        if viol <= 1e-7 and (best is None or r0 < best[0]):
            best = (r0, [m.copy() for m in params])
        lam = lam + rho_m * resid
        mu = max(0.0, mu + rho_c * gap)
        if viol > 0.5 * prev_viol:
            rho_m = min(rho_m * 4.0, 1e8)
            rho_c = min(rho_c * 4.0, 1e8)
        prev_viol = viol
    return params, (best[1] if best else None)


def search_min_r0(kind, base_joint: FiniteDist, w_card: int,
                  restarts: int = 12, iters: int = 48, seed: int = 0,
                  match_tol: float = 1e-4) -> SearchResult:
    """Best found common-randomness bound over auxiliaries of size `w_card`.

    Parameters
    ----------
    kind : RegionKind
        One of INNER_NO_STATE, OUTER_NO_STATE, UV_OTIMES_X.
    base_joint : FiniteDist
        Joint over the region's observable axes.
    w_card : int
        Auxiliary alphabet size (respect the region's cardinality cap).
    restarts, iters : int
        Multi-start count and per-start descent budget.

    Returns the best restart's bound; `feasible` is False when no restart
    matched the observables within `match_tol` (infeasible at this search,
    not proven infeasible).
    """
    problem = _Problem(kind, base_joint, w_card)
    best = None
    for restart in range(restarts):
        rng = substream(seed, "region-search", restart)
        final, tracked = _descend(problem, problem.init(rng), iters)
        for params in filter(None, (final, tracked)):
            r0, match, gap, (lhs, rhs) = problem.evaluate(params)
            ok = match <= match_tol ** 2 and gap <= 1e-6
            key = (not ok, r0 if ok else r0 + 10.0 * match + 10.0 * max(gap, 0.0))
            if best is None or key < best[0]:
                best = (key, restart, params, r0, match, gap, lhs, rhs)
    _, restart, params, r0, match, gap, lhs, rhs = best
    if problem.is_uvx:
        induced = problem.aux_joint(params).marginal(["U", "V"]).permuted(["U", "V"]).pmf
        residual = 0.5 * float(np.abs(induced - problem.p_uv).sum())
    else:
        induced = (problem.aux_joint(params).marginal(["U", "X", "Y", "V"])
                   .permuted(["U", "X", "Y", "V"]).pmf)
        residual = 0.5 * float(np.abs(induced - problem.obs).sum())
    return SearchResult(
        r0=float(r0),
        aux_joint=problem.aux_joint(params),
        info_lhs=float(lhs), info_rhs=float(rhs),
        match_residual=residual,
        feasible=residual <= match_tol and gap <= 1e-6,
        restarts_used=restarts, best_restart=restart,
    )
