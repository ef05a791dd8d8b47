"""Convex QP kernels behind the fitting cascade.

Four solvers live here: the capped-simplex two-hull closest-point problem
(pairwise Frank-Wolfe with away steps and an exact greedy linear oracle),
primal recovery of the separating direction, a cutting-plane hard-margin
feasibility solver for the four-dimensional homogeneous multiclass problem,
and a slack-eliminated soft-margin solver.  Everything is deterministic:
stable sorts break ties, no randomness enters any loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateContact, InvalidCap, InvalidPenalty
from .lift import PairwiseLiftSet

DEGENERATE_FLOOR = 1e-12

# cutting-plane policy for the hard-margin QP
MAX_ACTIVE_ROWS = 256
VIOLATOR_BATCH = 32
MAX_OUTER_ITERS = 200
HARD_MARGIN_TOL = 1e-9


@dataclass(frozen=True)
class RchSolution:
    """Closest pair of two reduced convex hulls with its dual weights.

    ``theta`` is the unnormalized separating direction u* - v*, ``threshold``
    the midpoint projection theta . (u* + v*)/2, and ``rho`` the half squared
    distance (theta . u* - threshold).  ``gap`` is the final Frank-Wolfe
    duality gap in the original data scale.
    """

    lam: np.ndarray
    kappa: np.ndarray
    u_star: np.ndarray
    v_star: np.ndarray
    distance: float
    theta: np.ndarray
    threshold: float
    rho: float
    gap: float
    iterations: int
    converged: bool

    @property
    def certified_separating(self) -> bool:
        """True when the duality gap proves the hulls are strictly apart:
        the squared distance exceeds the gap by a safe factor, so the true
        distance is at least ~87% of the reported one."""
        return self.distance > DEGENERATE_FLOOR and self.distance**2 > 4.0 * max(self.gap, 0.0)


@dataclass(frozen=True)
class McSolution:
    """Outcome of the multiclass hard or soft margin solve."""

    status: str  # "feasible" | "infeasible" | "soft"
    theta_bar: np.ndarray | None  # (4,): (alpha~, beta~, eta~, lambda)
    coeffs: np.ndarray | None  # (3,): (alpha, beta, eta)
    worst_margin: float
    active_rows: np.ndarray
    slacks: np.ndarray | None = None  # per-sample xi (soft only)
    objective: float | None = None  # soft objective value
    gap: float | None = None  # verified primal-dual gap (soft only)
    cuts: tuple[np.ndarray, np.ndarray] | None = None  # hinge cut pool (warm start)
    iterations: int = 0


def _lmo_capped_simplex(grad: np.ndarray, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact minimizer of <grad, w> over {w: sum w = 1, 0 <= w <= mu}.

    Greedily fills ceil(1/mu) coordinates of smallest gradient, the last one
    partially.  Returns (indices, weights).
    """
    n = grad.shape[0]
    k = int(np.floor(1.0 / mu + 1e-12))
    k = min(k, n)
    rem = 1.0 - k * mu
    if rem < 1e-14:
        rem = 0.0
    order = np.argsort(grad, kind="stable")
    if rem == 0.0:
        idx = order[:k]
        return idx, np.full(k, mu)
    idx = order[: k + 1]
    w = np.full(k + 1, mu)
    w[-1] = rem
    return idx, w


def _vertex_key(idx: np.ndarray, w: np.ndarray) -> tuple:
    order = np.argsort(idx, kind="stable")
    return tuple(idx[order]), tuple(np.round(w[order], 15))


def rch_closest_point(
    s_plus,
    s_minus,
    mu_plus: float,
    mu_minus: float,
    gap_tol: float = 1e-10,
    max_iter: int = 200_000,
) -> RchSolution:
    """Minimize ||sum lam z+ - sum kap z-||^2 over the two capped simplices.

    Pairwise Frank-Wolfe with away steps and exact line search; the iterate is
    kept as an explicit convex combination of capped-simplex vertices so the
    away atom is always available.  Runs on max-norm-scaled data; the reported
    duality gap is converted back to the original scale.
    """
    zp = np.atleast_2d(np.asarray(s_plus, dtype=np.float64))
    zm = np.atleast_2d(np.asarray(s_minus, dtype=np.float64))
    n_p, n_m = zp.shape[0], zm.shape[0]
    for mu, n, side in ((mu_plus, n_p, "mu_plus"), (mu_minus, n_m, "mu_minus")):
        if mu * n < 1.0 - 1e-9 or mu > 1.0 + 1e-12:
            raise InvalidCap(f"{side}={mu} outside [1/{n}, 1]")

    scale = max(1.0, float(np.abs(zp).max(initial=0.0)), float(np.abs(zm).max(initial=0.0)))
    zps = zp / scale
    zms = zm / scale
    # unreachable tolerances are floored at double-precision resolution
    tol = max(gap_tol / (scale * scale), 5e-16)

    lam = np.zeros(n_p)
    kap = np.zeros(n_m)
    ip, wp = _lmo_capped_simplex(np.zeros(n_p), mu_plus)
    im, wm = _lmo_capped_simplex(np.zeros(n_m), mu_minus)
    lam[ip] = wp
    kap[im] = wm
    start_key = (_vertex_key(ip, wp), _vertex_key(im, wm))
    atoms = {start_key: (1.0, ip, wp, im, wm)}

    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        u = lam @ zps
        v = kap @ zms
        r = u - v
        f2 = 2.0 * float(r @ r)
        gp = 2.0 * (zps @ r)
        gm = -2.0 * (zms @ r)

        sip, swp = _lmo_capped_simplex(gp, mu_plus)
        sim, swm = _lmo_capped_simplex(gm, mu_minus)
        s_score = float(gp[sip] @ swp + gm[sim] @ swm)
        gap = f2 - s_score
        if gap <= tol:
            # refine through the ambiguous band where the gap can neither
            # certify separation (f >= 4 gap) nor has hit the noise floor
            if 0.5 * f2 >= 4.0 * gap or gap <= 5e-16:
                break

        # away atom: active vertex with the largest gradient inner product
        a_key, a_best, a_score = None, None, -np.inf
        for key, (w, aip, awp, aim, awm) in atoms.items():
            score = float(gp[aip] @ awp + gm[aim] @ awm)
            if score > a_score:
                a_key, a_best, a_score = key, (w, aip, awp, aim, awm), score

        a_w, aip, awp, aim, awm = a_best
        du = zps[sip].T @ swp - zps[aip].T @ awp
        dv = zms[sim].T @ swm - zms[aim].T @ awm
        dr = du - dv
        denom = float(dr @ dr)
        if denom <= 0.0:
            break  # numerically flat pairwise direction: gap is already tiny
        gamma = min(a_w, -float(r @ dr) / denom)
        if gamma <= 0.0:
            break

        lam[sip] += gamma * swp
        lam[aip] -= gamma * awp
        kap[sim] += gamma * swm
        kap[aim] -= gamma * awm

        s_key = (_vertex_key(sip, swp), _vertex_key(sim, swm))
        if s_key in atoms:
            sw = atoms[s_key][0] + gamma
            atoms[s_key] = (sw, *atoms[s_key][1:])
        else:
            atoms[s_key] = (gamma, sip, swp, sim, swm)
        left = a_w - gamma
        if left <= 1e-16:
            del atoms[a_key]
            if a_key == s_key:
                atoms[s_key] = (gamma, sip, swp, sim, swm)
        else:
            atoms[a_key] = (left, aip, awp, aim, awm)

        if it % 4096 == 0:  # rebuild the iterate to cancel accumulated drift
            lam[:] = 0.0
            kap[:] = 0.0
            for w, bip, bwp, bim, bwm in atoms.values():
                lam[bip] += w * bwp
                kap[bim] += w * bwm

    u = (lam @ zps) * scale
    v = (kap @ zms) * scale
    theta = u - v
    dist = float(np.hypot(*theta))
    return RchSolution(
        lam=lam,
        kappa=kap,
        u_star=u,
        v_star=v,
        distance=dist,
        theta=theta,
        threshold=float(theta @ (u + v)) / 2.0,
        rho=dist * dist / 2.0,
        gap=float(gap) * scale * scale,
        iterations=it,
        converged=bool(gap <= tol),
    )


def primal_from_dual(sol: RchSolution) -> tuple[np.ndarray, float, float]:
    """Separating direction, midpoint threshold, and margin value from a dual
    closest-pair solution: theta = u*-v*, t = theta.(u*+v*)/2, rho = d^2/2."""
    if sol.distance <= DEGENERATE_FLOOR:
        raise DegenerateContact("hulls touch: no separating direction to recover")
    return sol.theta, sol.threshold, sol.rho


def _phase1_lp(A: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimize the worst constraint violation s over A x >= 1 - s, s >= 0."""
    n_rows = A.shape[0]
    c = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    a_ub = np.hstack([-A, -np.ones((n_rows, 1))])
    b_ub = -np.ones(n_rows)
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * 4 + [(0.0, None)],
        method="highs",
    )
    if not res.success:  # numerically wedged LP: treat as maximally violated
        return np.inf, np.zeros(4)
    return float(res.fun), res.x[:4]


def _support_polish_hard(A: np.ndarray, nu: np.ndarray, max_rounds: int = 40) -> np.ndarray | None:
    """Exact KKT solve on the support guessed from an approximate dual point.

    Solves (A_P A_P^T) nu_P = 1 on the active-row candidate set P, then
    repairs P by dropping negative multipliers and admitting violated rows
    until the KKT system verifies; returns None when no consistent support
    is found (caller keeps the iterative point).
    """
    if nu.size == 0:
        return None
    floor = 1e-9 * float(nu.max())
    supp = list(np.flatnonzero(nu > max(floor, 0.0)))
    if not supp:
        supp = [int(np.argmax(nu))]
    seen = set()
    for _ in range(max_rounds):
        key = tuple(supp)
        if not supp or key in seen:
            return None
        seen.add(key)
        Ap = A[supp]
        gram = Ap @ Ap.T
        sol, *_ = np.linalg.lstsq(gram, np.ones(len(supp)), rcond=None)
        x = Ap.T @ sol
        margins = A @ x
        violated = np.flatnonzero(margins < 1.0 - 1e-10)
        has_neg = bool((sol < -1e-12).any())
        if violated.size == 0 and not has_neg:
            # complementarity: claimed-active rows must sit on the margin
            if np.max(np.abs(Ap @ x - 1.0)) <= 1e-8 * max(1.0, float(np.abs(x).max())):
                return x
            return None
        if has_neg:
            supp.pop(int(np.argmin(sol)))
        for i in violated[np.argsort(margins[violated], kind="stable")]:
            if int(i) not in supp:
                supp.append(int(i))
                break
    return None


def _min_norm_on_rows(A: np.ndarray, max_iter: int = 20_000) -> np.ndarray | None:
    """min 1/2 ||x||^2 subject to A x >= 1 for a feasible row subset.

    Accelerated projected gradient (fixed 1/L step) on the dual nonnegative
    QP min 1/2 ||A^T nu||^2 - 1^T nu, with a KKT support polish; the duality
    gap of the returned point is checked against the feasibility-scaled
    primal value, so the answer is certified rather than assumed.
    """
    n_rows = A.shape[0]
    lip = float(np.linalg.norm(A, 2)) ** 2
    if lip == 0.0:
        return None
    nu = np.zeros(n_rows)
    y = nu.copy()
    t = 1.0
    best_x, best_val = None, np.inf
    for k in range(1, max_iter + 1):
        grad = A @ (A.T @ y) - 1.0
        nu_next = np.maximum(y - grad / lip, 0.0)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = nu_next + ((t - 1.0) / t_next) * (nu_next - nu)
        nu, t = nu_next, t_next
        if k % 32 == 0 or k == max_iter:
            x = A.T @ nu
            worst = float((A @ x).min())
            if worst > 0.0:
                x_feas = x / worst
                val = 0.5 * float(x_feas @ x_feas)
                if val < best_val:
                    best_x, best_val = x_feas, val
                dual_val = float(nu.sum()) - 0.5 * float(x @ x)
                if best_val - dual_val <= 1e-12 * max(1.0, best_val):
                    break
                polished = _support_polish_hard(A, nu)
                if polished is not None:
                    return polished
    if nu is not None:
        polished = _support_polish_hard(A, nu)
        if polished is not None:
            return polished
    return best_x


def _solve_hard_subset(A: np.ndarray) -> np.ndarray | None:
    """Feasible min-norm point for a row subset, or None if provably infeasible."""
    violation, x_lp = _phase1_lp(A)
    if violation > 1e-9:
        return None
    x = _min_norm_on_rows(A)
    if x is not None and (A @ x).min() >= 1.0 - 1e-6:
        return x
    # fall back to the scaled phase-1 point: feasible, possibly not min-norm
    margins = A @ x_lp
    worst = margins.min()
    if worst <= 0.0:
        return None
    return x_lp / worst


def mc_hard(lifts: PairwiseLiftSet) -> McSolution:
    """Hard-margin feasibility QP over the pairwise lift rows.

    Solves min 1/2 ||theta_bar||^2 subject to theta_bar . z >= 1 on every row
    and lambda >= 1, with an active-set/cutting-plane outer loop: solve on the
    active subset, sweep all rows, add the worst violators, repeat.
    Infeasibility is a status, established by the subset phase-1 LP.
    """
    Z = lifts.rows
    n_rows = Z.shape[0]
    lam_row = np.array([[0.0, 0.0, 0.0, 1.0]])

    margins0 = Z[:, 3].copy()  # margins at the starting point (0, 0, 0, 1)
    order = np.argsort(margins0, kind="stable")
    active = list(order[: min(VIOLATOR_BATCH, n_rows)])

    theta = None
    for outer in range(1, MAX_OUTER_ITERS + 1):
        A = np.vstack([Z[active], lam_row])
        theta = _solve_hard_subset(A)
        if theta is None:
            _, x_lp = _phase1_lp(A)
            viol = 1.0 - Z[active] @ x_lp
            worst = np.asarray(active)[np.argsort(-viol, kind="stable")]
            return McSolution(
                status="infeasible",
                theta_bar=None,
                coeffs=None,
                worst_margin=float((Z @ x_lp).min()) if n_rows else 0.0,
                active_rows=worst[: min(len(worst), VIOLATOR_BATCH)],
                iterations=outer,
            )
        margins = Z @ theta
        violated = np.flatnonzero(margins < 1.0 - HARD_MARGIN_TOL)
        if violated.size == 0:
            support = np.flatnonzero(margins <= 1.0 + 1e-8)
            lam4 = max(theta[3], 1.0)
            coeffs = theta[:3] / lam4
            return McSolution(
                status="feasible",
                theta_bar=theta,
                coeffs=coeffs,
                worst_margin=float(margins.min()),
                active_rows=support,
                iterations=outer,
            )
        ranked = violated[np.argsort(margins[violated], kind="stable")]
        new_rows = [int(i) for i in ranked if i not in set(active)][:VIOLATOR_BATCH]
        if not new_rows:  # violations persist but are already active: stalled
            break
        active.extend(new_rows)
        if len(active) > MAX_ACTIVE_ROWS:
            # prune slack actives (largest margins first), keep the binding core
            act = np.asarray(active)
            keep_order = np.argsort(margins[act], kind="stable")
            active = list(act[keep_order][:MAX_ACTIVE_ROWS])

    # outer budget exhausted without a verified point: conservatively infeasible
    margins = Z @ theta if theta is not None else margins0
    worst = np.argsort(margins, kind="stable")
    return McSolution(
        status="infeasible",
        theta_bar=None,
        coeffs=None,
        worst_margin=float(margins.min()),
        active_rows=worst[:VIOLATOR_BATCH],
        iterations=MAX_OUTER_ITERS,
    )


def soft_objective(lifts: PairwiseLiftSet, C: float, theta_bar: np.ndarray) -> float:
    """Slack-eliminated objective 1/2 ||theta||^2 + C sum_i max(0, 1 - min_c m_ic)."""
    min_margins, _ = lifts.sample_min_margins(theta_bar)
    xi = np.maximum(0.0, 1.0 - min_margins)
    th = np.asarray(theta_bar, dtype=np.float64)
    return 0.5 * float(th @ th) + C * float(xi.sum())


def soft_slacks(lifts: PairwiseLiftSet, theta_bar: np.ndarray) -> np.ndarray:
    """Exact per-sample slacks xi_i = max(0, 1 - min_c theta_bar . z_ic)."""
    min_margins, _ = lifts.sample_min_margins(theta_bar)
    return np.maximum(0.0, 1.0 - min_margins)


def _project_scaled_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {mu >= 0, sum mu = total}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, v.shape[0] + 1)
    rho = int(np.sum(u - css / ks > 0.0))
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def _master_theta(G: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Primal point induced by master-dual weights: theta = -G^T mu with the
    fourth coordinate clamped at 1 (the eliminated lambda multiplier)."""
    theta = -(G.T @ mu)
    theta[3] = max(theta[3], 1.0)
    return theta


def _master_dual_value(G: np.ndarray, alpha: np.ndarray, mu: np.ndarray) -> float:
    """Lagrangian-dual value of the bundle master at feasible (mu, rho(mu));
    always a lower bound on the master minimum, hence on the soft optimum."""
    u = G.T @ mu
    rho = max(0.0, float(u[3]) + 1.0)
    theta = -u
    theta[3] += rho
    return -0.5 * float(theta @ theta) + float(alpha @ mu) + rho


def _master_kkt_branch(
    Gj: np.ndarray, aj: np.ndarray, C: float, lam_active: bool
) -> tuple[np.ndarray, float, float]:
    """Solve the equality KKT system of the bundle master for one clamp branch.

    Unknowns are the support weights, the epigraph level s, and (when the
    lambda clamp is active) its multiplier rho.  Returns (mu_J, s, rho).
    """
    q = Gj.shape[0]
    k = q + 2 if lam_active else q + 1
    M = np.zeros((q + 2 if lam_active else q + 1, k))
    rhs = np.zeros(M.shape[0])
    # tightness rows: -(Gj Gj^T) mu + rho Gj[:,3] - s = -alpha_J
    M[:q, :q] = -(Gj @ Gj.T)
    M[:q, q] = -1.0
    rhs[:q] = -aj
    M[q, :q] = 1.0  # budget: sum mu = C
    rhs[q] = C
    if lam_active:
        M[:q, q + 1] = Gj[:, 3]
        M[q + 1, :q] = -Gj[:, 3]  # theta_4 = -(G^T mu)_4 + rho = 1
        M[q + 1, q + 1] = 1.0
        rhs[q + 1] = 1.0
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    rho = float(sol[q + 1]) if lam_active else 0.0
    return sol[:q], float(sol[q]), rho


def _master_polish(
    G: np.ndarray, alpha: np.ndarray, C: float, mu: np.ndarray, max_rounds: int = 30
) -> tuple[np.ndarray, float] | None:
    """Exact finish of the bundle master from an approximate support.

    Repairs the support by dropping negative multipliers and admitting cuts
    that rise above the epigraph level, trying both lambda-clamp branches;
    a candidate is only accepted when its primal value meets its own dual
    value, so the result is certified or None.
    """
    m = G.shape[0]
    floor = 1e-9 * max(C, float(mu.max()) if mu.size else 0.0)
    supp = list(np.flatnonzero(mu > floor))
    if not supp:
        supp = [int(np.argmax(mu))]
    seen = set()
    for _ in range(max_rounds):
        key = tuple(sorted(supp))
        if key in seen or not supp:
            return None
        seen.add(key)
        Gj = G[supp]
        aj = alpha[supp]
        best = None
        for lam_active in (True, False):
            mu_j, _s, rho = _master_kkt_branch(Gj, aj, C, lam_active)
            if rho < -1e-9:
                continue
            mu_full = np.zeros(m)
            mu_full[supp] = np.clip(mu_j, 0.0, None)
            ssum = mu_full.sum()
            if ssum <= 0.0:
                continue
            mu_full *= C / ssum
            theta = -(G.T @ mu_full)
            theta[3] += max(rho, 0.0)
            if theta[3] < 1.0 - 1e-9:
                continue
            theta[3] = max(theta[3], 1.0)
            levels = alpha + G @ theta
            s = float(levels.max())
            val = 0.5 * float(theta @ theta) + C * s
            dual_val = _master_dual_value(G, alpha, mu_full)
            if val - dual_val <= 1e-9 * max(1.0, abs(val)):
                return theta, dual_val
            if best is None or val - dual_val < best[0]:
                best = (val - dual_val, mu_j, levels, s)
        if best is None:
            return None
        _, mu_j, levels, s = best
        # repair: drop the most negative weight, admit the highest riser
        changed = False
        if (mu_j < -1e-10 * C).any():
            supp.pop(int(np.argmin(mu_j)))
            changed = True
        riser = int(np.argmax(levels))
        if levels[riser] > s - 1e-12 and riser not in supp:
            supp.append(riser)
            changed = True
        if not changed:
            return None
    return None


def _master_p_value(G: np.ndarray, alpha: np.ndarray, mu: np.ndarray) -> float:
    return -_master_dual_value(G, alpha, mu)


def _solve_master(
    G: np.ndarray,
    alpha: np.ndarray,
    C: float,
    mu0: np.ndarray | None,
    tol_abs: float = 1e-11,
    max_iter: int = 2000,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Bundle master: min 1/2||theta||^2 + C s over the cut epigraph with
    theta_4 >= 1.  An interior-point solve (cvxopt) does the heavy lifting;
    its dual weights are rescaled onto the exact budget so the returned lower
    bound is certified, and the KKT support polish tightens the answer when
    it verifies.  Falls back to pairwise Frank-Wolfe on the simplex dual if
    the interior-point solve fails.  Returns (theta, lower bound, mu)."""
    m = G.shape[0]
    ip = _master_interior_point(G, alpha, C)
    if ip is not None:
        theta_ip, mu_ip = ip
        lower = _master_dual_value(G, alpha, mu_ip)
        polished = _master_polish(G, alpha, C, mu_ip)
        if polished is not None and polished[1] >= lower:
            return polished[0], polished[1], mu_ip
        return theta_ip, lower, mu_ip
    return _solve_master_fw(G, alpha, C, mu0, tol_abs, max_iter)


def _master_interior_point(
    G: np.ndarray, alpha: np.ndarray, C: float
) -> tuple[np.ndarray, np.ndarray] | None:
    """cvxopt solve of the master QP; returns (theta, budget-rescaled mu)."""
    import cvxopt
    import cvxopt.solvers

    m = G.shape[0]
    Gi = np.zeros((m + 1, 5))
    hi = np.zeros(m + 1)
    Gi[:m, :4] = G
    Gi[:m, 4] = -1.0
    hi[:m] = -alpha
    Gi[m, 3] = -1.0
    hi[m] = -1.0
    opts = {"show_progress": False, "abstol": 1e-11, "reltol": 1e-11, "feastol": 1e-11}
    try:
        sol = cvxopt.solvers.qp(
            cvxopt.matrix(np.diag([1.0, 1.0, 1.0, 1.0, 0.0])),
            cvxopt.matrix(np.array([0.0, 0.0, 0.0, 0.0, C])),
            cvxopt.matrix(Gi),
            cvxopt.matrix(hi),
            options=opts,
        )
    except (ValueError, ArithmeticError):
        return None
    if sol["status"] not in ("optimal", "unknown"):
        return None
    theta = np.asarray(sol["x"]).ravel()[:4]
    mu = np.maximum(np.asarray(sol["z"]).ravel()[:m], 0.0)
    ssum = mu.sum()
    if ssum <= 0.0:
        return None
    mu *= C / ssum
    theta[3] = max(theta[3], 1.0)
    return theta, mu


def _solve_master_fw(
    G: np.ndarray,
    alpha: np.ndarray,
    C: float,
    mu0: np.ndarray | None,
    tol_abs: float = 1e-11,
    max_iter: int = 2000,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Fallback master solver: pairwise Frank-Wolfe with away steps and exact
    piecewise line search on the scaled-simplex dual, plus support polish."""
    m = G.shape[0]
    if mu0 is not None and mu0.shape == (m,) and mu0.sum() > 0:
        mu = np.maximum(mu0, 0.0)
        mu *= C / mu.sum()
    else:
        mu = np.zeros(m)
        mu[0] = C
    u = G.T @ mu

    def p_at(u_vec, mu_dot_alpha):
        rho = max(0.0, float(u_vec[3]) + 1.0)
        th = -u_vec.copy()
        th[3] += rho
        return 0.5 * float(th @ th) - mu_dot_alpha - rho

    mu_alpha = float(mu @ alpha)
    best_val = -p_at(u, mu_alpha)
    best_mu = mu.copy()
    for it in range(1, max_iter + 1):
        rho = max(0.0, float(u[3]) + 1.0)
        theta = -u.copy()
        theta[3] += rho
        grad = -(G @ theta) - alpha
        j_fw = int(np.argmin(grad))
        supp = np.flatnonzero(mu > 0.0)
        j_aw = int(supp[np.argmax(grad[supp])])
        fw_gap = float(grad @ mu) - C * float(grad[j_fw])
        val = -p_at(u, mu_alpha)
        if val > best_val:
            best_val, best_mu = val, mu.copy()
        if fw_gap <= tol_abs:
            break
        if it % 16 == 0 or fw_gap <= 16.0 * tol_abs:
            polished = _master_polish(G, alpha, C, mu)
            if polished is not None and polished[1] >= best_val:
                return polished[0], polished[1], mu
        if j_fw == j_aw:
            break
        # exact line search along moving mass from the away to the FW atom;
        # the objective is quadratic on each side of the rho kink
        du = G[j_fw] - G[j_aw]
        dalpha = float(alpha[j_fw] - alpha[j_aw])
        gamma_max = float(mu[j_aw])
        candidates = [gamma_max]
        du4 = float(du[3])
        if du4 != 0.0:
            kink = (-1.0 - float(u[3])) / du4
            if 0.0 < kink < gamma_max:
                candidates.append(kink)
        # piece minimizers: d/dgamma [0.5||theta(gamma)||^2 - ...] = 0
        for use_rho in (True, False):
            if use_rho:
                a2 = float(du[:3] @ du[:3])
                b1 = float(u[:3] @ du[:3]) - dalpha - du4
            else:
                a2 = float(du @ du)
                b1 = float(u @ du) - dalpha
            if a2 > 0.0:
                g_star = -b1 / a2
                if 0.0 < g_star < gamma_max:
                    candidates.append(g_star)
        best_gamma, best_p = 0.0, p_at(u, mu_alpha)
        for g in candidates:
            p_g = p_at(u + g * du, mu_alpha + g * dalpha)
            if p_g < best_p - 0.0:
                best_gamma, best_p = g, p_g
        if best_gamma <= 0.0:
            break
        mu[j_fw] += best_gamma
        mu[j_aw] -= best_gamma
        if mu[j_aw] < 1e-18:
            mu[j_aw] = 0.0
        u += best_gamma * du
        mu_alpha += best_gamma * dalpha
        if it % 1024 == 0:
            u = G.T @ mu
            mu_alpha = float(mu @ alpha)
    polished = _master_polish(G, alpha, C, mu)
    if polished is not None and polished[1] >= best_val:
        return polished[0], polished[1], mu
    return _master_theta(G, best_mu), best_val, best_mu


def mc_soft(
    lifts: PairwiseLiftSet,
    C: float,
    warm_cuts: tuple[np.ndarray, np.ndarray] | None = None,
    max_cuts: int = 400,
    gap_tol: float = 1e-8,
) -> McSolution:
    """Slack-eliminated soft-margin solve at penalty C.

    Cutting-plane bundle on the four-dimensional coefficient space: the
    quadratic term stays exact in the master while the hinge sum is built up
    from subgradient cuts, each cut costing one full margin sweep.  The
    master's dual value is a certified lower bound, so the reported gap is
    verified, not assumed.  Cuts describe the hinge independently of C, so
    the cut pool from one grid point warm-starts the next.
    """
    if C <= 0.0:
        raise InvalidPenalty(f"C must be positive, got {C}")
    Z = lifts.rows

    def hinge_and_cut(theta):
        min_m, arg_rows = lifts.sample_min_margins(theta)
        xi = np.maximum(0.0, 1.0 - min_m)
        violated = np.flatnonzero(xi > 0.0)
        g = -Z[arg_rows[violated]].sum(axis=0) if violated.size else np.zeros(4)
        h = float(xi.sum())
        return h, g

    if warm_cuts is not None and warm_cuts[0].size:
        alphas = list(warm_cuts[0])
        gs = list(warm_cuts[1])
    else:
        alphas, gs = [], []
    seen = {(round(a, 12), *np.round(g, 12)) for a, g in zip(alphas, gs)}

    theta = np.array([0.0, 0.0, 0.0, 1.0])
    best_theta = theta.copy()
    best_f = np.inf
    best_lower = -np.inf
    mu = None
    gap = np.inf
    it = 0
    for it in range(1, max_cuts + 1):
        h, g = hinge_and_cut(theta)
        f = 0.5 * float(theta @ theta) + C * h
        if f < best_f:
            best_theta, best_f = theta.copy(), f
        key = (round(h - float(g @ theta), 12), *np.round(g, 12))
        if key not in seen:
            seen.add(key)
            alphas.append(h - float(g @ theta))
            gs.append(g)
        G = np.asarray(gs)
        al = np.asarray(alphas)
        if mu is not None and mu.shape[0] < G.shape[0]:
            mu = np.concatenate([mu, np.zeros(G.shape[0] - mu.shape[0])])
        master_tol = max(1e-12, 0.1 * gap_tol * max(1.0, abs(min(best_f, 1e300))))
        theta, lower, mu = _solve_master(G, al, C, mu, tol_abs=master_tol)
        best_lower = max(best_lower, lower)
        gap = best_f - best_lower
        if gap <= gap_tol * max(1.0, abs(best_f)):
            break

    margins = Z @ best_theta
    slacks = soft_slacks(lifts, best_theta)
    lam4 = max(best_theta[3], 1.0)
    return McSolution(
        status="soft",
        theta_bar=best_theta,
        coeffs=best_theta[:3] / lam4,
        worst_margin=float(margins.min()),
        active_rows=np.flatnonzero(margins <= 1.0 + 1e-8),
        slacks=slacks,
        objective=best_f,
        gap=float(gap),
        cuts=(np.asarray(alphas), np.asarray(gs)),
        iterations=it,
    )
