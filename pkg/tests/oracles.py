"""Independent reference solvers used to freeze expected values in tests.

Nothing here touches the gradient-flow code paths: QPs are solved by brute
enumeration of active sets over the KKT linear systems, and the toy SVM by
its closed form.
"""

import itertools

import numpy as np


def enumerate_qp_kkt(Q0, c, A=None, b=None, G=None, h=None, tol=1e-9):
    """Solve min 0.5 x'Q0x + c'x s.t. Ax=b, Gx<=h by active-set enumeration.

    Tries every subset of inequality constraints as the active set, solves
    the equality-constrained KKT system, and returns the unique primal-dual
    point that is primal and dual feasible.  Returns (x, lam, mu) or None
    when no subset qualifies (infeasible/unbounded inputs).
    """
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    n = Q0.shape[0]
    c = np.asarray(c, dtype=float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(A.shape[0]) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    G = np.zeros((0, n)) if G is None else np.atleast_2d(np.asarray(G, dtype=float))
    h = np.zeros(G.shape[0]) if h is None else np.atleast_1d(np.asarray(h, dtype=float))
    m, p = A.shape[0], G.shape[0]

    for size in range(p + 1):
        for active in itertools.combinations(range(p), size):
            Ga = G[list(active)]
            k = m + size
            KKT = np.zeros((n + k, n + k))
            KKT[:n, :n] = Q0
            KKT[:n, n:n + m] = A.T
            KKT[:n, n + m:] = Ga.T
            KKT[n:n + m, :n] = A
            KKT[n + m:, :n] = Ga
            rhs = np.concatenate([-c, b, h[list(active)]])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = sol[n:n + m]
            mu_active = sol[n + m:]
            if np.any(mu_active < -tol):
                continue
            if p and np.any(G @ x - h > tol):
                continue
            mu = np.zeros(p)
            mu[list(active)] = np.maximum(mu_active, 0.0)
            return x, lam, mu
    return None


def make_random_qp(rng, n_max=5, m_max=2, p_max=4):
    """A well-posed random QP together with its enumerated KKT point.

    Rejection-samples until the enumeration oracle succeeds with moderate
    multipliers and a cleanly separated active set, so the flow endpoints
    are compared against unambiguous references.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(0, min(m_max, max(n - 1, 0)) + 1))
        p = int(rng.integers(0, p_max + 1))
        W = rng.normal(size=(n, n))
        Q0 = W.T @ W / n + 0.5 * np.eye(n)
        c = rng.normal(size=n)
        x_feas = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        b = A @ x_feas
        G = rng.normal(size=(p, n))
        norms = np.linalg.norm(G, axis=1) if p else np.zeros(0)
        if p:
            G /= norms[:, None]
        h = (G @ x_feas + rng.uniform(-0.2, 1.0, size=p)) if p else np.zeros(0)
        out = enumerate_qp_kkt(Q0, c, A, b, G, h)
        if out is None:
            continue
        x, lam, mu = out
        g_star = G @ x - h if p else np.zeros(0)
        active = mu > 1e-9
        strict = True
        if p:
            if np.any(active) and mu[active].min() < 0.05:
                strict = False          # weakly active constraint
            inactive_slack = -g_star[~active] if np.any(~active) else np.array([1.0])
            if inactive_slack.size and inactive_slack.min() < 0.05:
                strict = False          # near-active inactive constraint
        if not strict or np.max(np.abs(x)) > 10 or (mu.size and mu.max() > 50):
            continue
        return {"Q0": Q0, "c": c, "A": A, "b": b, "G": G, "h": h,
                "x_star": x, "lam_star": lam, "mu_star": mu}


def two_point_svm():
    """Closed-form hard-margin SVM for points (+1, 0), (-1, 0), labels +1/-1.

    Optimum: beta = (1, 0), beta0 = 0, margin 2, both points support
    vectors with mu = 1/2 each.
    """
    points = np.array([[1.0, 0.0], [-1.0, 0.0]])
    labels = np.array([1.0, -1.0])
    return points, labels, np.array([1.0, 0.0]), 0.0, np.array([0.5, 0.5])
