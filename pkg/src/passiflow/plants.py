"""Worked physical plants and every controller derived for them.

Three concrete systems -- the parallel RLC circuit, topologically complete
RLC networks, and a two-zone thermal (HVAC) model -- plus the generic
dynamic-state-feedback machinery for contracting nonlinear systems
``xdot = f(x) + g(x) u``.  Each controller ships with its closed-loop
Lyapunov/storage evaluator so simulations can be audited for monotone
decrease, and each plant exposes its pseudo-gradient description for
cross-checking against the plain state-space right-hand side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import null_space

from .brayton_moser import PseudoGradientSystem
from .primal_dual import ScalarOracle

__all__ = [
    "ParallelRLC",
    "CompleteRLC",
    "HvacParams",
    "DynFeedbackSystem",
    "CertificateUnavailable",
    "prlc_rhs",
    "prlc_equilibrium",
    "prlc_bm",
    "prlc_power_shaping",
    "prlc_shaped_potential",
    "prlc_power_shaping_loop",
    "prlc_krasovskii_pi",
    "prlc_krasovskii_pi_loop",
    "complete_rlc_rhs",
    "complete_rlc_bm",
    "complete_rlc_storage",
    "hvac_rhs",
    "hvac_bm",
    "hvac_equilibrium",
    "hvac_gamma",
    "hvac_power_shaping",
    "hvac_shaped_potential",
    "hvac_power_shaping_loop",
    "hvac_dyn_feedback",
    "dyn_feedback_alpha",
    "dyn_feedback_rhs",
    "dyn_feedback_control",
    "dyn_feedback_loop",
]


class CertificateUnavailable(UserWarning):
    """Raised as a warning when a passivity certificate's parameter condition fails."""


# ---------------------------------------------------------------------------
# Parallel RLC circuit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParallelRLC:
    """Series R-L branch driven by a source, parallel G-C load."""

    R: float
    G: float
    L: float
    C: float

    def __post_init__(self):
        if min(self.R, self.G, self.L, self.C) <= 0:
            raise ValueError("all RLC parameters must be strictly positive")

    @property
    def admissible_certificate_holds(self) -> bool:
        """Parameter condition under which the shaped pair is sign-definite."""
        return self.G ** 2 * self.L >= self.C


def prlc_rhs(p: ParallelRLC, state, Vs: float) -> np.ndarray:
    """((Vs - R i - v) / L, (i - G v) / C) for state (i, v)."""
    i, v = state
    return np.array([(Vs - p.R * i - v) / p.L, (i - p.G * v) / p.C])


def prlc_equilibrium(p: ParallelRLC, v_star: float):
    """(i*, Vs*) consistent with holding the capacitor voltage at v*."""
    i_star = p.G * v_star
    return i_star, v_star + p.R * i_star


def prlc_bm(p: ParallelRLC) -> PseudoGradientSystem:
    """Mixed-potential description: diag(-L, C) xdot = grad P - (1, 0) Vs.

    ``P(i, v) = -G v^2 / 2 + v i + R i^2 / 2``.
    """
    R, G = p.R, p.G

    return PseudoGradientSystem(
        n=2,
        m=1,
        Q=lambda x: np.diag([-p.L, p.C]),
        P=lambda x: -0.5 * G * x[1] ** 2 + x[0] * x[1] + 0.5 * R * x[0] ** 2,
        grad_P=lambda x: np.array([x[1] + R * x[0], x[0] - G * x[1]]),
        hess_P=lambda x: np.array([[R, 1.0], [1.0, -G]]),
        G=lambda x: np.array([[-1.0], [0.0]]),
    )


def prlc_power_shaping(p: ParallelRLC, state, i_star: float, K: float) -> float:
    """Source voltage ``Vs = -K (i - i*) + (R + 1/G) i*``.

    Warns (without refusing) when ``G^2 L < C``: the shaped-pair certificate
    behind this law is then unavailable, though the control value itself is
    still well defined.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    if not p.admissible_certificate_holds:
        warnings.warn(
            "G^2 L < C: shaped-pair certificate unavailable for this parameter set",
            CertificateUnavailable,
            stacklevel=2,
        )
    i = state[0]
    return -K * (i - i_star) + (p.R + 1.0 / p.G) * i_star


def prlc_shaped_potential(p: ParallelRLC, state, i_star: float, K: float) -> float:
    """Closed-loop potential ``(Gv - i)^2 / 2G + (R + 1/G + K)(i - i*)^2 / 2``."""
    i, v = state
    return (
        (p.G * v - i) ** 2 / (2.0 * p.G)
        + 0.5 * (p.R + 1.0 / p.G + K) * (i - i_star) ** 2
    )


def prlc_power_shaping_loop(p: ParallelRLC, i_star: float, K: float):
    """(rhs, lyapunov) for the power-shaped closed loop over state (i, v)."""

    def rhs(t, x):
        return prlc_rhs(p, x, prlc_power_shaping(p, x, i_star, K))

    def lyap(t, x):
        return prlc_shaped_potential(p, x, i_star, K)

    return rhs, lyap


def prlc_krasovskii_pi(p: ParallelRLC, state, ctrl_state: float,
                       i_star: float, v_star: float, K_P: float, K_I: float):
    """PI law on the current error: ``Vs = -K_P (i - i*) - K_I z + R i* + v*``.

    ``ctrl_state`` is the accumulated integral ``z`` of ``i - i*``; its rate
    is returned alongside the control so the caller can integrate it jointly
    with the plant.  No parameter condition is needed here.
    """
    if K_P < 0 or K_I < 0:
        raise ValueError("K_P and K_I must be >= 0")
    i = state[0]
    Vs = -K_P * (i - i_star) - K_I * ctrl_state + p.R * i_star + v_star
    return Vs, i - i_star


def prlc_krasovskii_pi_loop(p: ParallelRLC, i_star: float, v_star: float,
                            K_P: float, K_I: float):
    """(rhs, lyapunov) over augmented state (i, v, z).

    The Lyapunov function is the velocity storage plus the integral-error
    penalty: ``L i_t^2 / 2 + C v_t^2 / 2 + K_I (i - i*)^2 / 2``.
    """

    def rhs(t, x):
        Vs, zdot = prlc_krasovskii_pi(p, x[:2], x[2], i_star, v_star, K_P, K_I)
        di, dv = prlc_rhs(p, x[:2], Vs)
        return np.array([di, dv, zdot])

    def lyap(t, x):
        di, dv, _ = rhs(t, x)
        return 0.5 * p.L * di ** 2 + 0.5 * p.C * dv ** 2 + 0.5 * K_I * (x[0] - i_star) ** 2

    return rhs, lyap


# ---------------------------------------------------------------------------
# Topologically complete RLC networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompleteRLC:
    """Network reduced to inductor currents i and capacitor voltages v.

    -L di/dt = grad_i P - Bs Vs,   C dv/dt = grad_v P,
    P(i, v) = i^T Gamma v + content(i) - cocontent(v).

    ``content``/``cocontent`` are the resistive potentials (convex for
    passive resistors); ``Bs`` is the constant source incidence matrix.
    """

    L: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    content: ScalarOracle
    cocontent: ScalarOracle
    Bs: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        Bs = np.atleast_2d(np.asarray(self.Bs, dtype=float))
        for name, Mx in (("L", L), ("C", C)):
            if np.linalg.eigvalsh(0.5 * (Mx + Mx.T))[0] <= 0:
                raise ValueError(f"{name} must be positive definite")
        if Gamma.shape != (L.shape[0], C.shape[0]):
            raise ValueError("Gamma must be n_L x n_C")
        if Bs.shape[0] != L.shape[0]:
            raise ValueError("Bs must have n_L rows")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "Bs", Bs)

    @property
    def n_L(self) -> int:
        return self.L.shape[0]

    @property
    def n_C(self) -> int:
        return self.C.shape[0]

    @property
    def n_E(self) -> int:
        return self.Bs.shape[1]

    def split(self, state):
        state = np.asarray(state, dtype=float)
        return state[: self.n_L], state[self.n_L:]


def complete_rlc_rhs(c: CompleteRLC, state, Vs) -> np.ndarray:
    i, v = c.split(state)
    Vs = np.atleast_1d(np.asarray(Vs, dtype=float))
    grad_i = c.Gamma @ v + c.content.grad(i)
    grad_v = c.Gamma.T @ i - c.cocontent.grad(v)
    di = np.linalg.solve(c.L, c.Bs @ Vs - grad_i)
    dv = np.linalg.solve(c.C, grad_v)
    return np.concatenate([di, dv])


def complete_rlc_bm(c: CompleteRLC) -> PseudoGradientSystem:
    n = c.n_L + c.n_C

    def P(x):
        i, v = c.split(x)
        return float(i @ c.Gamma @ v + c.content.value(i) - c.cocontent.value(v))

    def grad_P(x):
        i, v = c.split(x)
        return np.concatenate([c.Gamma @ v + c.content.grad(i),
                               c.Gamma.T @ i - c.cocontent.grad(v)])

    def hess_P(x):
        i, v = c.split(x)
        H = np.zeros((n, n))
        H[: c.n_L, : c.n_L] = c.content.hess(i)
        H[: c.n_L, c.n_L:] = c.Gamma
        H[c.n_L:, : c.n_L] = c.Gamma.T
        H[c.n_L:, c.n_L:] = -c.cocontent.hess(v)
        return H

    def Q(x):
        Qm = np.zeros((n, n))
        Qm[: c.n_L, : c.n_L] = -c.L
        Qm[c.n_L:, c.n_L:] = c.C
        return Qm

    def G(x):
        Gm = np.zeros((n, c.n_E))
        Gm[: c.n_L, :] = -c.Bs
        return Gm

    return PseudoGradientSystem(n=n, m=c.n_E, Q=Q, P=P, grad_P=grad_P,
                                hess_P=hess_P, G=G)


def complete_rlc_storage(c: CompleteRLC, rates) -> float:
    """Velocity storage ``i_t^T L i_t / 2 + v_t^T C v_t / 2``."""
    di, dv = c.split(rates)
    return float(0.5 * di @ c.L @ di + 0.5 * dv @ c.C @ dv)


# ---------------------------------------------------------------------------
# Two-zone HVAC thermal network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HvacParams:
    """Two zones coupled through a 3R2C wall, each with an air supply.

    The supply temperature must stay away from both zone temperatures at
    runtime; several control expressions divide by ``T_s - T_i``.
    """

    C1: float = 10.0
    C2: float = 10.0
    C3: float = 40.0
    C4: float = 40.0
    R31: float = 5.0
    R42: float = 5.0
    R34: float = 5.0
    R10: float = 5.0
    R20: float = 5.0
    c_p: float = 1.0
    T_s: float = 10.0
    T_inf: float = 30.0

    def __post_init__(self):
        vals = (self.C1, self.C2, self.C3, self.C4, self.R31, self.R42,
                self.R34, self.R10, self.R20, self.c_p)
        if min(vals) <= 0:
            raise ValueError("capacitances, resistances and c_p must be positive")

    @property
    def cap(self) -> np.ndarray:
        return np.array([self.C1, self.C2, self.C3, self.C4])


def hvac_rhs(h: HvacParams, T, u) -> np.ndarray:
    """Capacitance-scaled heat balances of the four temperature nodes."""
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    q1 = (T[2] - T[0]) / h.R31 + (h.T_inf - T[0]) / h.R10 + u[0] * h.c_p * (h.T_s - T[0])
    q2 = (T[3] - T[1]) / h.R42 + (h.T_inf - T[1]) / h.R20 + u[1] * h.c_p * (h.T_s - T[1])
    q3 = (T[0] - T[2]) / h.R31 + (T[3] - T[2]) / h.R34
    q4 = (T[1] - T[3]) / h.R42 + (T[2] - T[3]) / h.R34
    return np.array([q1 / h.C1, q2 / h.C2, q3 / h.C3, q4 / h.C4])


def hvac_bm(h: HvacParams) -> PseudoGradientSystem:
    """Pseudo-gradient form with resistor-network potential P(T).

    ``Q = -diag(C)`` and the input matrix couples each zone to its supply:
    column i is ``-c_p (T_s - T_i)`` on the zone row.
    """

    def P(T):
        return float(
            (T[2] - T[0]) ** 2 / (2 * h.R31)
            + (T[3] - T[1]) ** 2 / (2 * h.R42)
            + (T[2] - T[3]) ** 2 / (2 * h.R34)
            + (h.T_inf - T[0]) ** 2 / (2 * h.R10)
            + (h.T_inf - T[1]) ** 2 / (2 * h.R20)
        )

    def grad_P(T):
        return np.array([
            -(T[2] - T[0]) / h.R31 - (h.T_inf - T[0]) / h.R10,
            -(T[3] - T[1]) / h.R42 - (h.T_inf - T[1]) / h.R20,
            (T[2] - T[0]) / h.R31 + (T[2] - T[3]) / h.R34,
            (T[3] - T[1]) / h.R42 - (T[2] - T[3]) / h.R34,
        ])

    def hess_P(T):
        H = np.zeros((4, 4))
        H[0, 0] = 1 / h.R31 + 1 / h.R10
        H[1, 1] = 1 / h.R42 + 1 / h.R20
        H[2, 2] = 1 / h.R31 + 1 / h.R34
        H[3, 3] = 1 / h.R42 + 1 / h.R34
        H[0, 2] = H[2, 0] = -1 / h.R31
        H[1, 3] = H[3, 1] = -1 / h.R42
        H[2, 3] = H[3, 2] = -1 / h.R34
        return H

    def G(T):
        Gm = np.zeros((4, 2))
        Gm[0, 0] = -h.c_p * (h.T_s - T[0])
        Gm[1, 1] = -h.c_p * (h.T_s - T[1])
        return Gm

    return PseudoGradientSystem(
        n=4, m=2,
        Q=lambda T: -np.diag(h.cap),
        P=P, grad_P=grad_P, hess_P=hess_P, G=G,
    )


def hvac_equilibrium(h: HvacParams, T1_star: float, T2_star: float):
    """Wall temperatures and mass flows holding the zones at their targets.

    Solves the two wall balances for (T3*, T4*), then reads off u* from the
    zone balances.
    """
    for Tz in (T1_star, T2_star):
        if abs(h.T_s - Tz) < 1e-12:
            raise ValueError("target equal to supply temperature (division by zero)")
    # (T1-T3)/R31 + (T4-T3)/R34 = 0 ;  (T2-T4)/R42 + (T3-T4)/R34 = 0
    Amat = np.array([
        [1.0 / h.R31 + 1.0 / h.R34, -1.0 / h.R34],
        [-1.0 / h.R34, 1.0 / h.R42 + 1.0 / h.R34],
    ])
    rhs = np.array([T1_star / h.R31, T2_star / h.R42])
    T3_star, T4_star = np.linalg.solve(Amat, rhs)
    u1 = -((T3_star - T1_star) / h.R31 + (h.T_inf - T1_star) / h.R10) / (h.c_p * (h.T_s - T1_star))
    u2 = -((T4_star - T2_star) / h.R42 + (h.T_inf - T2_star) / h.R20) / (h.c_p * (h.T_s - T2_star))
    T_star = np.array([T1_star, T2_star, T3_star, T4_star])
    return T_star, np.array([u1, u2])


def hvac_gamma(h: HvacParams, T) -> np.ndarray:
    """Integrated output port: ``Gamma_i = -c_p (T_s - T_i)^2 / 2``."""
    T = np.asarray(T, dtype=float)
    return -0.5 * h.c_p * np.array([(T[0] - h.T_s) ** 2, (T[1] - h.T_s) ** 2])


def _hvac_shaping_offsets(h: HvacParams, targets, k, k1, k2):
    T_star, u_star = hvac_equilibrium(h, *targets)
    bm = hvac_bm(h)
    kI_inv = np.array([1.0 / k1, 1.0 / k2])
    a = k * kI_inv * (np.linalg.pinv(bm.G(T_star)) @ bm.grad_P(T_star)) - hvac_gamma(h, T_star)
    return T_star, u_star, a


def hvac_power_shaping(h: HvacParams, T, Tdot, targets, k: float,
                       k1: float, k2: float, alpha: float) -> np.ndarray:
    """Integral-of-output law with optional output damping.

    ``u_i = -(alpha/k) c_p (T_s - T_i) Tdot_i - (k_i/k)(Gamma_i - Gamma_i* - (k/k_i) u_i*)``
    """
    if min(k, k1, k2) <= 0 or alpha < 0:
        raise ValueError("k, k1, k2 must be > 0 and alpha >= 0")
    T = np.asarray(T, dtype=float)
    Tdot = np.asarray(Tdot, dtype=float)
    for Tz in T[:2]:
        if abs(h.T_s - Tz) < 1e-12:
            raise ValueError("zone temperature equals supply temperature")
    T_star, u_star, a = _hvac_shaping_offsets(h, targets, k, k1, k2)
    gam = hvac_gamma(h, T)
    gam_star = hvac_gamma(h, T_star)
    kvec = np.array([k1, k2])
    damping = -(alpha / k) * h.c_p * (h.T_s - T[:2]) * Tdot[:2]
    return damping - (kvec / k) * (gam - gam_star - (k / kvec) * u_star)


def hvac_shaped_potential(h: HvacParams, T, targets, k, k1, k2) -> float:
    """Closed-loop potential ``k P(T) + sum_i k_i (Gamma_i + a_i)^2 / 2``."""
    _, _, a = _hvac_shaping_offsets(h, targets, k, k1, k2)
    gam = hvac_gamma(h, T)
    kvec = np.array([k1, k2])
    return float(k * hvac_bm(h).P(np.asarray(T, dtype=float))
                 + 0.5 * np.sum(kvec * (gam + a) ** 2))


def hvac_power_shaping_loop(h: HvacParams, targets, k, k1, k2, alpha):
    """(rhs, lyapunov) over state T; the Tdot/u implicit loop is solved exactly.

    Substituting the control into the zone balances gives
    ``Tdot_i (C_i + (alpha/k) c_p^2 (T_s - T_i)^2) = q_i(T) - c_p (T_s - T_i) w_i(T)``
    with ``w`` the integral part of the law, so the closed loop stays an
    explicit ODE.
    """
    T_star, u_star, a = _hvac_shaping_offsets(h, targets, k, k1, k2)
    kvec = np.array([k1, k2])

    def rhs(t, T):
        T = np.asarray(T, dtype=float)
        passive = hvac_rhs(h, T, np.zeros(2))         # u = 0 part
        gam = hvac_gamma(h, T)
        w = (kvec / k) * (gam + a)                    # integral part of the law
        dT = passive.copy()
        for i, Ci in enumerate((h.C1, h.C2)):
            b = h.c_p * (h.T_s - T[i])
            denom = Ci + (alpha / k) * b * b
            dT[i] = (passive[i] * Ci - b * w[i]) / denom
        return dT

    def lyap(t, T):
        gam = hvac_gamma(h, T)
        return float(k * hvac_bm(h).P(np.asarray(T, dtype=float))
                     + 0.5 * np.sum(kvec * (gam + a) ** 2))

    return rhs, lyap


# ---------------------------------------------------------------------------
# Dynamic state feedback for contracting systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DynFeedbackSystem:
    """Contracting plant ``xdot = f(x) + g(x) u`` with metric M.

    ``jac_g(x, k)`` is the Jacobian of the k-th input column.  ``gamma``
    (the potential whose gradient is ``M g``) may be closed form; otherwise
    it is evaluated as a straight-line path integral from ``x_ref``, which
    is well defined exactly when the integrability assumption holds.
    """

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    jac_f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    jac_g: Callable[[np.ndarray, int], np.ndarray]
    M: np.ndarray
    gamma: Callable[[np.ndarray], np.ndarray] | None = None
    x_ref: np.ndarray | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        np.linalg.cholesky(M)  # symmetric PD required
        object.__setattr__(self, "M", M)
        if self.x_ref is None:
            object.__setattr__(self, "x_ref", np.zeros(self.n))

    def gamma_value(self, x) -> np.ndarray:
        if self.gamma is not None:
            return np.asarray(self.gamma(x), dtype=float)
        # Straight-path quadrature of (M g)^T dx; closure is guaranteed by A3.
        d = np.asarray(x, dtype=float) - self.x_ref
        nodes, weights = np.polynomial.legendre.leggauss(32)
        s = 0.5 * (nodes + 1.0)
        out = np.zeros(self.m)
        for sk, wk in zip(s, weights):
            out += 0.5 * wk * (self.g(self.x_ref + sk * d).T @ self.M @ d)
        return out

    def check_assumptions(self, samples) -> dict:
        """Numerically probe contraction, annihilator, and integrability."""
        a1 = -np.inf
        a2 = 0.0
        a3 = 0.0
        for x in samples:
            x = np.asarray(x, dtype=float)
            J = self.jac_f(x)
            a1 = max(a1, float(np.linalg.eigvalsh(self.M @ J + J.T @ self.M)[-1]))
            g = self.g(x)
            g_perp = null_space(g.T).T
            for k in range(self.m):
                Jg = self.jac_g(x, k)
                a2 = max(a2, float(np.max(np.abs(g_perp @ Jg), initial=0.0)))
                MJg = self.M @ Jg
                a3 = max(a3, float(np.max(np.abs(MJg - MJg.T))))
        return {
            "contraction_max_eig": a1, "A1": a1 < 0,
            "annihilator_residual": a2, "A2": a2 <= 1e-8,
            "integrability_residual": a3, "A3": a3 <= 1e-8,
        }


def dyn_feedback_alpha(sys: DynFeedbackSystem, x, xdot) -> np.ndarray:
    """``alpha = -(g^T g)^{-1} g^T gdot``, the unique matrix with gdot + g alpha = 0."""
    g = sys.g(np.asarray(x, dtype=float))
    gdot = np.column_stack([sys.jac_g(x, k) @ xdot for k in range(sys.m)])
    gram = g.T @ g
    try:
        np.linalg.cholesky(gram)  # PD gram == full column rank
    except np.linalg.LinAlgError as exc:
        raise ValueError("input matrix is rank deficient") from exc
    return -np.linalg.solve(gram, g.T @ gdot)


def dyn_feedback_rhs(sys: DynFeedbackSystem, x, u, vdot):
    """One step of the plant + feedback-state dynamics.

    Returns ``(xdot, udot, y)`` with ``udot = alpha u + beta + vdot``,
    ``beta = -g^T M xdot`` and output ``y = g^T M xdot``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g = sys.g(x)
    xdot = sys.f(x) + g @ u
    alpha = dyn_feedback_alpha(sys, x, xdot)
    y = g.T @ sys.M @ xdot
    udot = alpha @ u - y + np.asarray(vdot, dtype=float)
    return xdot, udot, y


def dyn_feedback_control(sys: DynFeedbackSystem, x, xdot, x_star,
                         k1: float, kd: float, ki: float) -> np.ndarray:
    """``vdot = (1/k1)(-kd y - ki (Gamma(x) - Gamma(x*)))``."""
    if k1 <= 0 or ki <= 0 or kd < 0:
        raise ValueError("need k1 > 0, ki > 0, kd >= 0")
    y = sys.g(np.asarray(x, dtype=float)).T @ sys.M @ np.asarray(xdot, dtype=float)
    return (-kd * y - ki * (sys.gamma_value(x) - sys.gamma_value(x_star))) / k1


def dyn_feedback_loop(sys: DynFeedbackSystem, x_star, k1: float, kd: float, ki: float):
    """(rhs, lyapunov) over augmented state (x, u) for the full control loop.

    The Lyapunov function is ``k1 xdot^T M xdot / 2 + ki |Gamma - Gamma*|^2 / 2``.
    """
    gamma_star = sys.gamma_value(x_star)

    def rhs(t, z):
        x, u = z[: sys.n], z[sys.n:]
        g = sys.g(x)
        xdot = sys.f(x) + g @ u
        vdot = (-kd * (g.T @ sys.M @ xdot)
                - ki * (sys.gamma_value(x) - gamma_star)) / k1
        _, udot, _ = dyn_feedback_rhs(sys, x, u, vdot)
        return np.concatenate([xdot, udot])

    def lyap(t, z):
        x, u = z[: sys.n], z[sys.n:]
        xdot = sys.f(x) + sys.g(x) @ u
        err = sys.gamma_value(x) - gamma_star
        return float(0.5 * k1 * xdot @ sys.M @ xdot + 0.5 * ki * err @ err)

    return rhs, lyap


def hvac_dyn_feedback(h: HvacParams) -> DynFeedbackSystem:
    """HVAC as a contracting system with metric diag(C) and closed-form Gamma."""

    def f(T):
        return hvac_rhs(h, T, np.zeros(2))

    jac = np.zeros((4, 4))
    jac[0, 0] = -(1 / h.R31 + 1 / h.R10) / h.C1
    jac[0, 2] = (1 / h.R31) / h.C1
    jac[1, 1] = -(1 / h.R42 + 1 / h.R20) / h.C2
    jac[1, 3] = (1 / h.R42) / h.C2
    jac[2, 0] = (1 / h.R31) / h.C3
    jac[2, 2] = -(1 / h.R31 + 1 / h.R34) / h.C3
    jac[2, 3] = (1 / h.R34) / h.C3
    jac[3, 1] = (1 / h.R42) / h.C4
    jac[3, 2] = (1 / h.R34) / h.C4
    jac[3, 3] = -(1 / h.R42 + 1 / h.R34) / h.C4

    def g(T):
        Gm = np.zeros((4, 2))
        Gm[0, 0] = h.c_p * (h.T_s - T[0]) / h.C1
        Gm[1, 1] = h.c_p * (h.T_s - T[1]) / h.C2
        return Gm

    def jac_g(T, k):
        J = np.zeros((4, 4))
        if k == 0:
            J[0, 0] = -h.c_p / h.C1
        else:
            J[1, 1] = -h.c_p / h.C2
        return J

    return DynFeedbackSystem(
        n=4, m=2,
        f=f, jac_f=lambda T: jac,
        g=g, jac_g=jac_g,
        M=np.diag(h.cap),
        gamma=lambda T: hvac_gamma(h, T),
    )
