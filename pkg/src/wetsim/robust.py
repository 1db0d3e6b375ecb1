"""Robust max-min harvested-energy beamforming.

Solves

    maximize   t
    s.t.       min_{||eta_i|| <= eps_i} (h_i + eta_i)^H C (h_i + eta_i) >= t   for all i
               tr(C) <= P,  C >= 0

through the S-procedure LMI reformulation

    T_i(C, t, mu_i) = [[mu_i I + C,  C h_i       ],
                       [h_i^H C,     h_i^H C h_i - t - mu_i eps_i^2]]  >= 0

with a self-implemented log-det barrier interior-point method that
path-follows the max-t objective directly over (C, {mu_i}, t).  Receivers
with eps = 0 bypass the LMI in favor of the plain inequality h^H C h >= t,
since the S-procedure's strict-interior precondition fails for an empty ball.

Two accelerations keep desk-scale campaigns fast without touching the
contract: an active-set loop adds a receiver's LMI only when the exact
ball-minimum oracle ``worst_case_energy`` finds it violated, and the reported
level t is always the oracle-certified minimum achieved by the returned
covariance, so the feasibility certificate holds by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from wetsim.channel import TransmitCovariance
from wetsim.codebook import BeamVector
from wetsim.errors import ConfigurationError, DimensionError

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iterations"
STATUS_NUMERICS = "infeasible-numerics"

RANK_ONE_THRESHOLD = 0.99


@dataclass(frozen=True)
class RobustSpec:
    """Input to the solver: estimated effective channel vectors (m, K) and
    per-receiver uncertainty radii (m,), plus the sum-power budget."""

    channels: np.ndarray
    epsilons: np.ndarray
    power_budget: float

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        eps = np.atleast_1d(np.asarray(self.epsilons, dtype=float))
        if H.shape[0] != eps.shape[0]:
            raise DimensionError("one epsilon per channel required")
        if H.shape[0] < 1:
            raise ConfigurationError("need at least one receiver")
        if np.any(eps < 0):
            raise ConfigurationError("epsilons must be non-negative")
        if self.power_budget <= 0:
            raise ConfigurationError("power budget must be positive")
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "epsilons", eps)

    @property
    def num_ers(self) -> int:
        return self.channels.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.channels.shape[1]


@dataclass
class CovarianceSolution:
    """Solver output: covariance, max-min level t, S-procedure multipliers."""

    cov: TransmitCovariance
    t: float
    duals: np.ndarray
    solver_status: str
    iterations: int = 0
    dropped_ers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def to_json(self) -> str:
        c = self.cov.entries
        w = np.linalg.eigvalsh(c)
        trace = float(w.sum())
        return json.dumps(
            {
                "t": self.t,
                "status": self.solver_status,
                "iterations": self.iterations,
                "duals": list(self.duals),
                "cov_real": c.real.tolist(),
                "cov_imag": c.imag.tolist(),
                "trace": self.cov.trace,
                "rank_ratio": min(float(w[-1]) / trace, 1.0) if trace > 0 else 1.0,
            }
        )


@dataclass(frozen=True)
class ExtractedBeam:
    """Dominant-eigenvector beam plus the rank-1 energy ratio lambda_1/trace."""

    beam: BeamVector
    rank_ratio: float
    rank_deficient: bool


def _cov_entries(cov) -> np.ndarray:
    return cov.entries if isinstance(cov, TransmitCovariance) else np.asarray(cov, dtype=complex)


def lmi_block(cov, t: float, mu: float, h_hat: np.ndarray, eps: float) -> np.ndarray:
    """Assemble the (K+1)x(K+1) S-procedure block matrix T(C, t, mu)."""
    C = _cov_entries(cov)
    h = np.asarray(h_hat, dtype=complex)
    if C.shape[0] != h.shape[0]:
        raise DimensionError("covariance and channel dimensions differ")
    K = h.size
    T = np.zeros((K + 1, K + 1), dtype=complex)
    Ch = C @ h
    T[:K, :K] = mu * np.eye(K) + C
    T[:K, K] = Ch
    T[K, :K] = Ch.conj()
    T[K, K] = np.real(h.conj() @ Ch) - t - mu * eps**2
    return T


def _wce_many(C: np.ndarray, H: np.ndarray, eps: np.ndarray, bisect_iters: int = 72) -> np.ndarray:
    """Exact min of (h+eta)^H C (h+eta) over ||eta|| <= eps, vectorized over
    rows of H.  C must be PSD (small negative eigenvalues are clamped)."""
    w, V = np.linalg.eigh(0.5 * (C + C.conj().T))
    w = np.maximum(w, 0.0)
    B = H @ V.conj()  # row i holds eigenbasis coords of h_i
    absb2 = np.abs(B) ** 2
    nominal = absb2 @ w  # h^H C h

    out = np.where(nominal > 0.0, nominal, 0.0)
    pos = w > 1e-14 * max(w.max(initial=0.0), 1.0)
    range_norm2 = absb2[:, pos].sum(axis=1)
    eps2 = eps**2
    # the unconstrained minimizer (null space aside) may sit inside the ball
    out[(eps > 0.0) & (range_norm2 <= eps2)] = 0.0

    need = np.flatnonzero((eps > 0.0) & (range_norm2 > eps2))
    if need.size == 0:
        return out
    a2 = absb2[need]
    e2 = eps2[need]
    w2a2 = a2 * w**2
    lo = np.zeros(need.size)
    hi = np.sqrt(w2a2.sum(axis=1)) / eps[need]
    # secular equation: ||eta(lam)||^2 = sum w^2 |b|^2 / (w+lam)^2 = eps^2,
    # strictly decreasing in lam on (0, inf); bisect all rows at once
    for _ in range(bisect_iters):
        lam = 0.5 * (lo + hi)
        above = (w2a2 / (w + lam[:, None]) ** 2).sum(axis=1) > e2
        lo = np.where(above, lam, lo)
        hi = np.where(above, hi, lam)
    lam = (0.5 * (lo + hi))[:, None]
    out[need] = np.maximum(0.0, (w * a2 * lam**2 / (w + lam) ** 2).sum(axis=1))
    return out


def worst_case_energy(cov, h_hat: np.ndarray, eps: float) -> float:
    """Exact worst-case received energy of one receiver over its error ball."""
    C = _cov_entries(cov)
    h = np.asarray(h_hat, dtype=complex)
    if C.shape[0] != h.shape[0]:
        raise DimensionError("covariance and channel dimensions differ")
    tr = float(np.trace(C).real)
    if np.linalg.eigvalsh(0.5 * (C + C.conj().T)).min() < -1e-9 * max(tr, 1.0):
        raise ConfigurationError("covariance must be PSD")
    if eps < 0:
        raise ConfigurationError("eps must be non-negative")
    return float(_wce_many(C, h[None, :], np.array([eps]))[0])


# ---------------------------------------------------------------------------
# Interior-point core (all quantities normalized: P = 1, max ||h|| = 1)
# ---------------------------------------------------------------------------


def _hermitian_basis(K: int) -> list[np.ndarray]:
    basis = []
    for a in range(K):
        E = np.zeros((K, K), dtype=complex)
        E[a, a] = 1.0
        basis.append(E)
    for a in range(K):
        for b in range(a + 1, K):
            E = np.zeros((K, K), dtype=complex)
            E[a, b] = 1.0
            E[b, a] = 1.0
            basis.append(E)
            E = np.zeros((K, K), dtype=complex)
            E[a, b] = 1.0j
            E[b, a] = -1.0j
            basis.append(E)
    return basis


class _MaxT:
    """Barrier path-following on  maximize t  over x = (C params, {mu_i}, t)
    subject to the S-procedure LMIs, C >= 0, tr(C) <= 1 and mu_i >= 0."""

    def __init__(self, H: np.ndarray, eps: np.ndarray, K: int):
        self.K = K
        lmi_mask = eps > 0
        self.H_lmi = H[lmi_mask]
        self.eps2 = eps[lmi_mask] ** 2
        self.H_sc = H[~lmi_mask]
        self.lmi_mask = lmi_mask
        self.m = self.H_lmi.shape[0]
        self.m0 = self.H_sc.shape[0]
        self.nC = K * K
        self.n = self.nC + self.m + 1
        self.t_idx = self.n - 1
        basis = _hermitian_basis(K)
        self.basis = basis

        d = K + 1
        if self.m:
            A = np.zeros((self.m, self.n, d, d), dtype=complex)
            for i in range(self.m):
                h = self.H_lmi[i]
                for j, Bj in enumerate(basis):
                    Bh = Bj @ h
                    A[i, j, :K, :K] = Bj
                    A[i, j, :K, K] = Bh
                    A[i, j, K, :K] = Bh.conj()
                    A[i, j, K, K] = np.real(h.conj() @ Bh)
                A[i, self.nC + i, :K, :K] = np.eye(K)
                A[i, self.nC + i, K, K] = -self.eps2[i]
                A[i, self.t_idx, K, K] = -1.0
            self.A_lmi = A
            self.A_lmi_swap = np.ascontiguousarray(A.transpose(1, 0, 2, 3))
        else:
            self.A_lmi = None
            self.A_lmi_swap = None

        Ac = np.zeros((1, self.n, K, K), dtype=complex)
        for j, Bj in enumerate(basis):
            Ac[0, j] = Bj
        self.A_cov = Ac
        self.A_cov_swap = np.ascontiguousarray(Ac.transpose(1, 0, 2, 3))

        # scalar constraints: [1 - tr(C), mu_i, h^H C h - t for eps = 0 ERs]
        q = 1 + self.m + self.m0
        G = np.zeros((q, self.n))
        g0 = np.zeros(q)
        g0[0] = 1.0
        G[0, :K] = -1.0  # diag basis elements come first
        for i in range(self.m):
            G[1 + i, self.nC + i] = 1.0
        for i in range(self.m0):
            h = self.H_sc[i]
            for j, Bj in enumerate(basis):
                G[1 + self.m + i, j] = np.real(h.conj() @ (Bj @ h))
            G[1 + self.m + i, self.t_idx] = -1.0
        self.G = G
        self.g0 = g0

        self.nu = self.m * d + K + q  # total barrier parameter

    # -- affine evaluation ---------------------------------------------------

    def _lmi_values(self, x: np.ndarray):
        mats = []
        if self.m:
            mats.append((np.tensordot(x, self.A_lmi, axes=([0], [1])), self.A_lmi, self.A_lmi_swap))
        mats.append((np.tensordot(x, self.A_cov, axes=([0], [1])), self.A_cov, self.A_cov_swap))
        return mats

    def _barrier(self, x: np.ndarray):
        """(value, cache) of the log-det/log barrier, or (None, None) outside
        the domain."""
        g = self.g0 + self.G @ x
        if np.any(g <= 0):
            return None, None
        total = -np.log(g).sum()
        groups = []
        for F, A, A_swap in self._lmi_values(x):
            try:
                L = np.linalg.cholesky(F)
            except np.linalg.LinAlgError:
                return None, None
            total -= 2.0 * np.log(np.einsum("mii->mi", L).real).sum()
            groups.append((F, A, A_swap))
        return total, (groups, g)

    def initial_point(self, C0: np.ndarray) -> np.ndarray:
        """Strictly feasible start built around a PD covariance with
        tr(C0) < 1: per-receiver mu maximizing the Schur margin, then t below
        every margin."""
        K = self.K
        x = np.zeros(self.n)
        w, V = np.linalg.eigh(C0)
        for j, Bj in enumerate(self.basis):
            x[j] = np.real(np.trace(Bj.conj().T @ C0)) / (2.0 if j >= K else 1.0)
        # diag basis overlaps itself once, off-diag pairs twice; fix diag scale
        for j in range(K):
            x[j] = C0[j, j].real

        margins = []
        if self.m:
            B = self.H_lmi @ V.conj()
            absb2 = np.abs(B) ** 2
            mus = np.logspace(-8, 2, 40)
            # psi(mu) = sum w|b|^2 mu/(w+mu) - mu eps^2, the Schur margin of T
            psi = (absb2[:, None, :] * (w * mus[:, None] / (w + mus[:, None]))[None, :, :]).sum(axis=2)
            psi -= mus[None, :] * self.eps2[:, None]
            best = psi.argmax(axis=1)
            for i in range(self.m):
                x[self.nC + i] = mus[best[i]]
                margins.append(psi[i, best[i]])
        for i in range(self.m0):
            h = self.H_sc[i]
            margins.append(float(np.real(h.conj() @ C0 @ h)))
        margin = min(margins)
        if margin <= 0:
            raise FloatingPointError("no strictly feasible start found")
        x[self.t_idx] = 0.5 * margin
        return x

    # -- Newton centering ----------------------------------------------------

    def _center(self, x: np.ndarray, tau: float, max_iter: int = 60):
        """Damped Newton on  -tau*t + barrier(x)."""
        val, cache = self._barrier(x)
        if val is None:
            raise FloatingPointError("centering started outside the domain")
        for _ in range(max_iter):
            groups, g = cache
            grad = np.zeros(self.n)
            grad[self.t_idx] -= tau
            grad -= (self.G.T / g).sum(axis=1)
            hess = (self.G.T / g**2) @ self.G
            for F, A, A_swap in groups:
                S = np.linalg.inv(F)
                # grad_j = -tr(S A_j); hess_jk = tr(S A_j S A_k), assembled as
                # one GEMM via <S A_j, (S A_k)^H> with Hermitian S, A
                grad -= np.tensordot(S.transpose(0, 2, 1), A, axes=([0, 1, 2], [0, 2, 3])).real
                n, m, d, _ = A_swap.shape
                SA = np.matmul(S[None], A_swap).reshape(n, m * d * d)
                AS = np.matmul(A_swap, S[None]).reshape(n, m * d * d)
                hess += (SA @ AS.conj().T).real
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.solve(hess + 1e-10 * np.eye(self.n), -grad)
            decrement2 = float(-grad @ step)
            if decrement2 < 2e-10:
                return x
            fx = -tau * x[self.t_idx] + val
            alpha = 1.0
            slope = float(grad @ step)
            for _ in range(50):
                xn = x + alpha * step
                valn, cachen = self._barrier(xn)
                if valn is not None and -tau * xn[self.t_idx] + valn <= fx + 0.25 * alpha * slope:
                    break
                alpha *= 0.5
            else:
                return x
            x, val, cache = xn, valn, cachen
        return x

    def path(self, C0: np.ndarray, rel_tol: float, t_scale: float, tau_factor: float = 15.0):
        """Follow the central path until nu/tau <= rel_tol * t_scale."""
        x = self.initial_point(C0)
        tau = max(1.0, self.nu / max(t_scale, 1e-12))
        gap_tol = rel_tol * max(t_scale, 1e-12)
        converged = False
        for _ in range(200):
            x = self._center(x, tau)
            t_scale = max(t_scale, x[self.t_idx])
            gap_tol = rel_tol * max(t_scale, 1e-12)
            if self.nu / tau <= gap_tol:
                converged = True
                break
            tau *= tau_factor
        return x, converged

    def unpack(self, x: np.ndarray, eps_all: np.ndarray):
        """(C, duals) from a parameter vector; duals ordered as the subset."""
        C = np.zeros((self.K, self.K), dtype=complex)
        for j, Bj in enumerate(self.basis):
            C += x[j] * Bj
        duals = np.zeros(eps_all.size)
        duals[self.lmi_mask] = np.maximum(x[self.nC : self.nC + self.m], 0.0)
        return 0.5 * (C + C.conj().T), duals


# ---------------------------------------------------------------------------
# Outer solver
# ---------------------------------------------------------------------------


def _candidate_bound(H, eps, C_init=None):
    """Cheap certified lower bound: best of a few closed-form covariances."""
    K = H.shape[1]
    norms = np.linalg.norm(H, axis=1)
    candidates = [np.eye(K) / K]
    u = (H / np.maximum(norms, 1e-300)[:, None]).sum(axis=0)
    un = np.linalg.norm(u)
    if un > 1e-12:
        candidates.append(np.outer(u / un, (u / un).conj()))
    if C_init is not None:
        candidates.append(C_init)
    lo, best = -1.0, candidates[0]
    for C in candidates:
        ach = float(_wce_many(C, H, eps).min())
        if ach > lo:
            lo, best = ach, C
    return lo, best


def _subset_maxmin(H, eps, tol, lo_init=0.0, C_init=None):
    """Barrier solve over one receiver subset (normalized units).
    Returns (t, C, duals, converged)."""
    norms = np.linalg.norm(H, axis=1)
    ub = float(np.min(np.maximum(norms - eps, 0.0) ** 2))
    lo, best_C = _candidate_bound(H, eps, C_init)
    lo = max(lo, min(lo_init, ub))
    best_duals = np.zeros(H.shape[0])

    # a candidate meeting the per-receiver upper bound is already optimal
    # (single receiver served by exact MRT)
    if lo >= ub * (1.0 - 1e-14):
        return lo, best_C, best_duals, True

    prob = _MaxT(H, eps, H.shape[1])
    # soften the seed toward the interior so the first centering is stable
    C0 = 0.75 * best_C * (1.0 - 1e-6) + 0.2 * np.eye(H.shape[1]) / H.shape[1]
    x, converged = prob.path(C0, rel_tol=tol, t_scale=max(lo, 0.05 * ub))
    C, duals = prob.unpack(x, eps)
    ach = float(_wce_many(C, H, eps).min())
    if ach > lo:
        lo, best_C, best_duals = ach, C, duals
    return lo, best_C, best_duals, converged


def solve_maxmin(spec: RobustSpec, tol: float = 1e-7) -> CovarianceSolution:
    """Solve the robust max-min problem to relative optimality gap <= tol on t.

    Numerics failures degrade the status flag instead of raising.  The
    reported t is always the oracle-certified level of the returned
    covariance, so it is achievable exactly as stated.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    P = spec.power_budget
    H_raw = spec.channels
    eps_raw = spec.epsilons
    K = spec.num_antennas
    norms_raw = np.linalg.norm(H_raw, axis=1)

    # degenerate receivers: zero channel with zero ball cannot harvest at all
    dropped = np.flatnonzero((norms_raw == 0.0) & (eps_raw == 0.0))
    keep = np.flatnonzero(~((norms_raw == 0.0) & (eps_raw == 0.0)))
    if keep.size == 0:
        cov = TransmitCovariance(np.zeros((K, K), dtype=complex), power_budget=P)
        return CovarianceSolution(cov, 0.0, np.zeros(spec.num_ers), STATUS_OPTIMAL, dropped_ers=dropped)

    hscale = float(norms_raw[keep].max())
    H = H_raw[keep] / hscale
    eps = eps_raw[keep] / hscale
    norms = np.linalg.norm(H, axis=1)

    # receivers whose ball swallows the whole channel force t = 0; solve the
    # rest for a useful beam and report the honest level
    forced_zero = eps >= norms
    solve_idx = np.flatnonzero(~forced_zero)
    if solve_idx.size == 0:
        solve_idx = np.arange(H.shape[0])  # t comes out 0 regardless

    # seed the active set with the receivers worst off under the best cheap
    # candidate covariance; they are the likely binding constraints
    lo_seed, C_seed = _candidate_bound(H[solve_idx], eps[solve_idx])
    wce_seed = _wce_many(C_seed, H, eps)
    order = solve_idx[np.argsort(wce_seed[solve_idx])]
    active = [int(i) for i in order[: min(2 * K, order.size)]]
    duals_n = np.zeros(H.shape[0])
    C_n = C_seed
    rounds = 0
    status = STATUS_OPTIMAL
    wce_all = None
    while rounds <= len(solve_idx):
        rounds += 1
        sub = np.array(sorted(active))
        try:
            t_sub, C_sub, duals_sub, converged = _subset_maxmin(
                H[sub], eps[sub], tol, lo_init=lo_seed, C_init=C_seed
            )
        except (np.linalg.LinAlgError, FloatingPointError):
            status = STATUS_NUMERICS
            break
        if not converged:
            status = STATUS_MAX_ITER
        C_n = C_sub
        duals_n = np.zeros(H.shape[0])
        duals_n[sub] = duals_sub
        wce_all = _wce_many(C_n, H, eps)
        margin = max(0.3 * tol * max(t_sub, 1e-12), 1e-15)
        violated = [i for i in solve_idx if wce_all[i] < t_sub - margin and i not in active]
        if not violated:
            break
        # admit the worst few violators at once to limit re-solves
        violated.sort(key=lambda i: wce_all[i])
        active.extend(violated[:4])
        lo_seed, C_seed = float(wce_all[solve_idx].min()), C_n
    if wce_all is None:
        wce_all = _wce_many(C_n, H, eps)

    # the reported level is what the returned covariance actually certifies:
    # zero whenever some receiver's ball swallows its whole channel, and zero
    # whenever a dropped zero-channel receiver cannot harvest at all
    t_final_n = float(wce_all.min()) if dropped.size == 0 else 0.0

    C_full = C_n * P
    t_final = t_final_n * P * hscale**2
    duals = np.zeros(spec.num_ers)
    duals[keep] = duals_n * P
    # guard the trace budget against fp drift before constructing the type
    tr = float(np.trace(C_full).real)
    if tr > P:
        C_full *= P / tr
        t_final *= P / tr
    cov = TransmitCovariance(C_full, power_budget=P)
    return CovarianceSolution(cov, max(0.0, t_final), duals, status, iterations=rounds, dropped_ers=dropped)


def extract_beam(solution: CovarianceSolution) -> ExtractedBeam:
    """Dominant eigenvector of the covariance, scaled so the beam's squared
    norm equals the covariance trace.  Flags rank deficiency below the 0.99
    energy-ratio threshold."""
    C = solution.cov.entries
    w, V = np.linalg.eigh(C)
    trace = max(float(w.sum()), 0.0)
    lead = float(w[-1])
    ratio = min(lead / trace, 1.0) if trace > 0 else 1.0
    scale = np.sqrt(trace)
    beam = BeamVector(V[:, -1] * scale, label=None)
    return ExtractedBeam(beam=beam, rank_ratio=ratio, rank_deficient=ratio < RANK_ONE_THRESHOLD)
