"""Total-time minimization: shortest mission that still delivers each
group's information demand.

Hover times come from a per-group scalar minimization with a Lambert W
closed form.  A second of hover for group n costs one second, but when
the next group can convert incoming hover energy into shorter flight,
the effective cost drops to kappa = 1 - a_{n+1}/b_{n+1}; minimizing
kappa*tau + zeta(tau) subject to the demand gives

    tau_n = 2 I_n / (W((kappa gamma_n b_n - 1)/e) + 1)

with kappa = 1 for the last group.  Flight times then come from the
exact inverse of the rate formula, floored at the speed cap.  A forward
pass re-tightens hovers on clamped legs so every group's delivered
information matches its demand exactly instead of overshooting.
"""

import math
from dataclasses import dataclass

from .channel import GroupCoefficients, group_rate
from .errors import ConfigError, NumericDomainError
from .numerics import bisect_root, lambert_w0
from .stm import TimeAllocation

TTM_DIAG_HEADER = "N,Pt_dB,v_max,I_total,total_time,clamped_legs"

_DEMAND_TOL = 1e-12   # residual tolerance when re-tightening a hover
_EXP_LIMIT = 700.0    # beyond this, exp overflows; treat demand as inf


@dataclass(frozen=True)
class TtmProblem:
    """Time-minimization instance: per-group demands I_n in nats."""

    coeffs: GroupCoefficients
    D: tuple[float, ...]
    v_max: float
    I: tuple[float, ...]

    def __post_init__(self):
        if self.v_max <= 0.0:
            raise ConfigError("v_max must be positive")
        if len(self.D) != self.coeffs.N or len(self.I) != self.coeffs.N:
            raise ConfigError("need one leg length and one demand per group")
        for n, d in enumerate(self.D, start=1):
            if not d > 0.0:
                raise ConfigError(f"leg {n} has non-positive length")
        for n, i_n in enumerate(self.I, start=1):
            if not i_n > 0.0:
                raise ConfigError(f"group {n} demand must be positive")

    @property
    def N(self) -> int:
        return self.coeffs.N


def _tau_opt(I_n: float, gamma_b_eff: float, n: int) -> float:
    """Cost-minimizing hover 2I/(W((gamma_b_eff - 1)/e) + 1).

    gamma_b_eff is kappa * gamma_n * b_n; it must be positive or the
    Lambert argument falls off the principal branch.
    """
    if gamma_b_eff <= 0.0:
        raise NumericDomainError(
            f"group {n}: effective flight-harvest credit "
            f"{gamma_b_eff:.6g} <= 0; the hover closed form has no "
            "solution (next group hovers better than it flies)")
    w = lambert_w0((gamma_b_eff - 1.0) / math.e)
    denom = w + 1.0
    if denom <= 0.0:
        raise NumericDomainError(
            f"group {n}: hover closed form denominator W+1 = {denom:.6g}")
    return 2.0 * I_n / denom


def tau_closed_form(problem: TtmProblem, n: int) -> float:
    """Optimal hover time of group n before any clamp repair.

    Groups before the last get the downstream credit factor
    kappa = 1 - a_{n+1}/b_{n+1}; a_{n+1} >= b_{n+1} is a hard domain
    error rather than a silent fallback.
    """
    if not 1 <= n <= problem.N:
        raise NumericDomainError(f"group index {n} out of range")
    g_ = problem.coeffs.gamma[n - 1]
    b_ = problem.coeffs.b[n - 1]
    if n == problem.N:
        return _tau_opt(problem.I[n - 1], g_ * b_, n)
    kappa = 1.0 - problem.coeffs.a[n] / problem.coeffs.b[n]
    return _tau_opt(problem.I[n - 1], kappa * g_ * b_, n)


def zeta_closed_form(problem: TtmProblem, n: int, tau) -> float:
    """Flight time of leg n given the hover schedule tau = (tau_1..tau_N).

    Exact inverse of the rate formula: the flight time that tops up
    group n's energy to make tau_n seconds of transmission deliver
    exactly I_n nats, floored at the speed cap.  The group harvests
    nothing before leg 1 (no start hover in time minimization).
    """
    if not 1 <= n <= problem.N:
        raise NumericDomainError(f"group index {n} out of range")
    tau_n = tau[n - 1]
    if tau_n <= 0.0:
        raise NumericDomainError(f"group {n}: hover time must be positive")
    tau_prev = 0.0 if n == 1 else tau[n - 2]
    floor = problem.D[n - 1] / problem.v_max
    u = 2.0 * problem.I[n - 1] / tau_n
    if u > _EXP_LIMIT:
        return math.inf
    g_ = problem.coeffs.gamma[n - 1]
    need = (tau_n / g_ * math.expm1(u)
            - problem.coeffs.a[n - 1] * tau_prev) / problem.coeffs.b[n - 1]
    return max(need, floor)


def _tau_for_demand(I_n: float, gamma_n: float, energy: float,
                    tau_hi: float) -> float:
    """Smallest hover delivering I_n nats on fixed harvested energy.

    (tau/2)ln(1 + gamma*energy/tau) is increasing in tau and already
    >= I_n at tau_hi, so the equality root lies in (0, tau_hi].
    """
    def excess(t):
        return 0.5 * t * math.log1p(gamma_n * energy / t) - I_n

    hi = tau_hi
    if excess(hi) <= 0.0:
        return hi
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if excess(lo) < 0.0:
            break
    else:
        raise NumericDomainError("hover re-tightening found no lower bracket")
    return bisect_root(excess, lo, hi, tol=_DEMAND_TOL)


def solve_ttm(problem: TtmProblem, credit: bool = True):
    """Minimal-time hover and flight schedule meeting every demand.

    credit=False prices every hover second at full cost (no downstream
    flight-harvest credit); this is the right model when groups hover
    better than they fly, where the credit form is out of domain.
    Returns (TimeAllocation, total_time).
    """
    N = problem.N
    g_ = problem.coeffs.gamma
    a_ = problem.coeffs.a
    b_ = problem.coeffs.b

    # backward pass: hover times, checking that each group's credit
    # assumption survives the next leg's speed-cap clamp
    taus = [0.0] * N
    taus[N - 1] = _tau_opt(problem.I[N - 1], g_[N - 1] * b_[N - 1], N)
    for n in range(N - 1, 0, -1):
        plain = _tau_opt(problem.I[n - 1], g_[n - 1] * b_[n - 1], n)
        if not credit:
            taus[n - 1] = plain
            continue
        with_credit = tau_closed_form(problem, n)
        probe = taus.copy()
        probe[n - 1] = with_credit
        clamp_next = (zeta_closed_form(problem, n + 1, probe)
                      <= problem.D[n] / problem.v_max * (1.0 + 1e-12))
        taus[n - 1] = plain if clamp_next else with_credit

    # forward pass: flight times from the final hovers; on clamped legs
    # the hover is re-tightened to demand equality
    zetas = [0.0] * N
    prev = 0.0
    for n in range(1, N + 1):
        need = zeta_closed_form(problem, n, taus)
        floor = problem.D[n - 1] / problem.v_max
        if need > floor:
            zetas[n - 1] = need
        else:
            zetas[n - 1] = floor
            energy = a_[n - 1] * prev + b_[n - 1] * floor
            taus[n - 1] = _tau_for_demand(
                problem.I[n - 1], g_[n - 1], energy, taus[n - 1])
        prev = taus[n - 1]

    alloc = TimeAllocation(tau=(0.0, *taus), zeta=tuple(zetas))
    return alloc, alloc.total


def delivered_information(coeffs: GroupCoefficients,
                          alloc: TimeAllocation) -> tuple[float, ...]:
    """Per-group delivered information tau_n * R_n in nats."""
    out = []
    for n in range(1, coeffs.N + 1):
        tau_n = alloc.tau[n]
        if tau_n == 0.0:
            out.append(0.0)
            continue
        rate = group_rate(coeffs, n, alloc.tau[n - 1], alloc.zeta[n - 1],
                          tau_n)
        out.append(tau_n * rate)
    return tuple(out)


def count_clamped_legs(problem: TtmProblem, alloc: TimeAllocation) -> int:
    """Legs flown exactly at the speed cap."""
    total = 0
    for n in range(problem.N):
        floor = problem.D[n] / problem.v_max
        if alloc.zeta[n] <= floor * (1.0 + 1e-12):
            total += 1
    return total


def ttm_diag_row(N: int, pt_db: float, v_max: float, I_total: float,
                 total_time: float, clamped_legs: int) -> str:
    """One CSV data row matching TTM_DIAG_HEADER."""
    return (f"{N},{pt_db:.12g},{v_max:.12g},{I_total:.12g},"
            f"{total_time:.12g},{clamped_legs}")
