"""Scalar numeric kernels used by the closed-form solvers.

Everything here is deliberately dependency-free so the solver results are
reproducible bit-for-bit: the principal branch of the Lambert W function,
a guarded bisection root finder, and an adaptive Simpson integrator used
by the verification oracles.
"""

import math
from dataclasses import dataclass

from .errors import AccuracyError, BracketingError, NumericDomainError

# exp(-1), the left edge of the W_0 domain
_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class ToleranceConfig:
    """Shared numeric tolerances.

    w_tol        absolute step tolerance for Lambert W iterations
    root_tol     residual tolerance for scalar root finding
    quad_rel_tol relative tolerance for adaptive quadrature
    max_iter     iteration cap for the scalar loops
    """

    w_tol: float = 1e-12
    root_tol: float = 1e-10
    quad_rel_tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if min(self.w_tol, self.root_tol, self.quad_rel_tol) <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_TOL = ToleranceConfig()


def lambert_w0(x: float, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Principal branch W_0 of the Lambert W function.

    Solves w * exp(w) = x for x >= -1/e using Halley's iteration.  The
    initial guess is piecewise: a series expansion around the branch
    point -1/e (Corless et al. 1996, eq. 4.22), the identity seed near
    zero, and the two-term asymptotic log expansion for large x.

    Arguments within 1e-15 below -1/e are treated as the branch point
    itself (w = -1); anything further below raises NumericDomainError.
    """
    x = float(x)
    if math.isnan(x):
        raise NumericDomainError("lambert_w0: argument is NaN")
    if x < -_INV_E:
        if x >= -_INV_E - 1e-15:
            return -1.0
        raise NumericDomainError(
            f"lambert_w0: argument {x!r} lies below -1/e")
    if x == 0.0:
        return 0.0

    if x < -0.3243:
        # series about the branch point; p -> 0 as x -> -1/e
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
        if p < 1e-4:
            # series truncation error is O(p^4) < 1e-16 here, while the
            # Halley denominator degenerates with w + 1 -> 0: stop now
            return w
    elif x < 1.5:
        w = x / (1.0 + x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1

    for _ in range(tol.max_iter):
        ew = math.exp(w)
        r = w * ew - x
        if r == 0.0:
            return w
        # Halley step; near the branch point w + 1 ~ p stays well away
        # from zero relative to the residual, keeping the step finite
        denom = ew * (w + 1.0) - (w + 2.0) * r / (2.0 * (w + 1.0))
        step = r / denom
        w -= step
        if abs(step) <= tol.w_tol * (1.0 + abs(w)):
            return w
    raise AccuracyError(f"lambert_w0: no convergence for argument {x!r}")


def bisect_root(f, lo: float, hi: float, tol: float = 1e-10,
                max_expansions: int = 60, max_iter: int = 200) -> float:
    """Root of f on [lo, hi] by bisection.

    If f(lo) and f(hi) share a sign the upper end is pushed out by
    repeated doubling of the interval before giving up.  Terminates when
    either |f(mid)| <= tol or the bracket width falls below tol; the
    returned point always lies inside the final bracket.
    """
    if not hi > lo:
        raise ValueError("bisect_root: need hi > lo")
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    expansions = 0
    while flo * fhi > 0.0:
        if expansions >= max_expansions:
            raise BracketingError(
                f"bisect_root: no sign change in [{lo!r}, {hi!r}] "
                f"after {expansions} expansions")
        hi = lo + 2.0 * (hi - lo)
        fhi = f(hi)
        expansions += 1
    if fhi == 0.0:
        return hi

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol or (hi - lo) <= tol:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def integrate_adaptive(f, a: float, b: float, rel_tol: float = 1e-9,
                       max_evals: int = 200_000) -> float:
    """Adaptive Simpson quadrature of f over [a, b].

    The error target is relative to a rough magnitude estimate of the
    integral of |f|, so sign cancellation cannot silently loosen the
    tolerance.  Each accepted panel contributes its Richardson
    extrapolated value.  Raises AccuracyError when the evaluation budget
    runs out before the target is met.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0
    if b < a:
        raise NumericDomainError("integrate_adaptive: need a <= b")

    evals = [0]

    def feval(x):
        evals[0] += 1
        if evals[0] > max_evals:
            raise AccuracyError(
                "integrate_adaptive: evaluation budget exhausted")
        return f(x)

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    # magnitude scale from a fixed coarse pass over |f|
    n0 = 16
    xs = [a + (b - a) * i / n0 for i in range(n0 + 1)]
    fs = [feval(x) for x in xs]
    scale = sum(abs(v) for v in fs) * (b - a) / (n0 + 1)
    abs_tol = rel_tol * max(scale, 1e-300)

    total = 0.0
    # stack entries: (a, fa, b, fb, fm, whole_estimate, local_tol)
    stack = []
    for i in range(n0):
        xa, xb = xs[i], xs[i + 1]
        fa, fb = fs[i], fs[i + 1]
        fm = feval(0.5 * (xa + xb))
        whole = simpson(fa, fm, fb, xb - xa)
        stack.append((xa, fa, xb, fb, fm, whole, abs_tol / n0))

    while stack:
        xa, fa, xb, fb, fm, whole, tol_here = stack.pop()
        xm = 0.5 * (xa + xb)
        fml = feval(0.5 * (xa + xm))
        fmr = feval(0.5 * (xm + xb))
        left = simpson(fa, fml, fm, xm - xa)
        right = simpson(fm, fmr, fb, xb - xm)
        err = left + right - whole
        if abs(err) <= 15.0 * tol_here or (xb - xa) < 1e-14 * (b - a):
            total += left + right + err / 15.0
        else:
            half = 0.5 * tol_here
            stack.append((xa, fa, xm, fm, fml, left, half))
            stack.append((xm, fm, xb, fb, fmr, right, half))
    return total
