"""Tree recurrences for the matcher and their error envelopes.

For a vertex ``w`` whose child edges arrive in order ``1..k``, the probability
``q_w`` that ``w`` is not matched from below obeys a product recurrence.  In
error coordinates ``eps = 1 - q*C/(C-c)`` one level of the recurrence becomes
``eps_w = 1 - prod_i (1 + eps_i/(C-i))``: the sign flips and the magnitude is
scaled by about ``lam = ln(C/(C-Δ))``.  Errors contract when ``lam < 1``,
i.e. above ``C = e/(e-1)·Δ``; below it ``x -> 1 - exp(lam*x)`` acquires a
nonzero period-2 orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

E_RATIO = math.e / (math.e - 1.0)

# slack constants of the one- and two-level envelope bounds
ONE_LEVEL_SLACK = 1e2
TWO_LEVEL_SLACK = 1e3


def lam(C: float, delta_cap: float) -> float:
    if not C > delta_cap:
        raise ValueError(f"need C > Δ, got C={C}, Δ={delta_cap}")
    return math.log(C / (C - delta_cap))


@dataclass(frozen=True)
class RecurrenceParams:
    C: float
    delta_cap: int
    delta: float
    lambda_: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lambda_", lam(self.C, self.delta_cap))

    @classmethod
    def from_C(cls, C: float, delta_cap: int) -> "RecurrenceParams":
        """Largest admissible ``δ``: the one with ``ln(C/(C-Δ)) = 1 - δ``."""
        return cls(C, delta_cap, 1.0 - lam(C, delta_cap))

    @property
    def contracting(self) -> bool:
        return self.lambda_ <= 1.0 - self.delta

    @property
    def bound_regime(self) -> bool:
        return 0.0 < self.delta < 1.0 / 20.0


def q_step(C: float, parent_offset: int, children) -> float:
    """Probability the parent is not matched from below.

    ``children`` lists ``(q_i, c_i)`` in arrival order; ``c_i`` is the child's
    own child count and ``parent_offset`` the number of earlier parent edges.
    Acceptance probabilities are clamped at one, as in the matcher.
    """
    q = 1.0
    for i, (qi, ci) in enumerate(children, start=parent_offset + 1):
        a = C - (i - 1)
        b = C - ci
        if a <= 0 or b <= 0:
            raise ValueError(f"non-positive denominator at child {i}: C={C}, c_i={ci}")
        q *= 1.0 - min(C / (a * b), 1.0) * qi
    return q


def eps_step(C: float, children_eps) -> float:
    k = len(children_eps)
    if C <= k:
        raise ValueError(f"need C > number of children, got C={C}, k={k}")
    prod = 1.0
    for i, e in enumerate(children_eps, start=1):
        prod *= 1.0 + e / (C - i)
    return 1.0 - prod


def q_to_eps(q: float, C: float, c: int) -> float:
    return 1.0 - q * C / (C - c)


def eps_to_q(eps: float, C: float, c: int) -> float:
    return (C - c) / C * (1.0 - eps)


def f_delta(delta: float, x):
    return 1.0 - np.exp((1.0 - delta) * np.asarray(x, dtype=float)) if np.ndim(x) else \
        1.0 - math.exp((1.0 - delta) * x)


def f_contraction_check(delta: float, eps: float, tol: float = 1e-12) -> bool:
    return f_delta(delta, f_delta(delta, eps)) <= (1.0 - delta) * eps + tol


# --------------------------------------------------------------------------
# envelopes


@dataclass
class ErrorProfile:
    """Per-level error envelope; level 0 is the boundary, level ``g`` the root."""

    eps_min: np.ndarray
    eps_max: np.ndarray

    @property
    def levels(self) -> int:
        return len(self.eps_max) - 1


def envelope_iterate(params: RecurrenceParams, g: int) -> ErrorProfile:
    C, D = params.C, params.delta_cap
    if C < E_RATIO * D:
        raise ValueError(f"envelope bounds need C >= e/(e-1)·Δ = {E_RATIO * D:.6g}, got C={C}")
    if D < 25:
        raise ValueError("envelope bounds need Δ >= 25")
    lm = params.lambda_
    lo = np.empty(g + 1)
    hi = np.empty(g + 1)
    lo[0], hi[0] = -2.0, 1.0
    for ell in range(g):
        lo[ell + 1] = min(max(1.0 - (1.0 + ONE_LEVEL_SLACK / C) * math.exp(lm * hi[ell]), -2.0), 0.0)
        hi[ell + 1] = min(max(1.0 - (1.0 - ONE_LEVEL_SLACK / C) * math.exp(lm * lo[ell]), 0.0), 1.0)
    return ErrorProfile(lo, hi)


def sharp_envelope(C: float, delta_cap: int, g: int) -> ErrorProfile:
    """Worst-case envelope over trees with branching at most ``delta_cap``,
    iterating the exact error recurrence instead of its exponential bound."""
    if not C > delta_cap + 2:
        raise ValueError("sharp envelope needs C > Δ + 2")
    w = 1.0 / (C - np.arange(1, delta_cap + 1))
    lo = np.empty(g + 1)
    hi = np.empty(g + 1)
    lo[0], hi[0] = -2.0, 1.0
    for ell in range(g):
        lo[ell + 1] = min(1.0 - np.prod(1.0 + hi[ell] * w), 0.0)
        hi[ell + 1] = max(1.0 - np.prod(1.0 + lo[ell] * w), 0.0)
    return ErrorProfile(lo, hi)


def two_step_bound(params: RecurrenceParams, profile: ErrorProfile) -> np.ndarray:
    """``f(f(eps_max[l-2])) + 10^3/C`` at each level ``l >= 2`` (NaN below)."""
    out = np.full(profile.levels + 1, np.nan)
    d = params.delta
    for ell in range(2, profile.levels + 1):
        out[ell] = f_delta(d, f_delta(d, profile.eps_max[ell - 2])) + TWO_LEVEL_SLACK / params.C
    return out


def induction_bound(params: RecurrenceParams, levels: int) -> np.ndarray:
    """Closed-form decay bound at even levels ``2l`` (NaN at odd levels)."""
    s = TWO_LEVEL_SLACK / (params.delta * params.C)
    out = np.full(levels + 1, np.nan)
    for ell in range(0, levels + 1, 2):
        out[ell] = (1.0 - s) * (1.0 - params.delta) ** (ell // 2) + s
    return out


def complete_tree_errors(C: float, branching: int, g: int, boundary_matched: bool = False) -> np.ndarray:
    """Exact errors per level on the complete ``branching``-ary tree of depth
    ``g`` whose bottom vertices each carry ``branching`` boundary edges.

    Index 0 is the bottom (boundary) level, index ``g`` a root endpoint.
    """
    c = branching
    q = 0.0 if boundary_matched else 1.0
    errs = [q_to_eps(q, C, c)]
    for _ in range(g):
        errs.append(eps_step(C, [errs[-1]] * c))
    return np.array(errs)


def complete_tree_q(C: float, branching: int, g: int, boundary_matched: bool = False) -> np.ndarray:
    """Same tree as :func:`complete_tree_errors`, computed in ``q`` space."""
    c = branching
    qs = [0.0 if boundary_matched else 1.0]
    for _ in range(g):
        qs.append(q_step(C, 0, [(qs[-1], c)] * c))
    return np.array(qs)


# --------------------------------------------------------------------------
# threshold


def critical_C(delta_prime: float) -> float:
    if delta_prime < 1:
        raise ValueError("Δ' must be >= 1")
    return E_RATIO * delta_prime


def period2_fixed_point(lambda_: float, iters: int = 200):
    """Positive point of a period-2 orbit of ``x -> 1 - exp(lam*x)``, or None.

    For ``lam <= 1`` the only fixed point of the second iterate is zero.
    """
    if lambda_ <= 0:
        raise ValueError("lambda must be positive")
    if lambda_ <= 1.0:
        return None

    def h(x):
        y = 1.0 - math.exp(lambda_ * x)
        return 1.0 - math.exp(lambda_ * y) - x

    lo, hi = 1e-6, 1.0
    if not (h(lo) > 0.0 >= h(hi)):
        raise ArithmeticError(f"bracket [1e-6, 1] does not straddle a root for lambda={lambda_}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def period2_residual(lambda_: float, x: float) -> float:
    y = 1.0 - math.exp(lambda_ * x)
    return abs(1.0 - math.exp(lambda_ * y) - x)


def riemann_gap(C: float, delta_cap: int) -> float:
    if not C > delta_cap:
        raise ValueError(f"need C > Δ, got C={C}, Δ={delta_cap}")
    s = math.fsum(1.0 / (C - i) for i in range(1, delta_cap + 1))
    return abs(s - math.log(C / (C - delta_cap)))


# --------------------------------------------------------------------------
# parameter planning


@dataclass
class PlannerOutput:
    log_delta: float        # ln Δ
    A: float
    delta: float
    delta_prime: float
    g: float
    C: float
    terms: dict             # bound terms; the girth term as log10
    bounds_ok: bool

    @property
    def target(self) -> float:
        return self.delta / 10.0


def parameters_for_delta(delta: float, diagnostic: bool = False) -> dict:
    """``Δ' = 10^6 δ^-3``, ``g = (100/δ) ln(100/δ)``, ``C = (e/(e-1)+δ)Δ'``."""
    if not delta > 0:
        raise ValueError("δ must be positive")
    if delta >= 1.0 / 20.0 and not diagnostic:
        raise ValueError("δ must be < 1/20 outside diagnostic mode")
    dp = 1e6 * delta ** -3
    g = (100.0 / delta) * math.log(100.0 / delta)
    return {"delta": delta, "delta_prime": dp, "g": g, "C": (E_RATIO + delta) * dp}


def _plan(L: float, A: float) -> PlannerOutput:
    delta = A * math.log(L) ** 2 / L
    p = parameters_for_delta(delta, diagnostic=True)
    dp, g, C = p["delta_prime"], p["g"], p["C"]
    log10_girth = (math.log(3.0) + 5.0 * g * math.log(dp) - L) / math.log(10.0)
    terms = {
        "degree": 5.0 * math.sqrt(math.log(dp) / dp),
        "log10_girth": log10_girth,
        "decay": (1.0 - delta / 4.0) ** ((g - 1.0) / 2.0) if delta < 4 else 0.0,
        "slack": 1e4 / (delta * C),
    }
    target = delta / 10.0
    ok = (delta < 1.0 / 20.0 and terms["degree"] <= target
          and log10_girth <= math.log10(target)
          and terms["decay"] <= target and terms["slack"] <= target)
    return PlannerOutput(L, A, delta, dp, g, C, terms, ok)


def _worst_log_ratio(out: PlannerOutput) -> float:
    t = math.log10(out.target)
    vals = [math.log10(max(out.terms["degree"], 1e-300)) - t,
            out.terms["log10_girth"] - t,
            math.log10(max(out.terms["decay"], 1e-300)) - t,
            math.log10(max(out.terms["slack"], 1e-300)) - t]
    return max(vals)


A_GRID = tuple(10.0 ** (k / 20.0) for k in range(-60, 121))


def plan_parameters(delta_big: int | None, n: int, A: float | None = None,
                    log_delta: float | None = None) -> PlannerOutput:
    """Parameter plan for a graph of max degree ``Δ``.

    ``log_delta`` (= ln Δ) may be given instead of ``delta_big`` to probe
    degrees too large to write down.  With ``A=None`` the smallest ``A`` on a
    log grid that satisfies every bound is used; if none does, the ``A`` that
    comes closest is reported with ``bounds_ok=False``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if log_delta is None:
        if delta_big is None or delta_big < 3:
            raise ValueError("Δ must be >= 3")
        L = math.log(delta_big)
    else:
        L = float(log_delta)
        if L < math.log(3):
            raise ValueError("Δ must be >= 3")
    if A is not None:
        return _plan(L, A)
    best = None
    for a in A_GRID:
        out = _plan(L, a)
        if out.delta >= 1.0 / 20.0:
            break
        if out.bounds_ok:
            return out
        if best is None or _worst_log_ratio(out) < _worst_log_ratio(best):
            best = out
    return best if best is not None else _plan(L, A_GRID[0])


def feasibility_crossover(A: float | None = None, lo: float = 2.0, hi: float = 1e12) -> float | None:
    """Smallest ``ln Δ`` (to 0.1%) at which the planner reports feasibility."""
    def ok(L):
        return plan_parameters(None, 3, A=A, log_delta=L).bounds_ok

    L = lo
    while L < hi and not ok(L):
        L *= 2.0
    if L >= hi:
        return None
    a, b = L / 2.0, L
    while b - a > 1e-3 * b:
        mid = 0.5 * (a + b)
        if ok(mid):
            b = mid
        else:
            a = mid
    return b
