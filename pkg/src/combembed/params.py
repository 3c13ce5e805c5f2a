"""Derived constants for the comb-embedding procedure.

Everything flows from ``(n, k, D)``:

    eps   = 1 / (D * (10 + log D))
    C     = 600 / eps                 (engineering mode: caller's choice)
    p     = C * log(n) / n            (per layer)
    m     = n / k
    T     = floor(m * p / 6),  c = m * p / T
    gamma = (1 - 3 eps) * alpha,  alpha = 1/3 by default
    beta  = (c gamma - 1)^2 / (4 c gamma)
    q     = 2 exp(-beta T)

``log`` is the natural logarithm throughout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

Mode = Literal["paper", "engineering"]

DEFAULT_ALPHA = 1.0 / 3.0
DEFAULT_D = 3.0


class ParameterError(ValueError):
    pass


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


@dataclass(frozen=True)
class PreconditionReport:
    """Which of the analysis' standing assumptions hold for a parameter set.

    A false flag never stops a run; it only records that the proof does not
    cover it.
    """

    k_below_D_log_n: bool
    k_above_2_over_eps: bool
    D_above_2: bool
    p_at_most_1: bool
    T_positive: bool
    c_gamma_above_1: bool
    constant_remark: bool
    messages: tuple[str, ...] = ()

    @property
    def all_hold(self) -> bool:
        return (self.k_below_D_log_n and self.k_above_2_over_eps and self.D_above_2
                and self.p_at_most_1 and self.T_positive)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["messages"] = list(self.messages)
        d["all_hold"] = self.all_hold
        return d


@dataclass(frozen=True)
class ParamSet:
    D: float
    n: int
    k: int
    m: int
    eps: float
    C: float
    p: float
    T: int
    c: float
    alpha: float
    gamma: float
    beta: float
    q: float
    mode: Mode
    preconditions: PreconditionReport = field(compare=False)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def mp(self) -> float:
        return self.m * self.p

    def to_dict(self) -> dict:
        d = {k: _finite_or_none(v) for k, v in asdict(self).items() if k != "preconditions"}
        d["preconditions"] = self.preconditions.to_dict()
        return d


def eps_of(D: float) -> float:
    return 1.0 / (D * (10.0 + math.log(D)))


def _constant_remark(C, c, beta, eps, D) -> bool:
    # C > (c / beta) * max{4/eps + 2 D log(2e/eps), D log(2C / (eps D c))}
    if not (beta > 0 and math.isfinite(c) and math.isfinite(beta)):
        return False
    try:
        rhs = (c / beta) * max(4.0 / eps + 2.0 * D * math.log(2.0 * math.e / eps),
                               D * math.log(2.0 * C / (eps * D * c)))
    except ValueError:
        return False
    return C > rhs


def derive_params(
    n: int,
    k: int,
    D: float = DEFAULT_D,
    mode: Mode = "paper",
    C: float | None = None,
    T: int | None = None,
    alpha: float | None = None,
    p: float | None = None,
) -> ParamSet:
    """Compute every derived constant and the precondition report.

    In ``"paper"`` mode the overrides ``C``, ``T``, ``alpha`` and ``p`` are
    refused. In ``"engineering"`` mode ``C`` replaces ``600/eps``; ``p``
    (if given) replaces ``C log n / n`` and ``C`` is then back-computed;
    ``T`` replaces ``floor(mp/6)`` with ``c`` recomputed.

    Raises:
        ParameterError: ``k`` does not divide ``n``, bad inputs, or ``T == 0``
            in paper mode.
    """
    if n < 1 or k < 1:
        raise ParameterError("n and k must be positive")
    if n % k:
        raise ParameterError(f"k={k} does not divide n={n}")
    if D <= 0:
        raise ParameterError("D must be positive")
    if mode not in ("paper", "engineering"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == "paper" and any(v is not None for v in (C, T, alpha, p)):
        raise ParameterError("overrides are only accepted in engineering mode")

    m = n // k
    eps = eps_of(D)
    log_n = math.log(n)
    if p is not None:
        if p < 0:
            raise ParameterError("p must be nonnegative")
        C_val = p * n / log_n if log_n > 0 else math.inf
        p_val = float(p)
    else:
        C_val = 600.0 / eps if C is None else float(C)
        if C_val < 0:
            raise ParameterError("C must be nonnegative")
        p_val = C_val * log_n / n
    alpha_val = DEFAULT_ALPHA if alpha is None else float(alpha)
    if not 0 < alpha_val <= 1:
        raise ParameterError("alpha must lie in (0, 1]")

    mp = m * p_val
    T_val = math.floor(mp / 6.0) if T is None else int(T)
    if T_val < 0:
        raise ParameterError("T must be nonnegative")
    if T_val == 0 and mode == "paper":
        raise ParameterError(f"T = floor(mp/6) = 0 (mp = {mp:.4g}); the procedure is undefined")
    c = mp / T_val if T_val > 0 else math.inf

    gamma = (1.0 - 3.0 * eps) * alpha_val
    cg = c * gamma
    if T_val == 0:
        beta = math.inf
        q = 2.0
    elif cg > 0:
        beta = (cg - 1.0) ** 2 / (4.0 * cg)
        q = 2.0 * math.exp(-beta * T_val)
    else:
        beta = math.nan
        q = 2.0

    msgs = []
    flags = dict(
        k_below_D_log_n=k < D * log_n,
        k_above_2_over_eps=k > 2.0 / eps,
        D_above_2=D > 2,
        p_at_most_1=p_val <= 1.0,
        T_positive=T_val >= 1,
        c_gamma_above_1=cg > 1.0,
        constant_remark=_constant_remark(C_val, c, beta, eps, D),
    )
    if not flags["k_below_D_log_n"]:
        msgs.append(f"k={k} is not below D log n = {D * log_n:.4g}")
    if not flags["k_above_2_over_eps"]:
        msgs.append(f"k={k} is not above 2/eps = {2 / eps:.4g}")
    if not flags["D_above_2"]:
        msgs.append(f"D={D} is not above 2")
    if not flags["p_at_most_1"]:
        msgs.append(f"p = {p_val:.4g} exceeds 1")
    if not flags["T_positive"]:
        msgs.append("T = 0: every degree threshold is vacuous")
    if not flags["c_gamma_above_1"]:
        msgs.append(f"c*gamma = {cg:.4g} <= 1: tail bound q is vacuous")
    report = PreconditionReport(**flags, messages=tuple(msgs))

    return ParamSet(D=float(D), n=n, k=k, m=m, eps=eps, C=C_val, p=p_val, T=T_val, c=c,
                    alpha=alpha_val, gamma=gamma, beta=beta, q=q, mode=mode,
                    preconditions=report)


def bernstein_tail(m: int, rho: float, t: float) -> float:
    """Upper bound on either tail P(|Bin(m, rho) - m rho| > t): exp(-min(t, t^2/(m rho)) / 4)."""
    if t <= 0:
        raise ValueError("deviation t must be positive")
    if m < 1 or not 0 < rho < 1:
        raise ValueError("need m >= 1 and 0 < rho < 1")
    return math.exp(-0.25 * min(t, t * t / (m * rho)))


def q_bound(params: ParamSet) -> float:
    """``2 exp(-beta T)``.

    Raises ParameterError in paper mode when ``c gamma <= 1``; in engineering
    mode that regime is only flagged in ``params.preconditions``.
    """
    if params.mode == "paper" and not params.preconditions.c_gamma_above_1:
        raise ParameterError("c*gamma <= 1: the tail bound is undefined")
    if params.T == 0:
        return 2.0
    return 2.0 * math.exp(-params.beta * params.T)
