"""Certified upper bounds on target risk, plus union-bound-corrected grid
search over their free parameters.

Five bounds are implemented. Writing KL for the prior-posterior divergence,
m for the labeled source sample size and n for the unlabeled target sample
size (both as actually used to evaluate the estimators):

  mcallester   (1/g) R_hat + (KL + ln(1/d)) / (2 g (1-g) m)
  iw           (1/g) R_hat_w + B (KL + ln(1/d)) / (2 g (1-g) m)
  mult         a' d_t/2 + b' B e_s + (a'/(n a) + b' B/(m b)) (2 KL + ln(2/d))
  add          w' R_hat + g' Dis/2 + (w'/w + g'/g)(KL + ln(3/d))/m
                 + lambda + (g' - 1)/2          [uses min(m, n); oracle only]
  mmd          (1/g) R_hat + (KL + ln(2/d)) / (2 g (1-g) m) + MMD
                 + 2 sqrt(K/m) (2 + sqrt(ln(4/d)))   [uses min(m, n)]

where B is the worst-case density ratio, x' = x/(1 - e^-x) for a, b, w and
g' = 2g/(1 - e^-2g). Values above 1 are reported as-is; vacuity is
information, never clipped away.
"""

import itertools
import json
import math
from dataclasses import dataclass

from .risks import OracleAccessError, RiskEstimates

BOUND_NAMES = ("mcallester", "mult", "add", "iw", "mmd")

# Free-parameter candidates: {1, 5} x 10^k sweeps for the unconstrained
# parameters, and a (0, 1) grid for the gamma of the single-sample bounds.
POSITIVE_GRID = tuple(
    c * 10.0**e for e in range(-3, 5) for c in (1.0, 5.0)
) + (1e5,)
GAMMA_GRID = (1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 9.9e-1)


@dataclass(frozen=True)
class ParamGrid:
    """Ordered map of free-parameter name to candidate values."""

    values: dict

    def __post_init__(self):
        clean = {k: tuple(sorted(float(v) for v in vs)) for k, vs in self.values.items()}
        object.__setattr__(self, "values", clean)
        if not clean or any(len(v) == 0 for v in clean.values()):
            raise ValueError("grid must have at least one candidate per parameter")

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.values.values())


def default_grid(bound: str) -> ParamGrid:
    if bound in ("mcallester", "iw", "mmd"):
        return ParamGrid({"gamma": GAMMA_GRID})
    if bound == "mult":
        return ParamGrid({"a": POSITIVE_GRID, "b": POSITIVE_GRID})
    if bound == "add":
        return ParamGrid({"omega": POSITIVE_GRID, "gamma": POSITIVE_GRID})
    raise ValueError(f"unknown bound {bound!r}")


@dataclass(frozen=True)
class BoundInputs:
    """Everything a bound evaluation may consume. ``m_source`` and ``n_target``
    are the sizes of the samples the estimates were computed on (for the
    source, the held-out evaluation split). Optional fields are validated by
    the bounds that need them."""

    m_source: int
    n_target: int
    kl: float
    delta: float
    estimates: RiskEstimates
    beta_inf: float | None = None
    mmd_value: float | None = None
    kernel_bound: float = 1.0
    lambda_rho: float | None = None
    overlap: bool = True

    def __post_init__(self):
        if self.m_source < 1 or self.n_target < 1:
            raise ValueError("sample sizes must be positive")
        if not (math.isfinite(self.kl) and self.kl >= 0):
            raise ValueError("kl must be finite and >= 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.beta_inf is not None and self.beta_inf <= 0:
            raise ValueError("beta_inf must be positive")
        if self.mmd_value is not None and self.mmd_value < 0:
            raise ValueError("mmd_value must be >= 0")
        if self.kernel_bound <= 0:
            raise ValueError("kernel_bound must be positive")
        if self.lambda_rho is not None and self.lambda_rho < 0:
            raise ValueError("lambda_rho must be >= 0")


@dataclass(frozen=True)
class BoundResult:
    name: str
    value: float
    params: dict
    delta_effective: float
    terms: tuple  # ordered ((label, value), ...); their sum is the bound value
    oracle_used: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "params": dict(self.params),
            "delta_effective": self.delta_effective,
            "terms": [{"label": lab, "value": val} for lab, val in self.terms],
            "oracle_used": self.oracle_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def convexity_constant(a: float) -> float:
    """a / (1 - e^{-a}) for a > 0; tends to 1 as a -> 0+.

    expm1 keeps the denominator accurate for small a, so no series fallback
    is needed.
    """
    if not (math.isfinite(a) and a > 0):
        raise ValueError("a must be finite and > 0")
    return a / -math.expm1(-a)


def _require(condition: bool, message: str):
    if not condition:
        raise ValueError(message)


def _gamma_unit(gamma: float):
    _require(0 < gamma < 1, f"gamma must lie in (0, 1), got {gamma}")


def _mcallester_terms(inputs: BoundInputs, delta: float, gamma: float):
    _gamma_unit(gamma)
    m = inputs.m_source
    return (
        ("risk", inputs.estimates.gibbs_risk / gamma),
        ("kl", (inputs.kl + math.log(1.0 / delta)) / (2.0 * gamma * (1.0 - gamma) * m)),
        ("domain", 0.0),
        ("constant", 0.0),
    )


def _iw_terms(inputs: BoundInputs, delta: float, gamma: float):
    _gamma_unit(gamma)
    _require(inputs.beta_inf is not None, "iw bound needs beta_inf")
    _require(
        inputs.estimates.gibbs_weighted_risk is not None,
        "iw bound needs a weighted Gibbs risk (importance weights attached)",
    )
    m = inputs.m_source
    return (
        ("risk", inputs.estimates.gibbs_weighted_risk / gamma),
        (
            "kl",
            inputs.beta_inf
            * (inputs.kl + math.log(1.0 / delta))
            / (2.0 * gamma * (1.0 - gamma) * m),
        ),
        ("domain", 0.0),
        ("constant", 0.0),
    )


def _mult_terms(inputs: BoundInputs, delta: float, a: float, b: float):
    _require(a > 0 and b > 0, "a and b must be positive")
    _require(inputs.beta_inf is not None, "mult bound needs beta_inf")
    # the unseen-target-mass term is identically zero under declared overlap
    _require(inputs.overlap, "mult bound requires the task to declare overlap")
    beta = inputs.beta_inf
    a_c = convexity_constant(a)
    b_c = convexity_constant(b)
    m, n = inputs.m_source, inputs.n_target
    est = inputs.estimates
    return (
        ("risk", b_c * beta * est.joint_error_source),
        (
            "kl",
            (a_c / (n * a) + b_c * beta / (m * b))
            * (2.0 * inputs.kl + math.log(2.0 / delta)),
        ),
        ("domain", a_c * 0.5 * est.disagreement_target),
        ("constant", 0.0),
    )


def _add_terms(inputs: BoundInputs, delta: float, omega: float, gamma: float):
    _require(omega > 0 and gamma > 0, "omega and gamma must be positive")
    if inputs.lambda_rho is None:
        raise OracleAccessError(
            "add bound needs lambda_rho, which requires oracle target labels"
        )
    w_c = convexity_constant(omega)
    g_c = convexity_constant(2.0 * gamma)  # 2 gamma / (1 - e^{-2 gamma})
    m = min(inputs.m_source, inputs.n_target)
    est = inputs.estimates
    dis = abs(est.disagreement_target - est.disagreement_source)
    return (
        ("risk", w_c * est.gibbs_risk),
        ("kl", (w_c / omega + g_c / gamma) * (inputs.kl + math.log(3.0 / delta)) / m),
        ("domain", g_c * 0.5 * dis),
        ("lambda_rho", inputs.lambda_rho),
        ("constant", 0.5 * (g_c - 1.0)),
    )


def _mmd_terms(inputs: BoundInputs, delta: float, gamma: float):
    _gamma_unit(gamma)
    _require(inputs.mmd_value is not None, "mmd bound needs an mmd_value")
    m = min(inputs.m_source, inputs.n_target)
    return (
        ("risk", inputs.estimates.gibbs_risk / gamma),
        ("kl", (inputs.kl + math.log(2.0 / delta)) / (2.0 * gamma * (1.0 - gamma) * m)),
        ("domain", inputs.mmd_value),
        (
            "constant",
            2.0
            * math.sqrt(inputs.kernel_bound / m)
            * (2.0 + math.sqrt(math.log(4.0 / delta))),
        ),
    )


_TERM_FUNCS = {
    "mcallester": _mcallester_terms,
    "iw": _iw_terms,
    "mult": _mult_terms,
    "add": _add_terms,
    "mmd": _mmd_terms,
}


def bound_terms(name: str, inputs: BoundInputs, delta: float, **params):
    if name not in _TERM_FUNCS:
        raise ValueError(f"unknown bound {name!r}")
    return _TERM_FUNCS[name](inputs, delta, **params)


def _value(terms) -> float:
    return sum(v for _, v in terms)


def mcallester_bound(inputs: BoundInputs, gamma: float) -> float:
    return _value(_mcallester_terms(inputs, inputs.delta, gamma))


def iw_bound(inputs: BoundInputs, gamma: float) -> float:
    return _value(_iw_terms(inputs, inputs.delta, gamma))


def mult_bound(inputs: BoundInputs, a: float, b: float) -> float:
    return _value(_mult_terms(inputs, inputs.delta, a, b))


def add_bound(inputs: BoundInputs, omega: float, gamma: float) -> float:
    return _value(_add_terms(inputs, inputs.delta, omega, gamma))


def mmd_bound(inputs: BoundInputs, gamma: float) -> float:
    return _value(_mmd_terms(inputs, inputs.delta, gamma))


def grid_search(bound: str, inputs: BoundInputs, grid: ParamGrid | None = None) -> BoundResult:
    """Minimise a bound over its free-parameter grid with the union-bound
    correction: every candidate is evaluated at delta / grid_size, so the
    returned minimum is itself a valid (1 - delta) guarantee.

    Ties go to the lexicographically smallest parameter tuple.
    """
    if grid is None:
        grid = default_grid(bound)
    delta_eff = inputs.delta / grid.size
    names = list(grid.values.keys())
    best = None
    for combo in itertools.product(*grid.values.values()):
        params = dict(zip(names, combo))
        terms = bound_terms(bound, inputs, delta_eff, **params)
        value = _value(terms)
        if best is None or value < best[0]:
            best = (value, params, terms)
    value, params, terms = best
    return BoundResult(
        name=bound,
        value=value,
        params=params,
        delta_effective=delta_eff,
        terms=tuple(terms),
        oracle_used=(bound == "add"),
    )
