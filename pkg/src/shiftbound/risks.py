"""Empirical estimators feeding the bounds: zero-one risk, Gibbs risk,
importance-weighted risk, pairwise disagreement and joint error, and the
oracle quantity |joint_error_target - joint_error_source|.

Pairwise quantities average over the P consecutive draw pairs of a
PosteriorSampleSet; Gibbs risks average over all 2P draws. Reduction order
is draw-major, then row.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import MlpArchitecture, forward, predict
from .samples import LabeledSample, UnlabeledSample
from .stochastic import PosteriorSampleSet


class OracleAccessError(RuntimeError):
    """A target-label quantity was requested without oracle mode enabled."""


@dataclass
class RiskEstimates:
    """Estimator values consumed by the bounds, with Monte-Carlo standard
    deviations per field in ``mc_std``. ``joint_error_target`` is populated
    only under oracle access."""

    gibbs_risk: float
    disagreement_source: float
    disagreement_target: float
    joint_error_source: float
    gibbs_weighted_risk: float | None = None
    joint_error_target: float | None = None
    mc_std: dict = field(default_factory=dict)


def _mean_and_mc_std(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))


def empirical_risk(arch: MlpArchitecture, w, data: LabeledSample) -> float:
    """Fraction of rows where the hard prediction differs from the label."""
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    errors = predict(forward(arch, w, data.features)) != data.labels
    return float(np.mean(errors))


def weighted_empirical_risk(arch: MlpArchitecture, w, data: LabeledSample) -> float:
    """Mean of weight * error-indicator over the sample; needs attached weights."""
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    if data.weights is None:
        raise ValueError("data has no importance weights attached")
    errors = predict(forward(arch, w, data.features)) != data.labels
    return float(np.mean(data.weights * errors))


def _per_draw_risks(arch, samples: PosteriorSampleSet, data: LabeledSample, weighted: bool) -> np.ndarray:
    fn = weighted_empirical_risk if weighted else empirical_risk
    return np.array([fn(arch, w, data) for w in samples.draws])


def gibbs_risk(arch: MlpArchitecture, samples: PosteriorSampleSet, data: LabeledSample):
    """Mean empirical risk over all posterior draws; returns (estimate, mc_std)."""
    if samples.num_draws < 2:
        raise ValueError("need at least 2 draws")
    return _mean_and_mc_std(_per_draw_risks(arch, samples, data, weighted=False))


def gibbs_weighted_risk(arch: MlpArchitecture, samples: PosteriorSampleSet, data: LabeledSample):
    """Importance-weighted counterpart of :func:`gibbs_risk`."""
    if samples.num_draws < 2:
        raise ValueError("need at least 2 draws")
    return _mean_and_mc_std(_per_draw_risks(arch, samples, data, weighted=True))


def _pair_disagreements(arch, samples: PosteriorSampleSet, X: np.ndarray) -> np.ndarray:
    values = []
    for i in range(samples.num_pairs):
        h = predict(forward(arch, samples.draws[2 * i], X))
        h2 = predict(forward(arch, samples.draws[2 * i + 1], X))
        values.append(float(np.mean(h != h2)))
    return np.array(values)


def _pair_joint_errors(arch, samples: PosteriorSampleSet, data: LabeledSample) -> np.ndarray:
    values = []
    for i in range(samples.num_pairs):
        e1 = predict(forward(arch, samples.draws[2 * i], data.features)) != data.labels
        e2 = predict(forward(arch, samples.draws[2 * i + 1], data.features)) != data.labels
        values.append(float(np.mean(e1 & e2)))
    return np.array(values)


def expected_disagreement(arch: MlpArchitecture, samples: PosteriorSampleSet, data: UnlabeledSample) -> float:
    """How often the two classifiers of a pair label the same point differently,
    averaged over pairs."""
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    return float(_pair_disagreements(arch, samples, data.features).mean())


def expected_joint_error(arch: MlpArchitecture, samples: PosteriorSampleSet, data: LabeledSample) -> float:
    """How often both classifiers of a pair are wrong at the same point,
    averaged over pairs."""
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    return float(_pair_joint_errors(arch, samples, data).mean())


def domain_disagreement(
    arch: MlpArchitecture,
    samples: PosteriorSampleSet,
    source_x: UnlabeledSample,
    target_x: UnlabeledSample,
) -> float:
    """|disagreement on target - disagreement on source|."""
    return abs(
        expected_disagreement(arch, samples, target_x)
        - expected_disagreement(arch, samples, source_x)
    )


def lambda_rho_oracle(
    arch: MlpArchitecture,
    samples: PosteriorSampleSet,
    source: LabeledSample,
    target_labeled: LabeledSample,
    *,
    oracle: bool = False,
) -> float:
    """|joint error on target - joint error on source|, computable only with
    target labels. Refuses unless ``oracle=True`` so non-estimable quantities
    cannot slip into reported bounds unnoticed."""
    if not oracle:
        raise OracleAccessError(
            "lambda_rho needs target labels; pass oracle=True to acknowledge"
        )
    return abs(
        expected_joint_error(arch, samples, target_labeled)
        - expected_joint_error(arch, samples, source)
    )


def estimate_risks(
    arch: MlpArchitecture,
    samples: PosteriorSampleSet,
    source_eval: LabeledSample,
    target_x: UnlabeledSample,
    *,
    target_oracle: LabeledSample | None = None,
    oracle: bool = False,
) -> RiskEstimates:
    """Assemble every estimator the bounds consume from one posterior sample set."""
    risks = _per_draw_risks(arch, samples, source_eval, weighted=False)
    gibbs, gibbs_std = _mean_and_mc_std(risks)
    dis_s = _pair_disagreements(arch, samples, source_eval.features)
    dis_t = _pair_disagreements(arch, samples, target_x.features)
    joint_s = _pair_joint_errors(arch, samples, source_eval)
    ds, ds_std = _mean_and_mc_std(dis_s)
    dt, dt_std = _mean_and_mc_std(dis_t)
    js, js_std = _mean_and_mc_std(joint_s)
    mc_std = {
        "gibbs_risk": gibbs_std,
        "disagreement_source": ds_std,
        "disagreement_target": dt_std,
        "joint_error_source": js_std,
    }

    weighted = None
    if source_eval.weights is not None:
        wrisks = _per_draw_risks(arch, samples, source_eval, weighted=True)
        weighted, w_std = _mean_and_mc_std(wrisks)
        mc_std["gibbs_weighted_risk"] = w_std

    joint_t = None
    if oracle:
        if target_oracle is None:
            raise OracleAccessError("oracle=True but no labeled target sample given")
        jt, jt_std = _mean_and_mc_std(_pair_joint_errors(arch, samples, target_oracle))
        joint_t = jt
        mc_std["joint_error_target"] = jt_std

    return RiskEstimates(
        gibbs_risk=gibbs,
        gibbs_weighted_risk=weighted,
        disagreement_source=ds,
        disagreement_target=dt,
        joint_error_source=js,
        joint_error_target=joint_t,
        mc_std=mc_std,
    )
