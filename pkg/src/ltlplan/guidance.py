"""Guided reverse-process sampling.

Two guidance families share the unguided sampling core:

* posterior sampling: each step adds the gradient of the smooth formula
  value evaluated on the labeled Tweedie estimate of the clean trajectory,
  chained through the labeling Jacobian and the (frozen) linear Tweedie
  factor;
* value-network guidance: each step adds the input-gradient of a trained
  formula-conditioned scalar network at the current noisy trajectory (the
  binary-classifier ablation differs only in how that network was trained).

Guidance consumes no randomness, so any mode with zero step sizes
reproduces the unguided sampler bit for bit under the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, ops
from .diffusion.model import Denoiser
from .diffusion.process import tweedie_estimate
from .diffusion.sampling import sample_chain
from .labeling import LabelingConfig, label, label_jacobian
from .ltlf import (
    Formula,
    NextAtFinalStepError,
    SoftConfig,
    evaluate_soft_batch,
    formula_atoms,
    satisfies_batch,
    threshold_assignments,
)
from .regressor.graph import formula_to_graph
from .regressor.model import ValueNet

__all__ = [
    "GuidanceConfig",
    "SampleRequest",
    "SampleResult",
    "conditional_score_ps",
    "guided_sample_ps",
    "guided_sample_rg",
    "sample",
]

MODES = ("none", "posterior", "regressor", "classifier")


@dataclass(frozen=True)
class GuidanceConfig:
    """Guide type, step-size schedule, and smoothing for guided sampling.

    ``zeta0`` scales the default per-step schedule zeta_i = zeta0 *
    (1 - alpha_bar_i); an explicit ``zeta_schedule`` (length N, step order
    1..N) overrides it. ``adaptive`` enables backtracking halving of the
    posterior-sampling step until the evaluator value of the candidate does
    not decrease, falling back to a zero step after ``max_halvings``.
    """

    mode: str = "none"
    zeta0: float = 1.0
    zeta_schedule: tuple[float, ...] | None = None
    soft: SoftConfig = field(default_factory=SoftConfig)
    adaptive: bool = False
    max_halvings: int = 5
    clip_norm: float = 10.0
    full_jacobian: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"guidance mode must be one of {MODES}")
        if self.zeta0 < 0:
            raise ValueError("zeta0 must be non-negative")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be non-negative")
        if self.zeta_schedule is not None and any(z < 0 for z in self.zeta_schedule):
            raise ValueError("zeta schedule entries must be non-negative")

    def zeta(self, i: int, sched) -> float:
        if self.zeta_schedule is not None:
            return float(self.zeta_schedule[i - 1])
        return self.zeta0 * (1.0 - sched.alpha_bar(i))


@dataclass(frozen=True)
class SampleRequest:
    """One batch of trajectory draws under a formula."""

    count: int
    seed: int
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    formula: Formula | None = None
    labeling: LabelingConfig | None = None
    anchors: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be positive")
        if self.guidance.mode != "none":
            if self.formula is None:
                raise ValueError(f"mode {self.guidance.mode!r} requires a formula")
        if self.formula is not None and self.labeling is not None:
            missing = formula_atoms(self.formula) - set(range(len(self.labeling.props)))
            if missing:
                raise ValueError(f"formula uses propositions {sorted(missing)} not in labeling")


@dataclass
class SampleResult:
    trajectories: np.ndarray  # (count, T+1, d), plan space
    soft_values: np.ndarray | None  # (count,) evaluator value of each plan
    satisfied: np.ndarray | None  # (count,) boolean oracle on thresholded labels
    seed: int


def _clip_rows(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Per-sample norm clipping of a (B, T+1, d) guidance term."""
    if not max_norm:
        return grad
    norms = np.sqrt((grad**2).sum(axis=(1, 2), keepdims=True))
    factor = np.minimum(1.0, max_norm / np.maximum(norms, 1e-12))
    return grad * factor


def _value_gradient_wrt_estimate(
    x0_hat: np.ndarray,
    formula: Formula,
    labeling: LabelingConfig,
    denoiser: Denoiser,
    soft: SoftConfig,
) -> np.ndarray:
    """Gradient of f(formula, L(denormalized x0_hat)) w.r.t. normalized x0_hat."""
    plan = denoiser.normalizer.from_normalized(x0_hat)
    sigma = label(plan, labeling)
    grad_sigma = soft_gradient_checked(formula, sigma, soft)
    jac = label_jacobian(plan, labeling)  # (B, P, T+1, 2)
    grad_pos = (grad_sigma[..., None] * jac).sum(axis=1)  # (B, T+1, 2)
    grad = np.zeros_like(x0_hat)
    grad[..., :2] = grad_pos * denoiser.normalizer.halfrange[:2]
    return grad


def soft_gradient_checked(formula: Formula, sigma: np.ndarray, soft: SoftConfig) -> np.ndarray:
    from .ltlf import soft_gradient_batch

    grad = soft_gradient_batch(formula, sigma, soft)
    if np.isnan(grad).any():
        raise NextAtFinalStepError(
            "formula evaluation is undefined at this horizon (X past the final step)"
        )
    return grad


def conditional_score_ps(
    tau_i: np.ndarray,
    i: int,
    denoiser: Denoiser,
    formula: Formula,
    labeling: LabelingConfig,
    soft: SoftConfig = SoftConfig(),
    full_jacobian: bool = False,
) -> np.ndarray:
    """Approximate conditional score: gradient at tau_i of the smooth
    satisfaction value of the labeled Tweedie estimate.

    The default (frozen-score) convention treats the network output as
    locally constant, keeping only the linear 1/sqrt(alpha_bar) Tweedie
    factor; ``full_jacobian`` adds the network vector-Jacobian term.
    Input and output are in normalized trajectory space, shape (B, T+1, d)
    or a single (T+1, d) trajectory.
    """
    tau_i = np.asarray(tau_i, dtype=float)
    squeeze = tau_i.ndim == 2
    if squeeze:
        tau_i = tau_i[None]
    score = denoiser.score(tau_i, i)
    x0_hat = tweedie_estimate(tau_i, i, score, denoiser.sched)
    grad_x0 = _value_gradient_wrt_estimate(x0_hat, formula, labeling, denoiser, soft)
    a_bar = denoiser.sched.alpha_bar(i)
    if not full_jacobian:
        out = grad_x0 / np.sqrt(a_bar)
    else:
        batch = tau_i.shape[0]
        flat = Tensor(tau_i.reshape(batch, -1), requires_grad=True)
        with Tape() as tape:
            s = denoiser.score_tensor(flat, i)
            inner = ops.reduce_sum(ops.mul(s, Tensor(grad_x0.reshape(batch, -1))))
            tape.backward(inner)
        vjp = flat.grad.reshape(tau_i.shape)
        out = (grad_x0 + (1.0 - a_bar) * vjp) / np.sqrt(a_bar)
    return out[0] if squeeze else out


def _estimate_values(
    x: np.ndarray,
    level: int,
    denoiser: Denoiser,
    formula: Formula,
    labeling: LabelingConfig,
    soft: SoftConfig,
) -> np.ndarray:
    """Evaluator value of the clean estimate of ``x`` at noise ``level``."""
    if level == 0:
        x0 = x
    else:
        x0 = tweedie_estimate(x, level, denoiser.score(x, level), denoiser.sched)
    plan = denoiser.normalizer.from_normalized(x0)
    values, valid = evaluate_soft_batch(formula, label(plan, labeling), 0, soft)
    if not valid.all():
        raise NextAtFinalStepError("formula evaluation undefined at this horizon")
    return values


def _adaptive_step(
    base: np.ndarray,
    grad: np.ndarray,
    zeta: float,
    i: int,
    denoiser: Denoiser,
    formula: Formula,
    labeling: LabelingConfig,
    cfg: GuidanceConfig,
) -> np.ndarray:
    """Backtracking per-chain step: halve zeta until the candidate's
    estimated value does not fall below the un-stepped candidate's; give up
    (zero step) after max_halvings."""
    f_base = _estimate_values(base, i - 1, denoiser, formula, labeling, cfg.soft)
    zetas = np.full(base.shape[0], zeta)
    accepted = np.zeros(base.shape[0], dtype=bool)
    result = base.copy()
    for _ in range(cfg.max_halvings + 1):
        if accepted.all():
            break
        candidate = base + zetas[:, None, None] * grad
        f_cand = _estimate_values(candidate, i - 1, denoiser, formula, labeling, cfg.soft)
        newly = ~accepted & (f_cand >= f_base)
        result[newly] = candidate[newly]
        accepted |= newly
        zetas = np.where(accepted, zetas, zetas / 2.0)
    return result


def _make_guidance_fn(request: SampleRequest, denoiser: Denoiser, value_net: ValueNet | None):
    cfg = request.guidance
    if cfg.mode == "none":
        return None
    if cfg.mode == "posterior":
        formula, labeling = request.formula, request.labeling
        if labeling is None:
            raise ValueError("posterior sampling requires a labeling config")

        def fn(i, x, x0_hat, base):
            zeta = cfg.zeta(i, denoiser.sched)
            if zeta == 0.0:
                return base
            grad_x0 = _value_gradient_wrt_estimate(x0_hat, formula, labeling, denoiser, cfg.soft)
            if cfg.full_jacobian:
                grad = conditional_score_ps(
                    x, i, denoiser, formula, labeling, cfg.soft, full_jacobian=True
                )
            else:
                grad = grad_x0 / np.sqrt(denoiser.sched.alpha_bar(i))
            grad = _clip_rows(grad, cfg.clip_norm)
            if cfg.adaptive:
                return _adaptive_step(base, grad, zeta, i, denoiser, formula, labeling, cfg)
            return base + zeta * grad

        return fn

    if value_net is None:
        raise ValueError(f"mode {cfg.mode!r} requires a trained value network")
    if value_net.kind != cfg.mode:
        raise ValueError(f"value network kind {value_net.kind!r} does not match mode {cfg.mode!r}")
    if value_net.horizon != denoiser.horizon or value_net.dim != denoiser.dim:
        raise ValueError("value network was trained for a different trajectory shape")
    graph = formula_to_graph(request.formula)

    def fn(i, x, x0_hat, base):
        zeta = cfg.zeta(i, denoiser.sched)
        if zeta == 0.0:
            return base
        grad = value_net.value_input_gradient(graph, x, i)
        grad = _clip_rows(grad, cfg.clip_norm)
        return base + zeta * grad

    return fn


def sample(
    request: SampleRequest, denoiser: Denoiser, value_net: ValueNet | None = None
) -> SampleResult:
    """Draw trajectories under the requested guidance mode.

    Returns denormalized trajectories plus, when a formula and labeling are
    given, the evaluator value and boolean-oracle satisfaction of each plan.
    """
    fn = _make_guidance_fn(request, denoiser, value_net)
    rng = np.random.default_rng(request.seed)
    trajectories = sample_chain(
        denoiser, request.count, rng, anchors=request.anchors or None, guidance_fn=fn
    )
    soft_values = satisfied = None
    if request.formula is not None and request.labeling is not None:
        sigma = label(trajectories, request.labeling)
        soft_values, valid = evaluate_soft_batch(request.formula, sigma, 0, request.guidance.soft)
        soft_values = np.where(valid, soft_values, np.nan)
        satisfied = satisfies_batch(threshold_assignments(sigma), request.formula, 0)
    return SampleResult(trajectories, soft_values, satisfied, request.seed)


def guided_sample_ps(
    request: SampleRequest, denoiser: Denoiser
) -> SampleResult:
    """Posterior-sampling guidance (differentiable soft model checking)."""
    if request.guidance.mode != "posterior":
        raise ValueError("request mode must be 'posterior'")
    return sample(request, denoiser)


def guided_sample_rg(
    request: SampleRequest, denoiser: Denoiser, value_net: ValueNet
) -> SampleResult:
    """Value-network (regressor or classifier) guidance."""
    if request.guidance.mode not in ("regressor", "classifier"):
        raise ValueError("request mode must be 'regressor' or 'classifier'")
    return sample(request, denoiser, value_net)
