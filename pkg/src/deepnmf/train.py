"""Training orchestration: layer-wise pretraining and fine-tuning sweeps.

Pretraining walks the layers once, seeding each (W_l, H_l) with NNSVD on the
previous representation and alternating exact block solves (H first, then W)
until the layer objective stalls. Fine-tuning then sweeps the whole system,
layer by layer from the bottom, updating W_l and H_l with the exact block
subproblems from :mod:`deepnmf.models`; every block solve is monotone, so
the recorded objective trace never increases.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .apg import StopRule, apg_solve
from .errors import InternalError, InvalidInputError
from .linalg import as_matrix, check_nonneg, frobenius_sq
from .models import (FactorStack, finetune_objective, finetune_problem,
                     pretrain_problem)
from .nnsvd import nnsvd_init

_TINY = 1e-300


@dataclass(frozen=True)
class TrainConfig:
    """Stopping knobs for both phases plus bookkeeping options.

    ``inner_stop`` governs each block solve; ``max_sweeps``/``rel_obj_tol``
    stop the outer alternation (pretraining) and the fine-tuning sweeps.
    ``seed`` feeds any randomized fallback and is recorded for provenance;
    the training path itself is deterministic.
    """

    inner_stop: StopRule = field(default_factory=StopRule)
    max_sweeps: int = 200
    rel_obj_tol: float = 1e-6
    seed: int = 0
    record_trace: bool = True

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise InvalidInputError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.rel_obj_tol <= 0:
            raise InvalidInputError(f"rel_obj_tol must be > 0, got {self.rel_obj_tol}")


@dataclass
class TrainReport:
    """Objective bookkeeping for one training run."""

    objective_trace: list
    final_objective: float
    sweeps_used: int
    per_layer_pretrain_objectives: list = field(default_factory=list)
    stalled: bool = False


def _rel_change(prev, cur):
    return abs(prev - cur) / max(abs(prev), _TINY)


def _noise_floor(x):
    """Absolute objective level indistinguishable from float64 roundoff of a
    squared-error sum over ``x``-sized data; values below it count as zero
    for stopping and monotonicity purposes."""
    scale = np.finfo(np.float64).eps * max(1.0, float(np.abs(x).max()))
    return 100.0 * x.size * scale * scale


def layer_objective(spec, layer, h_prev, w, h):
    """Pretraining objective of one layer: half squared fit of the previous
    representation plus this layer's penalties."""
    val = 0.5 * frobenius_sq(h_prev - w @ h)
    mu = spec.w_weight(layer)
    if mu:
        s = w.sum(axis=0)
        val += 0.5 * mu * float(np.dot(s, s))
    lam, kind = spec.h_penalty(layer)
    if lam and kind == "ones":
        s = h.sum(axis=0)
        val += 0.5 * lam * float(np.dot(s, s))
    elif lam and kind == "ridge":
        val += 0.5 * lam * frobenius_sq(h)
    return val


def _pretrain_layer(spec, layer, h_input, cfg):
    """NNSVD seed plus alternating exact block solves for one layer."""
    w, h = nnsvd_init(h_input, spec.layer_sizes[layer - 1])
    floor = _noise_floor(h_input)
    trace = []
    prev = math.inf
    for _ in range(cfg.max_sweeps):
        hp = pretrain_problem(spec, layer, "h", h_input, w, h)
        h = apg_solve(h, hp, cfg.inner_stop)
        wp = pretrain_problem(spec, layer, "w", h_input, w, h)
        w = apg_solve(w, wp, cfg.inner_stop)
        cur = layer_objective(spec, layer, h_input, w, h)
        trace.append(cur)
        if _rel_change(prev, cur) < cfg.rel_obj_tol or cur <= floor:
            break
        prev = cur
    return w, h, trace


def pretrain(spec, x, cfg=TrainConfig(), between_layers=None, after_last=None,
             full_output=False):
    """Greedy layer-wise initialization of the whole stack.

    ``between_layers`` (optional) maps each solved representation before it
    becomes the next layer's input; ``after_last`` maps the final
    representation once. Both hooks exist for the nonlinear path and are
    identity here.

    With ``full_output=True`` also returns the per-layer objective traces.
    """
    x = as_matrix(x, "x")
    check_nonneg(x, "x")
    ws, hs, traces = [], [], []
    h_input = x
    for layer in range(1, spec.depth + 1):
        w, h, trace = _pretrain_layer(spec, layer, h_input, cfg)
        if layer == spec.depth and after_last is not None:
            h = after_last(h)
        ws.append(w)
        hs.append(h)
        traces.append(trace)
        if layer < spec.depth:
            h_input = between_layers(h) if between_layers is not None else h
    stack = FactorStack(ws, hs)
    if full_output:
        return stack, traces
    return stack


def finetune(spec, x, stack, cfg=TrainConfig()):
    """Whole-system sweeps over the pretrained stack (linear models).

    Each sweep visits layers bottom-up, updating W_l then H_l with exact
    block solves; the basis-product cache is refreshed as soon as a basis
    factor changes, so every subproblem sees current factors. Stops when the
    relative objective change drops below ``rel_obj_tol`` or at
    ``max_sweeps``.
    """
    x = as_matrix(x, "x")
    check_nonneg(x, "x")
    stack = stack.copy()
    floor = _noise_floor(x)
    obj0 = finetune_objective(spec, x, stack)
    trace = [obj0]
    sweeps = 0
    for _ in range(cfg.max_sweeps):
        for layer in range(1, spec.depth + 1):
            wp = finetune_problem(spec, layer, "w", x, stack)
            stack.set_w(layer, apg_solve(stack.w[layer - 1], wp, cfg.inner_stop))
            hp = finetune_problem(spec, layer, "h", x, stack)
            stack.set_h(layer, apg_solve(stack.h[layer - 1], hp, cfg.inner_stop))
        cur = finetune_objective(spec, x, stack)
        sweeps += 1
        trace.append(cur)
        if cur > trace[-2] * (1.0 + 1e-10) + floor:
            raise InternalError(
                f"objective rose from {trace[-2]} to {cur}; a gradient or "
                "Lipschitz constant is wrong")
        if _rel_change(trace[-2], cur) < cfg.rel_obj_tol or cur <= floor:
            break
    report = TrainReport(objective_trace=trace if cfg.record_trace else [],
                         final_objective=trace[-1], sweeps_used=sweeps)
    return stack, report


def fit(spec, x, cfg=TrainConfig()):
    """Pretrain then fine-tune, dispatching on the model's activation.

    Returns (stack, report); the report carries the final pretraining
    objective of every layer alongside the fine-tuning trace.
    """
    if spec.activation == "linear":
        stack, layer_traces = pretrain(spec, x, cfg, full_output=True)
        stack, report = finetune(spec, x, stack, cfg)
    else:
        from .nonlinear import nonlinear_finetune, nonlinear_pretrain

        stack, layer_traces = nonlinear_pretrain(spec, x, cfg, full_output=True)
        stack, report = nonlinear_finetune(spec, x, stack, cfg)
    report.per_layer_pretrain_objectives = [t[-1] if t else math.nan
                                            for t in layer_traces]
    return stack, report
