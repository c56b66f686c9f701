"""Binary SPSA and its Barzilai-Borwein accelerated variant for feature selection.

Both optimizers keep a continuous weight vector ``w``. Each iteration
perturbs it by ``+/- c * delta`` with a random +/-1 vector ``delta``, clamps
and rounds the two perturbed points into feature masks, measures a noisy
loss for each mask, and steps along the simultaneous-perturbation gradient
estimate. :func:`run_bspsa` uses the monotone gain ``a / (A + k)^alpha``;
:func:`run_spsafs` replaces it with a clipped, smoothed BB step computed from
averaged gradient estimates.

Random streams per run seed ``s`` and iteration ``k``:

* perturbation: ``derive_seed(s, "delta", k)``
* evaluation noise: ``derive_seed(s, "noise", k)`` for both measurements
  (common random numbers); when both perturbed points round to the same
  mask the second measurement uses ``derive_seed(s, "noise-minus", k)``
  so the difference is pure measurement noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .data_io import derive_seed, sample_perturbation
from .types import FeatureMask, IterationRecord, RunTrace, as_weights, bound, round_mask

DEGENERATE_EPS = 1e-12
BB_VARIANTS = ("ratio_gg", "ratio_xx")


class LossEvaluator(Protocol):
    def evaluate(self, mask: FeatureMask, noise_seed: int) -> float: ...


class EvaluationError(RuntimeError):
    """A loss evaluation failed; ``mask`` is the subset being evaluated."""

    def __init__(self, mask: FeatureMask, cause: BaseException):
        super().__init__(f"evaluating mask {mask} failed: {cause!r}")
        self.mask = mask


class _Measure:
    """Adapts an evaluator (object or plain callable) and counts real calls."""

    def __init__(self, evaluator, empty_loss: float = 1.0, cache: bool = False):
        self._fn = evaluator.evaluate if hasattr(evaluator, "evaluate") else evaluator
        self.empty_loss = empty_loss
        self.calls = 0
        self._cache: dict[FeatureMask, float] | None = {} if cache else None

    def __call__(self, mask: FeatureMask, noise_seed: int) -> float:
        if mask.is_empty:
            return self.empty_loss
        if self._cache is not None and mask in self._cache:
            return self._cache[mask]
        self.calls += 1
        try:
            loss = float(self._fn(mask, noise_seed))
        except Exception as exc:
            raise EvaluationError(mask, exc) from exc
        if self._cache is not None:
            self._cache[mask] = loss
        return loss


@dataclass(frozen=True)
class MonotoneGainConfig:
    """Monotone gain ``a_k = a / (A + k)^alpha`` and constant perturbation size ``c``.

    ``gamma`` is kept for the continuous schedule ``c / gamma^k``; binary
    mode requires ``gamma == 1`` so the perturbation size stays constant.
    """

    a: float = 0.75
    A: float = 100.0
    alpha: float = 0.6
    c: float = 0.05
    gamma: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.alpha <= 0 or self.c <= 0:
            raise ValueError("a, alpha and c must be positive")
        if self.A < 0:
            raise ValueError("A must be non-negative")
        if self.gamma != 1.0:
            raise ValueError("binary SPSA uses a constant perturbation size (gamma = 1)")


def monotone_gain(k: int, cfg: MonotoneGainConfig) -> float:
    """``a / (A + k)^alpha``; when ``A + k == 0`` the base ``A + k + 1`` is used."""
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    base = cfg.A + k
    if base <= 0:
        base = cfg.A + k + 1
    return cfg.a / base**cfg.alpha


@dataclass(frozen=True)
class GradientWindow:
    """How many past raw gradient estimates enter the average.

    ``size=None`` averages the whole history; ``size=m`` averages the current
    estimate with the previous ``min(m, k)`` ones.
    """

    size: int | None = None

    def __post_init__(self):
        if self.size is not None and self.size < 0:
            raise ValueError("gradient window must be >= 0")


ALL_HISTORY = GradientWindow(None)


@dataclass(frozen=True)
class SpsaFsConfig:
    c: float = 0.05
    iterations: int = 300
    smoothing_window: int = 2
    gradient_window: GradientWindow = ALL_HISTORY
    bb_variant: str | None = "ratio_gg"  # None disables BB: gains follow the fallback schedule
    fallback: MonotoneGainConfig = MonotoneGainConfig()
    stall_tolerance: int | None = None
    gain_bounds: tuple[float, float] | None = None  # fixed clipping envelope

    def __post_init__(self):
        if self.gain_bounds is not None and (
            len(self.gain_bounds) != 2 or not 0 < self.gain_bounds[0] <= self.gain_bounds[1] < math.inf
        ):
            raise ValueError("gain_bounds must satisfy 0 < lo <= hi < inf")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.smoothing_window < 0:
            raise ValueError("smoothing_window must be >= 0")
        if self.bb_variant is not None and self.bb_variant not in BB_VARIANTS:
            raise ValueError(f"bb_variant must be one of {BB_VARIANTS} or None")
        if self.stall_tolerance is not None and self.stall_tolerance < 1:
            raise ValueError("stall_tolerance must be >= 1")


@dataclass
class GainState:
    """Rolling memory feeding the BB step, gain clipping/smoothing and averaging.

    ``iterates`` and ``averaged`` hold at most the last two iterates and the
    last two averaged gradients; ``gradients`` every raw estimate so far;
    ``gains`` every accepted (clipped, unsmoothed) gain, which also spans
    the clipping envelope.
    """

    iterates: list[np.ndarray] = field(default_factory=list)
    averaged: list[np.ndarray] = field(default_factory=list)
    gradients: list[np.ndarray] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.gains)

    def push_iterate(self, w: np.ndarray) -> None:
        self.iterates = (self.iterates + [w])[-2:]

    def push_averaged(self, g: np.ndarray) -> None:
        self.averaged = (self.averaged + [g])[-2:]


def spsa_gradient(y_plus: float, y_minus: float, delta: np.ndarray, c: float) -> np.ndarray:
    """Simultaneous-perturbation estimate ``(y+ - y-) / (2 c delta_j)``."""
    return (y_plus - y_minus) / (2.0 * c) / np.asarray(delta, dtype=np.float64)


def estimate_gradient(w, delta, c: float, evaluator, seed_pair: tuple[int, int], empty_loss: float = 1.0):
    """Perturb, bound, round, measure and form the gradient estimate.

    ``seed_pair = (common, alternate)``: both masks are measured with
    ``common`` unless they round to the same mask, in which case the minus
    side uses ``alternate``.

    Returns ``(gradient, y_plus, y_minus, mask_plus, mask_minus)``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    measure = evaluator if isinstance(evaluator, _Measure) else _Measure(evaluator, empty_loss)
    w = np.asarray(w, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    mask_plus = round_mask(bound(w + c * delta))
    mask_minus = round_mask(bound(w - c * delta))
    common, alternate = seed_pair
    y_plus = measure(mask_plus, common)
    y_minus = measure(mask_minus, alternate if mask_minus == mask_plus else common)
    return spsa_gradient(y_plus, y_minus, delta, c), y_plus, y_minus, mask_plus, mask_minus


def bb_step(dw, dg, variant: str = "ratio_gg") -> float | None:
    """BB quotient from iterate difference ``dw`` and gradient difference ``dg``.

    ``ratio_gg`` is ``dw.dg / dg.dg``, ``ratio_xx`` is ``dw.dw / dw.dg``.
    Returns None when the denominator is below 1e-12 in magnitude.
    """
    dw = np.asarray(dw, dtype=np.float64)
    dg = np.asarray(dg, dtype=np.float64)
    if variant == "ratio_gg":
        num, den = float(dw @ dg), float(dg @ dg)
    elif variant == "ratio_xx":
        num, den = float(dw @ dw), float(dw @ dg)
    else:
        raise ValueError(f"unknown BB variant {variant!r}")
    if abs(den) < DEGENERATE_EPS:
        return None
    return num / den


def bb_gain(state: GainState, variant: str = "ratio_gg") -> float | None:
    """BB quotient from the last two iterates and averaged gradients in ``state``."""
    if len(state.iterates) < 2 or len(state.averaged) < 2:
        raise ValueError("bb_gain needs two iterates and two gradients")
    return bb_step(state.iterates[1] - state.iterates[0], state.averaged[1] - state.averaged[0], variant)


def clip_gain(raw: float | None, history: Sequence[float], fallback: float) -> float:
    """Clamp ``raw`` into the [min, max] envelope of the positive gains in ``history``.

    Empty history returns ``fallback``. A degenerate (None), non-finite or
    non-positive ``raw`` returns the envelope minimum.
    """
    if not fallback > 0:
        raise ValueError("fallback gain must be positive")
    envelope = [g for g in history if g > 0 and math.isfinite(g)]
    if not envelope:
        return fallback
    lo, hi = min(envelope), max(envelope)
    if raw is None or not math.isfinite(raw) or raw <= 0:
        return lo
    return max(lo, min(raw, hi))


def smooth_gain(history: Sequence[float], current: float, k: int, window: int = 2) -> float:
    """Mean of ``current`` and the last ``min(window, k)`` accepted gains."""
    t = min(window, k, len(history))
    if t == 0:
        return current
    return math.fsum([*history[len(history) - t :], current]) / (t + 1)


def average_gradient(history: Sequence[np.ndarray], current, window: GradientWindow = ALL_HISTORY) -> np.ndarray:
    """Componentwise mean of ``current`` and the selected past raw estimates."""
    current = np.asarray(current, dtype=np.float64)
    k = len(history)
    m = k if window.size is None else min(window.size, k)
    if m == 0:
        return current.copy()
    return np.mean(np.vstack([*history[k - m :], current]), axis=0)


def _perturbation_source(perturbations, seed: int, p: int) -> Callable[[int], np.ndarray]:
    if perturbations is None:
        return lambda k: sample_perturbation(derive_seed(seed, "delta", k), p)
    if callable(perturbations):
        return lambda k: np.asarray(perturbations(k), dtype=np.float64)
    scripted = [np.asarray(d, dtype=np.float64) for d in perturbations]
    return lambda k: scripted[k]


def _noise_seeds(seed: int, k: int) -> tuple[int, int]:
    return derive_seed(seed, "noise", k), derive_seed(seed, "noise-minus", k)


def _check_start(p: int, w0) -> np.ndarray:
    if p < 1:
        raise ValueError("p must be >= 1")
    return np.full(p, 0.5) if w0 is None else as_weights(w0, p)


def _stalled(trace: RunTrace, tolerance: int | None) -> bool:
    if tolerance is None or trace.iterations_run <= tolerance:
        return False
    best = trace.running_best()
    return best[-1] >= best[-1 - tolerance]


def _finish(trace: RunTrace, w: np.ndarray, measure: _Measure, started: float) -> RunTrace:
    trace.final_weights = tuple(float(v) for v in w)
    trace.final_mask = round_mask(bound(w))
    trace.evaluations = measure.calls
    trace.wall_time = time.perf_counter() - started
    return trace


def run_bspsa(
    evaluator,
    p: int,
    cfg: MonotoneGainConfig = MonotoneGainConfig(),
    iterations: int = 300,
    w0=None,
    seed: int = 0,
    *,
    perturbations=None,
    empty_loss: float = 1.0,
    cache: bool = False,
    stall_tolerance: int | None = None,
) -> RunTrace:
    """Binary SPSA with the monotone gain schedule.

    ``w0`` defaults to all 0.5. ``perturbations`` may script the +/-1 draws
    (a sequence indexed by iteration or a callable ``k -> delta``). With
    ``cache`` each distinct mask is measured once; only use it with
    noise-free evaluators.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    w = _check_start(p, w0)
    started = time.perf_counter()
    measure = _Measure(evaluator, empty_loss, cache)
    draw = _perturbation_source(perturbations, seed, p)
    trace = RunTrace()
    for k in range(iterations):
        g, y_plus, y_minus, m_plus, m_minus = estimate_gradient(w, draw(k), cfg.c, measure, _noise_seeds(seed, k))
        a_k = monotone_gain(k, cfg)
        w = w - a_k * g
        trace.add(IterationRecord(k, y_plus, y_minus, a_k, m_plus, m_minus, tuple(w.tolist())))
        if _stalled(trace, stall_tolerance):
            break
    return _finish(trace, w, measure, started)


def run_spsafs(
    evaluator,
    p: int,
    cfg: SpsaFsConfig = SpsaFsConfig(),
    w0=None,
    seed: int = 0,
    *,
    perturbations=None,
    empty_loss: float = 1.0,
    cache: bool = False,
) -> RunTrace:
    """SPSA with averaged gradients and a clipped, smoothed BB gain.

    Iteration 0 has no gradient difference and takes the fallback monotone
    gain, so the first step matches :func:`run_bspsa`. Later iterations
    compute the BB quotient from the last two iterates and averaged
    gradients, clamp it into the envelope of gains seen so far (degenerate
    or negative quotients take the envelope minimum) and average it with the
    previous ``smoothing_window`` accepted gains. With ``bb_variant=None``
    the gain is the fallback schedule itself.

    Note that the envelope only ever contains accepted gains, and the
    first of them is ``a_0``; every later gain is therefore clamped to
    ``[a_0, a_0]``. Set ``cfg.gain_bounds = (lo, hi)`` to clip against a
    fixed envelope instead.
    """
    w = _check_start(p, w0)
    started = time.perf_counter()
    measure = _Measure(evaluator, empty_loss, cache)
    draw = _perturbation_source(perturbations, seed, p)
    state = GainState()
    trace = RunTrace()
    for k in range(cfg.iterations):
        raw_g, y_plus, y_minus, m_plus, m_minus = estimate_gradient(
            w, draw(k), cfg.c, measure, _noise_seeds(seed, k)
        )
        g = average_gradient(state.gradients, raw_g, cfg.gradient_window)
        state.gradients.append(raw_g)
        state.push_iterate(w)
        state.push_averaged(g)
        fallback = monotone_gain(k, cfg.fallback)
        if cfg.bb_variant is None or k == 0:
            gain = fallback
        else:
            envelope = state.gains if cfg.gain_bounds is None else cfg.gain_bounds
            gain = clip_gain(bb_gain(state, cfg.bb_variant), envelope, fallback)
        step = smooth_gain(state.gains, gain, k, cfg.smoothing_window)
        state.gains.append(gain)
        w = w - step * g
        trace.add(IterationRecord(k, y_plus, y_minus, step, m_plus, m_minus, tuple(w.tolist())))
        if _stalled(trace, cfg.stall_tolerance):
            break
    return _finish(trace, w, measure, started)


def rank_features(weights, m: int) -> list[int]:
    """Top ``m`` features (0-based) by bounded final weight, ties to the lower index.

    ``weights`` may be a :class:`RunTrace` (its final weights are used) or
    a weight vector.
    """
    if isinstance(weights, RunTrace):
        weights = weights.final_weights
    w = bound(as_weights(weights))
    if not 1 <= m <= len(w):
        raise ValueError(f"m must be in [1, {len(w)}], got {m}")
    order = sorted(range(len(w)), key=lambda j: (-w[j], j))
    return order[:m]
