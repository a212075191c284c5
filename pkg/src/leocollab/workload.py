"""Per-task workload model: packet volumes, detection-accuracy surrogates,
and the two closed-form subproblems that size the data and model packets.

A task splits its captured frames between the on-board small detector and a
remote large model. The offloaded share ``alpha`` generates a data packet
(extracted features plus imagery re-quantized to ``q_bar`` bits per pixel)
toward a computing satellite, which answers with a model packet of distilled
weights. Accuracy of both routes is captured by saturating-exponential
surrogates fitted between configured floor/ceiling values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InfeasibleError


@dataclass(frozen=True)
class WorkloadConfig:
    """Sizes, compute costs and accuracy-surrogate parameters for one task."""

    frames: int = 100
    pixels_per_frame: int = 131_072
    bits_per_pixel: int = 8
    feature_bits_per_frame: float = 2.0e5
    small_model_ops_per_frame: float = 1.6e11
    large_model_ops_per_frame: float = 6.16e11
    preproc_cycles_per_bit: float = 200.0
    quant_levels: tuple[float, ...] = (0.25, 0.40, 0.55, 0.70, 1.0)
    model_packet_bits_min: float = 1.0e6
    model_packet_bits_max: float = 1.0e8
    map_min: float = 0.8
    large_map_max: float = 0.9
    small_map_base: float = 0.6
    small_map_max: float = 0.85
    kappa_offload: float = 5.0
    kappa_quant: float = 5.0
    kappa_model: float = 3.0

    def __post_init__(self):
        if self.frames < 1 or self.pixels_per_frame < 1 or self.bits_per_pixel < 1:
            raise ConfigError("frame geometry must be positive")
        if self.feature_bits_per_frame <= 0:
            raise ConfigError("feature_bits_per_frame must be positive")
        if self.small_model_ops_per_frame <= 0 or self.large_model_ops_per_frame <= 0:
            raise ConfigError("per-frame op counts must be positive")
        if self.preproc_cycles_per_bit < 0:
            raise ConfigError("preproc_cycles_per_bit must be non-negative")
        if not self.quant_levels:
            raise ConfigError("quant_levels must be non-empty")
        if list(self.quant_levels) != sorted(self.quant_levels):
            raise ConfigError("quant_levels must be sorted ascending")
        if self.quant_levels[0] <= 0 or self.quant_levels[-1] > self.bits_per_pixel:
            raise ConfigError("quant_levels must lie in (0, bits_per_pixel]")
        if not 0 < self.model_packet_bits_min < self.model_packet_bits_max:
            raise ConfigError("model packet bounds must satisfy 0 < min < max")
        if not 0.0 < self.map_min < 1.0:
            raise ConfigError("map_min must lie in (0, 1)")
        if not 0.0 < self.large_map_max <= 1.0:
            raise ConfigError("large_map_max must lie in (0, 1]")
        if not 0.0 <= self.small_map_base < self.small_map_max <= 1.0:
            raise ConfigError("small model accuracy span must satisfy 0 <= base < max <= 1")
        if min(self.kappa_offload, self.kappa_quant, self.kappa_model) <= 0:
            raise ConfigError("surrogate curvatures must be positive")


def image_bits(w: WorkloadConfig) -> float:
    """Raw captured imagery for the whole task, in bits."""
    return float(w.bits_per_pixel) * w.frames * w.pixels_per_frame


def feature_bits(w: WorkloadConfig, alpha: float) -> float:
    return alpha * w.frames * w.feature_bits_per_frame


def quantized_pixel_bits(w: WorkloadConfig, alpha: float, q_bar: float) -> float:
    """Re-quantized imagery accompanying the features of the offloaded share."""
    return alpha * w.frames * w.pixels_per_frame * q_bar


def data_packet_bits(w: WorkloadConfig, alpha: float, q_bar: float) -> float:
    return feature_bits(w, alpha) + quantized_pixel_bits(w, alpha, q_bar)


def detection_accuracy(w: WorkloadConfig, beta: float, q_bar: float) -> float:
    """Large-model mAP surrogate over offloaded share and quantization depth.

    Saturating in both arguments, normalized so full offload at the deepest
    quantization level reaches ``large_map_max`` and zero offload gives zero.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError("offloaded share must lie in [0, 1]")
    if q_bar < 0:
        raise ConfigError("q_bar must be non-negative")
    q_max = w.quant_levels[-1]
    num = (1.0 - math.exp(-w.kappa_offload * beta)) * (1.0 - math.exp(-w.kappa_quant * q_bar))
    den = (1.0 - math.exp(-w.kappa_offload)) * (1.0 - math.exp(-w.kappa_quant * q_max))
    return w.large_map_max * num / den


def updated_small_accuracy(w: WorkloadConfig, model_bits: float) -> float:
    """Small-model mAP after receiving a distilled update of the given size."""
    lo, hi = w.model_packet_bits_min, w.model_packet_bits_max
    if not lo <= model_bits <= hi:
        raise ConfigError(f"model packet size must lie in [{lo:g}, {hi:g}] bits")
    u = (model_bits - lo) / (hi - lo)
    span = w.small_map_max - w.small_map_base
    shape = (1.0 - math.exp(-w.kappa_model * u)) / (1.0 - math.exp(-w.kappa_model))
    return w.small_map_base + span * shape


def offload_floor(w: WorkloadConfig) -> float:
    """Smallest offloaded share that can still meet ``map_min``.

    Below this value even the deepest quantization level fails the accuracy
    constraint, so the data-packet subproblem is infeasible.
    """
    frac = w.map_min * (1.0 - math.exp(-w.kappa_offload)) / w.large_map_max
    if frac >= 1.0:
        raise InfeasibleError(
            f"map_min={w.map_min} exceeds the large-model surrogate ceiling",
            cause="accuracy_ceiling",
        )
    return -math.log(1.0 - frac) / w.kappa_offload


def solve_data_packet(w: WorkloadConfig, alpha: float) -> tuple[float, float, float]:
    """Pick the shallowest quantization level meeting the accuracy floor.

    Volume grows monotonically with ``q_bar`` while accuracy saturates, so the
    smallest feasible level minimizes the data packet. Returns
    ``(q_bar, data_bits, accuracy)`` or raises InfeasibleError when even the
    deepest level misses ``map_min`` at this ``alpha``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    for q in w.quant_levels:
        acc = detection_accuracy(w, alpha, q)
        if acc >= w.map_min:
            return q, data_packet_bits(w, alpha, q), acc
    raise InfeasibleError(
        f"no quantization level reaches map_min={w.map_min} at alpha={alpha:.6g}",
        cause="accuracy_floor",
    )


def solve_model_packet(w: WorkloadConfig) -> tuple[float, float]:
    """Smallest model packet whose post-update small-model mAP meets the floor.

    Closed-form inversion of the saturating surrogate; returns
    ``(model_bits, accuracy)``.
    """
    if w.map_min > w.small_map_max:
        raise InfeasibleError(
            f"map_min={w.map_min} exceeds the reachable small-model mAP "
            f"{w.small_map_max}",
            cause="model_ceiling",
        )
    lo, hi = w.model_packet_bits_min, w.model_packet_bits_max
    if w.map_min <= w.small_map_base:
        return lo, updated_small_accuracy(w, lo)
    frac = (w.map_min - w.small_map_base) / (w.small_map_max - w.small_map_base)
    u = -math.log(1.0 - frac * (1.0 - math.exp(-w.kappa_model))) / w.kappa_model
    bits = min(hi, lo + u * (hi - lo))
    return bits, updated_small_accuracy(w, bits)


def local_inference_time(
    w: WorkloadConfig, alpha: float, capacity_ops: float, utilization: float
) -> float:
    """Small-detector time over the retained (1 - alpha) share of frames."""
    _check_compute(capacity_ops, utilization)
    return (1.0 - alpha) * w.frames * w.small_model_ops_per_frame / (
        utilization * capacity_ops
    )


def feature_extraction_time(
    w: WorkloadConfig, alpha: float, capacity_ops: float, utilization: float
) -> float:
    """Per-bit preprocessing of the offloaded imagery before transmission."""
    _check_compute(capacity_ops, utilization)
    return alpha * image_bits(w) * w.preproc_cycles_per_bit / (utilization * capacity_ops)


def large_inference_time(
    w: WorkloadConfig, alpha: float, capacity_ops: float, utilization: float
) -> float:
    """Large-model time over the offloaded share, on the computing satellite."""
    _check_compute(capacity_ops, utilization)
    return alpha * w.frames * w.large_model_ops_per_frame / (utilization * capacity_ops)


def _check_compute(capacity_ops: float, utilization: float):
    if capacity_ops <= 0:
        raise ConfigError("compute capacity must be positive for inference")
    if not 0.0 < utilization <= 1.0:
        raise ConfigError("utilization must lie in (0, 1]")
