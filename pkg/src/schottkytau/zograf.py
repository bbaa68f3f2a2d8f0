"""Zograf's F function and the Dedekind eta kernel.

F is the double product over oriented primitive conjugacy classes of the
group, F = prod_gamma prod_m (1 - q_gamma^m), valid when the exponent of
convergence is below 1; at genus 1 both orientations of the single core
geodesic carry q_gamma = q, reproducing prod (1 - q^m)^2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .numerics import holomorphic_fd, pairwise_sum
from .schottky import delta_estimate, primitive_classes

__all__ = [
    "QSeriesConfig",
    "FProductResult",
    "ConvergenceGateError",
    "eta",
    "log_eta",
    "eta_product_log",
    "f_product",
    "f_holomorphy_check",
]


class ConvergenceGateError(Exception):
    """Raised when the delta < 1 validity gate fails."""


@dataclass(frozen=True)
class QSeriesConfig:
    truncation: int
    tail_bound: float

    @classmethod
    def for_q(cls, q_abs, target=1e-16):
        if not 0 <= q_abs < 1:
            raise ValueError("need |q| < 1")
        if q_abs == 0:
            return cls(truncation=1, tail_bound=0.0)
        n = max(4, int(math.log(target * (1 - q_abs) ** 2) / math.log(q_abs)) + 1)
        tail = q_abs ** (n + 1) / (1 - q_abs) ** 2
        return cls(truncation=n, tail_bound=tail)


def eta_product_log(q, cfg=None):
    """log prod_{m>=1} (1 - q^m) (principal branch per factor) with tail bound."""
    q = complex(q)
    cfg = cfg or QSeriesConfig.for_q(abs(q))
    ms = np.arange(1, cfg.truncation + 1)
    logs = np.log1p(-(q ** ms))
    return complex(pairwise_sum(list(logs))), cfg


def log_eta(tau, cfg=None):
    """log eta(tau) = pi i tau / 24 + log prod (1 - q^m), q = e^{2 pi i tau}."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    q = cmath.exp(2j * cmath.pi * tau)
    lp, cfg = eta_product_log(q, cfg)
    return 1j * cmath.pi * tau / 12.0 + lp, cfg


def eta(tau, cfg=None):
    """Dedekind eta with the tail bound of the truncated product attached."""
    le, cfg = log_eta(tau, cfg)
    return cmath.exp(le), cfg


@dataclass(frozen=True)
class FProductResult:
    value: complex
    log_value: complex
    classes_used: int
    max_word_length: int
    delta_gate: float


def f_product(group, max_word_length, inner_target=1e-15, delta_gate=None):
    """F over oriented primitive classes of word length <= max_word_length."""
    if max_word_length <= 0:
        return FProductResult(value=1.0 + 0j, log_value=0j, classes_used=0,
                              max_word_length=0, delta_gate=0.0)
    if delta_gate is None:
        delta_gate, _ = delta_estimate(group, max_length=min(max_word_length, 7))
    if delta_gate >= 1.0:
        raise ConvergenceGateError(f"delta estimate {delta_gate:.3f} >= 1")
    classes = primitive_classes(group, max_word_length)
    logs = []
    for cls in classes:
        q = cls.multiplier
        cfg = QSeriesConfig.for_q(abs(q), target=inner_target)
        ms = np.arange(1, cfg.truncation + 1)
        logs.append(complex(pairwise_sum(list(np.log1p(-(q ** ms))))))
    log_f = pairwise_sum(logs) if logs else 0j
    return FProductResult(value=cmath.exp(log_f), log_value=log_f,
                          classes_used=len(classes),
                          max_word_length=max_word_length,
                          delta_gate=float(delta_gate))


def f_holomorphy_check(family, w0, max_word_length=8, step=1e-4):
    """Cauchy-Riemann residual of w -> log F along a one-parameter group family."""

    def logf(w):
        return f_product(family(w), max_word_length).log_value

    deriv, cr = holomorphic_fd(logf, w0, step)
    return deriv, cr
