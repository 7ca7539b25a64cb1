"""Adaptive one-step integration used by the flow modules.

Classical 4th-order stepping with step-doubling error control: each
accepted step is computed once at size h and once as two half steps; the
Richardson difference drives the step-size controller and the two-half-step
result is kept. The midpoint state is reused for Simpson quadrature of any
requested along-trajectory integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["StepControl", "DivergenceError", "integrate_adaptive"]


@dataclass(frozen=True)
class StepControl:
    """Tolerances for the adaptive stepper.

    rtol/atol enter the per-step error norm; h0 is the initial trial
    step; a rejected step at min_step declares the run divergent.
    """

    rtol: float = 1e-12
    atol: float = 1e-14
    h0: float = 1e-2
    min_step: float = 1e-13
    max_steps: int = 2_000_000


class DivergenceError(RuntimeError):
    """Step size underflow; carries the last valid state and the samples
    recorded before the failure."""

    def __init__(self, s: float, y: np.ndarray, message: str = "step size underflow",
                 partial=None):
        super().__init__(f"{message} at s={s:.6g}")
        self.s = s
        self.y = y
        self.partial = partial  # (s_samples, y_samples) before failure


def _rk4_step(f, s, y, h):
    k1 = f(s, y)
    k2 = f(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(s + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_adaptive(f, y0, s_span, control=StepControl(), dense_s=None,
                       step_observers=None):
    """Integrate y' = f(s, y) over s_span = (s0, s1), s1 >= s0.

    y0 may be a real or complex ndarray (flattened internally by the
    caller). dense_s lists increasing sample locations in s_span at which
    the state is recorded. step_observers maps names to scalar functions
    g(s, y); each is integrated over the span by per-step Simpson rule.

    Returns (s_samples, y_samples, integrals_dict).
    """
    s0, s1 = float(s_span[0]), float(s_span[1])
    if not (np.isfinite(s0) and np.isfinite(s1)) or s1 < s0:
        raise ValueError("s_span must be finite with s1 >= s0")
    y = np.array(y0, dtype=complex)
    s = s0
    observers = step_observers or {}
    eps_s = 1e-12 * max(1.0, abs(s1))

    if dense_s is None:
        dense_s = np.array([s0, s1])
    dense_s = np.asarray(dense_s, dtype=float)
    if dense_s.size and (dense_s[0] < s0 - eps_s or dense_s[-1] > s1 + eps_s):
        raise ValueError("dense_s outside s_span")

    samples_s: list[float] = []
    samples_y: list[np.ndarray] = []
    integrals = {name: 0.0 for name in observers}

    next_idx = 0
    while next_idx < dense_s.size and dense_s[next_idx] <= s0 + eps_s:
        samples_s.append(float(dense_s[next_idx]))
        samples_y.append(y.copy())
        next_idx += 1

    h = min(control.h0, max(s1 - s0, control.min_step))
    steps = 0
    while s < s1 - eps_s:
        steps += 1
        if steps > control.max_steps:
            raise DivergenceError(s, y, "max step count exceeded",
                                  (np.array(samples_s), np.array(samples_y)))
        target = s1 if next_idx >= dense_s.size else float(dense_s[next_idx])
        h_try = max(min(h, target - s), control.min_step)
        y_full = _rk4_step(f, s, y, h_try)
        y_mid = _rk4_step(f, s, y, 0.5 * h_try)
        y_new = _rk4_step(f, s + 0.5 * h_try, y_mid, 0.5 * h_try)
        est = np.abs(y_new - y_full) / 15.0
        err = float(np.max(est / (control.atol + control.rtol * np.abs(y_new))))
        if not np.isfinite(err):
            raise DivergenceError(s, y, "non-finite step",
                                  (np.array(samples_s), np.array(samples_y)))
        if err <= 1.0:
            for name, g in observers.items():
                integrals[name] += (h_try / 6.0) * (
                    g(s, y) + 4.0 * g(s + 0.5 * h_try, y_mid) + g(s + h_try, y_new))
            s, y = s + h_try, y_new
            while next_idx < dense_s.size and dense_s[next_idx] <= s + eps_s:
                samples_s.append(float(dense_s[next_idx]))
                samples_y.append(y.copy())
                next_idx += 1
        elif h_try <= control.min_step * (1 + 1e-9):
            raise DivergenceError(s, y,
                                  partial=(np.array(samples_s), np.array(samples_y)))
        h = h_try * min(4.0, max(0.1, 0.9 * (1.0 / max(err, 1e-30)) ** 0.2))

    while next_idx < dense_s.size:
        samples_s.append(float(dense_s[next_idx]))
        samples_y.append(y.copy())
        next_idx += 1

    return np.array(samples_s), np.array(samples_y), integrals
