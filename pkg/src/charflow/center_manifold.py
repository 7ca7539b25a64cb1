"""Explicit gradient flow on the C^3 center manifold of the degenerate
critical point, with its three conserved quantities and stable-set tests.

The flow integrated here is the cubic system

    dz1/ds = conj(z2) z3
    dz2/ds = conj(z1) z3 / 2
    dz3/ds = z1 z2 / 2

whose invariants are |z2|^2 - |z3|^2, |z1|^2 - |z2|^2 - |z3|^2 and
Im(z1 z2 conj(z3)). Trajectories reaching the vertex decay like 1/s.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._ode import DivergenceError, StepControl, integrate_adaptive

__all__ = [
    "CMState", "ConservedTriple", "CMTrajectory", "StableClass",
    "cm_vector_field", "integrate", "classify", "gauge_rotate",
    "fit_decay_exponent", "exact_vertex_family", "vertex_family_residual",
    "FitInvalidError", "DivergenceError",
]

CLASSIFY_TOL = 1e-9
CONSERVED_RECHECK_TOL = 1e-12


class FitInvalidError(RuntimeError):
    """Trajectory does not decay toward the origin; no decay fit possible."""


@dataclass(frozen=True)
class CMState:
    """A point of the center manifold with its flow time."""

    z1: complex
    z2: complex
    z3: complex
    s: float = 0.0

    def __post_init__(self):
        for z in (self.z1, self.z2, self.z3):
            if not np.isfinite(z.real) or not np.isfinite(z.imag):
                raise ValueError("CMState components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3], dtype=complex)

    @classmethod
    def from_vector(cls, vec, s: float = 0.0) -> "CMState":
        return cls(complex(vec[0]), complex(vec[1]), complex(vec[2]), s)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vector()))


@dataclass(frozen=True)
class ConservedTriple:
    """The three flow invariants, recomputed on demand (never cached stale)."""

    c1: float
    c2: float
    c3: float

    @classmethod
    def from_state(cls, x: CMState) -> "ConservedTriple":
        c1 = abs(x.z2) ** 2 - abs(x.z3) ** 2
        c2 = abs(x.z1) ** 2 - abs(x.z2) ** 2 - abs(x.z3) ** 2
        c3 = (x.z1 * x.z2 * np.conj(x.z3)).imag
        return cls(float(c1), float(c2), float(c3))

    def matches(self, x: CMState, tol: float = CONSERVED_RECHECK_TOL) -> bool:
        fresh = ConservedTriple.from_state(x)
        return (abs(fresh.c1 - self.c1) <= tol and abs(fresh.c2 - self.c2) <= tol
                and abs(fresh.c3 - self.c3) <= tol)

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3])


def cm_vector_field(x: CMState) -> tuple[complex, complex, complex]:
    """Right-hand side of the downward flow at x."""
    return (
        complex(np.conj(x.z2) * x.z3),
        complex(np.conj(x.z1) * x.z3 / 2.0),
        complex(x.z1 * x.z2 / 2.0),
    )


def _rhs(_s, y):
    z1, z2, z3 = y
    return np.array([np.conj(z2) * z3, np.conj(z1) * z3 / 2.0, z1 * z2 / 2.0])


def gauge_rotate(x: CMState, angle: float) -> CMState:
    """Constant-gauge circle action: (z1, z2, z3) -> (z1, e^{ia} z2, e^{ia} z3)."""
    w = np.exp(1j * angle)
    return CMState(x.z1, complex(w * x.z2), complex(w * x.z3), x.s)


@dataclass
class CMTrajectory:
    """Sampled flow line with conservation bookkeeping."""

    s: np.ndarray
    states: np.ndarray  # (n, 3) complex
    initial_conserved: ConservedTriple
    max_drift: float

    def state_at(self, idx: int) -> CMState:
        return CMState.from_vector(self.states[idx], float(self.s[idx]))

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def integrate(x0: CMState, s_span, step_control: StepControl = StepControl(),
              n_samples: int = 200, geometric: bool = False) -> CMTrajectory:
    """Flow x0 over s_span, reporting the worst conserved-quantity drift.

    geometric=True spaces the samples geometrically in s (for decay fits);
    this requires s_span[0] > 0.
    """
    s0, s1 = float(s_span[0]), float(s_span[1])
    if geometric:
        if s0 <= 0:
            raise ValueError("geometric sampling needs s_span[0] > 0")
        dense = np.geomspace(s0, s1, n_samples)
    else:
        dense = np.linspace(s0, s1, n_samples)
    try:
        s, ys, _ = integrate_adaptive(_rhs, x0.as_vector(), (s0, s1),
                                      step_control, dense)
    except DivergenceError as exc:
        # finite-time blow-up (the cubic flow has poles off the stable set);
        # re-raise with the integrated prefix attached as a trajectory
        if exc.partial is not None and len(exc.partial[0]):
            ps, pys = exc.partial
            exc.partial_trajectory = _finish(CMState.from_vector(pys[0], ps[0]),
                                             ps, pys)
        else:
            exc.partial_trajectory = None
        raise
    return _finish(x0, s, ys)


def _finish(x0: CMState, s: np.ndarray, ys: np.ndarray) -> CMTrajectory:
    c0 = ConservedTriple.from_state(x0)
    drifts = np.empty(len(s))
    for i, row in enumerate(ys):
        ci = ConservedTriple.from_state(CMState.from_vector(row))
        drifts[i] = np.max(np.abs(ci.as_array() - c0.as_array()))
    return CMTrajectory(s=s, states=ys, initial_conserved=c0,
                        max_drift=float(drifts.max()))


class StableClass(Enum):
    ON_STABLE_GENERAL = "on_stable_general"
    ON_STABLE_CONE = "on_stable_cone"
    OFF_STABLE = "off_stable"


@dataclass(frozen=True)
class Classification:
    kind: StableClass
    a_inf_sq: float | None  # limit |a|^2 reported for the general stable set


def classify(x: CMState, tol: float = CLASSIFY_TOL) -> Classification:
    """Stable-set membership from the conserved triple.

    The stable set is cut out by c1 = c3 = 0 with c2 >= 0 (c2 being the
    squared flat limit); the cone over the torus is the c2 = 0 slice.
    """
    c = ConservedTriple.from_state(x)
    if abs(c.c1) <= tol and abs(c.c3) <= tol:
        if abs(c.c2) <= tol:
            return Classification(StableClass.ON_STABLE_CONE, None)
        if c.c2 >= -tol:
            return Classification(StableClass.ON_STABLE_GENERAL, c.c2)
    return Classification(StableClass.OFF_STABLE, None)


def exact_vertex_family(s, phase: float = 0.0) -> np.ndarray:
    """Closed-form solution (-2/s, sqrt(2) e^{ip}/s, sqrt(2) e^{ip}/s).

    Satisfies the flow equations identically for s > 0; its norm is
    proportional to 1/s, the polynomial decay rate at the vertex.
    """
    s = np.asarray(s, dtype=float)
    w = np.sqrt(2.0) * np.exp(1j * phase)
    out = np.empty(s.shape + (3,), dtype=complex)
    out[..., 0] = -2.0 / s
    out[..., 1] = w / s
    out[..., 2] = w / s
    return out


def vertex_family_residual(s, phase: float = 0.0) -> float:
    """Max pointwise residual of the closed-form family in the flow equations."""
    s = np.asarray(s, dtype=float)
    z = exact_vertex_family(s, phase)
    lhs = np.empty_like(z)
    lhs[..., 0] = 2.0 / s ** 2
    lhs[..., 1] = -np.sqrt(2.0) * np.exp(1j * phase) / s ** 2
    lhs[..., 2] = -np.sqrt(2.0) * np.exp(1j * phase) / s ** 2
    rhs = np.stack([
        np.conj(z[..., 1]) * z[..., 2],
        np.conj(z[..., 0]) * z[..., 2] / 2.0,
        z[..., 0] * z[..., 1] / 2.0,
    ], axis=-1)
    return float(np.max(np.abs(lhs - rhs)))


def fit_decay_exponent(traj: CMTrajectory) -> float:
    """Least-squares slope of log ||x(s)|| against log s.

    Requires at least two decades of s and a trajectory that actually
    decays (norm drop by 2x and monotone to 10% wiggle); otherwise
    FitInvalidError.
    """
    s = traj.s
    norms = traj.norms()
    if s[0] <= 0:
        raise FitInvalidError("decay fit needs positive s samples")
    if s[-1] / s[0] < 99.0:
        raise FitInvalidError("need at least two decades of s")
    if norms[-1] <= 0 or norms[0] <= 0:
        raise FitInvalidError("trajectory reached zero norm")
    if norms[-1] > 0.5 * norms[0]:
        raise FitInvalidError("trajectory is not decaying")
    if np.any(norms[1:] > norms[:-1] * 1.1):
        raise FitInvalidError("trajectory norm is not monotone")
    slope, _ = np.polyfit(np.log(s), np.log(norms), 1)
    return float(slope)
