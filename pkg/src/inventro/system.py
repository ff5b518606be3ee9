"""Control-system models: pointwise maps plus sound box-image over-approximations.

Two kinds of model are supported:

* explicit discrete maps ``x+ = f(x, u)``, over-approximated by the natural
  interval extension of ``f``;
* sampled ODEs, integrated with fixed-step RK4 and over-approximated by the
  centre trajectory plus a radius driven by a growth bound.

A map is written as ``fn(x, u)`` where ``x`` and ``u`` are lists of
components and the result is a list of components. The same function is
evaluated on numpy arrays (pointwise, batched) and on `Interval` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, IntegrationError
from .interval import Interval, IntervalBox

DEFAULT_SUBSTEPS = 10


def _components(a):
    return [a[..., i] for i in range(a.shape[-1])]


def _stack(parts, shape):
    return np.stack([np.broadcast_to(np.asarray(p, dtype=float), shape) for p in parts], axis=-1)


def evaluate_map(fn, x, u):
    """Evaluate ``fn`` at states ``x`` (shape ``(..., n)``) under one input ``u``."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = fn(_components(x), [float(c) for c in u])
    return _stack(out, x.shape[:-1])


def interval_image(fn, lo, hi, u):
    """Batched natural interval extension: boxes ``lo, hi`` of shape ``(k, n)``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    xs = [Interval(l, h) for l, h in zip(_components(lo), _components(hi))]
    out = fn(xs, [float(c) for c in u])
    batch = lo.shape[:-1]
    out_lo = [o.lo if isinstance(o, Interval) else o for o in out]
    out_hi = [o.hi if isinstance(o, Interval) else o for o in out]
    return _stack(out_lo, batch), _stack(out_hi, batch)


def interval_extension_post(fn, box, u):
    """Natural interval extension of ``fn`` over ``box`` with ``u`` held fixed."""
    lo, hi = interval_image(fn, box.lo, box.hi, u)
    return IntervalBox(lo, hi)


@dataclass(frozen=True)
class ControlSystemModel:
    """Discrete-time control system ``x+ = step(x, u)``.

    ``step`` is vectorized over leading axes of ``x``; ``post_batch(lo, hi, u)``
    maps a batch of boxes to over-approximations of their images.
    """

    name: str
    state_dim: int
    input_dim: int
    input_range: IntervalBox
    step: Callable
    post_batch: Callable
    safe_set: IntervalBox | None = None
    sampling_time: float | None = None
    reference_entropy: float | None = None
    params: dict = field(default_factory=dict)

    def post_overapprox(self, box, u):
        lo, hi = self.post_batch(box.lo[None, :], box.hi[None, :], np.atleast_1d(u))
        return IntervalBox(lo[0], hi[0])


def explicit_model(name, fn, state_dim, input_range, **kwargs):
    """Wrap a component map ``fn(x, u)`` as a `ControlSystemModel`."""
    return ControlSystemModel(
        name=name,
        state_dim=state_dim,
        input_dim=input_range.dim,
        input_range=input_range,
        step=lambda x, u: evaluate_map(fn, x, u),
        post_batch=lambda lo, hi, u: interval_image(fn, lo, hi, u),
        **kwargs,
    )


def rk4_step(field, x, u, h):
    """One classical Runge-Kutta step of ``x' = field(x, u)``."""
    if not h > 0:
        raise DomainError(f"step size must be positive, got {h}")
    k1 = field(x, u)
    k2 = field(x + 0.5 * h * k1, u)
    k3 = field(x + 0.5 * h * k2, u)
    k4 = field(x + h * k3, u)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    finite = np.isfinite(out)
    if not np.all(finite):
        x = np.asarray(x)
        bad = x[~np.all(finite, axis=-1)][0] if x.ndim > 1 else x
        raise IntegrationError(f"non-finite vector field value integrating from state {bad.tolist()}",
                               state=bad)
    return out


def integrate(field, x, u, duration, substeps):
    h = duration / substeps
    x = np.asarray(x, dtype=float)
    for _ in range(substeps):
        x = rk4_step(field, x, u, h)
    return x


@dataclass(frozen=True)
class SampledOde:
    """Continuous-time system sampled with zero-order hold.

    ``growth_bound(r, u)`` gives the radius dynamics: any two solutions whose
    initial states differ by at most ``r0`` per coordinate differ by at most
    the solution ``r(t)`` of ``r' = growth_bound(r, u)``.
    """

    name: str
    vector_field: Callable
    sampling_time: float
    substeps: int
    growth_bound: Callable
    state_dim: int
    input_range: IntervalBox
    safe_set: IntervalBox | None = None
    reference_entropy: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sampling_time > 0:
            raise DomainError(f"sampling time must be positive, got {self.sampling_time}")
        if self.substeps < 1:
            raise DomainError(f"substeps must be >= 1, got {self.substeps}")

    def flow(self, x, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return integrate(self.vector_field, x, u, self.sampling_time, self.substeps)

    def post_batch(self, lo, hi, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        center = self.flow(0.5 * (lo + hi), u)
        radius = integrate(self.growth_bound, 0.5 * (hi - lo), u, self.sampling_time, self.substeps)
        return center - radius, center + radius

    def to_model(self):
        return ControlSystemModel(
            name=self.name,
            state_dim=self.state_dim,
            input_dim=self.input_range.dim,
            input_range=self.input_range,
            step=self.flow,
            post_batch=self.post_batch,
            safe_set=self.safe_set,
            sampling_time=self.sampling_time,
            reference_entropy=self.reference_entropy,
            params=dict(self.params),
        )


def as_model(system):
    """Accept either a `ControlSystemModel` or a `SampledOde`."""
    if isinstance(system, SampledOde):
        return system.to_model()
    return system


# -- built-in examples ---------------------------------------------------------

def _linear2d_map(x, u):
    return [2.0 * x[0] + u[0], 0.5 * x[1] + u[0]]


def builtin_linear2d():
    """``x+ = diag(2, 1/2) x + (1, 1) u`` with ``u`` in [-1, 1] on [-1,1]x[-2,2]."""
    return explicit_model(
        "linear2d",
        _linear2d_map,
        state_dim=2,
        input_range=IntervalBox([-1.0], [1.0]),
        safe_set=IntervalBox([-1.0, -2.0], [1.0, 2.0]),
        reference_entropy=1.0,
    )


def pendulum_safe_set(b, rho):
    lo = math.atan(-b - math.sqrt(b * b + 1 + rho))
    hi = math.atan(-b - math.sqrt(b * b + 1 - rho))
    return IntervalBox([lo], [hi])


def pendulum_entropy(b, rho):
    """Invariance entropy of the continuous-time pendulum set, bits per unit time."""
    return 2.0 / math.log(2.0) * math.sqrt(b * b + 1 - rho)


def builtin_pendulum(b, rho, Ts, substeps=DEFAULT_SUBSTEPS):
    """Projectivized linearized pendulum at the upright position.

    The growth bound is ``r' = L(u) r`` where ``L(u)`` bounds the state
    derivative of the vector field over the safe set, padded by the distance
    an RK4 stage can travel in one sampling period.
    """
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")
    if not 0 < rho < b * b + 1:
        raise DomainError(f"rho must lie in (0, b^2 + 1) = (0, {b * b + 1}), got {rho}")
    safe = pendulum_safe_set(b, rho)

    def field(x, u):
        s, c = np.sin(x), np.cos(x)
        return -2.0 * b * s * c - s * s + c * c + u[0] * c * c

    def field_iv(x, u):
        return -b * np.sin(2.0 * x) + np.cos(2.0 * x) + u * np.cos(x) ** 2

    def slope_iv(x, u):
        return -2.0 * b * np.cos(2.0 * x) - (2.0 + u) * np.sin(2.0 * x)

    q = Interval(safe.lo[0], safe.hi[0])
    speed = max(float(np.max(abs(field_iv(q, u)).hi)) for u in (-rho, rho))
    pad = 2.0 * Ts * speed
    region = Interval(safe.lo[0] - pad, safe.hi[0] + pad)

    def lipschitz(u):
        return float(np.max(abs(slope_iv(region, float(u))).hi))

    def growth(r, u):
        return lipschitz(u[0]) * r

    return SampledOde(
        name="pendulum",
        vector_field=field,
        sampling_time=Ts,
        substeps=substeps,
        growth_bound=growth,
        state_dim=1,
        input_range=IntervalBox([-rho], [rho]),
        safe_set=safe,
        reference_entropy=pendulum_entropy(b, rho),
        params={"b": b, "rho": rho, "Ts": Ts, "substeps": substeps},
    )


HENON_R = 1.3 + math.sqrt(1.3 ** 2 + 20.0)
HENON_PRESSURE = 0.696


def _henon_forward(x, u):
    return [5.0 - 0.3 * x[1] - x[0] ** 2 + u[0], x[0] + u[1]]


def _henon_reversed(x, u):
    w = x[1] - u[1]
    return [w, (5.0 - w ** 2 + u[0] - x[0]) / 0.3]


def builtin_henon(eps, reversed=False):
    """Hénon map with additive control bounded by ``eps`` in the max-norm."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    half = HENON_R / 2.0
    return explicit_model(
        "henon-reversed" if reversed else "henon",
        _henon_reversed if reversed else _henon_forward,
        state_dim=2,
        input_range=IntervalBox([-eps, -eps], [eps, eps]),
        safe_set=IntervalBox([-half, -half], [half, half]),
        reference_entropy=HENON_PRESSURE,
        params={"eps": eps},
    )


BUILTINS = ("linear2d", "pendulum", "henon", "henon-reversed")


def builtin(name, **params):
    """Look up a built-in model by name."""
    if name == "linear2d":
        return builtin_linear2d()
    if name == "pendulum":
        return builtin_pendulum(params["b"], params["rho"], params["Ts"],
                                params.get("substeps", DEFAULT_SUBSTEPS))
    if name in ("henon", "henon-reversed"):
        return builtin_henon(params["eps"], reversed=name == "henon-reversed")
    raise DomainError(f"unknown system {name!r}; expected one of {', '.join(BUILTINS)}")
