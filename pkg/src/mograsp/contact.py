"""Friction-cone equilibrium and minimal stable grasp diameters.

A parallel-jaw grasp on two boundary points is in equilibrium when the line
joining them lies inside the friction cone at both contacts. Cones have
half-angle ``arctan(mu)`` about the inward normal. A vertex has a whole span
of admissible normals (between its two incident edges), so its cone is that
span widened by ``arctan(mu)`` on each side.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateInput, NoStableGrasp
from .geometry import ConvexPolygon

TWO_PI = 2.0 * math.pi
ANGLE_EPS = 1e-9
COLINEAR_EPS = 1e-6

MU_FRICTIONAL = 0.5
MU_FRICTIONLESS = 0.01


@dataclass(frozen=True)
class FrictionModel:
    mu: float

    def __post_init__(self):
        if not (0.0 <= self.mu <= 2.0):
            raise ConfigError(f"friction coefficient must lie in [0, 2], got {self.mu}")

    @property
    def alpha(self) -> float:
        """Half-angle of the friction cone."""
        return math.atan(self.mu)


@dataclass(frozen=True)
class ContactPoint:
    position: tuple
    normal_lo: float
    normal_hi: float

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if not (self.normal_lo <= self.normal_hi <= self.normal_lo + math.pi + ANGLE_EPS):
            raise DegenerateInput("normal span must satisfy lo <= hi <= lo + pi")


@dataclass(frozen=True)
class StablePair:
    left: ContactPoint
    right: ContactPoint
    diameter: float


def _angle_to_span(phi, lo, hi):
    """Angular distance from direction ``phi`` to the arc [lo, hi]."""
    delta = np.mod(phi - lo, TWO_PI)
    width = hi - lo
    outside = np.minimum(delta - width, TWO_PI - delta)
    return np.where(delta <= width, 0.0, outside)


def _in_cone(phi, lo, hi, alpha):
    return _angle_to_span(phi, lo, hi) <= alpha + ANGLE_EPS


def is_equilibrium_pair(left: ContactPoint, right: ContactPoint, friction: FrictionModel) -> bool:
    """True iff the line through both contacts lies in both friction cones."""
    a, b = left, right
    # evaluate in a canonical order so the predicate is exactly symmetric
    if b.position < a.position:
        a, b = b, a
    dx = b.position[0] - a.position[0]
    dy = b.position[1] - a.position[1]
    if math.hypot(dx, dy) <= 1e-6:
        raise DegenerateInput("contact positions coincide")
    phi = math.atan2(dy, dx)
    return bool(_in_cone(phi, a.normal_lo, a.normal_hi, friction.alpha)
                and _in_cone(phi + math.pi, b.normal_lo, b.normal_hi, friction.alpha))


@functools.lru_cache(maxsize=4096)
def _contact_arrays_cached(key: bytes, n: int, n_s: int):
    v = np.frombuffer(key, dtype=float).reshape(n, 2)
    e = np.roll(v, -1, axis=0) - v
    inward = np.arctan2(e[:, 0], -e[:, 1])  # left normal of a CCW edge
    frac = np.arange(1, n_s + 1) / (n_s + 1.0)
    pos_e = (v[:, None, :] + frac[None, :, None] * e[:, None, :]).reshape(-1, 2)
    lo_e = np.repeat(inward, n_s)
    prev = np.roll(inward, 1)
    turn = np.mod(inward - prev, TWO_PI)
    pos = np.concatenate([pos_e, v])
    lo = np.concatenate([lo_e, prev])
    hi = np.concatenate([lo_e, prev + turn])
    edge_id = np.concatenate([np.repeat(np.arange(n), n_s), -np.ones(n, dtype=int)])
    for arr in (pos, lo, hi, edge_id):
        arr.setflags(write=False)
    return pos, lo, hi, edge_id


def contact_arrays(poly: ConvexPolygon, n_s: int):
    """Sampled contacts as arrays ``(positions, normal_lo, normal_hi, edge_id)``.

    Edge contacts come first, ``n_s`` per edge at fractions k/(n_s+1); the
    last ``len(poly)`` rows are the vertices, with ``edge_id == -1``.
    """
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    v = np.ascontiguousarray(poly.vertices, dtype=float)
    return _contact_arrays_cached(v.tobytes(), v.shape[0], int(n_s))


def sample_contacts(poly: ConvexPolygon, n_s: int) -> list:
    pos, lo, hi, _ = contact_arrays(poly, n_s)
    return [ContactPoint(tuple(p), float(a), float(b)) for p, a, b in zip(pos, lo, hi)]


def equilibrium_matrix(pos, lo, hi, alpha) -> np.ndarray:
    """Symmetric boolean matrix of equilibrium pairs among sampled contacts."""
    d = pos[None, :, :] - pos[:, None, :]
    phi = np.arctan2(d[..., 1], d[..., 0])
    ok = _in_cone(phi, lo[:, None], hi[:, None], alpha) & \
        _in_cone(phi + math.pi, lo[None, :], hi[None, :], alpha)
    ok &= np.hypot(d[..., 0], d[..., 1]) > 1e-6
    ok = np.triu(ok, 1)
    return ok | ok.T


@functools.lru_cache(maxsize=8192)
def _min_stable_cached(key: bytes, n: int, mu: float, n_s: int) -> float:
    poly = ConvexPolygon(np.frombuffer(key, dtype=float).reshape(n, 2), validate=False)
    pos, lo, hi, _ = contact_arrays(poly, n_s)
    ok = equilibrium_matrix(pos, lo, hi, math.atan(mu))
    if not ok.any():
        raise NoStableGrasp(f"no equilibrium contact pair at mu={mu}, n_s={n_s}")
    d = pos[None, :, :] - pos[:, None, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    return float(dist[ok].min())


def min_stable_diameter(poly: ConvexPolygon, friction: FrictionModel, n_s: int) -> float:
    """Shortest distance over all sampled contact pairs in equilibrium."""
    v = np.ascontiguousarray(poly.vertices, dtype=float)
    return _min_stable_cached(v.tobytes(), v.shape[0], float(friction.mu), int(n_s))


def min_stable_pair(poly: ConvexPolygon, friction: FrictionModel, n_s: int) -> StablePair:
    pos, lo, hi, _ = contact_arrays(poly, n_s)
    ok = equilibrium_matrix(pos, lo, hi, friction.alpha)
    if not ok.any():
        raise NoStableGrasp(f"no equilibrium contact pair at mu={friction.mu}, n_s={n_s}")
    d = pos[None, :, :] - pos[:, None, :]
    dist = np.where(ok, np.hypot(d[..., 0], d[..., 1]), np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return StablePair(ContactPoint(tuple(pos[i]), lo[i], hi[i]),
                      ContactPoint(tuple(pos[j]), lo[j], hi[j]), float(dist[i, j]))


def multi_object_min_diameter(group: Sequence[ConvexPolygon], friction: FrictionModel,
                              n_s: int) -> float:
    """Minimum final diameter of a colinear chain: the sum of member minima."""
    if len(group) == 0:
        raise ValueError("group must be non-empty")
    return float(sum(min_stable_diameter(p, friction, n_s) for p in group))


def check_chain_colinearity(contact_lines, tol: float = COLINEAR_EPS) -> bool:
    """True iff all line directions are parallel within ``tol`` radians.

    Directions are sign-insensitive: (1, 0) and (-1, 0) describe one line.
    """
    u = np.asarray(contact_lines, dtype=float).reshape(-1, 2)
    if u.shape[0] == 0:
        raise ValueError("need at least one line direction")
    ang = np.mod(np.arctan2(u[:, 1], u[:, 0]), math.pi)
    diff = np.abs(ang[:, None] - ang[None, :])
    diff = np.minimum(diff, math.pi - diff)
    return bool(np.all(diff <= tol))
