"""Geometry tags and bridge endpoint data."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = ["Geometry", "BridgeSpec", "KINDS"]

KINDS = ("plane", "cp1", "sphere", "ch1", "ads", "sl2")
_COMPACT = ("cp1", "sphere")
_HYPERBOLIC = ("ch1", "ads")


@dataclass(frozen=True)
class Geometry:
    """A manifold with its parameters.

    ``kind`` is one of plane, cp1, sphere, ch1, ads, sl2. ``n`` and ``mu``
    only matter for sphere and ads (sl2 carries mu and has n = 1).
    Build instances with the class methods, which normalize the fields:
    ``Geometry.sl2(mu)`` and ``Geometry.ads(1, mu)`` dispatch identically.
    """

    kind: str
    n: int = 1
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown geometry {self.kind!r}; expected one of {', '.join(KINDS)}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("geometry dimension n must be an integer >= 1")
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise DomainError("mu must be a finite number >= 0")
        if self.kind == "sl2" and self.n != 1:
            raise DomainError("sl2 has n = 1")

    @classmethod
    def plane(cls):
        return cls("plane")

    @classmethod
    def cp1(cls):
        return cls("cp1")

    @classmethod
    def sphere(cls, n: int, mu: float):
        return cls("sphere", int(n), float(mu))

    @classmethod
    def ch1(cls):
        return cls("ch1")

    @classmethod
    def ads(cls, n: int, mu: float):
        return cls("ads", int(n), float(mu))

    @classmethod
    def sl2(cls, mu: float):
        return cls("sl2", 1, float(mu))

    @classmethod
    def from_name(cls, name: str, n: int = 1, mu: float = 0.0):
        name = name.lower()
        if name in ("plane", "cp1", "ch1"):
            return cls(name)
        if name == "sl2":
            return cls.sl2(mu)
        return cls(name, int(n), float(mu))

    @property
    def dispatch(self) -> "Geometry":
        """The geometry whose formulas are actually evaluated (sl2 -> ads with n = 1)."""
        if self.kind == "sl2":
            return Geometry("ads", 1, self.mu)
        return self

    @property
    def family(self) -> str:
        k = self.dispatch.kind
        if k in _COMPACT:
            return "compact"
        if k in _HYPERBOLIC:
            return "hyperbolic"
        return "plane"

    @property
    def gaussian_tails(self) -> bool:
        """True when the index law has Gaussian rather than inverse-square tails."""
        return self.dispatch.kind == "ads"

    def check_radius(self, r: float, name: str = "r") -> None:
        k = self.dispatch.kind
        ok = {
            "cp1": 0.0 < r < math.pi / 2,
            "sphere": 0.0 <= r < math.pi / 2,
            "ch1": r > 0.0 and math.isfinite(r),
            "ads": r >= 0.0 and math.isfinite(r),
            "plane": r > 0.0 and math.isfinite(r),
        }[k]
        if not ok:
            dom = {"cp1": "(0, pi/2)", "sphere": "[0, pi/2)", "ch1": "(0, inf)",
                   "ads": "[0, inf)", "plane": "(0, inf)"}[k]
            raise DomainError(f"{name} = {r} outside the radial domain {dom} of {self.kind}")

    def label(self) -> str:
        if self.kind in ("sphere", "ads"):
            return f"{self.kind}(n={self.n}, mu={self.mu:g})"
        if self.kind == "sl2":
            return f"sl2(mu={self.mu:g})"
        return self.kind


@dataclass(frozen=True)
class BridgeSpec:
    """Endpoint data of a bridge: radial start/end, end angle, duration.

    The angle is stored reduced to [0, 2 pi); a loop is r = r0, theta = 0.
    """

    r0: float
    r: float
    theta: float
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("bridge duration t must be > 0")
        th = math.fmod(self.theta, 2 * math.pi)
        if th < 0:
            th += 2 * math.pi
        if th >= 2 * math.pi:
            th = 0.0
        object.__setattr__(self, "theta", th)

    @classmethod
    def loop(cls, r: float, t: float):
        return cls(r, r, 0.0, t)

    @property
    def is_loop(self) -> bool:
        return self.r == self.r0 and self.theta == 0.0
