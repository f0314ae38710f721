"""Coordination targets: the factored distribution the codec must emulate.

A target factors as  P_U . P_{W|U} . P_{X|UW} . P_{Y|X} . P_{V|WY}  over the
canonical axes U, W, X, Y, V.  The factored form carries the Markov structure
by construction; `joint()` expands it to a FiniteDist when measures are
needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .probability import Alphabet, FiniteDist, Kernel, StructureError


def bsc_kernel(p: float, frm: str, to: str) -> Kernel:
    """Binary symmetric channel with crossover probability p."""
    t = [[1 - p, p], [p, 1 - p]]
    return Kernel([(frm, 2)], [(to, 2)], t)


def identity_kernel(size: int, frm: str, to: str) -> Kernel:
    return Kernel([(frm, size)], [(to, size)], np.eye(size))


def erasure_kernel(p: float, frm: str, to: str) -> Kernel:
    """Binary input, ternary output {0, 1, erasure}; symbol 2 is the erasure."""
    t = [[1 - p, 0.0, p], [0.0, 1 - p, p]]
    return Kernel([(frm, 2)], [(to, 3)], t)


def constant_kernel(from_axes, to: str, size: int, value: int = 0) -> Kernel:
    row = np.zeros(size)
    row[value] = 1.0
    shape = tuple(a[1] if not isinstance(a, Alphabet) else a.size for a in from_axes)
    table = np.broadcast_to(row, shape + (size,))
    return Kernel(from_axes, [(to, size)], table)


def uniform_dist(name: str, size: int) -> FiniteDist:
    return FiniteDist([(name, size)], np.full(size, 1.0 / size))


def bernoulli(name: str, p1: float) -> FiniteDist:
    return FiniteDist([(name, 2)], [1 - p1, p1])


@dataclass(frozen=True)
class CoordinationTarget:
    """Factored target P_U . P_{W|U} . P_{X|UW} . P_{Y|X} . P_{V|WY}."""

    p_u: FiniteDist
    w_given_u: Kernel
    x_given_uw: Kernel
    y_given_x: Kernel
    v_given_wy: Kernel
    _joint: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        expect = {
            "p_u": (self.p_u.names, ("U",)),
            "w_given_u": ((tuple(a.name for a in self.w_given_u.from_axes),
                           tuple(a.name for a in self.w_given_u.to_axes)), (("U",), ("W",))),
            "x_given_uw": ((tuple(a.name for a in self.x_given_uw.from_axes),
                            tuple(a.name for a in self.x_given_uw.to_axes)), (("U", "W"), ("X",))),
            "y_given_x": ((tuple(a.name for a in self.y_given_x.from_axes),
                           tuple(a.name for a in self.y_given_x.to_axes)), (("X",), ("Y",))),
            "v_given_wy": ((tuple(a.name for a in self.v_given_wy.from_axes),
                            tuple(a.name for a in self.v_given_wy.to_axes)), (("W", "Y"), ("V",))),
        }
        for field_name, (got, want) in expect.items():
            if got != want:
                raise StructureError(f"{field_name} axes {got}, expected {want}")
        sizes = {}
        for ker in (self.w_given_u, self.x_given_uw, self.y_given_x, self.v_given_wy):
            for ax in ker.from_axes + ker.to_axes:
                if sizes.setdefault(ax.name, ax.size) != ax.size:
                    raise StructureError(f"axis {ax.name!r} has inconsistent sizes")
        if sizes["U"] != self.p_u.axes[0].size:
            raise StructureError("axis 'U' has inconsistent sizes")

    # -- derived views -----------------------------------------------------

    def joint(self) -> FiniteDist:
        """Joint over (U, W, X, Y, V); cached after the first call."""
        if not self._joint:
            d = (self.p_u.attach(self.w_given_u).attach(self.x_given_uw)
                 .attach(self.y_given_x).attach(self.v_given_wy))
            self._joint.append(d)
        return self._joint[0]

    def observable(self) -> FiniteDist:
        return self.joint().marginal(["U", "X", "Y", "V"])

    def size(self, name: str) -> int:
        j = self.joint()
        return j.axes[j.axis_index(name)].size

    @property
    def w_binary(self) -> bool:
        return self.size("W") == 2

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "kind": "target",
            "p_u": json.loads(self.p_u.to_json()),
            "w_given_u": json.loads(self.w_given_u.to_json()),
            "x_given_uw": json.loads(self.x_given_uw.to_json()),
            "y_given_x": json.loads(self.y_given_x.to_json()),
            "v_given_wy": json.loads(self.v_given_wy.to_json()),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CoordinationTarget":
        obj = json.loads(text)
        if obj.get("kind") != "target":
            raise StructureError("not a serialized coordination target")
        return cls(
            p_u=FiniteDist.from_json(json.dumps(obj["p_u"])),
            w_given_u=Kernel.from_json(json.dumps(obj["w_given_u"])),
            x_given_uw=Kernel.from_json(json.dumps(obj["x_given_uw"])),
            y_given_x=Kernel.from_json(json.dumps(obj["y_given_x"])),
            v_given_wy=Kernel.from_json(json.dumps(obj["v_given_wy"])),
        )

    @classmethod
    def load(cls, path) -> "CoordinationTarget":
        with open(path) as f:
            return cls.from_json(f.read())

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())


def bsc_test_target(p_w: float = 0.3, p_y: float = 0.1) -> CoordinationTarget:
    """U ~ Bern(1/2), W = U + Bern(p_w), X = W, Y = X + Bern(p_y), V = Y."""
    x_table = np.zeros((2, 2, 2))
    x_table[:, 0, 0] = 1.0
    x_table[:, 1, 1] = 1.0
    v_table = np.zeros((2, 2, 2))
    v_table[:, 0, 0] = 1.0
    v_table[:, 1, 1] = 1.0
    return CoordinationTarget(
        p_u=uniform_dist("U", 2),
        w_given_u=bsc_kernel(p_w, "U", "W"),
        x_given_uw=Kernel([("U", 2), ("W", 2)], [("X", 2)], x_table),
        y_given_x=bsc_kernel(p_y, "X", "Y"),
        v_given_wy=Kernel([("W", 2), ("Y", 2)], [("V", 2)], v_table),
    )
