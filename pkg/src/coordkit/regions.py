"""Membership checks and boundary sweeps for the coordination regions.

Each region kind binds a factorization (expressed as Markov-chain and
independence slacks), a list of rate/information inequalities, and where the
region states one, a cardinality cap on the auxiliary alphabet.  Membership
is evaluated with an absolute tolerance (default 1e-9) on every inequality
and conditional-mutual-information slack; the regions themselves are
closures, so boundary points count as members.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import fmt
from .probability import (
    DomainError,
    FiniteDist,
    Kernel,
    StructureError,
    binary_entropy,
)
from .targets import bernoulli, erasure_kernel, uniform_dist

DEFAULT_TOL = 1e-9


class RegionKind(enum.Enum):
    INNER_NO_STATE = "inner-no-state"
    OUTER_NO_STATE = "outer-no-state"
    INNER_GENERAL = "inner-general"
    OUTER_GENERAL = "outer-general"
    PERFECT_CHANNEL = "perfect-channel"
    LOSSLESS_DECODER = "lossless-decoder"
    SEPARATION = "separation"
    UV_OTIMES_X = "uv-otimes-x"
    CUFF = "cuff"


@dataclass(frozen=True)
class RegionPoint:
    """Candidate point: a joint including auxiliaries, plus rates."""

    joint: FiniteDist
    r0: float
    r: float | None = None

    def __post_init__(self):
        if self.r0 < 0 or (self.r is not None and self.r < 0):
            raise DomainError("rates must be nonnegative")


@dataclass(frozen=True)
class Constraint:
    name: str
    lhs: float
    rhs: float
    slack: float  # rhs - lhs; >= -tol means satisfied


@dataclass(frozen=True)
class MarkovCheck:
    name: str
    slack: float  # conditional mutual information, >= 0
    ok: bool


@dataclass(frozen=True)
class Verdict:
    member: bool
    violations: list
    markov: list
    constraints: list

    @property
    def markov_ok(self) -> bool:
        return all(m.ok for m in self.markov)

    def summary(self) -> str:
        if self.member:
            return "member"
        parts = [f"{c.name} (lhs={fmt(c.lhs)} rhs={fmt(c.rhs)})" for c in self.violations]
        parts += [f"markov {m.name} (slack={fmt(m.slack)})" for m in self.markov if not m.ok]
        return "not a member: " + "; ".join(parts)


def check_markov(joint: FiniteDist, chain, tol: float = DEFAULT_TOL) -> float:
    """Slack I(A; C | B) of the chain A - B - C; holds iff slack <= tol."""
    a, b, c = chain
    return joint.mutual_information(a, c, b)


def _axes_or_raise(joint: FiniteDist, names):
    missing = [n for n in names if n not in joint.names]
    if missing:
        raise StructureError(f"joint is missing axes {missing} required by this region")


def _size(joint: FiniteDist, name: str) -> int:
    return joint.axes[joint.axis_index(name)].size


def _prod_size(joint: FiniteDist, names) -> int:
    return int(np.prod([_size(joint, n) for n in names]))


def check_membership(kind: RegionKind, point: RegionPoint,
                     tol: float = DEFAULT_TOL) -> Verdict:
    """Evaluate every inequality and Markov chain of the named region."""
    j = point.joint
    mi = j.mutual_information
    ent = j.entropy
    markov: list[MarkovCheck] = []
    cons: list[Constraint] = []

    def chain(name, a, b, c):
        s = check_markov(j, (a, b, c), tol)
        markov.append(MarkovCheck(name=name, slack=s, ok=s <= tol))

    def indep(name, a, b):
        s = mi(a, b)
        markov.append(MarkovCheck(name=name, slack=s, ok=s <= tol))

    def leq(name, lhs, rhs):
        cons.append(Constraint(name=name, lhs=lhs, rhs=rhs, slack=rhs - lhs))

    def geq(name, lhs, rhs):
        cons.append(Constraint(name=name, lhs=lhs, rhs=rhs, slack=lhs - rhs))

    if kind in (RegionKind.INNER_NO_STATE, RegionKind.OUTER_NO_STATE):
        _axes_or_raise(j, ["U", "X", "Y", "V", "W"])
        chain("Y - X - (U,W)", "Y", "X", ["U", "W"])
        chain("V - (Y,W) - (X,U)", "V", ["Y", "W"], ["X", "U"])
        if kind is RegionKind.INNER_NO_STATE:
            leq("I(W;U) <= I(W;Y)", mi("W", "U"), mi("W", "Y"))
        else:
            leq("I(W;U) <= I(X;Y)", mi("W", "U"), mi("X", "Y"))
            leq("|W| <= |UXYV|+4", _size(j, "W"),
                _prod_size(j, ["U", "X", "Y", "V"]) + 4)
        geq("R0 >= I(W;UXV|Y)", point.r0, mi("W", ["U", "X", "V"], "Y"))

    elif kind in (RegionKind.INNER_GENERAL, RegionKind.OUTER_GENERAL):
        _axes_or_raise(j, ["U", "S", "Z", "X", "Y", "V", "W"])
        chain("Z - (U,S) - (X,Y,W)", "Z", ["U", "S"], ["X", "Y", "W"])
        chain("Y - (X,S) - (U,W)", "Y", ["X", "S"], ["U", "W"])
        chain("V - (Y,Z,W) - (X,S,U)", "V", ["Y", "Z", "W"], ["X", "S", "U"])
        if kind is RegionKind.INNER_GENERAL:
            leq("I(W;U) <= I(W;YZ)", mi("W", "U"), mi("W", ["Y", "Z"]))
        else:
            bound = min(mi(["X", "U", "S"], ["Y", "Z"]),
                        mi(["X", "S"], "Y") + mi("U", "Z"))
            leq("I(W;U) <= min{I(XUS;YZ), I(XS;Y)+I(U;Z)}", mi("W", "U"), bound)
            leq("|W| <= |USZXYV|+5", _size(j, "W"),
                _prod_size(j, ["U", "S", "Z", "X", "Y", "V"]) + 5)
        geq("R0 >= I(W;USXV|YZ)", point.r0, mi("W", ["U", "S", "X", "V"], ["Y", "Z"]))

    elif kind is RegionKind.PERFECT_CHANNEL:
        _axes_or_raise(j, ["U", "Z", "X", "V", "W"])
        chain("Z - U - (X,W)", "Z", "U", ["X", "W"])
        chain("V - (X,Z,W) - U", "V", ["X", "Z", "W"], "U")
        leq("I(WX;U) <= H(X)+I(W;Z|X)",
            mi(["W", "X"], "U"), ent("X") + mi("W", "Z", "X"))
        geq("R0 >= I(W;UV|XZ)", point.r0, mi("W", ["U", "V"], ["X", "Z"]))
        leq("|W| <= |UZXV|+4", _size(j, "W"), _prod_size(j, ["U", "Z", "X", "V"]) + 4)

    elif kind is RegionKind.LOSSLESS_DECODER:
        _axes_or_raise(j, ["U", "S", "Z", "X", "Y", "W"])
        chain("Z - (U,S) - (X,Y,W)", "Z", ["U", "S"], ["X", "Y", "W"])
        chain("Y - (X,S) - (U,W)", "Y", ["X", "S"], ["U", "W"])
        if "V" in j.names:
            pv = j.marginal(["U", "V"]).pmf
            off = float(pv.sum() - np.trace(pv))
            markov.append(MarkovCheck(name="V = U", slack=off, ok=off <= tol))
        leq("I(W;U) <= I(W;YZ)", mi("W", "U"), mi("W", ["Y", "Z"]))
        geq("R0 >= I(W;USX|YZ)", point.r0, mi("W", ["U", "S", "X"], ["Y", "Z"]))
        leq("|W| <= |USZXY|+3", _size(j, "W"),
            _prod_size(j, ["U", "S", "Z", "X", "Y"]) + 3)

    elif kind is RegionKind.SEPARATION:
        _axes_or_raise(j, ["U", "S", "Z", "X", "Y", "V", "W1", "W2"])
        indep("(U,Z,W2,V) indep (S,X,W1,Y)", ["U", "Z", "W2", "V"], ["S", "X", "W1", "Y"])
        chain("Z - U - W2", "Z", "U", "W2")
        chain("Y - (X,S) - W1", "Y", ["X", "S"], "W1")
        chain("V - (Z,W2) - U", "V", ["Z", "W2"], "U")
        leq("I(W1;S)+I(W2;U) <= I(W1;Y)+I(W2;Z)",
            mi("W1", "S") + mi("W2", "U"), mi("W1", "Y") + mi("W2", "Z"))
        geq("R0 >= I(W1;SX|Y)+I(W2;UV|Z)",
            point.r0, mi("W1", ["S", "X"], "Y") + mi("W2", ["U", "V"], "Z"))
        cap = _prod_size(j, ["U", "S", "Z", "X", "Y", "V"]) + 3
        leq("|W1| <= |USZXYV|+3", _size(j, "W1"), cap)
        leq("|W2| <= |USZXYV|+3", _size(j, "W2"), cap)

    elif kind is RegionKind.UV_OTIMES_X:
        _axes_or_raise(j, ["U", "X", "V", "W"])
        indep("(U,W,V) indep X", ["U", "W", "V"], "X")
        chain("U - W - V", "U", "W", "V")
        leq("I(W;U) <= H(X)", mi("W", "U"), ent("X"))
        geq("R0 >= I(UV;W)", point.r0, mi(["U", "V"], "W"))
        leq("|W| <= |UV|+1", _size(j, "W"), _prod_size(j, ["U", "V"]) + 1)

    elif kind is RegionKind.CUFF:
        _axes_or_raise(j, ["U", "V", "W"])
        if point.r is None:
            raise StructureError("the Cuff region needs a description rate R")
        chain("U - W - V", "U", "W", "V")
        geq("R >= I(W;U)", point.r, mi("W", "U"))
        geq("R+R0 >= I(UV;W)", point.r + point.r0, mi(["U", "V"], "W"))
        leq("|W| <= |UV|+1", _size(j, "W"), _prod_size(j, ["U", "V"]) + 1)

    else:  # pragma: no cover
        raise StructureError(f"unknown region kind {kind}")

    violations = [c for c in cons if c.slack < -tol]
    markov_ok = all(m.ok for m in markov)
    return Verdict(member=not violations and markov_ok,
                   violations=violations, markov=markov, constraints=cons)


# -- the binary-erasure example family ---------------------------------------

def erasure_cascade(p_e: float, p2: float) -> dict:
    """Parametric point on the optimal curve for the erasure example.

    U ~ Bern(1/2) passes through a cascade of two erasure channels with
    parameters p1 and p2, erasing overall with probability p_e.
    """
    if not 0.0 < p_e < 1.0:
        raise DomainError(f"p_e must lie in (0, 1), got {p_e}")
    hi = min(0.5, p_e)
    if not 0.0 <= p2 <= hi:
        raise DomainError(f"p2 must lie in [0, {hi}] for p_e={p_e}, got {p2}")
    p1 = 1.0 - (1.0 - p_e) / (1.0 - p2)
    i_uw = 1.0 - p1
    i_uvw = binary_entropy(p_e) + (1.0 - p1) * (1.0 - binary_entropy(p2))
    return {"p1": p1, "I_UW": i_uw, "I_UVW": i_uvw}


def erasure_cascade_joint(p_e: float, p2: float, with_x: bool = False) -> FiniteDist:
    """Joint (U, W, V) (optionally with an independent uniform X) realizing
    the cascade point."""
    d = erasure_cascade(p_e, p2)
    j = (bernoulli("U", 0.5)
         .attach(erasure_kernel(d["p1"], "U", "W"))
         .attach(_erasure_relay(p2)))
    if with_x:
        j = j.attach(Kernel([], [("X", 2)], [0.5, 0.5]))
    return j


def _erasure_relay(p2: float) -> Kernel:
    # W in {0,1,e}: non-erased symbols erased again with prob p2; an erased W
    # stays erased.
    t = np.zeros((3, 3))
    t[0] = [1 - p2, 0.0, p2]
    t[1] = [0.0, 1 - p2, p2]
    t[2] = [0.0, 0.0, 1.0]
    return Kernel([("W", 3)], [("V", 3)], t)


def sweep_figure7(p_e: float, steps: int) -> list[dict]:
    """Frontier table for the erasure example.

    Rows carry (p2, p1, R, R0_cuff, R0_joint) where R = I(U;W) is the
    description rate (identified with H(X)), R0_cuff = max(I(UV;W) - R, 0)
    is the error-free-link frontier, and R0_joint = I(UV;W) is the joint
    signal/action frontier.
    """
    if steps < 2:
        raise DomainError("steps must be >= 2")
    if not 0.0 < p_e < 1.0:
        raise DomainError(f"p_e must lie in (0, 1), got {p_e}")
    rows = []
    for p2 in np.linspace(0.0, min(0.5, p_e), steps):
        d = erasure_cascade(p_e, float(p2))
        rows.append({
            "p2": float(p2),
            "p1": d["p1"],
            "R": d["I_UW"],
            "R0_cuff": max(d["I_UVW"] - d["I_UW"], 0.0),
            "R0_joint": d["I_UVW"],
        })
    return rows


SWEEP_COLUMNS = ("p2", "p1", "R", "R0_cuff", "R0_joint")


def write_sweep_csv(rows, path, invocation: str | None = None):
    with open(path, "w") as f:
        if invocation:
            f.write(f"# {invocation}\n")
        f.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(fmt(row[c]) for c in SWEEP_COLUMNS) + "\n")


from .search import SearchResult, search_min_r0  # noqa: E402  (re-export)

search_min_R0 = search_min_r0

__all__ = [
    "RegionKind", "RegionPoint", "Verdict", "Constraint", "MarkovCheck",
    "check_markov", "check_membership", "erasure_cascade",
    "erasure_cascade_joint", "sweep_figure7", "write_sweep_csv",
    "SearchResult", "search_min_r0", "search_min_R0", "DEFAULT_TOL",
]
