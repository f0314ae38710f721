"""Finite-alphabet probability toolkit.

Distributions and kernels over named products of finite alphabets, the
information measures used by every region constraint, and the classical
total-variation / mutual-information inequalities as checkable predicates.

All information quantities are in bits (log base 2) and 0·log 0 := 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

SUM_TOL = 1e-12

LN2 = math.log(2.0)


class StructureError(ValueError):
    """Axis mismatch, missing axis, or malformed distribution structure."""


class DomainError(ValueError):
    """Scalar argument outside its documented domain."""


class Alphabet(NamedTuple):
    name: str
    size: int


def _as_alphabets(axes) -> tuple[Alphabet, ...]:
    out = []
    for ax in axes:
        ax = Alphabet(str(ax[0]), int(ax[1])) if not isinstance(ax, Alphabet) else ax
        if ax.size < 1:
            raise StructureError(f"alphabet {ax.name!r} must have size >= 1, got {ax.size}")
        out.append(ax)
    names = [ax.name for ax in out]
    if len(set(names)) != len(names):
        raise StructureError(f"duplicate axis names in {names}")
    return tuple(out)


class FiniteDist:
    """Probability mass function over a named product of finite alphabets.

    Parameters
    ----------
    axes : sequence of Alphabet (or (name, size) pairs)
        Ordered factors of the product space.
    pmf : array-like
        Probabilities, either flat in row-major order or already shaped
        to the axis sizes. Must be nonnegative and sum to 1 within 1e-12.
    """

    def __init__(self, axes, pmf):
        self.axes = _as_alphabets(axes)
        shape = tuple(ax.size for ax in self.axes)
        arr = np.asarray(pmf, dtype=float).reshape(shape)
        if arr.min(initial=0.0) < -SUM_TOL:
            raise StructureError(f"negative probability {arr.min()}")
        arr = np.clip(arr, 0.0, None)
        total = arr.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise StructureError(f"pmf sums to {total!r}, expected 1 within {SUM_TOL}")
        arr.flags.writeable = False
        self.pmf = arr

    # -- structure ---------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(ax.name for ax in self.axes)

    def axis_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise StructureError(f"axis {name!r} not in {self.names}") from None

    def _resolve(self, names) -> tuple[int, ...]:
        if isinstance(names, str):
            names = (names,)
        return tuple(self.axis_index(n) for n in names)

    def marginal(self, keep) -> "FiniteDist":
        """Marginalize onto the named axes, preserving this dist's axis order."""
        keep_idx = set(self._resolve(keep))
        drop = tuple(i for i in range(len(self.axes)) if i not in keep_idx)
        arr = self.pmf.sum(axis=drop) if drop else self.pmf
        axes = tuple(ax for i, ax in enumerate(self.axes) if i in keep_idx)
        return FiniteDist(axes, arr)

    def attach(self, kernel: "Kernel") -> "FiniteDist":
        """Compose with a kernel whose conditioning axes are present here.

        Returns the joint over this dist's axes followed by the kernel's
        output axes.
        """
        cond_idx = self._resolve([ax.name for ax in kernel.from_axes])
        for i, ax in zip(cond_idx, kernel.from_axes):
            if self.axes[i].size != ax.size:
                raise StructureError(
                    f"axis {ax.name!r} size mismatch: {self.axes[i].size} vs {ax.size}")
        # line up kernel conditioning axes with our axes via einsum-style moveaxis
        k = kernel.table
        n_from = len(kernel.from_axes)
        n_self = len(self.axes)
        p = np.moveaxis(self.pmf, cond_idx, range(n_self - n_from, n_self))
        # p has shape (rest..., from...); k has shape (from..., to...)
        rest_shape = p.shape[: n_self - n_from]
        from_shape = p.shape[n_self - n_from:]
        to_shape = k.shape[n_from:]
        pj = p.reshape(rest_shape + from_shape + (1,) * len(to_shape))
        kj = k.reshape((1,) * len(rest_shape) + from_shape + to_shape)
        joint = pj * kj
        # restore original axis order for the conditioning axes
        joint = np.moveaxis(joint, range(n_self - n_from, n_self), cond_idx)
        axes = self.axes + kernel.to_axes
        return FiniteDist(axes, joint)

    def permuted(self, order) -> "FiniteDist":
        idx = self._resolve(order)
        if sorted(idx) != list(range(len(self.axes))):
            raise StructureError(f"{order} is not a permutation of {self.names}")
        return FiniteDist([self.axes[i] for i in idx], np.transpose(self.pmf, idx))

    # -- measures ----------------------------------------------------------

    def entropy(self, of, given=()) -> float:
        """Conditional Shannon entropy H(of | given) in bits."""
        of_idx = self._resolve(of)
        given_idx = self._resolve(given)
        if set(of_idx) & set(given_idx):
            raise StructureError("'of' and 'given' axes overlap")
        h_joint = _entropy_bits(self.marginal([self.names[i] for i in sorted(set(of_idx) | set(given_idx))]).pmf)
        if not given_idx:
            return h_joint
        h_given = _entropy_bits(self.marginal([self.names[i] for i in sorted(given_idx)]).pmf)
        return h_joint - h_given

    def mutual_information(self, a, b, given=()) -> float:
        """Conditional mutual information I(a; b | given) in bits."""
        a_idx, b_idx, g_idx = self._resolve(a), self._resolve(b), self._resolve(given)
        if (set(a_idx) & set(b_idx)) or (set(a_idx) & set(g_idx)) or (set(b_idx) & set(g_idx)):
            raise StructureError("axis groups must be disjoint")
        names = self.names
        def H(idx_set):
            if not idx_set:
                return 0.0
            return _entropy_bits(self.marginal([names[i] for i in sorted(idx_set)]).pmf)
        ag = set(a_idx) | set(g_idx)
        bg = set(b_idx) | set(g_idx)
        abg = ag | set(b_idx)
        return H(ag) + H(bg) - H(abg) - H(set(g_idx))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` i.i.d. outcomes; returns (size, n_axes) index array."""
        flat = self.pmf.reshape(-1)
        idx = rng.choice(flat.size, size=size, p=flat / flat.sum())
        return np.stack(np.unravel_index(idx, self.pmf.shape), axis=-1)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "kind": "dist",
            "axes": [[ax.name, ax.size] for ax in self.axes],
            "pmf": self.pmf.reshape(-1).tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "FiniteDist":
        obj = json.loads(text)
        if obj.get("kind") != "dist":
            raise StructureError("not a serialized distribution")
        return cls([Alphabet(n, s) for n, s in obj["axes"]], obj["pmf"])

    def __repr__(self):
        return f"FiniteDist({'x'.join(f'{a.name}:{a.size}' for a in self.axes)})"


class Kernel:
    """Conditional distribution: one pmf over `to_axes` per `from_axes` value.

    The table has shape from_sizes + to_sizes; every row sums to 1 within
    1e-12.
    """

    def __init__(self, from_axes, to_axes, table):
        self.from_axes = _as_alphabets(from_axes)
        self.to_axes = _as_alphabets(to_axes)
        names = [a.name for a in self.from_axes + self.to_axes]
        if len(set(names)) != len(names):
            raise StructureError(f"duplicate axis names in kernel {names}")
        shape = tuple(a.size for a in self.from_axes) + tuple(a.size for a in self.to_axes)
        arr = np.asarray(table, dtype=float).reshape(shape)
        if arr.min(initial=0.0) < -SUM_TOL:
            raise StructureError(f"negative kernel entry {arr.min()}")
        arr = np.clip(arr, 0.0, None)
        to_dims = tuple(range(len(self.from_axes), arr.ndim))
        sums = arr.sum(axis=to_dims)
        if np.abs(sums - 1.0).max(initial=0.0) > SUM_TOL:
            raise StructureError("kernel rows must each sum to 1")
        arr.flags.writeable = False
        self.table = arr

    def row(self, cond: tuple[int, ...]) -> np.ndarray:
        return self.table[tuple(int(c) for c in cond)]

    def sample(self, rng: np.random.Generator, cond_arrays) -> np.ndarray:
        """Sample outputs per position given arrays of conditioning indices."""
        u = rng.random(np.broadcast(*cond_arrays).shape if len(cond_arrays) > 1
                       else np.asarray(cond_arrays[0]).shape)
        return self.sample_with_uniforms(cond_arrays, u)

    def sample_with_uniforms(self, cond_arrays, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF sampling from supplied uniforms (enables couplings)."""
        if len(self.to_axes) != 1:
            raise StructureError("sampling supports a single output axis")
        rows = self.table[tuple(np.asarray(c, dtype=np.int64) for c in cond_arrays)]
        cdf = np.cumsum(rows, axis=-1)
        return (np.asarray(u)[..., None] > cdf).sum(axis=-1).astype(np.int64)

    def to_json(self) -> str:
        return json.dumps({
            "kind": "kernel",
            "from": [[a.name, a.size] for a in self.from_axes],
            "to": [[a.name, a.size] for a in self.to_axes],
            "rows": self.table.reshape(-1).tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Kernel":
        obj = json.loads(text)
        if obj.get("kind") != "kernel":
            raise StructureError("not a serialized kernel")
        return cls([Alphabet(n, s) for n, s in obj["from"]],
                   [Alphabet(n, s) for n, s in obj["to"]],
                   obj["rows"])

    def __repr__(self):
        f = ",".join(a.name for a in self.from_axes)
        t = ",".join(a.name for a in self.to_axes)
        return f"Kernel({t}|{f})"


# -- scalar measures -------------------------------------------------------

def _entropy_bits(pmf: np.ndarray) -> float:
    p = pmf.reshape(-1)
    nz = p > 0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def _check_same_axes(p: FiniteDist, q: FiniteDist):
    if p.axes != q.axes:
        raise StructureError(f"axis mismatch: {p.axes} vs {q.axes}")


def total_variation(p: FiniteDist, q: FiniteDist) -> float:
    """Total variation distance, half the L1 distance between the pmfs."""
    _check_same_axes(p, q)
    return 0.5 * float(np.abs(p.pmf - q.pmf).sum())


def kl_divergence(p: FiniteDist, q: FiniteDist) -> float:
    """KL divergence D(p || q) in bits; +inf on support violation."""
    _check_same_axes(p, q)
    pp, qq = p.pmf.reshape(-1), q.pmf.reshape(-1)
    nz = pp > 0
    if np.any(qq[nz] == 0):
        return math.inf
    return float((pp[nz] * np.log2(pp[nz] / qq[nz])).sum())


def entropy(p: FiniteDist, of, given=()) -> float:
    return p.entropy(of, given)


def mutual_information(p: FiniteDist, a, b, given=()) -> float:
    return p.mutual_information(a, b, given)


def binary_entropy(x: float) -> float:
    """h(x) in bits; h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary_entropy needs p in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x))


@dataclass(frozen=True)
class PinskerCsiszarReport:
    tv: float
    mi: float
    alphabet_size: int
    lower_ok: bool
    lower_slack: float
    upper_ok: bool | None
    upper_slack: float | None
    upper_skipped: bool


def check_pinsker_csiszar(p_ab: FiniteDist, a_axes=None, tol: float = 1e-12) -> PinskerCsiszarReport:
    """Check both classical bounds between I(A;B) and V(P_AB, P_A P_B).

    Lower: V^2 / (2 ln 2) <= I(A;B).  Upper: I(A;B) <= V log2(M / V) where M
    is the size of the joint alphabet; the upper bound needs M >= 4 and is
    skipped (with a flag) below that.

    A is `a_axes` (default: the first axis); B is the rest.
    """
    if a_axes is None:
        a_axes = [p_ab.names[0]]
    elif isinstance(a_axes, str):
        a_axes = [a_axes]
    b_axes = [n for n in p_ab.names if n not in a_axes]
    if not b_axes:
        raise StructureError("need at least one axis on each side of the split")
    pa = p_ab.marginal(a_axes)
    pb = p_ab.marginal(b_axes)
    prod = pa.attach(Kernel([], pb.axes, pb.pmf)).permuted(p_ab.names)
    v = total_variation(p_ab, prod)
    mi = p_ab.mutual_information(a_axes, b_axes)
    m = int(np.prod([ax.size for ax in p_ab.axes]))
    lower_slack = mi - v * v / (2.0 * LN2)
    if m < 4:
        upper_ok, upper_slack, skipped = None, None, True
    else:
        bound = 0.0 if v == 0.0 else v * math.log2(m / v)
        upper_slack = bound - mi
        upper_ok = upper_slack >= -tol
        skipped = False
    return PinskerCsiszarReport(
        tv=v, mi=mi, alphabet_size=m,
        lower_ok=lower_slack >= -tol, lower_slack=lower_slack,
        upper_ok=upper_ok, upper_slack=upper_slack, upper_skipped=skipped,
    )
