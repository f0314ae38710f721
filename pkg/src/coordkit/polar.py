"""Source polarization machinery.

The transform G_n = [[1,0],[1,1]]^(x m) applied to binary blocks, exact
successive-cancellation posteriors under arbitrary side conditioning, Monte
Carlo per-index entropy estimation, and construction of the index sets that
drive the chained codec.

One fixed butterfly ordering is used everywhere (no bit-reversal
permutation); encoder, decoder, and construction all share it.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import substream, thread_count
from .probability import DomainError, StructureError
from .targets import CoordinationTarget

ENTROPY_SIDES = ("none", "u", "y", "uxyv")
SIDE_AXES = {"none": (), "u": ("U",), "y": ("Y",), "uxyv": ("U", "X", "Y", "V")}

_CHUNK = 512  # fixed Monte Carlo chunk; results never depend on thread count


class ChainingInfeasibleError(RuntimeError):
    """|A2| < |A3| at this block length, so the chaining map cannot be built."""

    def __init__(self, n, a2, a3):
        self.deficit = a3 - a2
        super().__init__(
            f"chaining infeasible at n={n}: |A2|={a2} < |A3|={a3} "
            f"(deficit {self.deficit}); increase n or relax delta")


def _require_power_of_two(n: int):
    if n < 1 or (n & (n - 1)) != 0:
        raise DomainError(f"block length must be a power of two, got {n}")


def polar_transform(bits) -> np.ndarray:
    """Apply r = w G_n over GF(2) along the last axis; an involution."""
    x = np.array(bits, dtype=np.int8, copy=True)
    n = x.shape[-1]
    _require_power_of_two(n)
    step = 2
    while step <= n:
        half = step // 2
        for j in range(0, n, step):
            x[..., j:j + half] ^= x[..., j + half:j + step]
        step *= 2
    return x


# -- successive-cancellation engine -----------------------------------------
#
# Leaf weights are per-position pairs rho_t(w) = P(W_t = w, observation_t),
# shape (batch, positions, 2).  Pairs are renormalized at every node; the
# per-pair scale cancels in all posteriors, so this only guards underflow.

def _norm_pairs(p: np.ndarray) -> np.ndarray:
    s = p.sum(axis=-1, keepdims=True)
    return np.where(s <= 1e-300, 0.5, p / np.maximum(s, 1e-300))


def _combine(pairs: np.ndarray) -> np.ndarray:
    half = pairs.shape[1] // 2
    a, b = pairs[:, :half], pairs[:, half:]
    s0 = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
    s1 = a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]
    return _norm_pairs(np.stack([s0, s1], axis=-1))


def _specialize(pairs: np.ndarray, u: np.ndarray) -> np.ndarray:
    half = pairs.shape[1] // 2
    a, b = pairs[:, :half], pairs[:, half:]
    ui = u[..., None].astype(np.int64)
    a_u = np.take_along_axis(a, ui, axis=2)[..., 0]
    a_nu = np.take_along_axis(a, 1 - ui, axis=2)[..., 0]
    return _norm_pairs(np.stack([a_u * b[..., 0], a_nu * b[..., 1]], axis=-1))


def _sweep_true_path(pairs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """P(R_j = r_j | r^{j-1}, observations) for every j along the given path."""
    if pairs.shape[1] == 1:
        p = _norm_pairs(pairs)[:, 0, :]
        return np.take_along_axis(p, r[:, :1].astype(np.int64), axis=1)
    half = pairs.shape[1] // 2
    p_first = _sweep_true_path(_combine(pairs), r[:, :half])
    u = polar_transform(r[:, :half])
    p_second = _sweep_true_path(_specialize(pairs, u), r[:, half:])
    return np.concatenate([p_first, p_second], axis=1)


def _run_path(pairs: np.ndarray, decide, j0: int = 0):
    """Depth-first SC pass; `decide(j, p0)` fixes bit j given its posterior.

    Returns (bits, p0s), each of shape (batch, L).  Decisions are requested
    in index order, so `decide` may sample, threshold, or replay frozen
    values.
    """
    if pairs.shape[1] == 1:
        p0 = _norm_pairs(pairs)[:, 0, 0]
        bits = np.asarray(decide(j0, p0), dtype=np.int8).reshape(p0.shape)
        return bits[:, None], p0[:, None]
    half = pairs.shape[1] // 2
    b_first, p_first = _run_path(_combine(pairs), decide, j0)
    u = polar_transform(b_first)
    b_second, p_second = _run_path(_specialize(pairs, u), decide, j0 + half)
    return (np.concatenate([b_first, b_second], axis=1),
            np.concatenate([p_first, p_second], axis=1))


def _next_posterior(pairs: np.ndarray, prefix: np.ndarray) -> np.ndarray:
    """P(R_{j+1} = 0 | prefix of length j, observations), batched."""
    L = pairs.shape[1]
    j = prefix.shape[1]
    if L == 1:
        return _norm_pairs(pairs)[:, 0, 0]
    half = L // 2
    if j < half:
        return _next_posterior(_combine(pairs), prefix)
    u = polar_transform(prefix[:, :half])
    return _next_posterior(_specialize(pairs, u), prefix[:, half:])


def _letter_table(target: CoordinationTarget, side: str) -> np.ndarray:
    """Joint P(W = w, side letters), axes ordered (W, *side)."""
    axes = ("W",) + SIDE_AXES[side]
    return target.joint().marginal(axes).permuted(axes).pmf


def leaf_pairs(target: CoordinationTarget, side: str, observations: dict) -> np.ndarray:
    """Per-position weight pairs for SC, shape (batch, n, 2).

    `observations` maps each side axis name to an integer array (batch, n).
    """
    if not target.w_binary:
        raise StructureError("polar machinery requires a binary W")
    names = SIDE_AXES[side]
    if not names:
        raise StructureError("side 'none' carries no observations; "
                             "use sc_bit_posteriors_blind")
    table = _letter_table(target, side)
    obs = tuple(np.asarray(observations[name], dtype=np.int64) for name in names)
    pairs = table[(slice(None),) + obs]          # (2, batch, n)
    return np.moveaxis(pairs, 0, -1)


def sc_bit_posteriors(target: CoordinationTarget, side: str, observations: dict,
                      r_prefix) -> float:
    """Exact posterior P(R_{j+1} = 0 | r_prefix, side observations).

    The block length is taken from the observation arrays; `r_prefix` is the
    already-fixed prefix of the polarized vector (possibly empty).
    """
    names = SIDE_AXES[side]
    if side == "none":
        raise StructureError("pass side observations; for side='none' use "
                             "sc_bit_posteriors_blind")
    first = np.asarray(observations[names[0]])
    n = first.shape[-1]
    _require_power_of_two(n)
    obs = {k: np.asarray(v).reshape(1, n) for k, v in observations.items()}
    pairs = leaf_pairs(target, side, obs)
    prefix = np.asarray(r_prefix, dtype=np.int8).reshape(1, -1)
    if prefix.shape[1] >= n:
        raise StructureError("prefix already covers the whole block")
    return float(_next_posterior(pairs, prefix))


def sc_bit_posteriors_blind(target: CoordinationTarget, n: int, r_prefix) -> float:
    """Posterior with no side conditioning (side = 'none')."""
    _require_power_of_two(n)
    table = _letter_table(target, "none")
    pairs = np.broadcast_to(table, (1, n, 2)).copy()
    prefix = np.asarray(r_prefix, dtype=np.int8).reshape(1, -1)
    return float(_next_posterior(pairs, prefix))


def estimate_entropies(target: CoordinationTarget, side: str, n: int,
                       num_samples: int, seed: int, clamp_bits: float = 40.0) -> np.ndarray:
    """Monte Carlo estimate of H(R_j | R^{j-1}, side^n) for every index.

    Samples i.i.d. blocks from the target, runs the SC sweep along the true
    polarized path, and averages -log2 of the realized conditional
    probabilities (clamped at `clamp_bits` to bound the variance from
    near-zero posteriors).  Deterministic given (seed, num_samples)
    regardless of thread count: work is split into fixed-size chunks with
    per-chunk keyed streams and reduced in chunk order.
    """
    _require_power_of_two(n)
    if num_samples < 1:
        raise DomainError("num_samples must be >= 1")
    if not target.w_binary:
        raise StructureError("polar machinery requires a binary W")
    if side not in ENTROPY_SIDES:
        raise StructureError(f"side must be one of {ENTROPY_SIDES}")
    table = _letter_table(target, side)
    letter = table.reshape(-1)
    shape = table.shape
    floor = 2.0 ** (-float(clamp_bits))

    chunks = [(i, min(_CHUNK, num_samples - i * _CHUNK))
              for i in range((num_samples + _CHUNK - 1) // _CHUNK)]

    def one_chunk(arg):
        idx, size = arg
        rng = substream(seed, "polar-entropy", side, n, idx)
        draws = rng.choice(letter.size, size=size * n, p=letter)
        coords = np.unravel_index(draws, shape)
        w = coords[0].reshape(size, n).astype(np.int8)
        pairs = np.empty((size, n, 2))
        for wv in (0, 1):
            sel = (wv,) + tuple(c.reshape(size, n) for c in coords[1:])
            pairs[..., wv] = table[sel]
        probs = _sweep_true_path(pairs, polar_transform(w))
        return (-np.log2(np.maximum(probs, floor))).sum(axis=0)

    workers = thread_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(one_chunk, chunks))
    else:
        partials = [one_chunk(c) for c in chunks]
    return np.sum(np.stack(partials, axis=0), axis=0) / num_samples


def delta_schedule(n: int, beta: float) -> float:
    """Asymptotic threshold schedule 2^(-n^beta); opt-in for large n."""
    if not 0.0 < beta < 0.5:
        raise DomainError("beta must lie in (0, 1/2)")
    return 2.0 ** (-(float(n) ** beta))


@dataclass
class PolarSpec:
    """Construction output: per-index entropies and the derived index sets.

    A1..A4 partition [0, n); a1_prime is the very-high-entropy set under full
    (U, X, Y, V) conditioning, clipped to A1 so the nesting A1' <= A1 holds
    exactly even under Monte Carlo noise; a3_prime is the chaining image
    inside A2 with |A3'| = |A3|.
    """

    n: int
    delta: float
    entropies: dict
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a1_prime: np.ndarray
    a3_prime: np.ndarray
    meta: dict = field(default_factory=dict)

    def validate(self):
        union = np.concatenate([self.a1, self.a2, self.a3, self.a4])
        if sorted(union.tolist()) != list(range(self.n)):
            raise StructureError("A1..A4 do not partition the index range")
        if not set(self.a1_prime.tolist()) <= set(self.a1.tolist()):
            raise StructureError("A1' must be a subset of A1")
        if not set(self.a3_prime.tolist()) <= set(self.a2.tolist()):
            raise StructureError("A3' must be a subset of A2")
        if len(self.a3_prime) != len(self.a3):
            raise StructureError("|A3'| must equal |A3|")
        for key in ENTROPY_SIDES:
            if key in self.entropies and len(self.entropies[key]) != self.n:
                raise StructureError(f"entropy vector {key!r} has wrong length")

    def set_sizes(self) -> dict:
        return {"A1": len(self.a1), "A2": len(self.a2), "A3": len(self.a3),
                "A4": len(self.a4), "A1'": len(self.a1_prime), "A3'": len(self.a3_prime)}

    def to_json(self) -> str:
        return json.dumps({
            "kind": "polar_spec",
            "n": self.n,
            "delta": self.delta,
            "entropies": {k: np.asarray(v).tolist() for k, v in self.entropies.items()},
            "sets": {"a1": self.a1.tolist(), "a2": self.a2.tolist(),
                     "a3": self.a3.tolist(), "a4": self.a4.tolist(),
                     "a1_prime": self.a1_prime.tolist(), "a3_prime": self.a3_prime.tolist()},
            "meta": self.meta,
        })

    @classmethod
    def from_json(cls, text: str) -> "PolarSpec":
        obj = json.loads(text)
        if obj.get("kind") != "polar_spec":
            raise StructureError("not a serialized polar spec")
        sets = {k: np.asarray(v, dtype=np.int64) for k, v in obj["sets"].items()}
        spec = cls(
            n=int(obj["n"]), delta=float(obj["delta"]),
            entropies={k: np.asarray(v, dtype=float) for k, v in obj["entropies"].items()},
            a1=sets["a1"], a2=sets["a2"], a3=sets["a3"], a4=sets["a4"],
            a1_prime=sets["a1_prime"], a3_prime=sets["a3_prime"],
            meta=obj.get("meta", {}),
        )
        spec.validate()
        return spec

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "PolarSpec":
        with open(path) as f:
            return cls.from_json(f.read())


def build_sets(entropies: dict, delta: float, meta: dict | None = None) -> PolarSpec:
    """Threshold the entropy vectors into the codec's index sets.

    Very-high sets use H > 1 - delta, the high set uses H > delta.  A3' is
    chosen as the |A3| highest-H(R_j | R^{j-1} U^n) indices of A2; raises
    ChainingInfeasibleError when |A2| < |A3|.
    """
    h_u = np.asarray(entropies["u"], dtype=float)
    h_y = np.asarray(entropies["y"], dtype=float)
    h_full = np.asarray(entropies["uxyv"], dtype=float)
    n = len(h_u)
    _require_power_of_two(n)
    if not 0.0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    v_u = h_u > 1.0 - delta
    h_y_set = h_y > delta
    v_full = h_full > 1.0 - delta
    idx = np.arange(n, dtype=np.int64)
    a1 = idx[v_u & h_y_set]
    a2 = idx[v_u & ~h_y_set]
    a3 = idx[~v_u & h_y_set]
    a4 = idx[~v_u & ~h_y_set]
    a1_prime = idx[v_full & v_u & h_y_set]
    if len(a2) < len(a3):
        raise ChainingInfeasibleError(n, len(a2), len(a3))
    order = a2[np.lexsort((a2, -h_u[a2]))]
    a3_prime = np.sort(order[:len(a3)])
    ent = {k: np.asarray(v, dtype=float) for k, v in entropies.items()}
    spec = PolarSpec(n=n, delta=float(delta), entropies=ent,
                     a1=a1, a2=a2, a3=a3, a4=a4,
                     a1_prime=a1_prime, a3_prime=a3_prime,
                     meta=dict(meta or {}))
    spec.validate()
    return spec


def construct(target: CoordinationTarget, n: int, num_samples: int, seed: int,
              delta: float = 0.05, clamp_bits: float = 40.0) -> PolarSpec:
    """Estimate all four entropy vectors and build the index sets."""
    entropies = {side: estimate_entropies(target, side, n, num_samples, seed,
                                          clamp_bits=clamp_bits)
                 for side in ENTROPY_SIDES}
    meta = {"num_samples": num_samples, "seed": seed, "clamp_bits": clamp_bits}
    return build_sets(entropies, delta, meta=meta)
