"""Random regular formulas, the planted pair and paired pattern arrays.

A formula is a bijection from the ``m*k`` clause slots to the ``2dn``
literal clones ``(variable, copy, sign)``.  Clones are numbered

    clone = v * 2d + (0 if sign > 0 else d) + copy

with 0-based ``v`` and ``copy``.  Slot ``(i, j)`` has flat index ``i*k + j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from regsat.analytic.core import ModelParams, bar_mu_vector
from regsat.errors import DomainError, SamplingError
from regsat.rng import as_generator

DEFAULT_PLANTED_RETRIES = 10 ** 6


def _popcounts(k: int) -> np.ndarray:
    codes = np.arange(1 << k)
    return np.array([bin(c).count("1") for c in codes], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Formula:
    """Slot table of a regular formula with its inverse.

    ``var``, ``copy`` and ``sign`` have one entry per slot; ``inv`` maps a
    clone number to its flat slot index.
    """

    params: ModelParams
    var: np.ndarray
    copy: np.ndarray
    sign: np.ndarray
    inv: np.ndarray

    @classmethod
    def from_clones(cls, params: ModelParams, clones) -> "Formula":
        clones = np.asarray(clones, dtype=np.int64)
        if clones.shape != (params.slots,):
            raise DomainError(f"expected {params.slots} clone entries, got shape {clones.shape}")
        two_d = 2 * params.d
        var = (clones // two_d).astype(np.int32)
        rem = clones % two_d
        sign = np.where(rem < params.d, 1, -1).astype(np.int8)
        copy = (rem % params.d).astype(np.int32)
        return cls._build(params, var, copy, sign, clones)

    @classmethod
    def from_slots(cls, params: ModelParams, var, copy, sign) -> "Formula":
        """Build from explicit per-slot arrays (0-based ``var`` and ``copy``)."""
        var = np.asarray(var, dtype=np.int32)
        copy = np.asarray(copy, dtype=np.int32)
        sign = np.asarray(sign, dtype=np.int8)
        for name, arr in (("var", var), ("copy", copy), ("sign", sign)):
            if arr.shape != (params.slots,):
                raise DomainError(f"{name} must have {params.slots} entries, got {arr.shape}")
        if np.any((var < 0) | (var >= params.n)):
            raise DomainError("variable index out of range")
        if np.any((copy < 0) | (copy >= params.d)):
            raise DomainError("copy index out of range")
        if np.any((sign != 1) & (sign != -1)):
            raise DomainError("signs must be +1 or -1")
        clones = var.astype(np.int64) * 2 * params.d + np.where(sign > 0, 0, params.d) + copy
        return cls._build(params, var, copy, sign, clones)

    @classmethod
    def _build(cls, params, var, copy, sign, clones):
        inv = np.full(params.slots, -1, dtype=np.int64)
        inv[clones] = np.arange(params.slots)
        for arr in (var, copy, sign, inv):
            arr.setflags(write=False)
        return cls(params, var, copy, sign, inv)

    @property
    def clones(self) -> np.ndarray:
        d = self.params.d
        return self.var.astype(np.int64) * 2 * d + np.where(self.sign > 0, 0, d) + self.copy

    def clause_vars(self) -> np.ndarray:
        return self.var.reshape(self.params.m, self.params.k)

    def clause_signs(self) -> np.ndarray:
        return self.sign.reshape(self.params.m, self.params.k)

    def clauses(self) -> list[list[int]]:
        """Clauses as lists of signed 1-based variable indices (DIMACS style)."""
        lits = (self.var.astype(np.int64) + 1) * self.sign
        return lits.reshape(self.params.m, self.params.k).tolist()

    def var_slots(self) -> np.ndarray:
        """``(n, 2d)`` array of flat slot indices, positive clones first."""
        return self.inv.reshape(self.params.n, 2 * self.params.d)

    def __eq__(self, other):
        if not isinstance(other, Formula):
            return NotImplemented
        return (self.params == other.params and np.array_equal(self.var, other.var)
                and np.array_equal(self.copy, other.copy)
                and np.array_equal(self.sign, other.sign))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Assignment:
    """Truth assignment; ``bits[v] = 1`` means variable ``v`` is true."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise DomainError("assignment bits must be a 1-d 0/1 sequence")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])

    def spins(self) -> np.ndarray:
        return 2 * self.bits.astype(np.int8) - 1

    @classmethod
    def from_int(cls, mask: int, n: int) -> "Assignment":
        return cls(np.array([(mask >> v) & 1 for v in range(n)], dtype=np.uint8))

    def to_int(self) -> int:
        return int(sum(int(b) << v for v, b in enumerate(self.bits)))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


def sample_formula(params: ModelParams, rng=None) -> Formula:
    """Uniform bijection: slot ``s`` receives clone ``perm[s]``."""
    rng = as_generator(rng)
    return Formula.from_clones(params, rng.permutation(params.slots))


def _draw_balanced_codes(params: ModelParams, rng, max_retries: int):
    """Per-clause patterns from ``mu_bar``, rejected until ``dn`` slots are true."""
    k, m = params.k, params.m
    probs = bar_mu_vector(k)[1:]
    probs = probs / probs.sum()
    weights = _popcounts(k)[1:]
    target = params.d * params.n
    tries = 0
    batch = 16
    while tries < max_retries:
        b = min(batch, max_retries - tries)
        idx = rng.choice(probs.size, size=(b, m), p=probs)
        totals = weights[idx].sum(axis=1)
        hits = np.flatnonzero(totals == target)
        if hits.size:
            return idx[hits[0]] + 1, tries + int(hits[0]) + 1
        tries += b
        batch = min(batch * 2, 1024)
    raise SamplingError(
        f"planted sampler exceeded {max_retries} balance rejections at "
        f"n={params.n}, d={params.d}, k={k}")


def sample_planted(params: ModelParams, rng=None, max_retries: int = DEFAULT_PLANTED_RETRIES):
    """Planted pair: uniform assignment, then a formula it satisfies.

    Clause patterns are i.i.d. from ``mu_bar`` conditioned on exactly ``dn``
    true slots; true slots are matched uniformly to the clones made true by
    the assignment and false slots to the rest.
    """
    rng = as_generator(rng)
    n, d, k = params.n, params.d, params.k
    bits = rng.integers(0, 2, size=n).astype(np.uint8)
    codes, _ = _draw_balanced_codes(params, rng, max_retries)
    slot_true = ((codes[:, None] >> np.arange(k)) & 1).astype(bool).ravel()
    # Clone c is true iff its sign agrees with the assignment of its variable.
    all_clones = np.arange(params.slots)
    clone_var = all_clones // (2 * d)
    clone_pos = (all_clones % (2 * d)) < d
    clone_true = clone_pos == bits[clone_var].astype(bool)
    true_clones = rng.permutation(all_clones[clone_true])
    false_clones = rng.permutation(all_clones[~clone_true])
    clones = np.empty(params.slots, dtype=np.int64)
    clones[slot_true] = true_clones
    clones[~slot_true] = false_clones
    return Formula.from_clones(params, clones), Assignment(bits)


def round_bar_mu(k: int, m: int) -> np.ndarray:
    """Integer counts ``m*mu`` near ``m*mu_bar`` satisfying the balance constraint.

    Largest-remainder rounding, then single-bit pattern moves (each shifts the
    number of true slots by one) chosen greedily to stay close to the target.
    Returns an array indexed by pattern code with entry 0 equal to 0.
    """
    if (k * m) % 2:
        raise DomainError(f"balance needs k*m even, got k={k}, m={m}")
    target = m * bar_mu_vector(k)
    counts = np.floor(target).astype(np.int64)
    short = m - int(counts.sum())
    order = np.argsort(-(target - counts)[1:], kind="stable") + 1
    counts[order[:short]] += 1
    weights = _popcounts(k)
    excess = int((counts * (2 * weights - k)).sum()) // 2
    while excess != 0:
        best = None
        for src in range(1, 1 << k):
            if counts[src] == 0:
                continue
            for j in range(k):
                bit = 1 << j
                if excess > 0 and src & bit:
                    dst = src ^ bit
                elif excess < 0 and not src & bit:
                    dst = src | bit
                else:
                    continue
                if dst == 0:
                    continue
                cost = (2 * (counts[dst] - target[dst]) + 1) - (2 * (counts[src] - target[src]) - 1)
                if best is None or cost < best[0]:
                    best = (cost, src, dst)
        if best is None:
            raise DomainError("cannot balance the rounded pattern counts")
        _, src, dst = best
        counts[src] -= 1
        counts[dst] += 1
        excess += -1 if excess > 0 else 1
    return counts


@dataclass(frozen=True, eq=False)
class PairedPatternArray:
    """Two ``m``-row arrays of clause patterns stored as codes."""

    k: int
    rows1: np.ndarray
    rows2: np.ndarray

    @property
    def m(self) -> int:
        return int(self.rows1.shape[0])

    def as_spins(self) -> tuple[np.ndarray, np.ndarray]:
        shifts = np.arange(self.k)
        y1 = 2 * ((self.rows1[:, None] >> shifts) & 1) - 1
        y2 = 2 * ((self.rows2[:, None] >> shifts) & 1) - 1
        return y1, y2


def _counts_from_mu(mu, m: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    scaled = mu * m
    counts = np.rint(scaled).astype(np.int64)
    if np.any(np.abs(scaled - counts) > 1e-9) or counts.sum() != m:
        raise DomainError("m*mu must be a vector of integers summing to m")
    if counts[0] != 0:
        raise DomainError("mu must not charge the all-false pattern")
    return counts


def sample_paired_patterns(mu, m: int, rng=None) -> PairedPatternArray:
    """Template rows realizing ``mu`` under two independent row permutations.

    ``mu`` is indexed by pattern code (length ``2^k``).
    """
    rng = as_generator(rng)
    counts = _counts_from_mu(mu, m)
    k = int(np.log2(counts.size))
    if 1 << k != counts.size:
        raise DomainError("mu must have length 2^k")
    template = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    rows1 = template[rng.permutation(m)]
    rows2 = template[rng.permutation(m)]
    rows1.setflags(write=False)
    rows2.setflags(write=False)
    return PairedPatternArray(k, rows1, rows2)


def literal_balance(formula: Formula, assignment: Assignment) -> int:
    """``sum over slots of sign * tau(var)``; zero for every regular formula."""
    spins = assignment.spins().astype(np.int64)
    return int(np.sum(formula.sign.astype(np.int64) * spins[formula.var]))


def validate(formula: Formula) -> list[str]:
    """Bijection and degree checks; an empty list means the formula is valid."""
    p = formula.params
    problems = []
    clones = formula.clones
    if clones.shape != (p.slots,):
        return [f"slot table has {clones.size} entries, expected {p.slots}"]
    seen = np.bincount(clones, minlength=p.slots) if clones.size and clones.min() >= 0 else None
    if seen is None or seen.size != p.slots:
        problems.append("clone out of range")
    else:
        for c in np.flatnonzero(seen > 1):
            v, r = divmod(int(c), 2 * p.d)
            problems.append(f"clone used twice: x{v + 1} {'+' if r < p.d else '-'} copy {r % p.d + 1}")
        for c in np.flatnonzero(seen == 0):
            v, r = divmod(int(c), 2 * p.d)
            problems.append(f"clone unused: x{v + 1} {'+' if r < p.d else '-'} copy {r % p.d + 1}")
    pos = np.bincount(formula.var[formula.sign > 0], minlength=p.n)
    neg = np.bincount(formula.var[formula.sign < 0], minlength=p.n)
    for v in range(min(p.n, pos.size)):
        if pos[v] != p.d or neg[v] != p.d:
            problems.append(f"degree: x{v + 1} has {pos[v]} positive and {neg[v]} negative "
                            f"occurrences, expected {p.d}/{p.d}")
    if pos.size > p.n or neg.size > p.n:
        problems.append("variable index out of range")
    return problems
