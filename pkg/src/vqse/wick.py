"""Wick contraction of ladder strings over (active state) x (virtual vacuum).

Virtual-space operators are contracted exactly against the vacuum
(<a_mu a+_nu> = delta_mu_nu, every other pairing vanishing); the active
residue is reduced to reduced-density-matrix elements by symbolic normal
ordering.  Symbolic results are cached per operator pattern (space labels
and dagger flags only) and instantiated numerically per index tuple, which
is what makes the subspace-matrix assembly affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import VqseError
from .rdm import Rdm
from .spaces import OrbitalPartition

ACTIVE = "A"
VIRTUAL = "V"


@dataclass(frozen=True)
class LabeledOp:
    index: int  # full-space spin orbital
    dagger: bool
    space: str  # ACTIVE or VIRTUAL


@dataclass(frozen=True)
class LabeledString:
    ops: tuple[LabeledOp, ...]
    coefficient: complex = 1.0

    @classmethod
    def from_ops(cls, ops, partition: OrbitalPartition, coefficient=1.0) -> "LabeledString":
        """Label (index, dagger) pairs using the partition (no core allowed)."""
        active = set(partition.active_spin)
        virtual = set(partition.virtual_spin)
        labeled = []
        for index, dagger in ops:
            if index in active:
                space = ACTIVE
            elif index in virtual:
                space = VIRTUAL
            else:
                raise VqseError(f"spin orbital {index} is neither active nor virtual")
            labeled.append(LabeledOp(index, dagger, space))
        return cls(tuple(labeled), coefficient)


class MissingRdmError(VqseError):
    def __init__(self, rank: int):
        super().__init__(f"evaluation requires the rank-{rank} RDM, which was not supplied")
        self.rank = rank


# ---------------------------------------------------------------------------
# symbolic layer: patterns are tuples of (space, dagger); slots keep their
# original position in the string


@lru_cache(maxsize=None)
def contract_virtuals_symbolic(pattern: tuple) -> tuple:
    """All complete vacuum pairings of the virtual operators.

    Returns terms (sign, vpairs, active_slots) where vpairs is a tuple of
    (annihilator slot, creator slot) contractions and active_slots the
    surviving slots in original order.  Contracts the leftmost virtual
    operator first: a leftmost virtual creator hits the bra vacuum (term
    dies), a leftmost virtual annihilator pairs with each virtual creator
    to its right, with the fermionic sign of extracting the pair.
    """
    slots = tuple((i, space, dagger) for i, (space, dagger) in enumerate(pattern))
    return tuple(_contract(slots))


def _contract(slots):
    first_virtual = None
    for pos, (slot, space, dagger) in enumerate(slots):
        if space == VIRTUAL:
            first_virtual = pos
            break
    if first_virtual is None:
        return [(1, (), tuple(s[0] for s in slots))]
    slot, _, dagger = slots[first_virtual]
    if dagger:  # <vac| a+ ... = 0
        return []
    out = []
    for pos in range(first_virtual + 1, len(slots)):
        t_slot, t_space, t_dagger = slots[pos]
        if t_space != VIRTUAL or not t_dagger:
            continue
        sign = -1 if (pos - first_virtual - 1) % 2 else 1
        rest = slots[:first_virtual] + slots[first_virtual + 1 : pos] + slots[pos + 1 :]
        for sub_sign, sub_pairs, sub_active in _contract(rest):
            out.append((sign * sub_sign, ((slot, t_slot),) + sub_pairs, sub_active))
    return out


@lru_cache(maxsize=None)
def normal_order_symbolic(daggers: tuple) -> tuple:
    """Normal-order an all-active pattern against a number-conserving state.

    Returns terms (sign, delta_pairs, creator_slots, annihilator_slots);
    delta_pairs are (annihilator slot, creator slot) from anticommutators.
    Terms whose creator and annihilator counts differ are dropped (they
    vanish on any fixed-particle-number state).
    """
    slots = tuple(enumerate(daggers))
    return tuple(_normal_order(slots))


def _normal_order(slots):
    for pos in range(len(slots) - 1):
        (s1, d1), (s2, d2) = slots[pos], slots[pos + 1]
        if not d1 and d2:  # a a+ = delta - a+ a
            rest = slots[:pos] + slots[pos + 2 :]
            out = []
            for sign, dpairs, cres, anns in _normal_order(rest):
                out.append((sign, ((s1, s2),) + dpairs, cres, anns))
            swapped = slots[:pos] + ((s2, d2), (s1, d1)) + slots[pos + 2 :]
            for sign, dpairs, cres, anns in _normal_order(swapped):
                out.append((-sign, dpairs, cres, anns))
            return out
    cres = tuple(s for s, d in slots if d)
    anns = tuple(s for s, d in slots if not d)
    if len(cres) != len(anns):
        return []
    return [(1, (), cres, anns)]


# ---------------------------------------------------------------------------
# numeric layer


class RdmSet:
    """Active-space RDMs by rank, indexed with active-local spin orbitals."""

    def __init__(self, rdms: dict):
        self.rdms = dict(rdms)
        ns = {r.n for r in self.rdms.values()}
        if len(ns) > 1:
            raise ValueError("RDMs have inconsistent dimensions")
        self.n_active = ns.pop() if ns else 0

    def tensor(self, rank: int) -> np.ndarray:
        if rank == 0:
            return np.array(1.0)
        if rank not in self.rdms:
            raise MissingRdmError(rank)
        return self.rdms[rank].tensor

    @classmethod
    def from_wavefunction(cls, wfn, max_rank: int = 4) -> "RdmSet":
        from .rdm import compute_rdm

        return cls({k: compute_rdm(wfn, k) for k in range(1, max_rank + 1)})


def active_expectation(indices, daggers, rdms: RdmSet) -> complex:
    """<pattern with concrete active-local indices> from the RDM set."""
    total = 0.0
    for sign, dpairs, cres, anns in normal_order_symbolic(tuple(daggers)):
        ok = all(indices[a] == indices[c] for a, c in dpairs)
        if not ok:
            continue
        k = len(cres)
        d = rdms.tensor(k)
        if k == 0:
            total += sign
            continue
        idx = tuple(indices[s] for s in reversed(cres)) + tuple(indices[s] for s in anns)
        total += sign * d[idx]
    return total


@dataclass
class ContractionResult:
    """Numeric contraction: surviving active-only strings with coefficients."""

    terms: list  # list of (coefficient, tuple[(index, dagger), ...]) active ops

    def to_text(self) -> str:
        lines = []
        for coeff, ops in self.terms:
            body = " ".join(f"a{'+' if d else ''}_{i}" for i, d in ops)
            lines.append(f"{coeff!r} * [{body}]")
        return "\n".join(lines) + "\n"


def contract_virtuals(string: LabeledString, partition: OrbitalPartition) -> ContractionResult:
    """Contract all virtual operators against the virtual vacuum."""
    _check_labels(string, partition)
    pattern = tuple((op.space, op.dagger) for op in string.ops)
    out = []
    for sign, vpairs, active_slots in contract_virtuals_symbolic(pattern):
        if any(string.ops[a].index != string.ops[c].index for a, c in vpairs):
            continue
        ops = tuple((string.ops[s].index, string.ops[s].dagger) for s in active_slots)
        out.append((string.coefficient * sign, ops))
    return ContractionResult(out)


def _check_labels(string: LabeledString, partition: OrbitalPartition):
    active = set(partition.active_spin)
    virtual = set(partition.virtual_spin)
    for op in string.ops:
        expected = ACTIVE if op.index in active else VIRTUAL if op.index in virtual else None
        if expected != op.space:
            raise VqseError(
                f"operator on spin orbital {op.index} labeled {op.space}, "
                f"but the partition says {expected}"
            )


def evaluate(string: LabeledString, rdms: RdmSet, partition: OrbitalPartition) -> complex:
    """<Psi_ref (x) vac| string |Psi_ref (x) vac> from active RDMs."""
    contraction = contract_virtuals(string, partition)
    active_local = {so: a for a, so in enumerate(partition.active_spin)}
    total = 0.0
    for coeff, ops in contraction.terms:
        indices = tuple(active_local[i] for i, _ in ops)
        daggers = tuple(d for _, d in ops)
        total += coeff * active_expectation(indices, daggers, rdms)
    return complex(total)


def active_pattern_tensor(daggers: tuple, rdms: RdmSet) -> np.ndarray:
    """Dense tensor T[i1..iL] = <pattern instantiated with those indices>.

    Used by the subspace assembly to amortize one symbolic normal ordering
    over every index tuple at once.
    """
    n = rdms.n_active
    L = len(daggers)
    if L == 0:
        return np.array(1.0)
    letters = "abcdefghijklmnop"
    dtype = np.result_type(float, *(r.tensor.dtype for r in rdms.rdms.values()))
    out = np.zeros((n,) * L, dtype=dtype)
    eye = np.eye(n)
    for sign, dpairs, cres, anns in normal_order_symbolic(tuple(daggers)):
        operands, specs = [], []
        for a, c in dpairs:
            operands.append(eye)
            specs.append(letters[a] + letters[c])
        k = len(cres)
        if k > 0:
            operands.append(rdms.tensor(k))
            specs.append(
                "".join(letters[s] for s in reversed(cres))
                + "".join(letters[s] for s in anns)
            )
        out_spec = "".join(letters[s] for s in range(L))
        if not operands:  # fully contracted scalar; only possible when L == 0
            out += sign
            continue
        out += sign * np.einsum(",".join(specs) + "->" + out_spec, *operands)
    return out
