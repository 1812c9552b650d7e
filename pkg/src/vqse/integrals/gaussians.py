"""Gaussian integrals over s and p shells (McMurchie-Davidson scheme).

All quantities are in atomic units. Two-electron integrals are returned in
chemist notation (pq|rs) with the full 8-fold permutational symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .basis import BasisSet, Geometry

MAX_BOYS_ORDER = 8


def boys_function(m: int, x: float) -> float:
    """Boys function F_m(x) = int_0^1 t^{2m} exp(-x t^2) dt."""
    if m < 0 or m > MAX_BOYS_ORDER:
        raise ValueError(f"Boys order must be in [0, {MAX_BOYS_ORDER}], got {m}")
    if x < 0:
        raise ValueError(f"Boys argument must be non-negative, got {x}")
    return _boys_row(m, x)[m]


def _boys_row(mmax: int, x: float) -> np.ndarray:
    """F_0(x) .. F_mmax(x).

    Small x: Kummer series at the highest order, then downward recursion
    (stable in that direction). Large x: F_0 from erf, then upward
    recursion, which is stable once x > m + 1/2.
    """
    out = np.empty(mmax + 1)
    if x < 25.0:
        ex = math.exp(-x)
        term = 1.0 / (2 * mmax + 1)
        acc = term
        k = 1
        while True:
            term *= x / (mmax + k + 0.5)
            acc += term
            if term < 1e-17 * acc:
                break
            k += 1
        out[mmax] = ex * acc
        for m in range(mmax - 1, -1, -1):
            out[m] = (2.0 * x * out[m + 1] + ex) / (2 * m + 1)
    else:
        ex = math.exp(-x)
        sx = math.sqrt(x)
        out[0] = math.sqrt(math.pi) / (2.0 * sx) * erf(sx)
        for m in range(1, mmax + 1):
            out[m] = ((2 * m - 1) * out[m - 1] - ex) / (2.0 * x)
    return out


def _hermite_coefficients(la: int, lb: int, p: float, xpa: float, xpb: float):
    """1D Hermite expansion coefficients E_t^{ij} for i <= la, j <= lb.

    The Gaussian-product prefactor exp(-mu X_AB^2) is applied separately.
    """
    E = np.zeros((la + 1, lb + 1, la + lb + 1))
    E[0, 0, 0] = 1.0
    inv2p = 1.0 / (2.0 * p)
    for i in range(la + 1):
        for j in range(lb + 1):
            if i == 0 and j == 0:
                continue
            if j == 0:
                # build up in i
                for t in range(i + j + 1):
                    val = xpa * E[i - 1, 0, t]
                    if t > 0:
                        val += inv2p * E[i - 1, 0, t - 1]
                    if t + 1 <= i - 1:
                        val += (t + 1) * E[i - 1, 0, t + 1]
                    E[i, 0, t] = val
            else:
                for t in range(i + j + 1):
                    val = xpb * E[i, j - 1, t]
                    if t > 0:
                        val += inv2p * E[i, j - 1, t - 1]
                    if t + 1 <= i + j - 1:
                        val += (t + 1) * E[i, j - 1, t + 1]
                    E[i, j, t] = val
    return E


def _hermite_coulomb(tmax: int, umax: int, vmax: int, alpha: float, pc: np.ndarray):
    """Hermite Coulomb integrals R_{tuv} = R^0_{tuv}(alpha, PC)."""
    nmax = tmax + umax + vmax
    boys = _boys_row(nmax, alpha * float(pc @ pc))
    # R[n, t, u, v] built by downward n-recursion
    R = np.zeros((nmax + 1, tmax + 1, umax + 1, vmax + 1))
    for n in range(nmax + 1):
        R[n, 0, 0, 0] = (-2.0 * alpha) ** n * boys[n]
    for t in range(1, tmax + 1):
        for n in range(nmax - t + 1):
            val = pc[0] * R[n + 1, t - 1, 0, 0]
            if t > 1:
                val += (t - 1) * R[n + 1, t - 2, 0, 0]
            R[n, t, 0, 0] = val
    for u in range(1, umax + 1):
        for t in range(tmax + 1):
            for n in range(nmax - t - u + 1):
                val = pc[1] * R[n + 1, t, u - 1, 0]
                if u > 1:
                    val += (u - 1) * R[n + 1, t, u - 2, 0]
                R[n, t, u, 0] = val
    for v in range(1, vmax + 1):
        for u in range(umax + 1):
            for t in range(tmax + 1):
                for n in range(nmax - t - u - v + 1):
                    val = pc[2] * R[n + 1, t, u, v - 1]
                    if v > 1:
                        val += (v - 1) * R[n + 1, t, u, v - 2]
                    R[n, t, u, v] = val
    return R[0]


def _double_factorial(n: int) -> float:
    return float(math.prod(range(n, 0, -2))) if n > 0 else 1.0


def _primitive_norm(alpha: float, powers) -> float:
    i, j, k = powers
    l = i + j + k
    return (
        (2.0 * alpha / math.pi) ** 0.75
        * (4.0 * alpha) ** (l / 2.0)
        / math.sqrt(
            _double_factorial(2 * i - 1)
            * _double_factorial(2 * j - 1)
            * _double_factorial(2 * k - 1)
        )
    )


_CARTESIAN_POWERS = {0: [(0, 0, 0)], 1: [(1, 0, 0), (0, 1, 0), (0, 0, 1)]}


@dataclass(frozen=True)
class _Ao:
    """One contracted Cartesian Gaussian basis function."""

    center: np.ndarray
    powers: tuple[int, int, int]
    exponents: np.ndarray
    coefficients: np.ndarray  # includes primitive norms and contraction norm


def build_ao_basis(geometry: Geometry, basis: BasisSet) -> list[_Ao]:
    aos = []
    for atom in geometry.atoms:
        for shell in basis.shells_for(atom.symbol):
            if shell.l > 1:
                raise ValueError("angular momentum above p is not supported")
            for powers in _CARTESIAN_POWERS[shell.l]:
                exps = np.asarray(shell.exponents)
                coefs = np.asarray(shell.coefficients) * np.array(
                    [_primitive_norm(a, powers) for a in shell.exponents]
                )
                ao = _Ao(np.asarray(atom.position, dtype=float), powers, exps, coefs)
                norm = _ao_pair_overlap(ao, ao) ** -0.5
                aos.append(
                    _Ao(ao.center, powers, exps, coefs * norm)
                )
    return aos


class _PairData:
    """Gaussian-product data for one pair of contracted functions."""

    __slots__ = ("p", "P", "coef", "E")

    def __init__(self, a: _Ao, b: _Ao):
        aa = a.exponents[:, None]
        bb = b.exponents[None, :]
        ab = a.center - b.center
        self.p = (aa + bb).ravel()
        P = (aa[..., None] * a.center + bb[..., None] * b.center) / (aa + bb)[..., None]
        self.P = P.reshape(-1, 3)
        mu = (aa * bb / (aa + bb)).ravel()
        kab = np.exp(-mu * float(ab @ ab))
        self.coef = (a.coefficients[:, None] * b.coefficients[None, :]).ravel() * kab
        # E[dim][prim_pair, t]; prefactor folded into coef via kab, so the
        # per-dimension E start from E_0^{00} = 1
        la, lb = a.powers, b.powers
        self.E = []
        for d in range(3):
            Ed = np.empty((len(self.p), la[d] + lb[d] + 1))
            for k, (pk, Pk) in enumerate(zip(self.p, self.P)):
                Ecoef = _hermite_coefficients(
                    la[d], lb[d], pk, Pk[d] - a.center[d], Pk[d] - b.center[d]
                )
                Ed[k] = Ecoef[la[d], lb[d]]
            self.E.append(Ed)


def _ao_pair_overlap(a: _Ao, b: _Ao) -> float:
    pair = _PairData(a, b)
    val = pair.coef * (math.pi / pair.p) ** 1.5
    for d in range(3):
        val = val * pair.E[d][:, 0]
    return float(val.sum())


def _shifted(a: _Ao, d: int, delta: int) -> _Ao:
    powers = list(a.powers)
    powers[d] += delta
    if powers[d] < 0:
        return None
    return _Ao(a.center, tuple(powers), a.exponents, a.coefficients)


def _kinetic(a: _Ao, b: _Ao) -> float:
    # T = -1/2 <a|del^2|b>, expressed through overlaps with shifted b
    lb = sum(b.powers)
    val = 0.0
    for d in range(3):
        bexp = b.exponents
        # overlap with per-primitive exponent weights: fold weight into coefs
        up = _shifted(b, d, 2)
        w = _Ao(b.center, up.powers, bexp, b.coefficients * bexp * bexp)
        val += -2.0 * _ao_pair_overlap(a, w)
        nb = b.powers[d]
        if nb >= 2:
            down = _shifted(b, d, -2)
            val += -0.5 * nb * (nb - 1) * _ao_pair_overlap(a, down)
    mid = _Ao(b.center, b.powers, b.exponents, b.coefficients * b.exponents)
    val += (2.0 * lb + 3.0) * _ao_pair_overlap(a, mid)
    return val


def _nuclear(a: _Ao, b: _Ao, geometry: Geometry) -> float:
    pair = _PairData(a, b)
    la, lb = a.powers, b.powers
    tmax = la[0] + lb[0]
    umax = la[1] + lb[1]
    vmax = la[2] + lb[2]
    val = 0.0
    for atom in geometry.atoms:
        C = np.asarray(atom.position)
        for k in range(len(pair.p)):
            R = _hermite_coulomb(tmax, umax, vmax, pair.p[k], pair.P[k] - C)
            s = 0.0
            for t in range(tmax + 1):
                for u in range(umax + 1):
                    for v in range(vmax + 1):
                        s += (
                            pair.E[0][k, t]
                            * pair.E[1][k, u]
                            * pair.E[2][k, v]
                            * R[t, u, v]
                        )
            val -= atom.charge * pair.coef[k] * 2.0 * math.pi / pair.p[k] * s
    return val


def _eri(pair_ab: _PairData, pair_cd: _PairData) -> float:
    t1 = pair_ab.E[0].shape[1] - 1
    u1 = pair_ab.E[1].shape[1] - 1
    v1 = pair_ab.E[2].shape[1] - 1
    t2 = pair_cd.E[0].shape[1] - 1
    u2 = pair_cd.E[1].shape[1] - 1
    v2 = pair_cd.E[2].shape[1] - 1
    val = 0.0
    for k1 in range(len(pair_ab.p)):
        p = pair_ab.p[k1]
        # Hermite charge distribution of the bra pair
        Eab = np.einsum(
            "t,u,v->tuv", pair_ab.E[0][k1], pair_ab.E[1][k1], pair_ab.E[2][k1]
        )
        for k2 in range(len(pair_cd.p)):
            q = pair_cd.p[k2]
            alpha = p * q / (p + q)
            R = _hermite_coulomb(
                t1 + t2, u1 + u2, v1 + v2, alpha, pair_ab.P[k1] - pair_cd.P[k2]
            )
            s = 0.0
            for t in range(t1 + 1):
                for u in range(u1 + 1):
                    for v in range(v1 + 1):
                        e1 = Eab[t, u, v]
                        if e1 == 0.0:
                            continue
                        for tt in range(t2 + 1):
                            for uu in range(u2 + 1):
                                for vv in range(v2 + 1):
                                    e2 = pair_cd.E[0][k2, tt] * pair_cd.E[1][k2, uu] * pair_cd.E[2][k2, vv]
                                    sign = -1.0 if (tt + uu + vv) % 2 else 1.0
                                    s += e1 * e2 * sign * R[t + tt, u + uu, v + vv]
            val += (
                pair_ab.coef[k1]
                * pair_cd.coef[k2]
                * 2.0
                * math.pi ** 2.5
                / (p * q * math.sqrt(p + q))
                * s
            )
    return val


def nuclear_repulsion(geometry: Geometry) -> float:
    e = 0.0
    atoms = geometry.atoms
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            rij = np.asarray(atoms[i].position) - np.asarray(atoms[j].position)
            e += atoms[i].charge * atoms[j].charge / math.sqrt(float(rij @ rij))
    return e


@dataclass
class AoIntegrals:
    overlap: np.ndarray
    kinetic: np.ndarray
    nuclear: np.ndarray
    eri: np.ndarray  # chemist (pq|rs)
    e_nuc: float

    @property
    def n(self) -> int:
        return self.overlap.shape[0]

    @property
    def hcore(self) -> np.ndarray:
        return self.kinetic + self.nuclear


def compute_ao_integrals(geometry: Geometry, basis: BasisSet) -> AoIntegrals:
    """All AO-basis integrals needed for an RHF + FCI treatment."""
    aos = build_ao_basis(geometry, basis)
    n = len(aos)
    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            pairs[i, j] = _PairData(aos[i], aos[j])
            S[i, j] = S[j, i] = _ao_pair_overlap(aos[i], aos[j])
            T[i, j] = T[j, i] = _kinetic(aos[i], aos[j])
            V[i, j] = V[j, i] = _nuclear(aos[i], aos[j], geometry)
    eri = np.zeros((n, n, n, n))
    # canonical quartets i>=j, k>=l, (ij)>=(kl); fixed loop order keeps the
    # evaluation bitwise deterministic
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    kl = k * (k + 1) // 2 + l
                    if ij < kl:
                        continue
                    val = _eri(pairs[i, j], pairs[k, l])
                    for a, b in ((i, j), (j, i)):
                        for c, d in ((k, l), (l, k)):
                            eri[a, b, c, d] = val
                            eri[c, d, a, b] = val
    return AoIntegrals(S, T, V, eri, nuclear_repulsion(geometry))
