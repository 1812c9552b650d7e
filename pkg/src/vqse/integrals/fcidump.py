"""FCIDUMP reading and writing.

Header: ``&FCI NORB=<n>,NELEC=<ne>,MS2=<ms>,`` then ``ORBSYM=...``,
``ISYM=1,`` and ``&END`` (``/`` accepted as terminator too). Body lines are
``<value> <i> <j> <k> <l>`` with 1-based indices in chemist notation
(ij|kl); ``k = l = 0`` marks one-body h_ij and all-zero indices the scalar
constant (nuclear repulsion plus any core shift).
"""

from __future__ import annotations

import re

import numpy as np

from ..exceptions import ParseError
from .mo import MolecularIntegrals


def write_fcidump(mol: MolecularIntegrals, n_electrons: int, spin: int, path) -> None:
    n = mol.n_spatial
    with open(path, "w") as fh:
        fh.write(f"&FCI NORB={n},NELEC={n_electrons},MS2={spin},\n")
        fh.write(" ORBSYM=" + "1," * n + "\n")
        fh.write(" ISYM=1,\n")
        fh.write("&END\n")
        for i in range(n):
            for j in range(i + 1):
                for k in range(i + 1):
                    lmax = j if k == i else k
                    for l in range(lmax + 1):
                        val = mol.eri[i, j, k, l]
                        if val != 0.0:
                            fh.write(f"{val:23.16e} {i+1:4d} {j+1:4d} {k+1:4d} {l+1:4d}\n")
        for i in range(n):
            for j in range(i + 1):
                val = mol.h1[i, j]
                if val != 0.0:
                    fh.write(f"{val:23.16e} {i+1:4d} {j+1:4d}    0    0\n")
        fh.write(f"{mol.constant:23.16e}    0    0    0    0\n")


def read_fcidump(path) -> tuple[MolecularIntegrals, int, int]:
    """Returns (integrals, n_electrons, 2*S_z)."""
    with open(path) as fh:
        lines = fh.readlines()

    header = []
    body_start = None
    for ln, line in enumerate(lines, start=1):
        header.append(line)
        if "&END" in line.upper() or line.strip() == "/" or line.strip().endswith("/"):
            body_start = ln
            break
    if body_start is None:
        raise ParseError("no &END (or '/') header terminator found", line=len(lines))

    header_text = " ".join(header)

    def header_int(key):
        m = re.search(rf"{key}\s*=\s*(-?\d+)", header_text, flags=re.IGNORECASE)
        if not m:
            raise ParseError(f"header is missing {key}", line=1)
        return int(m.group(1))

    norb = header_int("NORB")
    nelec = header_int("NELEC")
    ms2 = header_int("MS2")

    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    constant = 0.0
    for ln in range(body_start, len(lines)):
        line = lines[ln].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ParseError("expected '<value> <i> <j> <k> <l>'", line=ln + 1)
        try:
            val = float(fields[0])
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise ParseError("malformed value or index", line=ln + 1) from None
        if any(idx < 0 or idx > norb for idx in (i, j, k, l)):
            raise ParseError(f"orbital index out of range 1..{norb}", line=ln + 1)
        if i == j == k == l == 0:
            constant = val
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise ParseError("one-body line with a zero orbital index", line=ln + 1)
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = val
        elif i == 0 or j == 0 or k == 0 or l == 0:
            raise ParseError("two-body line with a zero orbital index", line=ln + 1)
        else:
            a, b, c, d = i - 1, j - 1, k - 1, l - 1
            for p, q in ((a, b), (b, a)):
                for r, s in ((c, d), (d, c)):
                    eri[p, q, r, s] = val
                    eri[r, s, p, q] = val
    mol = MolecularIntegrals(n_spatial=norb, e_nuc=constant, h1=h1, eri=eri)
    return mol, nelec, ms2
