import functools
from pathlib import Path

import numpy as np
import pytest

from vqse import ANGSTROM_PER_BOHR
from vqse.fci import Wavefunction, build_hamiltonian_action, ground_state
from vqse.integrals import (
    compute_ao_integrals,
    h2_geometry,
    load_basis,
    run_rhf,
    transform_to_mo,
)
from vqse.spaces import OrbitalPartition
from vqse.subspace import _slice_integrals

DATA_DIR = Path(__file__).parent / "data"


@functools.lru_cache(maxsize=32)
def h2_case(r_angstrom: float, basis: str, n_active_spatial: int = 2):
    """Shared pipeline state at one bond length (cached across tests)."""
    r_bohr = r_angstrom / ANGSTROM_PER_BOHR
    ao = compute_ao_integrals(h2_geometry(r_bohr), load_basis(basis))
    scf = run_rhf(ao, 2)
    mol = transform_to_mo(ao, scf.mo_coefficients)
    partition = OrbitalPartition.from_counts(0, n_active_spatial, mol.n_spatial)
    active_mol = _slice_integrals(mol, partition.active)
    e_ref, wfn = ground_state(build_hamiltonian_action(active_mol), 2, sz=0)
    return {
        "r_bohr": r_bohr,
        "ao": ao,
        "scf": scf,
        "mol": mol,
        "partition": partition,
        "active_mol": active_mol,
        "e_ref": float(e_ref),
        "wfn": wfn,
    }


@functools.lru_cache(maxsize=32)
def h2_fci(r_angstrom: float, basis: str) -> float:
    case = h2_case(r_angstrom, basis)
    energy, _ = ground_state(build_hamiltonian_action(case["mol"]), 2, sz=0)
    return float(energy)


def embed_wavefunction(wfn: Wavefunction, partition: OrbitalPartition, n_full: int):
    """Map an active-space wavefunction into the full Fock space (other
    spin orbitals empty; amplitudes keep their signs because the active
    spin orbitals are listed ascending)."""
    spots = partition.active_spin
    amplitudes = {}
    for det, amp in wfn.amplitudes.items():
        full = 0
        for i in range(wfn.n_spin_orbitals):
            if det >> i & 1:
                full |= 1 << spots[i]
        amplitudes[full] = amp
    return Wavefunction(amplitudes, n_full, wfn.n_electrons)


def random_wavefunction(n_spin_orbitals, n_electrons, rng, sz=None, complex_amps=False):
    from vqse.fci import sector_determinants

    dets = sector_determinants(n_spin_orbitals, n_electrons, sz)
    amps = rng.normal(size=len(dets))
    if complex_amps:
        amps = amps + 1j * rng.normal(size=len(dets))
    return Wavefunction(dict(zip(dets, amps)), n_spin_orbitals, n_electrons).normalized()
