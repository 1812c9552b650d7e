"""Operator pool, subspace matrices, GEVP, and end-to-end drivers."""

import itertools
import math

import numpy as np
import pytest

from conftest import embed_wavefunction, h2_case, random_wavefunction
from vqse import ANGSTROM_PER_BOHR
from vqse.exceptions import DegenerateMetricError, PartitionError, VqseError
from vqse.fci import (
    Wavefunction,
    apply_ladder_string,
    build_hamiltonian_action,
    ground_state,
    sector_determinants,
)
from vqse.rdm import compute_rdm, cumulant_3rdm, cumulant_4rdm, inject_shot_noise
from vqse.spaces import OrbitalPartition
from vqse.subspace import (
    ExpansionOperator,
    SubspacePair,
    VqseOptions,
    assemble_subspace,
    assemble_subspace_direct,
    build_pool,
    canonical_orthogonalize,
    solve_gevp,
    vqse_energy_curve,
    vqse_point,
)
from vqse.wick import RdmSet

TOL_EXACT = 1e-12
TOL_ORACLE = 1e-10
R_A = 1.4 * ANGSTROM_PER_BOHR  # 1.4 bohr in angstrom


def operator_matrix(op_ladder, dets, n_spin):
    """Dense matrix of a ladder string on a determinant basis."""
    index = {d: k for k, d in enumerate(dets)}
    m = np.zeros((len(dets), len(dets)))
    for col, det in enumerate(dets):
        sign, new = apply_ladder_string(op_ladder, det, n_spin)
        if sign and new in index:
            m[index[new], col] = sign
    return m


def oracle_pair(pool, mol, wfn, partition):
    """Subspace matrices by explicit operator application in the full
    2-electron sector (independent of the Wick machinery)."""
    n_spin = mol.n_spin
    dets = sector_determinants(n_spin, wfn.n_electrons)
    full = embed_wavefunction(wfn, partition, n_spin)
    v = np.zeros(len(dets))
    for k, det in enumerate(dets):
        v[k] = full.amplitudes.get(det, 0.0).real if det in full.amplitudes else 0.0
    action = build_hamiltonian_action(mol)
    h_full = action.dense_matrix(dets)
    ops = [operator_matrix(op.ladder_ops(), dets, n_spin) for op in pool]
    cols = [m @ v for m in ops]
    n = len(pool)
    h = np.zeros((n, n))
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s[i, j] = cols[i] @ cols[j]
            h[i, j] = cols[i] @ h_full @ cols[j]
    return h, s


# ---------------------------------------------------------------------------
# pool enumeration


def test_expansion_operator_validation():
    with pytest.raises(VqseError):
        ExpansionOperator("triple")
    with pytest.raises(VqseError):
        ExpansionOperator("single", (1, 2, 3))


def test_pool_singles_only_one_spatial_active():
    partition = OrbitalPartition(core=(), active=(0,), virtual=())
    pool = build_pool(partition, level=1, prune_sz=False)
    assert len(pool) == 1 + 2 * 2  # identity + a+_i a_p over 2 spin orbitals
    assert pool[0].kind == "identity"


def test_pool_empty_restriction_leaves_identity():
    partition = OrbitalPartition.from_counts(0, 2, 4)
    pool = build_pool(partition, restrict_to=())
    assert len(pool) == 1 and pool[0].kind == "identity"


def test_pool_closed_form_count_ccpvdz():
    partition = OrbitalPartition.from_counts(0, 2, 10)  # 4 active + 16 virtual spin
    pool = build_pool(partition, prune_sz=False)
    n_act, n_virt = 4, 16
    expected = 1 + (n_act + n_virt) * n_act + math.comb(n_virt, 2) * n_act * n_act
    assert len(pool) == expected == 2001
    assert len(set(pool)) == len(pool)  # no duplicates


def test_pool_sz_pruning_matches_manual_filter():
    partition = OrbitalPartition.from_counts(0, 2, 6)
    full = build_pool(partition, prune_sz=False)
    pruned = build_pool(partition, prune_sz=True)
    assert pruned == [op for op in full if op.delta_sz() == 0]
    assert all(op.delta_sz() == 0 for op in pruned)
    assert len(pruned) < len(full)


def test_pool_validation_errors():
    with pytest.raises(PartitionError):
        build_pool(OrbitalPartition(core=(0,), active=(), virtual=(1,)))
    partition = OrbitalPartition.from_counts(0, 2, 4)
    with pytest.raises(VqseError):
        build_pool(partition, level=3)
    with pytest.raises(PartitionError):
        build_pool(partition, restrict_to=(99,))


def test_adjoint_ops_reverse_and_flip():
    op = ExpansionOperator("double", (8, 1, 10, 3))
    assert op.adjoint_ops() == ((3, True), (10, False), (1, True), (8, False))


# ---------------------------------------------------------------------------
# assembly


def test_identity_pool_gives_reference_expectation():
    case = h2_case(R_A, "6-31g")
    wfn = case["wfn"]
    rdms = RdmSet.from_wavefunction(wfn)
    pool = [ExpansionOperator("identity")]
    pair = assemble_subspace(pool, case["mol"], rdms, case["partition"])
    assert pair.s[0, 0] == pytest.approx(1.0, abs=TOL_ORACLE)
    assert pair.h[0, 0] == pytest.approx(case["e_ref"], abs=TOL_ORACLE)


def test_zero_virtual_space_reproduces_active_qse():
    """No virtuals: the assembly must equal the dense active-space
    computation <Psi|O_i+ H O_j|Psi>."""
    case = h2_case(R_A, "sto-3g", n_active_spatial=2)
    mol, wfn = case["mol"], case["wfn"]
    partition = case["partition"]
    assert not partition.virtual
    rdms = RdmSet.from_wavefunction(wfn)
    pool = build_pool(partition)
    pair = assemble_subspace(pool, mol, rdms, partition)
    h_ref, s_ref = oracle_pair(pool, mol, wfn, partition)
    assert np.max(np.abs(pair.h - h_ref)) < TOL_ORACLE
    assert np.max(np.abs(pair.s - s_ref)) < TOL_ORACLE


def test_assembly_matches_full_space_oracle_631g():
    case = h2_case(R_A, "6-31g")
    mol, wfn, partition = case["mol"], case["wfn"], case["partition"]
    rdms = RdmSet.from_wavefunction(wfn)
    pool = build_pool(partition)
    pair = assemble_subspace(pool, mol, rdms, partition)
    h_ref, s_ref = oracle_pair(pool, mol, wfn, partition)
    assert np.max(np.abs(pair.h - h_ref)) < TOL_ORACLE
    assert np.max(np.abs(pair.s - s_ref)) < TOL_ORACLE
    assert pair.h_asymmetry < 1e-10 and pair.s_asymmetry < 1e-10


def test_vectorized_assembly_matches_elementwise_path():
    case = h2_case(R_A, "6-31g")
    mol, wfn, partition = case["mol"], case["wfn"], case["partition"]
    rdms = RdmSet.from_wavefunction(wfn)
    pool = build_pool(partition, restrict_to=(2, 3))  # small pool for the slow path
    fast = assemble_subspace(pool, mol, rdms, partition)
    slow = assemble_subspace_direct(pool, mol, rdms, partition)
    assert np.max(np.abs(fast.h - slow.h)) < TOL_ORACLE
    assert np.max(np.abs(fast.s - slow.s)) < TOL_ORACLE


def test_assembly_rejects_core_partition():
    case = h2_case(R_A, "6-31g")
    rdms = RdmSet.from_wavefunction(case["wfn"])
    partition = OrbitalPartition(core=(0,), active=(1, 2), virtual=(3,))
    with pytest.raises(PartitionError):
        assemble_subspace([ExpansionOperator("identity")], case["mol"], rdms, partition)


# ---------------------------------------------------------------------------
# canonical orthogonalization and GEVP


def test_orthogonalize_identity_metric():
    x, discarded = canonical_orthogonalize(np.eye(5))
    assert discarded.size == 0
    assert np.allclose(x.T @ np.eye(5) @ x, np.eye(5), atol=TOL_EXACT)


def test_orthogonalize_whitens_random_metric():
    rng = np.random.default_rng(51)
    a = rng.normal(size=(6, 6))
    s = a @ a.T + 6 * np.eye(6)
    x, _ = canonical_orthogonalize(s)
    assert np.max(np.abs(x.T @ s @ x - np.eye(x.shape[1]))) < 1e-10


def test_orthogonalize_degenerate_metric_raises():
    with pytest.raises(DegenerateMetricError):
        canonical_orthogonalize(np.zeros((3, 3)))
    with pytest.raises(DegenerateMetricError):
        canonical_orthogonalize(np.eye(3), eps=2.0)


def test_duplicated_pool_entry_drops_one_dimension():
    case = h2_case(R_A, "6-31g")
    rdms = RdmSet.from_wavefunction(case["wfn"])
    pool = build_pool(case["partition"])
    dup_pool = pool + [pool[3]]
    pair = assemble_subspace(dup_pool, case["mol"], rdms, case["partition"])
    solution = solve_gevp(pair)
    base = solve_gevp(assemble_subspace(pool, case["mol"], rdms, case["partition"]))
    assert solution.retained_dimension == len(dup_pool) - 1 - (
        len(pool) - base.retained_dimension
    )
    assert solution.ground_energy == pytest.approx(base.ground_energy, abs=1e-9)


def test_noisy_metric_eps_sweep_dimension_monotone():
    case = h2_case(R_A, "6-31g")
    wfn = case["wfn"]
    r1 = inject_shot_noise(compute_rdm(wfn, 1), 1e4, seed=3)
    r2 = inject_shot_noise(compute_rdm(wfn, 2), 1e4, seed=4)
    rdms = RdmSet({1: r1, 2: r2, 3: cumulant_3rdm(r1, r2), 4: cumulant_4rdm(r1, r2)})
    pool = build_pool(case["partition"])
    pair = assemble_subspace(pool, case["mol"], rdms, case["partition"])
    dims, rows = [], []
    for eps in (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        sol = solve_gevp(pair, eps=eps)
        dims.append(sol.retained_dimension)
        rows.append(f"eps={eps:.0e}  dim={sol.retained_dimension:3d}  "
                    f"E0={sol.ground_energy:+.8f}")
    print("\n".join(rows))
    assert all(a >= b for a, b in zip(dims, dims[1:]))


def test_gevp_identity_pool_returns_reference_energy():
    case = h2_case(R_A, "sto-3g")
    rdms = RdmSet.from_wavefunction(case["wfn"])
    pair = assemble_subspace(
        [ExpansionOperator("identity")], case["mol"], rdms, case["partition"]
    )
    sol = solve_gevp(pair)
    assert sol.ground_energy == pytest.approx(case["e_ref"], abs=TOL_ORACLE)


def test_gevp_closed_expansion_hits_fci():
    """STO-3G: the pool spans the whole sector, so the ground eigenvalue is
    the FCI energy."""
    case = h2_case(R_A, "sto-3g")
    rdms = RdmSet.from_wavefunction(case["wfn"])
    pool = build_pool(case["partition"])
    pair = assemble_subspace(pool, case["mol"], rdms, case["partition"])
    sol = solve_gevp(pair)
    e_fci, _ = ground_state(build_hamiltonian_action(case["mol"]), 2, sz=0)
    assert sol.ground_energy == pytest.approx(e_fci, abs=TOL_ORACLE)
    assert sol.residual_norm < 1e-8


def test_nested_pools_monotone_ground_energy():
    case = h2_case(R_A, "6-31g")
    mol, wfn, partition = case["mol"], case["wfn"], case["partition"]
    rdms = RdmSet.from_wavefunction(wfn)
    energies = []
    pools = [
        [ExpansionOperator("identity")],
        build_pool(partition, level=1),
        build_pool(partition, level=2),
    ]
    for pool in pools:
        pair = assemble_subspace(pool, mol, rdms, partition)
        energies.append(solve_gevp(pair).ground_energy)
    assert energies[0] >= energies[1] - 1e-10
    assert energies[1] >= energies[2] - 1e-10
    assert energies[0] == pytest.approx(case["e_ref"], abs=TOL_ORACLE)


def test_excited_state_bound_reported():
    case = h2_case(R_A, "6-31g")
    rdms = RdmSet.from_wavefunction(case["wfn"])
    pool = build_pool(case["partition"])
    pair = assemble_subspace(pool, case["mol"], rdms, case["partition"])
    sol = solve_gevp(pair)
    action = build_hamiltonian_action(case["mol"])
    dets = sector_determinants(8, 2, sz=0)
    exact = np.linalg.eigvalsh(action.dense_matrix(dets))
    print(f"E1 subspace {sol.eigenvalues[1]:+.8f} vs exact {exact[1]:+.8f} "
          f"(excess {sol.eigenvalues[1] - exact[1]:.3e})")
    assert sol.eigenvalues[1] >= exact[1] - 1e-9


def test_cumulant_substitution_recovers_exact_assembly():
    """Reassembling ranks 3/4 from cumulants is exact when the connected
    3- and 4-body parts are kept."""
    case = h2_case(R_A, "6-31g")
    wfn = case["wfn"]
    exact = {k: compute_rdm(wfn, k) for k in range(1, 5)}
    r4 = cumulant_4rdm(exact[1], exact[2], exact[3], exact[4], truncation_rank=4)
    assert np.max(np.abs(r4.tensor - exact[4].tensor)) < TOL_ORACLE
    rebuilt = RdmSet({1: exact[1], 2: exact[2], 3: exact[3], 4: r4})
    pool = build_pool(case["partition"])
    a = assemble_subspace(pool, case["mol"], RdmSet(exact), case["partition"])
    b = assemble_subspace(pool, case["mol"], rebuilt, case["partition"])
    assert np.max(np.abs(a.h - b.h)) < TOL_ORACLE
    assert np.max(np.abs(a.s - b.s)) < TOL_ORACLE


def test_cumulant_truncation_error_reported():
    exact_point = vqse_point(1.4, VqseOptions(basis="6-31g"))
    cum_point = vqse_point(1.4, VqseOptions(basis="6-31g", cumulant=True))
    gap = cum_point.e_vqse - exact_point.e_vqse
    print(f"rank-2 cumulant mode raises E_vqse by {gap:+.3e}")
    assert abs(gap) < 5e-3  # small but generally nonzero


# ---------------------------------------------------------------------------
# drivers


def test_vqse_point_without_virtuals_collapses_to_reference():
    options = VqseOptions(basis="sto-3g", n_active_spatial=2)
    point = vqse_point(1.4, options)
    assert point.e_vqse == pytest.approx(point.e_ref, abs=TOL_ORACLE)
    assert point.e_vqse == pytest.approx(point.e_fci_full, abs=TOL_ORACLE)


def test_vqse_point_variational_and_report():
    point = vqse_point(1.4, VqseOptions(basis="6-31g"))
    assert point.e_vqse <= point.e_ref + 1e-10
    assert point.e_vqse >= point.e_fci_full - 1e-10
    report = point.to_report()
    assert report["pool_size"] == point.pool_size
    assert "e_vqse" in point.to_json()


def test_curve_is_fail_soft():
    options = VqseOptions(basis="sto-3g", n_active_spatial=5)  # impossible split
    rows = vqse_energy_curve([1.4, 1.5], options)
    assert len(rows) == 2
    assert all(row.error is not None for row in rows)
    assert all(math.isnan(row.e_vqse) for row in rows)
