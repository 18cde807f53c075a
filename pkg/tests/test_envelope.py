import numpy as np
import pytest

from ncshilov import blockdecomp, matcore, stargen
from ncshilov.envelope import (
    ESSENTIAL,
    LOOSE,
    SCAN_ASCENDING_RANK,
    certify_embedding,
    compute_envelope,
    induced_isomorphism,
    is_block_loose,
    unitization_morphism,
)
from ncshilov.errors import ConeDoesNotSpan
from ncshilov.matcore import amplify, op_norm
from ncshilov.selftest import loose_instance, random_unitary
from ncshilov.stargen import validate_space


def _diag_space(*cols):
    return validate_space([np.diag(c).astype(complex) for c in cols])


def test_loose_block_in_diagonal_example():
    # the third point of span{(1,0,1/2),(0,1,1/2)} never carries norm
    x = _diag_space([1, 0, 0.5], [0, 1, 0.5])
    alg = stargen.generate_star_algebra(x)
    dec = blockdecomp.decompose(alg, seed=0)
    by_point = {int(np.argmax(np.real(np.diagonal(b.projection)))): b
                for b in dec.blocks}
    v3 = is_block_loose(x, alg, by_point[2], tol=1e-7)
    assert v3.status == LOOSE
    v1 = is_block_loose(x, alg, by_point[0], tol=1e-7)
    assert v1.status == ESSENTIAL
    assert v1.witness_gap is None or v1.witness_gap > 0


def test_single_block_space_is_essential():
    x = validate_space([np.array([[1, 0], [0, 0]], dtype=complex),
                        np.array([[0, 0], [0, 1]], dtype=complex),
                        np.array([[1, 1], [1, 1]], dtype=complex) / 2])
    alg = stargen.generate_star_algebra(x)
    dec = blockdecomp.decompose(alg, seed=0)
    assert len(dec.blocks) == 1
    v = is_block_loose(x, alg, dec.blocks[0], tol=1e-7)
    assert v.status == ESSENTIAL
    assert "injective" in v.reason or "zero" in v.reason


def test_envelope_diagonal_half_example():
    env = compute_envelope(_diag_space([1, 0, 0.5], [0, 1, 0.5]), seed=0)
    assert env.abstract_blocks == (1, 1)
    assert env.eliminations() == 1
    # eliminated block is the third coordinate
    assert np.real(env.q[2, 2]) < 1e-9
    rep = certify_embedding(env, levels=3, samples=100, seed=1)
    assert rep["passed"]


def test_envelope_scalar_space():
    env = compute_envelope(validate_space([np.eye(2, dtype=complex)]), seed=0)
    assert env.abstract_blocks == (1,)
    # the embedded image of the identity is the envelope unit
    c = env.source.coeffs_of(np.eye(2))
    img = np.einsum("t,tab->ab", c, env.compressed_basis)
    assert np.allclose(img, env.unit())


def test_envelope_generic_m5():
    rng = np.random.default_rng(42)
    x = validate_space([matcore.random_psd(rng, 5) for _ in range(3)])
    env = compute_envelope(x, seed=0)
    assert env.abstract_blocks == (5,)
    assert env.eliminations() == 0


def test_envelope_rejects_nonspanning_cone():
    x = validate_space([np.array([[0, 1], [1, 0]], dtype=complex)])
    with pytest.raises(ConeDoesNotSpan):
        compute_envelope(x, seed=0)


def test_envelope_idempotence():
    rng = np.random.default_rng(5)
    gens = loose_instance(rng, a=3, b=2)
    env = compute_envelope(validate_space(gens), seed=1)
    again = compute_envelope(env.compressed_space(), seed=2)
    assert again.abstract_blocks == env.abstract_blocks
    assert again.eliminations() == 0


def test_order_independence_and_isomorphism():
    rng = np.random.default_rng(8)
    gens = loose_instance(rng, a=3, b=2, extra_blocks=1)
    x = validate_space(gens)
    env1 = compute_envelope(x, seed=3)
    env2 = compute_envelope(x, seed=3, scan_order=SCAN_ASCENDING_RANK)
    assert env1.abstract_blocks == env2.abstract_blocks
    iso = induced_isomorphism(env1, env2, np.eye(x.dim))
    assert iso.found
    assert iso.residual <= 1e-6


def test_per_elimination_norm_conservation():
    rng = np.random.default_rng(11)
    gens = loose_instance(rng, a=3, b=2)
    x = validate_space(gens)
    env = compute_envelope(x, seed=0)
    assert env.eliminations() >= 1
    for k in (1, 2, 3):
        for _ in range(30):
            c = matcore.random_complex(rng, (k, k, x.dim))
            y = amplify(c, x.basis)
            ye = amplify(c, env.embedded_basis)
            assert abs(op_norm(y) - op_norm(ye)) <= 1e-7 * max(1.0, op_norm(y))


def test_quotient_onto_envelope_is_star_homomorphism():
    rng = np.random.default_rng(13)
    gens = loose_instance(rng, a=2, b=2)
    x = validate_space(gens)
    env = compute_envelope(x, seed=0)
    alg = stargen.generate_star_algebra(x)
    q = env.q

    def compress(m):
        return env.coords.conj().T @ m @ env.coords

    for a in alg.basis[:6]:
        for b in alg.basis[:6]:
            lhs = compress(a @ b)
            rhs = compress(a) @ compress(b)
            assert np.abs(lhs - rhs).max() <= 1e-8
        assert np.abs(compress(a.conj().T) - compress(a).conj().T).max() <= 1e-10
    # surjectivity: compressed algebra basis images span the envelope algebra
    comp = np.stack([compress(a) for a in alg.basis])
    for b in env.algebra.basis:
        assert matcore.span_residual(stargen.matcore.orthonormalize(comp)[0], b) <= 1e-8


def test_induced_isomorphism_unitary_conjugation():
    rng = np.random.default_rng(17)
    gens = loose_instance(rng, a=3, b=1)
    x = validate_space(gens)
    env1 = compute_envelope(x, seed=5)
    u = random_unitary(rng, gens[0].shape[0])
    gens2 = [u @ g @ u.conj().T for g in gens]
    x2 = validate_space(gens2)
    env2 = compute_envelope(x2, seed=9)
    t = np.empty((x2.dim, x.dim), dtype=complex)
    for i in range(x.dim):
        t[:, i] = x2.coeffs_of(u @ x.basis[i] @ u.conj().T)
    iso = induced_isomorphism(env1, env2, t)
    assert iso.found
    assert iso.residual <= 1e-6
    assert sorted(env1.abstract_blocks) == sorted(env2.abstract_blocks)


def test_induced_isomorphism_identity():
    rng = np.random.default_rng(19)
    x = validate_space([matcore.random_psd(rng, 3) for _ in range(2)])
    env = compute_envelope(x, seed=0)
    iso = induced_isomorphism(env, env, np.eye(x.dim))
    assert iso.found
    assert iso.residual <= 1e-8


def test_induced_isomorphism_block_mismatch():
    rng = np.random.default_rng(23)
    x1 = validate_space([matcore.random_psd(rng, 3) for _ in range(3)])
    env1 = compute_envelope(x1, seed=0)
    x2 = _diag_space([1, 0, 0.75], [0, 1, 0.75])
    env2 = compute_envelope(x2, seed=0)
    # dimensions happen to differ; a zero map suffices to reach the check
    t = np.zeros((x2.dim, x1.dim))
    iso = induced_isomorphism(env1, env2, t)
    assert not iso.found
    assert "block" in iso.reason


def test_unitization_morphism_is_cp():
    x = _diag_space([1, 0, 0.5], [0, 1, 0.5])
    env = compute_envelope(x, seed=0)
    um = unitization_morphism(x, env, seed=1)
    assert um.choi_positive
    assert um.sampled_positive
    assert um.unital_residual <= 1e-10


def test_unitization_morphism_identity_case():
    rng = np.random.default_rng(29)
    x = validate_space([matcore.random_psd(rng, 4) for _ in range(3)])
    env = compute_envelope(x, seed=0)
    assert env.eliminations() == 0
    um = unitization_morphism(x, env, seed=1)
    assert um.is_completely_positive
