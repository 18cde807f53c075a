"""Loose-block elimination: the ordered noncommutative Shilov boundary.

Given a selfadjoint space X with spanning cone, the generated *-algebra B
decomposes into blocks B_i with minimal central projections p_i.  A block
is loose when cutting it changes no norm at any matrix level, i.e. the
compression X -> X(e - p_i) is injective and its inverse is completely
contractive.  Loose blocks are removed one at a time, re-deriving the
algebra and all verdicts after every removal, until none remain; what is
left is the C*-envelope with a certified completely isometric embedding.

The inverse map splits over the central projection as x = x p + x(e - p)
with orthogonal ranges, so its cb-norm is max(1, cb-norm of the completion
map X(e - p) -> X p); only the completion is tested, against the
multiplicity-stripped copy of the block, which keeps Choi variables small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ncshilov import blockdecomp, conesolver, matcore, stargen
from ncshilov.conesolver import CC_NO, CC_YES, LinearMapSpec
from ncshilov.errors import InconclusiveAtTolerance, NumericallyAmbiguous, ShapeMismatch
from ncshilov.matcore import amplify, op_norm, orthonormalize, span_residual
from ncshilov.stargen import AlgebraPresentation, MatrixSpace

LOOSE = "loose"
ESSENTIAL = "essential"
MARGINAL = "marginal"

SCAN_DESCENDING_RANK = "descending_rank"
SCAN_ASCENDING_RANK = "ascending_rank"


@dataclass
class LoosenessVerdict:
    status: str
    block_rank: int
    block_k: int
    reason: str = ""
    cb_estimate: float | None = None
    witness_level: int | None = None
    witness_coeffs: np.ndarray | None = None
    witness_gap: float | None = None


@dataclass
class EliminationStep:
    """One recorded decision: which block was examined during which pass,
    with the verdict and its certificate data."""

    pass_index: int
    block_index: int
    verdict: LoosenessVerdict
    removed: bool


@dataclass
class EnvelopePresentation:
    """The computed C*-envelope of a matrix space.

    ``source`` is the validated input space in the original ambient M_n.
    ``q`` is the sum of retained minimal central projections in original
    coordinates; the embedding is x -> x q.  ``coords`` holds orthonormal
    columns spanning range(q), so compressed working matrices are
    coords* M coords.  ``embedded_basis`` are the images x_t q in original
    coordinates, ``compressed_basis`` the same in range(q) coordinates, and
    ``algebra`` is the compressed envelope algebra with its block data.
    """

    source: MatrixSpace
    q: np.ndarray
    coords: np.ndarray
    embedded_basis: np.ndarray
    compressed_basis: np.ndarray
    algebra: AlgebraPresentation
    blocks: blockdecomp.BlockDecomposition
    source_unit: np.ndarray | None = None
    trace: list[EliminationStep] = field(default_factory=list)
    embedding_cb: float = 1.0
    embedding_residual: float = 0.0
    seed: int = 0
    tol: float = 1e-7

    @property
    def abstract_blocks(self) -> tuple[int, ...]:
        return self.blocks.abstract_blocks

    @property
    def block_sizes(self) -> list[tuple[int, int]]:
        return self.blocks.block_sizes

    @property
    def envelope_dim(self) -> int:
        return self.coords.shape[1]

    def unit(self) -> np.ndarray:
        """The envelope unit in compressed coordinates (the identity)."""
        return np.eye(self.envelope_dim, dtype=np.complex128)

    def compressed_space(self) -> MatrixSpace:
        """The embedded copy as a fresh space (basis re-orthonormalized;
        index alignment with the source basis is lost, use compressed_basis
        when alignment matters)."""
        basis, _ = orthonormalize(self.compressed_basis)
        return MatrixSpace(ambient_dim=self.envelope_dim, basis=basis)

    def eliminations(self) -> int:
        return sum(1 for s in self.trace if s.removed)


def _completion_map(space_basis, keep_proj, block: blockdecomp.BlockInfo):
    """The completion map X(e - p) -> stripped block copy.

    Returns (LinearMapSpec | None, kept_coords, kernel_coeffs); when the
    compression x -> x(e - p) is not injective on the space, the map is not
    built and a unit kernel coefficient vector is returned instead."""
    w, u = matcore.herm_eig(keep_proj)
    rank = int(np.sum(w > 0.5))
    kept = u[:, :rank]
    compressed = np.einsum("ia,tab,bj->tij", kept.conj().T, space_basis, kept)
    d = space_basis.shape[0]
    flat = compressed.reshape(d, -1)
    svals = np.linalg.svd(flat, compute_uv=False)
    rank = int(np.sum(svals > 1e-9 * max(float(svals[0]) if svals.size else 0.0, 1.0)))
    if rank < d:
        _, _, vh = np.linalg.svd(flat.T, full_matrices=True)
        return None, kept, vh[rank].conj()
    images = np.stack([block.strip(b) for b in space_basis])
    return LinearMapSpec(list(compressed), list(images)), kept, None


def is_block_loose(x: MatrixSpace, alg: AlgebraPresentation,
                   block: blockdecomp.BlockInfo, tol: float = 1e-7,
                   rng_seed: int = 0) -> LoosenessVerdict:
    """Loose / Essential / Marginal for one minimal central block.

    Loose requires the compression x -> x(e - p) injective on X and the
    completion map back onto the block completely contractive.  Essential
    verdicts carry either a kernel witness or a level-k element whose norm
    drops under the compression (gap re-verified numerically)."""
    p = block.projection
    keep = alg.unit - p
    keep_rank = int(round(float(np.real(np.trace(keep)))))
    if keep_rank == 0:
        return LoosenessVerdict(status=ESSENTIAL, block_rank=block.rank, block_k=block.k,
                                reason="compression to zero is not injective")
    lam, kept, kernel = _completion_map(x.basis, keep, block)
    if lam is None:
        coeffs = kernel.reshape(1, 1, -1)
        gap = _witness_gap(x, keep, coeffs)
        return LoosenessVerdict(status=ESSENTIAL, block_rank=block.rank, block_k=block.k,
                                reason="compression has a kernel",
                                witness_level=1, witness_coeffs=coeffs, witness_gap=gap)
    res = conesolver.cc_test(lam, tol=tol, rng_seed=rng_seed)
    if res.verdict == CC_YES:
        return LoosenessVerdict(status=LOOSE, block_rank=block.rank, block_k=block.k,
                                reason=res.diagnostics, cb_estimate=res.cb_estimate)
    if res.verdict == CC_NO:
        coeffs = np.einsum("ijt,ts->ijs", res.violating_coeffs,
                           _domain_to_space(lam, x, kept))
        gap = _witness_gap(x, keep, coeffs)
        return LoosenessVerdict(status=ESSENTIAL, block_rank=block.rank, block_k=block.k,
                                reason="norm violation under compression",
                                cb_estimate=res.cb_estimate,
                                witness_level=res.level, witness_coeffs=coeffs,
                                witness_gap=gap)
    return LoosenessVerdict(status=MARGINAL, block_rank=block.rank, block_k=block.k,
                            reason=res.diagnostics, cb_estimate=res.cb_estimate)


def _domain_to_space(lam: LinearMapSpec, x: MatrixSpace, kept):
    """Matrix sending coefficients over lam's ON domain basis to coefficients
    over x.basis (exact here, since the compression is injective)."""
    d = x.dim
    compressed = np.einsum("ia,tab,bj->tij", kept.conj().T, x.basis, kept)
    flat = compressed.reshape(d, -1).T
    on_flat = lam.on_domain.reshape(lam.dim, -1).T
    sol, *_ = np.linalg.lstsq(flat, on_flat, rcond=None)
    return sol.T  # (lam.dim, d)


def _witness_gap(x: MatrixSpace, keep_proj, coeffs) -> float:
    """||y|| - ||y (1 ⊗ keep)|| for a level-k coefficient tensor over X."""
    y = amplify(coeffs, x.basis)
    k = coeffs.shape[0]
    return op_norm(y) - op_norm(y @ np.kron(np.eye(coeffs.shape[0]), keep_proj))


def compute_envelope(x: MatrixSpace, seed: int = 0, tol: float = 1e-7,
                     scan_order: str = SCAN_DESCENDING_RANK,
                     require_spanning: bool = True) -> EnvelopePresentation:
    """Block elimination until no loose block remains.

    Removes one loose block per pass and recomputes the algebra, the block
    decomposition and every verdict from scratch, since looseness is not
    stable under removals.  Raises ConeDoesNotSpan when the positive cone
    does not span (the recipe's hypothesis) and InconclusiveAtTolerance
    when some block's verdict is Marginal at the working tolerance."""
    if require_spanning:
        stargen.require_spanning_cone(x, tol=tol, seed=seed)
    n = x.ambient_dim
    coords = np.eye(n, dtype=np.complex128)
    basis = x.basis.copy()
    trace: list[EliminationStep] = []
    source_unit = None
    pass_index = 0
    rng = np.random.default_rng(seed)
    while True:
        alg = stargen.generate_star_algebra(basis)
        if source_unit is None:
            source_unit = alg.unit.copy()
        dec = blockdecomp.decompose(alg, seed=seed + 977 * (pass_index + 1))
        order = sorted(range(len(dec.blocks)), key=lambda i: (-dec.blocks[i].rank, i))
        if scan_order == SCAN_ASCENDING_RANK:
            order = order[::-1]
        removed = None
        working = MatrixSpace(ambient_dim=basis.shape[1], basis=basis)
        for bi in order:
            block = dec.blocks[bi]
            verdict = is_block_loose(working, alg, block, tol=tol,
                                     rng_seed=int(rng.integers(2**31)))
            if verdict.status == MARGINAL:
                raise InconclusiveAtTolerance(
                    f"looseness of block {bi} (rank {block.rank}) is marginal: "
                    f"{verdict.reason}", block_index=bi)
            remove_now = verdict.status == LOOSE
            trace.append(EliminationStep(pass_index=pass_index, block_index=bi,
                                         verdict=verdict, removed=remove_now))
            if remove_now:
                removed = block
                break
        if removed is None:
            break
        keep = alg.unit - removed.projection
        w, u = matcore.herm_eig(keep)
        rank = int(np.sum(w > 0.5))
        kept = u[:, :rank]
        basis, _ = orthonormalize(np.einsum("ia,tab,bj->tij", kept.conj().T, basis, kept))
        coords = coords @ kept
        pass_index += 1

    alg = stargen.generate_star_algebra(basis)
    # restrict to the support of the final algebra so the envelope unit is
    # the identity of the compressed ambient
    e = alg.unit
    if np.abs(e - np.eye(e.shape[0])).max() > 1e-9:
        w, u = matcore.herm_eig(e)
        rank = int(np.sum(w > 0.5))
        kept = u[:, :rank]
        basis, _ = orthonormalize(np.einsum("ia,tab,bj->tij", kept.conj().T, basis, kept))
        coords = coords @ kept
        alg = stargen.generate_star_algebra(basis)
    dec = blockdecomp.decompose(alg, seed=seed + 977 * (pass_index + 2))

    q = matcore.hermitize(coords @ coords.conj().T)
    embedded = np.einsum("tab,bc->tac", x.basis, q)
    compressed = np.einsum("ia,tab,bj->tij", coords.conj().T, x.basis, coords)
    env = EnvelopePresentation(source=x, q=q, coords=coords,
                               embedded_basis=embedded, compressed_basis=compressed,
                               algebra=alg, blocks=dec, source_unit=source_unit,
                               trace=trace, seed=seed, tol=tol)
    _certify_inverse(env, tol)
    _check_generation(env)
    return env


def _certify_inverse(env: EnvelopePresentation, tol):
    """Certify that the inverse of x -> xq is completely contractive.

    With nothing eliminated the inverse is the identity; otherwise the
    completion map X q -> X(e - q) must pass the cc oracle."""
    cut = matcore.hermitize(env.source_unit - env.q)
    cut_rank = int(round(float(np.real(np.trace(cut)))))
    if cut_rank == 0:
        env.embedding_cb = 1.0
        return
    w, u = matcore.herm_eig(cut)
    cutc = u[:, :cut_rank]
    dom = list(env.compressed_basis)
    imgs = [cutc.conj().T @ b @ cutc for b in env.source.basis]
    res = conesolver.cc_test(LinearMapSpec(dom, imgs), tol=tol, rng_seed=env.seed + 7)
    if res.verdict != CC_YES:
        raise InconclusiveAtTolerance(
            f"final embedding certificate failed: {res.verdict} ({res.diagnostics})")
    env.embedding_cb = max(1.0, res.cb_estimate)
    env.embedding_residual = res.residual


def _check_generation(env: EnvelopePresentation, tol: float = 1e-8):
    """The embedded copy must generate the envelope algebra: no proper
    sub-TRO of the envelope contains it."""
    gen = stargen.generate_star_algebra(env.compressed_basis)
    if gen.dim != env.algebra.dim:
        raise NumericallyAmbiguous(
            f"embedded copy generates dimension {gen.dim} != envelope {env.algebra.dim}")
    worst = max(span_residual(env.algebra.basis, b) for b in gen.basis)
    if worst > tol:
        raise NumericallyAmbiguous(f"generated algebra mismatch residual {worst:.2e}")


def certify_embedding(env: EnvelopePresentation, levels: int = 4,
                      samples: int = 500, seed: int = 0) -> dict:
    """Sampled norm-preservation report for the embedding x -> xq.

    Compares ||y|| with ||y (1 ⊗ q)|| on random level-k elements for
    k = 1..levels; the maximum relative discrepancy must stay below 1e-6."""
    rng = np.random.default_rng(seed)
    d = env.source.dim
    worst = 0.0
    for k in range(1, levels + 1):
        for _ in range(samples):
            c = matcore.random_complex(rng, (k, k, d))
            y = amplify(c, env.source.basis)
            ye = amplify(c, env.embedded_basis)
            ny = op_norm(y)
            if ny < 1e-12:
                continue
            worst = max(worst, abs(ny - op_norm(ye)) / ny)
    return {
        "levels": levels,
        "samples_per_level": samples,
        "max_relative_discrepancy": worst,
        "passed": worst <= 1e-6,
    }


# ---------------------------------------------------------------------------
# Universal-property morphisms
# ---------------------------------------------------------------------------


@dataclass
class IsomorphismResult:
    found: bool
    matrix: np.ndarray | None = None  # algebra coefficients, env_a -> env_b
    block_map: list[tuple[int, int]] | None = None
    residual: float = np.inf
    reason: str = ""


def induced_isomorphism(env_a: EnvelopePresentation, env_b: EnvelopePresentation,
                        correspondence) -> IsomorphismResult:
    """Extend a complete isometry between the source copies of X to a
    *-isomorphism of the two envelope algebras.

    ``correspondence`` maps coefficient vectors over env_a.source.basis to
    coefficient vectors over env_b.source.basis; the caller asserts it is a
    completely positive surjective complete isometry (norm preservation is
    spot-checked at levels 1..2).  The isomorphism is built on word pairs
    from the generating copies and verified multiplicative, *-preserving
    and unital."""
    t = np.asarray(correspondence, dtype=np.complex128)
    if t.shape != (env_b.source.dim, env_a.source.dim):
        raise ShapeMismatch("correspondence shape does not match source dimensions")
    if env_a.abstract_blocks != env_b.abstract_blocks:
        return IsomorphismResult(found=False, reason="abstract block multisets differ")
    rng = np.random.default_rng(11)
    for k in (1, 2):
        for _ in range(8):
            c = matcore.random_complex(rng, (k, k, env_a.source.dim))
            ya = amplify(c, env_a.source.basis)
            yb = amplify(np.einsum("st,ijt->ijs", t, c), env_b.source.basis)
            na, nb = op_norm(ya), op_norm(yb)
            if na > 1e-9 and abs(na - nb) / na > 1e-6:
                return IsomorphismResult(
                    found=False,
                    reason=f"correspondence not isometric at level {k}: "
                           f"{na:.8f} vs {nb:.8f}")

    pairs = [(env_a.compressed_basis[i],
              np.einsum("s,sab->ab", t[:, i], env_b.compressed_basis))
             for i in range(env_a.source.dim)]
    dim_goal = env_a.algebra.dim
    frontier = list(pairs)
    for _ in range(dim_goal + 2):
        flat = np.stack([p[0] for p in pairs]).reshape(len(pairs), -1)
        if np.linalg.matrix_rank(flat, tol=1e-9) >= dim_goal:
            break
        new = []
        for a1, b1 in frontier:
            new.append((a1.conj().T, b1.conj().T))
            for a2, b2 in pairs:
                new.append((a1 @ a2, b1 @ b2))
        pairs.extend(new)
        frontier = new
        if len(pairs) > 4000:
            break

    flat_a = np.stack([p[0] for p in pairs]).reshape(len(pairs), -1)
    flat_b = np.stack([p[1] for p in pairs]).reshape(len(pairs), -1)
    ca = flat_a @ env_a.algebra.basis.reshape(env_a.algebra.dim, -1).conj().T
    cb = flat_b @ env_b.algebra.basis.reshape(env_b.algebra.dim, -1).conj().T
    sol, _res, rank, _sv = np.linalg.lstsq(ca, cb, rcond=None)
    if rank < env_a.algebra.dim:
        return IsomorphismResult(found=False,
                                 reason=f"intertwiner system rank {rank} < {env_a.algebra.dim}")
    pi = sol.T
    fit = float(np.abs(ca @ sol - cb).max())
    verify = _verify_star_isomorphism(env_a.algebra, env_b.algebra, pi)
    residual = max(fit, verify)
    if residual > 1e-6:
        return IsomorphismResult(found=False, matrix=pi, residual=residual,
                                 reason=f"verification residual {residual:.2e}")
    return IsomorphismResult(found=True, matrix=pi,
                             block_map=_match_blocks(env_a, env_b, pi),
                             residual=residual)


def _verify_star_isomorphism(alg_a, alg_b, pi) -> float:
    """Residual of multiplicativity, *-preservation and unitality."""
    nb = alg_b.ambient_dim
    flat_b = alg_b.basis.reshape(alg_b.dim, -1)

    def img(m):
        c = np.einsum("tab,ab->t", alg_a.basis.conj(), np.asarray(m))
        return (np.einsum("st,t->s", pi, c) @ flat_b).reshape(nb, nb)

    imgs = [img(b) for b in alg_a.basis]
    worst = 0.0
    for i, bi in enumerate(alg_a.basis):
        worst = max(worst, float(np.abs(img(bi.conj().T) - imgs[i].conj().T).max()))
        for j, bj in enumerate(alg_a.basis):
            worst = max(worst, float(np.abs(img(bi @ bj) - imgs[i] @ imgs[j]).max()))
    worst = max(worst, float(np.abs(img(alg_a.unit) - alg_b.unit).max()))
    return worst


def _match_blocks(env_a, env_b, pi) -> list[tuple[int, int]]:
    """Pair the blocks through pi by trace overlap of projection images."""
    out = []
    nb = env_b.algebra.ambient_dim
    flat_b = env_b.algebra.basis.reshape(env_b.algebra.dim, -1)
    for i, blk in enumerate(env_a.blocks.blocks):
        c = np.einsum("tab,ab->t", env_a.algebra.basis.conj(), blk.projection)
        image = (np.einsum("st,t->s", pi, c) @ flat_b).reshape(nb, nb)
        overlaps = [float(np.real(np.trace(image @ b.projection)))
                    for b in env_b.blocks.blocks]
        out.append((i, int(np.argmax(overlaps))))
    return out


@dataclass
class UnitizationMorphism:
    """Verification data of the unital map span{X, I_n} -> span{j(X), q},
    lambda I + v  ->  lambda q + v q."""

    choi_positive: bool
    choi_min_eig: float
    sampled_positive: bool
    unital_residual: float

    @property
    def is_completely_positive(self) -> bool:
        return self.choi_positive and self.sampled_positive


def unitization_morphism(x: MatrixSpace, env: EnvelopePresentation,
                         seed: int = 0) -> UnitizationMorphism:
    """Verify the canonical unital completely positive map onto the
    envelope copy.

    The map is compression by q of the inclusion of span{B, I_n}, which is
    a *-algebra, so complete positivity is certified exactly by the PSD
    test of the block matrix [Psi(a_r* a_s)]_{rs} over an orthonormal basis
    of that algebra; sampled positivity at levels 1..2 cross-checks."""
    n = x.ambient_dim
    alg = stargen.generate_star_algebra(x)
    with_unit, _ = orthonormalize(
        np.concatenate([alg.basis, [np.eye(n, dtype=np.complex128)]]))
    d = with_unit.shape[0]
    nq = env.envelope_dim
    v = env.coords

    big = np.zeros((d * nq, d * nq), dtype=np.complex128)
    for r in range(d):
        for s in range(d):
            blockm = v.conj().T @ (with_unit[r].conj().T @ with_unit[s]) @ v
            big[r * nq : (r + 1) * nq, s * nq : (s + 1) * nq] = blockm
    chk = matcore.psd_check(matcore.hermitize(big, rtol=1e-8), tol=1e-8)

    rng = np.random.default_rng(seed)
    ok = True
    for k in (1, 2):
        for _ in range(20):
            c = matcore.random_complex(rng, (k, k, d))
            w = amplify(c, with_unit)
            pos = w.conj().T @ w
            vk = np.kron(np.eye(k), v)
            image = vk.conj().T @ pos @ vk
            r = matcore.psd_check(matcore.hermitize(image, rtol=1e-7),
                                  tol=1e-7 * max(1.0, op_norm(pos)))
            ok = ok and r.positive
    unital = float(np.abs(v.conj().T @ np.eye(n) @ v - env.unit()).max())
    return UnitizationMorphism(choi_positive=chk.positive, choi_min_eig=chk.min_eig,
                               sampled_positive=ok, unital_residual=unital)
