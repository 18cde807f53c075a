"""Function spaces on a finite point set: the commutative specialization.

For X a conjugation-closed subspace of functions on K = {1..m} whose
pointwise-nonnegative cone spans it, the boundary is computed by the same
recipe as the matrix pipeline, but with linear programs: merge points that
X does not separate, drop points where everything vanishes, then remove
points one at a time whenever the sup of |f(k)| over the unit ball taken
on the other points stays at most 1.

The LP route (scipy's HiGHS) is deliberately independent of the matrix
SDP route; :func:`crosscheck_diagonal` embeds the space as diagonal
matrices, runs the envelope pipeline, and compares the surviving blocks
point by point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ncshilov import envelope as envelope_mod
from ncshilov import matcore, stargen
from ncshilov.errors import ConeDoesNotSpan, InconclusiveAtTolerance, ShapeMismatch, ZeroSpace

PHASE_GRID = 64
DECISION_BAND = 1e-6


@dataclass
class FunctionSpace:
    """A conjugation-closed subspace of functions on m points, given by an
    orthonormal basis of complex m-vectors."""

    points: int
    basis: np.ndarray  # (d, m) orthonormal rows
    is_real: bool = False

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def real_basis(self) -> np.ndarray:
        """Real-ON basis of the real-valued part (dimension = dim for a
        conjugation-closed space)."""
        cands = np.concatenate([self.basis.real, self.basis.imag], axis=0)
        _, s, vh = np.linalg.svd(cands, full_matrices=False)
        rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
        return vh[:rank]


def validate_function_space(generators) -> FunctionSpace:
    """Orthonormalize the span of the generators with their conjugates."""
    gens = np.asarray(generators, dtype=np.complex128)
    if gens.ndim != 2:
        raise ShapeMismatch("expected a list of vectors")
    if not np.all(np.isfinite(gens.real)) or not np.all(np.isfinite(gens.imag)):
        raise ShapeMismatch("generators contain NaN or Inf")
    if np.abs(gens).max(initial=0.0) < 1e-12:
        raise ZeroSpace("all generators are numerically zero")
    stack = np.concatenate([gens, gens.conj()], axis=0)
    _, s, vh = np.linalg.svd(stack, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    basis = vh[:rank]
    is_real = bool(np.abs(basis.imag).max(initial=0.0) < 1e-12
                   and np.abs(gens.imag).max(initial=0.0) < 1e-12)
    return FunctionSpace(points=gens.shape[1], basis=basis, is_real=is_real)


def _cone_spans_functions(fs: FunctionSpace, tol: float = 1e-9) -> bool:
    """span(X ∩ pointwise-nonnegative) = X, decided by LPs over the
    real-valued part (nonnegative functions are real-valued)."""
    rb = fs.real_basis()
    d = rb.shape[0]
    if d < fs.dim:
        return False
    found: list[np.ndarray] = []
    while len(found) < d:
        comp = _real_complement(rb, found)
        if comp.shape[0] == 0:
            break
        got = None
        for w in comp:
            for sign in (1.0, -1.0):
                f = _max_direction_nonneg(rb, sign * w)
                if f is not None and abs(np.dot(w, f)) > 1e-7:
                    got = f
                    break
            if got is not None:
                break
        if got is None:
            break
        found.append(got)
    return len(found) == d


def _real_complement(rb, found):
    if not found:
        return rb
    coords = rb @ np.asarray(found).T  # components of found in rb coordinates
    _, s, vh = np.linalg.svd(coords.T, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
    return vh[rank:] @ rb


def _max_direction_nonneg(rb, w):
    """Maximize <w, f> over f in span(rb), f >= 0 pointwise, sum f = 1."""
    d, m = rb.shape
    res = linprog(c=-(rb @ w), A_ub=-rb.T, b_ub=np.zeros(m),
                  A_eq=rb.sum(axis=1)[None, :], b_eq=[1.0],
                  bounds=[(None, None)] * d, method="highs")
    if not res.success:
        return None
    f = res.x @ rb
    return f if -res.fun > 1e-9 else None


@dataclass
class PointVerdict:
    point_class: tuple
    sup_value: float
    status: str  # "loose" | "essential" | "inconclusive"


@dataclass
class BoundaryResult:
    """Boundary of a function space on merged point classes.

    ``classes`` lists the separation classes of the original points (after
    merging unseparated ones and dropping common zeros); ``kept`` indexes
    the classes that survive point elimination; ``point_map`` sends each
    original point to its class index or None when the space vanishes
    there.  ``verdicts`` records every elimination decision in order."""

    classes: list[tuple]
    kept: list[int]
    point_map: list
    verdicts: list[PointVerdict] = field(default_factory=list)

    @property
    def boundary_points(self) -> list[tuple]:
        return [self.classes[i] for i in self.kept]


def boundary(fs: FunctionSpace, tol: float = 1e-7) -> BoundaryResult:
    """Shilov boundary of the space by LP point elimination."""
    if not _cone_spans_functions(fs):
        raise ConeDoesNotSpan("pointwise-nonnegative cone does not span the space")
    values = fs.basis.T  # (m, d): the value vector of the basis at each point
    m = fs.points
    # drop points where every function vanishes, then merge unseparated ones
    point_map: list = [None] * m
    classes: list[tuple] = []
    reps: list[np.ndarray] = []
    for p in range(m):
        v = values[p]
        if np.abs(v).max() < 1e-10:
            continue
        hit = None
        for ci, r in enumerate(reps):
            if np.abs(v - r).max() <= 1e-9 * max(1.0, np.abs(r).max()):
                hit = ci
                break
        if hit is None:
            reps.append(v)
            classes.append((p,))
            hit = len(classes) - 1
        else:
            classes[hit] = classes[hit] + (p,)
        point_map[p] = hit
    if not classes:
        raise ZeroSpace("space vanishes at every point")

    # collapsed space on the classes
    vals = np.stack(reps, axis=0)  # (n_classes, d)
    active = list(range(len(classes)))
    verdicts: list[PointVerdict] = []
    changed = True
    while changed and len(active) > 1:
        changed = False
        for idx in list(active):
            others = [c for c in active if c != idx]
            sup, status = _point_sup(fs, vals, idx, others, tol)
            verdicts.append(PointVerdict(point_class=classes[idx], sup_value=sup,
                                         status=status))
            if status == "inconclusive":
                raise InconclusiveAtTolerance(
                    f"point class {classes[idx]} marginal: sup = {sup:.9f}")
            if status == "loose":
                active.remove(idx)
                changed = True
                break
    return BoundaryResult(classes=classes, kept=active, point_map=point_map,
                          verdicts=verdicts)


def _point_sup(fs: FunctionSpace, vals, idx, others, tol):
    """sup{|f(idx)| : f in X, max over others |f| <= 1}.

    Real spans: two exact LPs.  Complex spans: a phase grid on both the
    objective and the constraint disks gives an upper bound (outer polygon)
    and a rescaled feasible point gives a lower bound; disagreement across
    the decision band is inconclusive."""
    if fs.is_real:
        obj_row = vals[idx].real  # f(idx) = coeffs . obj_row, real coefficients
        rows = np.stack([vals[o].real for o in others])
        best = 0.0
        for sign in (1.0, -1.0):
            res = linprog(c=-sign * obj_row,
                          A_ub=np.concatenate([rows, -rows]),
                          b_ub=np.ones(2 * len(others)),
                          bounds=[(None, None)] * fs.dim, method="highs")
            if res.success:
                best = max(best, -res.fun)
            elif res.status == 3:
                return np.inf, "essential"
        sup = best
        if sup <= 1.0 + tol:
            return sup, "loose"
        if sup > 1.0 + max(tol, DECISION_BAND):
            return sup, "essential"
        return sup, "inconclusive"

    # complex case: realify coefficients, phase-discretize moduli
    rows = np.stack([vals[o] for o in others])
    obj = vals[idx]
    d = fs.dim
    phases = np.exp(2j * np.pi * np.arange(PHASE_GRID) / PHASE_GRID)
    # constraint polygon: Re(conj(phase) f(o)) <= 1 for every phase
    a_ub = []
    for o in range(rows.shape[0]):
        for ph in phases:
            r = np.conj(ph) * rows[o]
            a_ub.append(np.concatenate([r.real, -r.imag]))
    a_ub = np.stack(a_ub)
    b_ub = np.ones(a_ub.shape[0])
    best_upper = 0.0
    best_vec = None
    for ph in phases:
        r = np.conj(ph) * obj
        c = -np.concatenate([r.real, -r.imag])
        res = linprog(c=c, A_ub=a_ub, b_ub=b_ub,
                      bounds=[(None, None)] * (2 * d), method="highs")
        if res.status == 3:
            return np.inf, "essential"
        if res.success and -res.fun > best_upper:
            best_upper = -res.fun
            best_vec = res.x
    # polygon outer-approximates the disks, so best_upper >= true sup;
    # rescale the optimizer into the true ball for the lower bound
    lower = 0.0
    if best_vec is not None:
        coeffs = best_vec[:d] + 1j * best_vec[d:]
        f_others = rows @ coeffs
        scale = max(1.0, float(np.abs(f_others).max(initial=0.0)))
        lower = float(abs(np.dot(obj, coeffs)) / scale)
    if best_upper <= 1.0 + tol:
        return best_upper, "loose"
    if lower > 1.0 + tol:
        return lower, "essential"
    return best_upper, "inconclusive"


def diagonal_embedding(fs: FunctionSpace) -> stargen.MatrixSpace:
    """The space as diagonal matrices in M_m."""
    gens = [np.diag(v) for v in fs.basis]
    return stargen.validate_space(gens)


def crosscheck_diagonal(fs: FunctionSpace, seed: int = 0, tol: float = 1e-7) -> dict:
    """Run the matrix pipeline on the diagonal embedding and compare with
    the LP boundary: surviving blocks must be size one and match the
    surviving point classes exactly."""
    lp = boundary(fs, tol=tol)
    x = diagonal_embedding(fs)
    env = envelope_mod.compute_envelope(x, seed=seed, tol=tol)
    all_size_one = all(k == 1 for k in env.abstract_blocks)
    # map each retained central projection to the set of original points
    # where it is supported
    retained_points = set()
    for blk in env.blocks.blocks:
        p_orig = env.coords @ blk.projection @ env.coords.conj().T
        diag = np.real(np.diagonal(p_orig))
        for i, val in enumerate(diag):
            if val > 0.5:
                retained_points.add(i)
    lp_points = set()
    for ci in lp.kept:
        lp_points.update(lp.classes[ci])
    return {
        "lp_boundary_classes": [tuple(lp.classes[i]) for i in lp.kept],
        "matrix_retained_points": sorted(retained_points),
        "lp_points": sorted(lp_points),
        "all_blocks_size_one": all_size_one,
        "matches": bool(all_size_one and retained_points == lp_points),
    }
