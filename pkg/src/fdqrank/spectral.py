"""Numerical spectral analysis of the evaluated Jacobian.

The Jacobian entry (i, j) evaluated at a representation is the operator
T -> sum c a(X) T b(X) on D x D matrices.  Stacking the k x n blocks gives a
(k D^2) x (n D^2) complex matrix J.  Everything here is normalized by D^2 so
that ranks land in [0, n].

Two routes produce the singular values of J:

* ``singular_values(assemble(...))``: dense SVD of the full matrix, the
  reference path.
* ``structured_singular_values``: splits J into independent row/column
  components and, when the generators touching a component commute,
  conjugates all of them to diagonal form at once.  In that basis each
  operator a T b acts entrywise, so J breaks into D^2 small k x n blocks.
  Both routes return the same multiset up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ComputationError, ResourceError, UsageError
from .grouprel import Jacobian, RelationSystem
from .ncalg import TensorPoly
from .repkit import Evaluator, Representation

__all__ = [
    "CONFIG",
    "EvaluatedJacobian",
    "RankEstimate",
    "SpectralReport",
    "BettiEstimate",
    "assemble",
    "singular_values",
    "structured_singular_values",
    "jacobian_singular_values",
    "lambda_grid",
    "rank_estimate",
    "betti_estimate",
    "fk_logdet",
    "tail_diagnostic",
    "mu_histogram",
    "spectral_report",
    "perturbation_probe",
    "commutator_identity_defect",
]

CONFIG = {
    "grid_decades": 10,  # lambda grid 1e-1 .. 1e-10 times sigma_max^2
    "max_dim": 64,  # largest D accepted
    "max_dense_entries": 4 * 10**7,  # cap on entries of a dense J block
    "commute_tol": 1e-12,
    "diag_tol": 1e-9,
    "hist_bins": 40,
    "beta_tol": 1e-6,
}


@dataclass(frozen=True)
class EvaluatedJacobian:
    k: int
    n: int
    D: int
    J: np.ndarray = field(repr=False)


def _check_dim(rep: Representation):
    if rep.D > CONFIG["max_dim"]:
        raise ResourceError(f"representation dimension {rep.D} exceeds cap D <= {CONFIG['max_dim']}")


def assemble(jac: Jacobian, rep: Representation, order: str = "C") -> EvaluatedJacobian:
    if jac.n != rep.n:
        raise UsageError(f"Jacobian has n={jac.n} but representation gives n={rep.n}")
    _check_dim(rep)
    D2 = rep.D**2
    entries = jac.k * jac.n * D2 * D2
    if entries > CONFIG["max_dense_entries"]:
        raise ResourceError(
            f"dense Jacobian needs {entries} complex entries "
            f"({entries * 16 / 2**30:.2f} GiB); cap is {CONFIG['max_dense_entries']}"
        )
    ev = Evaluator(rep)
    J = np.zeros((jac.k * D2, jac.n * D2), dtype=complex)
    for i, j, tp in jac.nonzero():
        J[i * D2 : (i + 1) * D2, j * D2 : (j + 1) * D2] = ev.tensor(tp, order)
    return EvaluatedJacobian(jac.k, jac.n, rep.D, J)


def _svdvals(mat: np.ndarray) -> np.ndarray:
    if mat.size == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(mat, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"SVD failed: {exc}") from exc


def singular_values(ej: EvaluatedJacobian) -> np.ndarray:
    """Descending singular values of the dense Jacobian."""
    return _svdvals(ej.J)


def _components(jac: Jacobian):
    """Connected components of the row/column incidence graph."""
    parent = list(range(jac.k + jac.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in jac.nonzero():
        ri, rj = find(i), find(jac.k + j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict = {}
    for i, j, _ in jac.nonzero():
        rows, cols = groups.setdefault(find(i), (set(), set()))
        rows.add(i)
        cols.add(j)
    return [(sorted(r), sorted(c)) for _, (r, c) in sorted(groups.items())]


def _generators_of(jac: Jacobian, rows, cols, m: int) -> list:
    used = set()
    for i in rows:
        for j in cols:
            used.add((j % m) + 1)
            for (a, b), _ in jac[i, j]:
                used.update(((v - 1) % m) + 1 for v in a + b)
    return sorted(used)


def _joint_diagonalize(unitaries):
    """Unitary V with V^* U V diagonal for every U, or None."""
    D = unitaries[0].shape[0]
    tol = CONFIG["commute_tol"]
    for x in range(len(unitaries)):
        for y in range(x + 1, len(unitaries)):
            a, b = unitaries[x], unitaries[y]
            if np.max(np.abs(a @ b - b @ a)) > tol:
                return None
    # generic combination separates joint eigenspaces
    weights = [complex(math.cos(1.0 + 0.7548776662 * g), math.sin(1.0 + 0.5698402910 * g)) * (1 + g / math.pi)
               for g in range(len(unitaries))]
    Z = sum(w * u for w, u in zip(weights, unitaries))
    try:
        _, V = scipy.linalg.schur(Z, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ComputationError(f"Schur decomposition failed: {exc}") from exc
    diags = []
    for u in unitaries:
        d = V.conj().T @ u @ V
        off = d - np.diag(np.diag(d))
        if D > 1 and np.max(np.abs(off)) > CONFIG["diag_tol"]:
            return None
        diags.append(np.diag(d).copy())
    return diags


def _blockwise_svals(jac: Jacobian, rows, cols, rep: Representation, eig: dict) -> np.ndarray:
    """Singular values of a commuting component from its D^2 small blocks."""
    m, D = rep.m, rep.D
    var_eigs = {}
    for g, lam in eig.items():
        var_eigs[g] = lam + lam.conj()
        var_eigs[m + g] = 1j * (lam - lam.conj())
    cache = {(): np.ones(D, dtype=complex)}

    def mono(word):
        hit = cache.get(word)
        if hit is None:
            hit = mono(word[:-1]) * var_eigs[word[-1]]
            cache[word] = hit
        return hit

    blocks = np.zeros((D, D, len(rows), len(cols)), dtype=complex)
    for r, i in enumerate(rows):
        for c, j in enumerate(cols):
            for (a, b), coeff in jac[i, j]:
                blocks[:, :, r, c] += complex(coeff) * np.multiply.outer(mono(a), mono(b))
    blocks = blocks.reshape(D * D, len(rows), len(cols))
    try:
        sv = np.linalg.svd(blocks, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"block SVD failed: {exc}") from exc
    return sv.ravel()


def structured_singular_values(jac: Jacobian, rep: Representation) -> np.ndarray:
    """Singular values of J via component splitting and joint diagonalization.

    Components whose generators do not commute fall back to a dense SVD of
    that component alone.
    """
    if jac.n != rep.n:
        raise UsageError(f"Jacobian has n={jac.n} but representation gives n={rep.n}")
    _check_dim(rep)
    D2 = rep.D**2
    parts = []
    ev = None
    for rows, cols in _components(jac):
        gens = _generators_of(jac, rows, cols, rep.m)
        diags = _joint_diagonalize([rep.unitaries[g - 1] for g in gens])
        if diags is not None:
            parts.append(_blockwise_svals(jac, rows, cols, rep, dict(zip(gens, diags))))
            continue
        entries = len(rows) * len(cols) * D2 * D2
        if entries > CONFIG["max_dense_entries"]:
            raise ResourceError(
                f"dense component needs {entries} complex entries "
                f"({entries * 16 / 2**30:.2f} GiB); cap is {CONFIG['max_dense_entries']}"
            )
        ev = ev or Evaluator(rep)
        block = np.zeros((len(rows) * D2, len(cols) * D2), dtype=complex)
        for r, i in enumerate(rows):
            for c, j in enumerate(cols):
                tp = jac[i, j]
                if not tp.is_zero():
                    block[r * D2 : (r + 1) * D2, c * D2 : (c + 1) * D2] = ev.tensor(tp)
        parts.append(_svdvals(block))
    total = min(jac.k, jac.n) * D2
    sv = np.concatenate(parts) if parts else np.zeros(0)
    sv = np.sort(sv)[::-1]
    if len(sv) < total:
        sv = np.concatenate([sv, np.zeros(total - len(sv))])
    return sv[:total]


def jacobian_singular_values(jac: Jacobian, rep: Representation, method: str = "auto") -> np.ndarray:
    if method == "dense":
        return singular_values(assemble(jac, rep))
    if method in ("auto", "structured"):
        return structured_singular_values(jac, rep)
    raise UsageError(f"unknown SVD method {method!r}")


def q_spectrum(svals: np.ndarray, n: int, D: int) -> np.ndarray:
    """Eigenvalues of Q = J^* J: squared singular values padded to n D^2."""
    q = np.asarray(svals, dtype=float) ** 2
    total = n * D * D
    if len(q) < total:
        q = np.concatenate([q, np.zeros(total - len(q))])
    return q


def lambda_grid(sigma2_max: float, decades: int | None = None) -> np.ndarray:
    decades = CONFIG["grid_decades"] if decades is None else decades
    return sigma2_max * 10.0 ** -np.arange(1, decades + 1)


@dataclass(frozen=True)
class RankEstimate:
    rank: float
    count: int
    threshold: float  # kernel/nonkernel cut on the Q spectrum
    curve: tuple  # ((lambda, normalized rank), ...), lambda descending
    plateau: tuple  # (first, last) grid indices of the chosen plateau
    policy: str


def _parse_policy(policy: str):
    if policy in (None, "plateau"):
        return "plateau", None
    kind, _, val = policy.partition(":")
    if kind == "fixed":
        try:
            rel = float(val)
        except ValueError:
            raise UsageError(f"bad threshold policy {policy!r}") from None
        if not rel > 0:
            raise UsageError("fixed threshold must be positive")
        return "fixed", rel
    raise UsageError(f"unknown threshold policy {policy!r}; use 'plateau' or 'fixed:REL'")


def rank_estimate(svals, D: int, policy: str = "plateau") -> RankEstimate:
    """Normalized rank from the curve lambda -> #{sigma^2 >= lambda} / D^2.

    ``plateau`` takes the value on the longest run of equal counts over the
    relative grid, preferring the run at smaller lambda on ties; its smallest
    grid point becomes the kernel threshold.  ``fixed:REL`` cuts at
    REL * sigma_max^2.
    """
    kind, rel = _parse_policy(policy)
    q = np.asarray(svals, dtype=float) ** 2
    D2 = D * D
    smax = float(q.max()) if q.size else 0.0
    if smax == 0.0:
        grid = np.zeros(CONFIG["grid_decades"])
        curve = tuple((0.0, 0.0) for _ in grid)
        return RankEstimate(0.0, 0, 0.0, curve, (0, len(grid) - 1), policy or "plateau")
    grid = lambda_grid(smax)
    counts = [int(np.count_nonzero(q >= lam)) for lam in grid]
    curve = tuple((float(lam), c / D2) for lam, c in zip(grid, counts))
    runs = []
    start = 0
    for g in range(1, len(counts) + 1):
        if g == len(counts) or counts[g] != counts[start]:
            runs.append((start, g - 1))
            start = g
    best = max(runs, key=lambda r: (r[1] - r[0], r[0]))
    if kind == "fixed":
        thr = rel * smax
        count = int(np.count_nonzero(q >= thr))
        return RankEstimate(count / D2, count, thr, curve, best, policy)
    thr = float(grid[best[1]])
    count = counts[best[1]]
    return RankEstimate(count / D2, count, thr, curve, best, "plateau")


@dataclass(frozen=True)
class BettiEstimate:
    rank_est: float
    n: int
    beta0: float
    beta1_est: float
    delta_upper: float
    r_bound: float
    verdict: str


STRONG_VERDICT = "consistent with strong 1-boundedness (Theorem: sofic, finitely presented, β₁=0)"


def betti_estimate(rank_est: float, n: int, beta0: float, finite: bool | None = None,
                   tol: float | None = None) -> BettiEstimate:
    tol = CONFIG["beta_tol"] if tol is None else tol
    if not -tol <= rank_est <= n + tol:
        raise UsageError(f"rank estimate {rank_est} outside [0, {n}]")
    if finite is None:
        finite = beta0 > 0
    delta_upper = n - rank_est
    beta1 = n - rank_est - 1 + beta0
    r = beta1 - beta0 + 1
    if abs(beta1) <= tol and not finite:
        verdict = STRONG_VERDICT
    else:
        verdict = (
            f"{r:.6g}-bounded generating set (r = β₁ - β₀ + 1; requires sofic, finitely presented)"
        )
    return BettiEstimate(rank_est, n, beta0, beta1, delta_upper, r, verdict)


def fk_logdet(svals, D: int, lam_cut: float):
    """(1/D^2) sum of log(sigma^2) over sigma^2 > lam_cut, and the discarded count."""
    if not lam_cut > 0:
        raise UsageError("lam_cut must be positive")
    q = np.asarray(svals, dtype=float) ** 2
    kept = q[q > lam_cut]
    return float(np.sum(np.log(kept)) / (D * D)), int(q.size - kept.size)


def tail_diagnostic(svals, D: int, lam_cut: float | None = None, grid=None) -> list:
    """Rows (lambda, phi(lambda), phi(lambda) |log lambda|).

    phi counts nonzero Q eigenvalues below lambda, normalized by D^2; values
    below ``lam_cut`` are treated as kernel and excluded.
    """
    q = np.asarray(svals, dtype=float) ** 2
    smax = float(q.max()) if q.size else 0.0
    if grid is None:
        grid = lambda_grid(smax) if smax > 0 else np.zeros(0)
    floor = 0.0 if lam_cut is None else lam_cut
    nonzero = q[(q > 0) & (q >= floor)] if lam_cut is not None else q[q > 0]
    rows = []
    for lam in grid:
        phi = np.count_nonzero(nonzero < lam) / (D * D)
        rows.append((float(lam), float(phi), float(phi * abs(math.log(lam))) if lam > 0 else 0.0))
    return rows


def mu_histogram(q_spec, D: int, bins: int | None = None):
    """Histogram of the Q spectrum with mass 1/D^2 per eigenvalue (total n)."""
    bins = CONFIG["hist_bins"] if bins is None else bins
    q = np.asarray(q_spec, dtype=float)
    top = float(q.max()) if q.size and q.max() > 0 else 1.0
    counts, edges = np.histogram(q, bins=bins, range=(0.0, top))
    return edges, counts / (D * D), counts


@dataclass
class SpectralReport:
    n: int
    k: int
    D: int
    svals: np.ndarray = field(repr=False)
    q_spectrum: np.ndarray = field(repr=False)
    rank: RankEstimate
    mu_edges: np.ndarray = field(repr=False)
    mu_mass: np.ndarray = field(repr=False)
    fk_logdet: float
    fk_discarded: int
    tail: list
    relator_defects: list

    @property
    def rank_est(self) -> float:
        return self.rank.rank


def spectral_report(svals, n: int, k: int, D: int, policy: str = "plateau",
                    relator_defects=(), bins: int | None = None) -> SpectralReport:
    svals = np.asarray(svals, dtype=float)
    rank = rank_estimate(svals, D, policy)
    q = q_spectrum(svals, n, D)
    edges, mass, _ = mu_histogram(q, D, bins)
    if rank.threshold > 0:
        logdet, discarded = fk_logdet(svals, D, rank.threshold)
    else:
        logdet, discarded = 0.0, int(svals.size)
    tail = tail_diagnostic(svals, D, rank.threshold)
    return SpectralReport(n, k, D, svals, q, rank, edges, mass, logdet, discarded,
                          tail, list(relator_defects))


def _hs(mats, D) -> float:
    return math.sqrt(sum(float(np.vdot(a, a).real) for a in mats) / D)


def gaussian_selfadjoint(D: int, count: int, seed: int) -> list:
    """Self-adjoint Gaussian matrices with E tr(S^2)/D = 1 (Philox keyed by seed)."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    out = []
    for _ in range(count):
        g = (rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))) / math.sqrt(2)
        out.append((g + g.conj().T) / math.sqrt(2 * D))
    return out


def perturbation_probe(rs: RelationSystem, rep: Representation, eps_list, seed: int = 0,
                       jac: Jacobian | None = None) -> list:
    """Remainder of the first-order expansion of F around X along a Gaussian tuple.

    Returns dict rows with ``eps``, ``defect`` = ||F(X+sqrt(eps)S) - F(X) -
    sqrt(eps) dF(X)#S||, ``defect_over_eps`` and ``linear_ratio`` =
    ||F(X+sqrt(eps)S) - F(X)|| / (sqrt(eps) ||dF(X)#S||).  Norms are the
    normalized Hilbert-Schmidt norm summed in quadrature over the k outputs.
    """
    from .grouprel import build_jacobian

    if rs.n != rep.n:
        raise UsageError(f"relation system has n={rs.n} but representation gives n={rep.n}")
    jac = jac or build_jacobian(rs)
    D = rep.D
    S = gaussian_selfadjoint(D, rs.n, seed)
    ev = Evaluator(rep)
    FX = [ev.poly(f) for f in rs.F]
    lin = []
    for i in range(rs.k):
        acc = np.zeros((D, D), dtype=complex)
        for j in range(rs.n):
            tp = jac[i, j]
            if not tp.is_zero():
                acc += ev.apply(tp, S[j])
        lin.append(acc)
    lin_norm = _hs(lin, D)
    rows = []
    for eps in eps_list:
        if not 0 <= eps <= 1:
            raise UsageError(f"eps must lie in [0, 1], got {eps}")
        r = math.sqrt(eps)
        pert = Evaluator([x + r * s for x, s in zip(rep.variables, S)])
        FXe = [pert.poly(f) for f in rs.F]
        diff = [a - b for a, b in zip(FXe, FX)]
        defect = _hs([d - r * l for d, l in zip(diff, lin)], D)
        rows.append({
            "eps": float(eps),
            "defect": defect,
            "defect_over_eps": defect / eps if eps > 0 else None,
            "linear_ratio": _hs(diff, D) / (r * lin_norm) if eps > 0 and lin_norm > 0 else None,
        })
    return rows


def commutator_identity_defect(rs: RelationSystem, rep: Representation, T: np.ndarray,
                               jac: Jacobian | None = None, form: str = "commutator") -> float:
    """Relative defect max_i ||[F_i(X), T] - rhs_i|| / ||T|| (Frobenius norms).

    ``form="commutator"``: rhs_i = sum_k [dF_i/dt_k(X) # T, X_k].  Both sides
    vanish when F(X) = 0 and the relators also hold for inverted generators
    (true for abelian quotients such as the built-in exact families).
    ``form="inner"``: rhs_i = sum_k dF_i/dt_k(X) # [X_k, T], which holds for
    every X.
    """
    from .grouprel import build_jacobian

    if form not in ("commutator", "inner"):
        raise UsageError(f"unknown identity form {form!r}")
    jac = jac or build_jacobian(rs)
    ev = Evaluator(rep)
    xs = rep.variables
    tnorm = np.linalg.norm(T)
    worst = 0.0
    for i, f in enumerate(rs.F):
        fx = ev.poly(f)
        lhs = fx @ T - T @ fx
        rhs = np.zeros_like(lhs)
        for j in range(rs.n):
            tp: TensorPoly = jac[i, j]
            if tp.is_zero():
                continue
            if form == "commutator":
                y = ev.apply(tp, T)
                rhs += y @ xs[j] - xs[j] @ y
            else:
                rhs += ev.apply(tp, xs[j] @ T - T @ xs[j])
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / tnorm))
    return worst
