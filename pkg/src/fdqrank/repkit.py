"""Finite-dimensional unitary images of the group generators.

Built-in families:

* ``cyclic_shift(N)`` and ``regular_cyclic(k)``: one N-cycle (Z -> Z/N, and
  the left regular representation of Z/k).
* ``torus(N)``: shift (x) 1 and 1 (x) shift on C^N (x) C^N, for Z^2.
* ``random_permutations(N, m, seed)``: independent uniform permutations drawn
  with numpy's counter-based Philox bit generator keyed by ``seed``.

Permutations are index arrays ``sigma`` with matrix entry (u, v) = 1 iff
u = sigma[v].  Evaluation of polynomials substitutes

    X_j = U_j + U_j^*,    X_{m+j} = i (U_j - U_j^*).

Tensor evaluation flattens D x D matrices row-major by default, so that
a T b corresponds to ``kron(a, b.T) @ T.ravel()``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import LoadError, UsageError
from .ncalg import NCPoly, TensorPoly

__all__ = [
    "Representation",
    "cyclic_shift",
    "torus",
    "regular_cyclic",
    "random_permutations",
    "load_representation",
    "dump_representation",
    "from_descriptor",
    "Evaluator",
    "evaluate_poly",
    "evaluate_tensor",
    "apply_tensor",
    "relator_defect",
]

UNITARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Representation:
    D: int
    m: int
    kind: str  # "perm" or "dense"
    data: tuple  # index arrays (perm) or complex matrices (dense)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("perm", "dense"):
            raise UsageError(f"unknown representation kind {self.kind!r}")
        if len(self.data) != self.m:
            raise UsageError(f"expected {self.m} generator images, got {len(self.data)}")
        for arr in self.data:
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return 2 * self.m

    @property
    def exact(self) -> bool:
        return bool(self.provenance.get("exact", False))

    @cached_property
    def unitaries(self) -> tuple:
        if self.kind == "dense":
            return tuple(np.asarray(a, dtype=complex) for a in self.data)
        mats = []
        for sigma in self.data:
            u = np.zeros((self.D, self.D), dtype=complex)
            u[sigma, np.arange(self.D)] = 1.0
            mats.append(u)
        return tuple(mats)

    @cached_property
    def variables(self) -> tuple:
        """The self-adjoint images X_1..X_n."""
        us = self.unitaries
        xs = [u + u.conj().T for u in us]
        xs += [1j * (u - u.conj().T) for u in us]
        return tuple(xs)

    def word_matrix(self, word) -> np.ndarray:
        out = np.eye(self.D, dtype=complex)
        for g, e in word:
            u = self.unitaries[g - 1]
            out = out @ (u if e == 1 else u.conj().T)
        return out

    def __eq__(self, other):
        if not isinstance(other, Representation):
            return NotImplemented
        return (
            self.D == other.D
            and self.m == other.m
            and self.kind == other.kind
            and all(np.array_equal(a, b) for a, b in zip(self.data, other.data))
        )

    def __hash__(self):
        return hash((self.D, self.m, self.kind))


def _perm(sigma) -> np.ndarray:
    return np.asarray(sigma, dtype=np.int64)


def _shift(N: int) -> np.ndarray:
    return (np.arange(N) + 1) % N


def cyclic_shift(N: int) -> Representation:
    if N < 1:
        raise UsageError("cyclic_shift needs N >= 1")
    return Representation(N, 1, "perm", (_shift(N),), {"family": "cyclic", "N": N, "exact": True})


def regular_cyclic(k: int) -> Representation:
    if k < 1:
        raise UsageError("regular_cyclic needs k >= 1")
    return Representation(k, 1, "perm", (_shift(k),), {"family": "regular-cyclic", "k": k, "exact": True})


def torus(N: int) -> Representation:
    if N < 1:
        raise UsageError("torus needs N >= 1")
    idx = np.arange(N * N)
    x, y = divmod(idx, N)
    a = ((x + 1) % N) * N + y
    b = x * N + (y + 1) % N
    return Representation(N * N, 2, "perm", (a, b), {"family": "torus", "N": N, "exact": True})


def random_permutations(N: int, m: int, seed: int) -> Representation:
    """m independent uniform permutations of size N (Philox keyed by seed)."""
    if N < 1 or m < 1:
        raise UsageError("random_permutations needs N >= 1 and m >= 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    perms = tuple(_perm(rng.permutation(N)) for _ in range(m))
    return Representation(
        N, m, "perm", perms, {"family": "randperm", "N": N, "m": m, "seed": int(seed), "exact": False}
    )


def check_unitary(mats, tol=UNITARY_TOL):
    for g, u in enumerate(mats, start=1):
        u = np.asarray(u)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise LoadError(f"generator {g}: matrix is not square")
        err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) if u.size else 0.0
        if err > tol:
            raise LoadError(f"generator {g}: not unitary (max |U*U - I| = {err:.3e})")


def check_permutation(sigma, D, g):
    sigma = np.asarray(sigma)
    if sigma.shape != (D,) or np.any(sigma < 0) or np.any(sigma >= D):
        raise LoadError(f"generator {g}: images must be {D} integers in 0..{D - 1}")
    if len(np.unique(sigma)) != D:
        raise LoadError(f"generator {g}: repeated image, not a permutation")


def load_representation(path, presentation=None) -> Representation:
    """Read ``rep D m perm|dense`` files; see module docs for the layout."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read representation {path}: {exc}") from exc
    lines = [ln.split("#", 1)[0].strip() for ln in lines]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise LoadError(f"{path}: empty representation file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "rep" or head[3] not in ("perm", "dense"):
        raise LoadError(f"{path}: header must be 'rep <D> <m> perm|dense'")
    try:
        D, m = int(head[1]), int(head[2])
    except ValueError:
        raise LoadError(f"{path}: D and m must be integers") from None
    if D < 1 or m < 1:
        raise LoadError(f"{path}: D and m must be positive")
    kind = head[3]
    body = lines[1:]
    data = []
    if kind == "perm":
        if len(body) != m:
            raise LoadError(f"{path}: expected {m} permutation lines, got {len(body)}")
        for g, ln in enumerate(body, start=1):
            try:
                sigma = _perm([int(t) for t in ln.split()])
            except ValueError:
                raise LoadError(f"{path}: generator {g}: non-integer image") from None
            check_permutation(sigma, D, g)
            data.append(sigma)
    else:
        if len(body) != m * D:
            raise LoadError(f"{path}: expected {m * D} matrix rows, got {len(body)}")
        for g in range(m):
            mat = np.zeros((D, D), dtype=complex)
            for r in range(D):
                parts = body[g * D + r].replace(",", " ").split()
                if len(parts) != 2 * D:
                    raise LoadError(f"{path}: generator {g + 1}, row {r + 1}: expected {D} re,im pairs")
                try:
                    vals = [float(t) for t in parts]
                except ValueError:
                    raise LoadError(f"{path}: generator {g + 1}, row {r + 1}: bad number") from None
                mat[r] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
            data.append(mat)
        check_unitary(data)
    rep = Representation(D, m, kind, tuple(data), {"family": "file", "path": str(path), "exact": False})
    if presentation is not None:
        defects = relator_defects(rep, presentation)
        exact = all(d <= UNITARY_TOL for d in defects)
        rep = Representation(D, m, kind, rep.data, {**rep.provenance, "exact": exact})
    return rep


def dump_representation(rep: Representation, path) -> None:
    lines = [f"rep {rep.D} {rep.m} {rep.kind}"]
    if rep.kind == "perm":
        for sigma in rep.data:
            lines.append(" ".join(str(int(v)) for v in sigma))
    else:
        for u in rep.data:
            for row in u:
                lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def from_descriptor(spec: str, m: int | None = None, presentation=None) -> Representation:
    """Build a representation from ``cyclic:N``, ``torus:N``,
    ``regular-cyclic:k``, ``randperm:N:seed`` or ``file:PATH``."""
    family, _, arg = spec.partition(":")
    try:
        if family == "cyclic":
            return cyclic_shift(int(arg))
        if family == "torus":
            return torus(int(arg))
        if family == "regular-cyclic":
            return regular_cyclic(int(arg))
        if family == "randperm":
            size, _, seed = arg.partition(":")
            if m is None:
                raise UsageError("randperm needs the generator count from a presentation")
            return random_permutations(int(size), m, int(seed or 0))
    except ValueError:
        raise UsageError(f"bad representation descriptor {spec!r}") from None
    if family == "file" and arg:
        return load_representation(arg, presentation)
    raise UsageError(f"unknown representation descriptor {spec!r}")


def _perm_word(rep: Representation, word) -> np.ndarray:
    # composite permutation of the product U_{w1} U_{w2} ... (rightmost acts first)
    out = np.arange(rep.D)
    for g, e in reversed(tuple(word)):
        sigma = rep.data[g - 1]
        if e == -1:
            inv = np.empty_like(sigma)
            inv[sigma] = np.arange(rep.D)
            sigma = inv
        out = sigma[out]
    return out


def relator_defect(rep: Representation, word) -> float:
    """Operator norm of R(U) - I."""
    if rep.kind == "perm":
        tau = _perm_word(rep, word)
        seen = np.zeros(rep.D, dtype=bool)
        worst = 0.0
        for start in range(rep.D):
            if seen[start]:
                continue
            length = 0
            v = start
            while not seen[v]:
                seen[v] = True
                v = tau[v]
                length += 1
            if length > 1:
                # max |exp(2 pi i k / L) - 1| over k
                worst = max(worst, 2.0 * abs(math.sin(math.pi * (length // 2) / length)))
        return worst
    r = rep.word_matrix(word) - np.eye(rep.D)
    return float(np.linalg.norm(r, 2))


def relator_defects(rep: Representation, presentation) -> list:
    if presentation.m != rep.m:
        raise UsageError(
            f"representation has {rep.m} generators, presentation has {presentation.m}"
        )
    return [relator_defect(rep, w) for w in presentation.relators]


class Evaluator:
    """Memoized monomial evaluation.

    Accepts a Representation or any sequence of D x D matrices standing in
    for X_1..X_n.
    """

    def __init__(self, source):
        if isinstance(source, Representation):
            xs = source.variables
        else:
            xs = tuple(np.asarray(x, dtype=complex) for x in source)
        self.variables = xs
        self.D = xs[0].shape[0]
        self.n = len(xs)
        self._cache = {(): np.eye(self.D, dtype=complex)}

    def monomial(self, word: tuple) -> np.ndarray:
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        out = self.monomial(word[:-1]) @ self.variables[word[-1] - 1]
        self._cache[word] = out
        return out

    def _check(self, nvars):
        if nvars != self.n:
            raise UsageError(f"polynomial has {nvars} variables, representation supplies {self.n}")

    def poly(self, p: NCPoly) -> np.ndarray:
        self._check(p.nvars)
        out = np.zeros((self.D, self.D), dtype=complex)
        for w, c in p.terms.items():
            out += complex(c) * self.monomial(w)
        return out

    def tensor(self, tp: TensorPoly, order: str = "C") -> np.ndarray:
        self._check(tp.nvars)
        D = self.D
        out = np.zeros((D * D, D * D), dtype=complex)
        for (a, b), c in tp.terms.items():
            A, B = self.monomial(a), self.monomial(b)
            if order == "C":
                out += complex(c) * np.kron(A, B.T)
            elif order == "F":
                out += complex(c) * np.kron(B.T, A)
            else:
                raise UsageError(f"unknown flattening order {order!r}")
        return out

    def apply(self, tp: TensorPoly, T: np.ndarray) -> np.ndarray:
        self._check(tp.nvars)
        out = np.zeros((self.D, self.D), dtype=complex)
        for (a, b), c in tp.terms.items():
            out += complex(c) * (self.monomial(a) @ T @ self.monomial(b))
        return out


def evaluate_poly(p: NCPoly, rep: Representation) -> np.ndarray:
    return Evaluator(rep).poly(p)


def evaluate_tensor(tp: TensorPoly, rep: Representation, order: str = "C") -> np.ndarray:
    """Materialize T -> sum c a(X) T b(X) as a D^2 x D^2 matrix."""
    return Evaluator(rep).tensor(tp, order)


def apply_tensor(tp: TensorPoly, rep: Representation, T: np.ndarray) -> np.ndarray:
    return Evaluator(rep).apply(tp, T)
