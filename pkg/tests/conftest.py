from collections import defaultdict
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from fdqrank.grouprel import build_jacobian, build_relation_system, load_presentation
from fdqrank.ncalg import GaussianRational, NCPoly, TensorPoly

PRES_DIR = Path(__file__).resolve().parent.parent / "presentations"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def system(name):
    return build_relation_system(load_presentation(PRES_DIR / f"{name}.pres"))


@pytest.fixture(scope="session")
def systems():
    names = ["z", "z2", "z3", "z5", "z2xz2", "f2"]
    return {n: system(n) for n in names}


# ---------------------------------------------------------------- oracles
# Independent of fdqrank.ncalg: polynomials are lists of (complex-rational
# coefficient as (re, im) Fractions, word tuple).


def expand_product(*factors):
    """Brute-force term expansion of a product of term lists."""
    acc = defaultdict(lambda: (Fraction(0), Fraction(0)))
    for choice in product(*factors):
        re, im = Fraction(1), Fraction(0)
        word = ()
        for (a, b), w in choice:
            re, im = re * a - im * b, re * b + im * a
            word += w
        r0, i0 = acc[word]
        acc[word] = (r0 + re, i0 + im)
    return {w: c for w, c in acc.items() if c != (0, 0)}


def as_poly(n, terms: dict) -> NCPoly:
    return NCPoly(n, {w: GaussianRational(*c) for w, c in terms.items()})


def position_derivative(word, j):
    """Sum over positions of t_j in the word: left part (x) right part."""
    return [(word[:a], word[a + 1 :]) for a, v in enumerate(word) if v == j]


def brute_force_jacobian(rs, rep):
    """Dense J built by applying each entry to the matrix units E_ab.

    Uses explicit matrix products only, so it does not depend on the
    kron/flattening convention of the implementation.
    """
    jac = build_jacobian(rs)
    D = rep.D
    xs = rep.variables

    def mono(w):
        out = np.eye(D, dtype=complex)
        for v in w:
            out = out @ xs[v - 1]
        return out

    cols = []
    for j in range(rs.n):
        for a in range(D):
            for b in range(D):
                E = np.zeros((D, D), dtype=complex)
                E[a, b] = 1.0
                blocks = []
                for i in range(rs.k):
                    Y = np.zeros((D, D), dtype=complex)
                    for (u, w), c in jac[i, j]:
                        Y += complex(c) * mono(u) @ E @ mono(w)
                    blocks.append(Y.ravel())
                cols.append(np.concatenate(blocks))
    return np.array(cols).T


# ------------------------------------------------------------- strategies

coeffs = st.builds(
    GaussianRational,
    st.fractions(min_value=-3, max_value=3, max_denominator=4),
    st.fractions(min_value=-3, max_value=3, max_denominator=4),
)


def words(nvars, max_len=5):
    return st.lists(st.integers(1, nvars), max_size=max_len).map(tuple)


def ncpolys(nvars=3, max_terms=8, max_len=5):
    return st.dictionaries(words(nvars, max_len), coeffs, max_size=max_terms).map(
        lambda d: NCPoly(nvars, d)
    )


def tensorpolys(nvars=3, max_terms=6, max_len=3):
    return st.dictionaries(
        st.tuples(words(nvars, max_len), words(nvars, max_len)), coeffs, max_size=max_terms
    ).map(lambda d: TensorPoly(nvars, d))
