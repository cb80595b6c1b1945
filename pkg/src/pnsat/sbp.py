"""Staggered-grid SBP finite-difference operators and SAT penalties.

Two grids share an interval: integer nodes x_i = x_L + i*h carry the odd
variables (n+1 nodes), midpoints plus both endpoints carry the even
variables (n+2 nodes).  The operator pair (P^o, Q^o, P^e, Q^e) satisfies

    Q^o + (Q^e)^T = B,   B = -e_first e_first^T + e_last e_last^T pattern,

with diagonal positive P, interior stencils that are plain staggered
central differences, and boundary closures solved here in exact rational
arithmetic from the accuracy constraints plus the SBP identity.  The
resulting D^o = (P^o)^{-1} Q^o is second-order accurate at every node; D^e
is second-order except first-order in its two boundary rows.

SAT penalties for the boundary condition u^o = +/- L Ahat u^e + g follow
the one-parameter family tau^o = -alpha L^{-1}, alpha in [0, 1], with
tau^e tied to tau^o so the mixed boundary terms in the discrete energy
rate cancel.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class StaggeredGrid1d:
    """Interval with its odd (integer) and even (midpoint + endpoint) grids."""

    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValidationError(f"staggered grid needs at least 4 cells, got {self.n_cells}")
        if not self.x_right > self.x_left:
            raise ValidationError("grid interval must have positive length")

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def x_odd(self) -> np.ndarray:
        return self.x_left + self.h * np.arange(self.n_cells + 1)

    @property
    def x_even(self) -> np.ndarray:
        mids = self.x_left + self.h * (np.arange(self.n_cells) + 0.5)
        return np.concatenate(([self.x_left], mids, [self.x_right]))


@dataclass(frozen=True)
class SbpPair:
    """Operator pair on one staggered grid.

    ``q_odd`` is (n+1) x (n+2), ``q_even`` is (n+2) x (n+1); ``p_odd`` /
    ``p_even`` are the diagonal norm entries (already scaled by h).
    ``d_odd`` maps even-grid functions to odd-grid derivative values and
    vice versa for ``d_even``; both are sparse CSR, precomputed.
    """

    grid: StaggeredGrid1d
    p_odd: np.ndarray
    p_even: np.ndarray
    q_odd: np.ndarray
    q_even: np.ndarray
    d_odd: sp.csr_matrix
    d_even: sp.csr_matrix

    def boundary_matrix(self) -> np.ndarray:
        """The exact corner matrix B = Q^o + (Q^e)^T."""
        n = self.grid.n_cells
        b = np.zeros((n + 1, n + 2))
        b[0, 0] = -1.0
        b[n, n + 1] = 1.0
        return b


# ---------------------------------------------------------------------------
# exact closure solve


class _FractionSystem:
    """Tiny dense linear solver over Fractions with free-variable pinning."""

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.rows: list[tuple[dict[int, Fraction], Fraction]] = []

    def add(self, coeffs: dict[int, Fraction], rhs) -> None:
        self.rows.append(({k: Fraction(v) for k, v in coeffs.items() if v != 0}, Fraction(rhs)))

    def solve(self, defaults) -> list[Fraction]:
        """Gaussian elimination; unpinned variables take their default value."""
        rows = [dict(r) for r, _ in self.rows]
        rhs = [b for _, b in self.rows]
        pivot_of: dict[int, int] = {}
        used: set[int] = set()
        for var in range(self.n):
            pr = next(
                (i for i in range(len(rows)) if i not in used and rows[i].get(var)),
                None,
            )
            if pr is None:
                continue
            used.add(pr)
            pivot_of[var] = pr
            pv = rows[pr][var]
            for i in range(len(rows)):
                if i == pr:
                    continue
                f = rows[i].get(var)
                if f:
                    scale = f / pv
                    for k, v in rows[pr].items():
                        nv = rows[i].get(k, Fraction(0)) - scale * v
                        if nv:
                            rows[i][k] = nv
                        else:
                            rows[i].pop(k, None)
                    rhs[i] -= scale * rhs[pr]
        sol = [Fraction(0)] * self.n
        for var in range(self.n):
            if var not in pivot_of:
                sol[var] = Fraction(defaults[var])
        for var, pr in pivot_of.items():
            acc = rhs[pr]
            for k, v in rows[pr].items():
                if k != var:
                    acc -= v * sol[k]
            sol[var] = acc / rows[pr][var]
        for (coeffs, b), red in zip(self.rows, rows):
            if sum(c * sol[k] for k, c in coeffs.items()) != b:
                raise NumericalError("SBP closure solve infeasible: inconsistent constraints")
        return sol


@lru_cache(maxsize=1)
def _closure_corner():
    """Left-boundary closure blocks in units h = 1, solved exactly.

    Unknowns: Q^o rows 0..2 over even columns 0..3, Q^e rows 0..3 over odd
    columns 0..2 (row 3 additionally carries the fixed interior entry +1 at
    column 3), and the first norm entries.  Constraints: the SBP identity
    on the corner, full second-order accuracy for the odd-grid rows, and
    second-order for even rows 1..3 with first-order at the boundary row.
    The system is square up to one redundancy and uniquely solvable.
    """
    xo = [Fraction(i) for i in range(4)]
    xe = [Fraction(0), Fraction(1, 2), Fraction(3, 2), Fraction(5, 2)]
    # variable layout: qo (3x4) -> 0..11, qe (4x3) -> 12..23, po 24..26, pe 27..30
    qo = lambda i, j: 4 * i + j
    qe = lambda j, i: 12 + 3 * j + i
    po = lambda i: 24 + i
    pe = lambda j: 27 + j
    sysm = _FractionSystem(31)
    for i in range(3):
        for j in range(4):
            sysm.add({qo(i, j): 1, qe(j, i): 1}, -1 if (i == 0 and j == 0) else 0)
    for i in range(3):  # D^o rows: exact for 1, x, x^2
        for p in range(3):
            coeffs = {qo(i, j): xe[j] ** p for j in range(4)}
            coeffs[po(i)] = -p * xo[i] ** (p - 1) if p >= 1 else 0
            sysm.add(coeffs, 0)
    for j in range(4):  # D^e rows: boundary row first order, others second
        p_max = 1 if j == 0 else 2
        for p in range(p_max + 1):
            coeffs = {qe(j, i): xo[i] ** p for i in range(3)}
            coeffs[pe(j)] = -p * xe[j] ** (p - 1) if p >= 1 else 0
            rhs = -(xo[3] ** p) if j == 3 else 0  # fixed +1 entry at column 3
            sysm.add(coeffs, rhs)
    sol = sysm.solve([Fraction(0)] * 31)
    qo_c = [[sol[qo(i, j)] for j in range(4)] for i in range(3)]
    qe_c = [[sol[qe(j, i)] for i in range(3)] for j in range(4)]
    po_c = [sol[po(i)] for i in range(3)]
    pe_c = [sol[pe(j)] for j in range(4)]
    if any(v <= 0 for v in po_c + pe_c):
        raise NumericalError("SBP closure solve produced a non-positive norm entry")
    return qo_c, qe_c, po_c, pe_c


def _overlay_exact(n: int):
    """Exact (h = 1) operator entries for n >= 6: interior pattern + corners."""
    qo_c, qe_c, po_c, pe_c = _closure_corner()
    qo = [[Fraction(0)] * (n + 2) for _ in range(n + 1)]
    qe = [[Fraction(0)] * (n + 1) for _ in range(n + 2)]
    po = [Fraction(1)] * (n + 1)
    pe = [Fraction(1)] * (n + 2)
    for i in range(1, n):
        qo[i][i] = Fraction(-1)
        qo[i][i + 1] = Fraction(1)
    for j in range(1, n + 1):
        qe[j][j - 1] = Fraction(-1)
        qe[j][j] = Fraction(1)
    for i in range(3):
        po[i] = po_c[i]
        po[n - i] = po_c[i]
        for j in range(4):
            qo[i][j] = qo_c[i][j]
            qo[n - i][n + 1 - j] = -qo_c[i][j]
    for j in range(4):
        pe[j] = pe_c[j]
        pe[n + 1 - j] = pe_c[j]
        for i in range(3):
            qe[j][i] = qe_c[j][i]
            qe[n + 1 - j][n - i] = -qe_c[j][i]
    qe[3][3] = Fraction(1)
    qe[n - 2][n - 3] = Fraction(-1)
    return qo, qe, po, pe


@lru_cache(maxsize=8)
def _small_exact(n: int):
    """Exact operators for n = 4, 5 where the closure corners overlap.

    Solves the full banded system (SBP identity, accuracy orders, mirror
    symmetry); the leftover free parameters are pinned to the values the
    corner overlay would give at those positions.
    """
    xo = [Fraction(i) for i in range(n + 1)]
    xe = [Fraction(0)] + [Fraction(2 * j - 1, 2) for j in range(1, n + 1)] + [Fraction(n)]
    band = Fraction(5, 2)
    qo_pos = [(i, j) for i in range(n + 1) for j in range(n + 2) if abs(xo[i] - xe[j]) <= band]
    qe_pos = [(j, i) for j in range(n + 2) for i in range(n + 1) if abs(xe[j] - xo[i]) <= band]
    idx: dict = {}
    for p_ in qo_pos:
        idx[("qo", *p_)] = len(idx)
    for p_ in qe_pos:
        idx[("qe", *p_)] = len(idx)
    for i in range(n + 1):
        idx[("po", i)] = len(idx)
    for j in range(n + 2):
        idx[("pe", j)] = len(idx)
    sysm = _FractionSystem(len(idx))

    def qo_var(i, j):
        return idx.get(("qo", i, j))

    def qe_var(j, i):
        return idx.get(("qe", j, i))

    for i in range(n + 1):
        for j in range(n + 2):
            coeffs = {}
            if qo_var(i, j) is not None:
                coeffs[qo_var(i, j)] = 1
            if qe_var(j, i) is not None:
                coeffs[qe_var(j, i)] = coeffs.get(qe_var(j, i), 0) + 1
            b = -1 if (i == 0 and j == 0) else (1 if (i == n and j == n + 1) else 0)
            sysm.add(coeffs, b)
            # mirror antisymmetry of both Q matrices
            mi, mj = n - i, n + 1 - j
            c2 = {}
            if qo_var(i, j) is not None:
                c2[qo_var(i, j)] = 1
            if qo_var(mi, mj) is not None:
                c2[qo_var(mi, mj)] = c2.get(qo_var(mi, mj), 0) + 1
            sysm.add(c2, 0)
            c3 = {}
            if qe_var(j, i) is not None:
                c3[qe_var(j, i)] = 1
            if qe_var(mj, mi) is not None:
                c3[qe_var(mj, mi)] = c3.get(qe_var(mj, mi), 0) + 1
            sysm.add(c3, 0)
    for i in range(n + 1):
        sysm.add({idx[("po", i)]: 1, idx[("po", n - i)]: -1} if i != n - i else {}, 0)
        for p in range(3):
            coeffs = {qo_var(i, j): xe[j] ** p for j in range(n + 2) if qo_var(i, j) is not None}
            if p >= 1:
                coeffs[idx[("po", i)]] = -p * xo[i] ** (p - 1)
            sysm.add(coeffs, 0)
    for j in range(n + 2):
        sysm.add({idx[("pe", j)]: 1, idx[("pe", n + 1 - j)]: -1} if j != n + 1 - j else {}, 0)
        p_max = 1 if j in (0, n + 1) else 2
        for p in range(p_max + 1):
            coeffs = {qe_var(j, i): xo[i] ** p for i in range(n + 1) if qe_var(j, i) is not None}
            if p >= 1:
                coeffs[idx[("pe", j)]] = -p * xe[j] ** (p - 1)
            sysm.add(coeffs, 0)

    qo_ov, qe_ov, po_ov, pe_ov = _overlay_defaults(n)
    defaults = [Fraction(0)] * len(idx)
    for key, v in idx.items():
        kind = key[0]
        if kind == "qo":
            defaults[v] = qo_ov[key[1]][key[2]]
        elif kind == "qe":
            defaults[v] = qe_ov[key[1]][key[2]]
        elif kind == "po":
            defaults[v] = po_ov[key[1]]
        else:
            defaults[v] = pe_ov[key[1]]
    sol = sysm.solve(defaults)

    qo = [[Fraction(0)] * (n + 2) for _ in range(n + 1)]
    qe = [[Fraction(0)] * (n + 1) for _ in range(n + 2)]
    for (i, j) in qo_pos:
        qo[i][j] = sol[idx[("qo", i, j)]]
    for (j, i) in qe_pos:
        qe[j][i] = sol[idx[("qe", j, i)]]
    po = [sol[idx[("po", i)]] for i in range(n + 1)]
    pe = [sol[idx[("pe", j)]] for j in range(n + 2)]
    if any(v <= 0 for v in po + pe):
        raise NumericalError("SBP closure solve produced a non-positive norm entry")
    return qo, qe, po, pe


def _overlay_defaults(n: int):
    """Overlay pattern used only as the pinning default for small n."""
    qo_c, qe_c, po_c, pe_c = _closure_corner()
    qo = [[Fraction(0)] * (n + 2) for _ in range(n + 1)]
    qe = [[Fraction(0)] * (n + 1) for _ in range(n + 2)]
    po = [Fraction(1)] * (n + 1)
    pe = [Fraction(1)] * (n + 2)
    for i in range(1, n):
        qo[i][i], qo[i][i + 1] = Fraction(-1), Fraction(1)
    for j in range(1, n + 1):
        qe[j][j - 1], qe[j][j] = Fraction(-1), Fraction(1)
    for i in range(min(3, n + 1)):
        po[i] = po_c[i]
        po[n - i] = po_c[i]
        for j in range(4):
            if j < n + 2:
                qo[i][j] = qo_c[i][j]
                qo[n - i][n + 1 - j] = -qo_c[i][j]
    for j in range(min(4, n + 2)):
        pe[j] = pe_c[j]
        pe[n + 1 - j] = pe_c[j]
        for i in range(3):
            if i < n + 1:
                qe[j][i] = qe_c[j][i]
                qe[n + 1 - j][n - i] = -qe_c[j][i]
    return qo, qe, po, pe


def build_sbp_pair(grid: StaggeredGrid1d) -> SbpPair:
    """Second-order staggered SBP pair on a grid; closures solved exactly.

    The SBP identity Q^o + (Q^e)^T = B holds entrywise exactly (rational
    arithmetic, then converted to float); P entries are positive; D^o is
    exact through quadratics at every node.
    """
    n = grid.n_cells
    if n >= 6:
        qo, qe, po, pe = _overlay_exact(n)
    else:
        qo, qe, po, pe = _small_exact(n)
    h = grid.h
    to_f = lambda rows: np.array([[float(v) for v in row] for row in rows])
    p_odd = np.array([float(v) for v in po]) * h
    p_even = np.array([float(v) for v in pe]) * h
    q_odd = to_f(qo)
    q_even = to_f(qe)
    return SbpPair(
        grid,
        p_odd=p_odd,
        p_even=p_even,
        q_odd=q_odd,
        q_even=q_even,
        d_odd=sp.csr_matrix(q_odd / p_odd[:, None]),
        d_even=sp.csr_matrix(q_even / p_even[:, None]),
    )


# ---------------------------------------------------------------------------
# SAT penalties


@dataclass(frozen=True)
class SatPenalty:
    """Penalty matrices for one face: tau_odd (r x r), tau_even (s x r)."""

    side: str
    alpha: float
    tau_odd: np.ndarray
    tau_even: np.ndarray


def sat_penalties(l_matrix: np.ndarray, a_hat: np.ndarray, alpha: float, side: str) -> SatPenalty:
    """Energy-stable penalties tau^o = -alpha L^{-1} with the tied tau^e.

    The admissible family requires alpha in [0, 1]: the discrete energy
    bound needs tau^o negative semidefinite and x^T L (-tau^o)^T L x <=
    x^T L x, which for tau^o = -alpha L^{-1} is exactly alpha <= 1.  The
    spectral condition is re-verified on the assembled matrices.
    """
    if side not in ("low", "high"):
        raise ValidationError(f"side must be 'low' or 'high', got {side!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(
            f"alpha = {alpha} is outside [0, 1]; the penalty family tau = -alpha L^(-1) "
            "violates the discrete stability condition x^T L (-tau)^T L x <= x^T L x for alpha > 1"
        )
    l_matrix = np.atleast_2d(np.asarray(l_matrix, dtype=float))
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=float))
    tau_odd = -alpha * np.linalg.inv(l_matrix) if alpha != 0.0 else np.zeros_like(l_matrix)
    tau_odd = 0.5 * (tau_odd + tau_odd.T)
    tied = (a_hat + tau_odd @ (l_matrix @ a_hat)).T
    tau_even = tied if side == "high" else -tied
    # spectral re-check: eigenvalues of L^(1/2) (-tau)^T L^(1/2) must be <= 1
    w, v = np.linalg.eigh(l_matrix)
    sqrt_l = (v * np.sqrt(w)) @ v.T
    ev = np.linalg.eigvalsh(sqrt_l @ (-tau_odd.T) @ sqrt_l)
    if ev.size and (ev.max() > 1.0 + 1e-12 or ev.min() < -1e-12):
        raise NumericalError(
            f"assembled penalty violates the stability condition (spectrum [{ev.min():.3e}, {ev.max():.3e}])"
        )
    return SatPenalty(side, alpha, tau_odd, tau_even)


# ---------------------------------------------------------------------------
# tensor grids


PARITIES = ("o", "e")


def _complement(a: tuple[str, ...], d: int) -> tuple[str, ...]:
    out = list(a)
    out[d] = "e" if a[d] == "o" else "o"
    return tuple(out)


@dataclass(frozen=True)
class TensorGrid:
    """Per-axis staggered grids with the 2^d parity-family bookkeeping.

    ``axes`` are the physical axis labels (subset of 1, 2, 3) in storage
    order; family keys are tuples over ``axes`` with 'o'/'e' entries.
    """

    axes: tuple[int, ...]
    grids: tuple[StaggeredGrid1d, ...]
    pairs: tuple[SbpPair, ...]

    @classmethod
    def build(cls, axes, grids) -> "TensorGrid":
        grids = tuple(grids)
        return cls(tuple(axes), grids, tuple(build_sbp_pair(g) for g in grids))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def families(self) -> list[tuple[str, ...]]:
        keys = [()]
        for _ in self.axes:
            keys = [k + (p,) for k in keys for p in PARITIES]
        return keys

    def complement(self, family: tuple[str, ...], d: int) -> tuple[str, ...]:
        return _complement(family, d)

    def axis_nodes(self, d: int, parity: str) -> np.ndarray:
        g = self.grids[d]
        return g.x_odd if parity == "o" else g.x_even

    def family_nodes(self, family) -> tuple[np.ndarray, ...]:
        return tuple(self.axis_nodes(d, p) for d, p in enumerate(family))

    def family_shape(self, family) -> tuple[int, ...]:
        return tuple(n.size for n in self.family_nodes(family))

    def axis_weights(self, d: int, parity: str) -> np.ndarray:
        return self.pairs[d].p_odd if parity == "o" else self.pairs[d].p_even

    def family_weights(self, family) -> tuple[np.ndarray, ...]:
        return tuple(self.axis_weights(d, p) for d, p in enumerate(family))

    def deriv(self, family, d: int, field_c: np.ndarray) -> np.ndarray:
        """Derivative along storage axis ``d`` mapping family c_d(a) -> a.

        ``field_c`` lives on the complementary family's grid and may carry a
        trailing component dimension; applying to a constant field returns 0.
        """
        op = self.pairs[d].d_odd if family[d] == "o" else self.pairs[d].d_even
        moved = np.moveaxis(field_c, d, 0)
        flat = moved.reshape(moved.shape[0], -1)
        out = op @ flat
        return np.moveaxis(out.reshape((out.shape[0],) + moved.shape[1:]), 0, d)

    def norm_sq(self, family, field: np.ndarray) -> float:
        """Squared discrete norm; ``field`` shape = family shape + (components,)."""
        acc = field * field
        for d in range(self.ndim):
            w = self.axis_weights(d, family[d])
            shape = [1] * acc.ndim
            shape[d] = w.size
            acc = acc * w.reshape(shape)
        return float(acc.sum())

    def boundary_weight(self, family, d: int) -> np.ndarray:
        """Transverse norm-weight table for a face with normal along axis ``d``.

        Outer product of the other axes' P entries, shaped like the family
        grid with axis ``d`` removed; scalar 1.0 in 1D.
        """
        ws = [self.axis_weights(j, family[j]) for j in range(self.ndim) if j != d]
        if not ws:
            return np.ones(())
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return out
