"""Exact rational LP: maximize c.x subject to A x <= b, x >= 0, with b >= 0.

A floating-point solve (HiGHS) proposes a basis; an exact revised simplex
over the rationals then certifies it or pivots from it (Bland's rule).
Nothing returned here depends on floating-point tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from flint import fmpq, fmpq_mat

from .errors import SolverError

Column = List[Tuple[int, fmpq]]


def _q(x) -> fmpq:
    if isinstance(x, fmpq):
        return x
    x = Fraction(x)
    return fmpq(x.numerator, x.denominator)


def _frac(x: fmpq) -> Fraction:
    return Fraction(int(x.p), int(x.q))


@dataclass
class LPResult:
    value: Fraction
    x: List[Fraction]
    y: List[Fraction]          # row duals, y >= 0
    pivots: int
    warm: bool                 # True when the floating hint was usable


class ExactLP:
    """Sparse column storage of max c.x, A x <= b, x >= 0."""

    def __init__(self, m: int, nvar: int):
        self.m = m
        self.nvar = nvar
        self.cols: List[Column] = [[] for _ in range(nvar)]
        self.b: List[fmpq] = [fmpq(0)] * m
        self.c: List[fmpq] = [fmpq(0)] * nvar

    def set(self, r: int, j: int, a):
        a = _q(a)
        if a != 0:
            self.cols[j].append((r, a))

    def set_b(self, r: int, v):
        v = _q(v)
        if v < 0:
            raise SolverError("right-hand sides must be nonnegative")
        self.b[r] = v

    def set_c(self, j: int, v):
        self.c[j] = _q(v)

    # ------------------------------------------------------------ float hint

    def _hint(self) -> Optional[Tuple[list, list]]:
        try:
            import highspy
        except ImportError:  # pragma: no cover
            return None
        h = highspy.Highs()
        h.silent()
        h.setOptionValue("presolve", "off")
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_ = self.nvar
        lp.num_row_ = self.m
        lp.col_cost_ = np.array([float(v) for v in self.c])
        lp.col_lower_ = np.zeros(self.nvar)
        lp.col_upper_ = np.full(self.nvar, inf)
        lp.row_lower_ = np.full(self.m, -inf)
        lp.row_upper_ = np.array([float(v) for v in self.b])
        starts, index, value = [0], [], []
        for col in self.cols:
            for r, a in sorted(col, key=lambda t: t[0]):
                index.append(r)
                value.append(float(a))
            starts.append(len(index))
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = np.array(starts, dtype=np.int32)
        lp.a_matrix_.index_ = np.array(index, dtype=np.int32)
        lp.a_matrix_.value_ = np.array(value)
        lp.sense_ = highspy.ObjSense.kMaximize
        h.passModel(lp)
        h.run()
        if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
            return None
        basis = h.getBasis()
        basic = highspy.HighsBasisStatus.kBasic
        Bs = [j for j, s in enumerate(basis.col_status) if s == basic]
        R = [r for r, s in enumerate(basis.row_status) if s != basic]
        if len(Bs) != len(R):
            return None
        return Bs, R

    # ------------------------------------------------------------ exact simplex

    def _matrix(self, R, Bs) -> fmpq_mat:
        k = len(Bs)
        pos = {r: i for i, r in enumerate(R)}
        M = fmpq_mat(k, k)
        for jj, j in enumerate(Bs):
            for r, a in self.cols[j]:
                i = pos.get(r)
                if i is not None:
                    M[i, jj] = a
        return M

    def _primal(self, R, Bs, B):
        k = len(Bs)
        if k == 0:
            return [], list(self.b)
        rhs = fmpq_mat(k, 1, [self.b[r] for r in R])
        xb = B.solve(rhs)
        xs = [xb[i, 0] for i in range(k)]
        slack = list(self.b)
        for jj, j in enumerate(Bs):
            v = xs[jj]
            if v != 0:
                for r, a in self.cols[j]:
                    slack[r] -= a * v
        return xs, slack

    def _dual(self, R, Bs, B):
        k = len(Bs)
        y = [fmpq(0)] * self.m
        if k:
            yr = B.transpose().solve(fmpq_mat(k, 1, [self.c[j] for j in Bs]))
            for i, r in enumerate(R):
                y[r] = yr[i, 0]
        return y

    def solve(self, max_pivots: int = 100_000, warm: bool = True) -> LPResult:
        N = self.nvar
        start = self._hint() if warm else None
        used_hint = False
        B = None
        if start is not None:
            Bs, R = start
            try:
                B = self._matrix(R, Bs)
                xs, slack = self._primal(R, Bs, B) if Bs else ([], list(self.b))
                if all(v >= 0 for v in xs) and all(s >= 0 for s in slack):
                    used_hint = True
                else:
                    B = None
            except ZeroDivisionError:
                B = None
        if not used_hint:
            Bs, R = [], []
            B = fmpq_mat(0, 0)
            xs, slack = [], list(self.b)

        pivots = 0
        while True:
            y = self._dual(R, Bs, B)
            inB = set(Bs)
            inR = set(R)
            enter = None
            # Bland: smallest index with positive reduced cost.
            # Structural columns are indexed 0..N-1, slacks N..N+m-1.
            for j in range(N):
                if j in inB:
                    continue
                d = self.c[j]
                for r, a in self.cols[j]:
                    if r in inR:
                        d -= y[r] * a
                if d > 0:
                    enter = j
                    break
            if enter is None:
                for r in sorted(R):
                    if y[r] < 0:
                        enter = N + r
                        break
            if enter is None:
                break
            if pivots >= max_pivots:
                raise SolverError(f"simplex exceeded {max_pivots} pivots")
            pivots += 1

            k = len(Bs)
            pos = {r: i for i, r in enumerate(R)}
            if enter < N:
                rhs = [fmpq(0)] * k
                ecol = self.cols[enter]
                for r, a in ecol:
                    i = pos.get(r)
                    if i is not None:
                        rhs[i] = -a
            else:
                ecol = []
                rhs = [fmpq(0)] * k
                rhs[pos[enter - N]] = fmpq(-1)
            if k:
                dxm = B.solve(fmpq_mat(k, 1, rhs))
                dx = [dxm[i, 0] for i in range(k)]
            else:
                dx = []
            ds = [fmpq(0)] * self.m
            for jj, j in enumerate(Bs):
                v = dx[jj]
                if v != 0:
                    for r, a in self.cols[j]:
                        ds[r] -= a * v
            for r, a in ecol:
                ds[r] -= a

            best = None  # (ratio, var index)
            for jj, j in enumerate(Bs):
                if dx[jj] < 0:
                    ratio = xs[jj] / (-dx[jj])
                    if best is None or ratio < best[0] or (ratio == best[0] and j < best[1]):
                        best = (ratio, j)
            for r in range(self.m):
                if r in inR or (enter >= N and r == enter - N):
                    continue
                if ds[r] < 0:
                    ratio = slack[r] / (-ds[r])
                    if best is None or ratio < best[0] or (ratio == best[0] and N + r < best[1]):
                        best = (ratio, N + r)
            if best is None:
                raise SolverError("LP is unbounded")
            leave = best[1]

            if leave < N:
                Bs = [j for j in Bs if j != leave]
            else:
                R = R + [leave - N]
            if enter < N:
                Bs = Bs + [enter]
            else:
                R = [r for r in R if r != enter - N]
            B = self._matrix(R, Bs)
            try:
                xs, slack = self._primal(R, Bs, B)
            except ZeroDivisionError as exc:  # pragma: no cover
                raise SolverError("singular basis after pivot") from exc

        x = [Fraction(0)] * N
        for jj, j in enumerate(Bs):
            x[j] = _frac(xs[jj])
        if any(v < 0 for v in x) or any(s < 0 for s in slack):  # pragma: no cover
            raise SolverError("final basis is not primal feasible")
        yf = [_frac(v) for v in y]
        value = sum((_frac(self.c[j]) * x[j] for j in range(N)), Fraction(0))
        dual_value = sum((_frac(self.b[r]) * yf[r] for r in range(self.m)), Fraction(0))
        if value != dual_value:  # pragma: no cover
            raise SolverError("primal and dual objectives disagree")
        return LPResult(value, x, yf, pivots, used_hint)


def solve_lp(A: Sequence[Sequence], b: Sequence, c: Sequence, warm: bool = True) -> LPResult:
    """Dense convenience wrapper; used by tests and small problems."""
    m = len(b)
    nvar = len(c)
    lp = ExactLP(m, nvar)
    for r in range(m):
        lp.set_b(r, b[r])
        for j in range(nvar):
            lp.set(r, j, A[r][j])
    for j in range(nvar):
        lp.set_c(j, c[j])
    return lp.solve(warm=warm)
