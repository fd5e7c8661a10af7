"""Linear programming core: the relaxed coflow-scheduling LP and its solver.

The joint routing + allocation problem relaxes to a convex program once the
per-link direction indicators become reals in [-1, 1] and the products are
substituted away (q_i = T * b_i, p_i_uv = x_i_uv * q_i).  The only nonlinear
piece left is |p| in the capacity rows; splitting p into a nonnegative pair
(p = pp - pm, |p| -> pp + pm) makes the whole thing a plain LP.  The split is
sound because capacity pressure keeps one side of every pair at zero at an
optimum.

The solver is a self-contained dense revised simplex (two phases, explicit
basis inverse).  It prices with Dantzig's rule and falls back to Bland's
rule while pivots stall, which keeps runs both fast and provably finite.
No external solver is involved, so identical inputs give identical runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .coflow import Coflow
from .netgraph import Network

#: Primal feasibility tolerance (absolute) for accepted solutions.
FEAS_TOL = 1e-7
#: Reduced-cost threshold below which a column may enter the basis.
COST_TOL = 1e-9
#: Smallest pivot magnitude considered numerically safe.
PIVOT_TOL = 1e-10

_REFRESH_EVERY = 600  # basis-inverse refactorization cadence
_STALL_LIMIT = 40  # degenerate pivots tolerated before Bland's rule kicks in


class DegenerateInstanceError(ValueError):
    """The relaxation collapsed (optimal CCT of zero); nothing to recover."""


@dataclass
class Variable:
    name: str
    low: float = 0.0
    up: float = math.inf


@dataclass
class Constraint:
    coefs: dict[int, float]
    rel: str  # "<=", "=", ">="
    rhs: float


class LinearProgram:
    """Minimization LP over named, bounded variables."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}

    def add_variable(self, name: str, low: float = 0.0, up: float = math.inf) -> int:
        if low > up:
            raise ValueError(f"variable {name}: empty bound interval")
        self.variables.append(Variable(name, low, up))
        return len(self.variables) - 1

    def add_constraint(self, coefs: dict[int, float], rel: str, rhs: float) -> None:
        if rel not in ("<=", "=", ">="):
            raise ValueError(f"unknown relation {rel!r}")
        n = len(self.variables)
        for j, c in coefs.items():
            if not 0 <= j < n:
                raise ValueError(f"constraint references unknown variable {j}")
            if not math.isfinite(c):
                raise ValueError("non-finite constraint coefficient")
        if not math.isfinite(rhs):
            raise ValueError("non-finite right-hand side")
        self.constraints.append(Constraint(dict(coefs), rel, rhs))

    def set_objective(self, coefs: dict[int, float]) -> None:
        for j, c in coefs.items():
            if not math.isfinite(c):
                raise ValueError("non-finite objective coefficient")
        self.objective = dict(coefs)

    def dump(self) -> str:
        """Readable text form, one constraint per line (debug aid)."""

        def term(c: float, j: int) -> str:
            name = self.variables[j].name
            return name if c == 1.0 else f"{c:g}*{name}"

        lines = ["min: " + " + ".join(term(c, j) for j, c in sorted(self.objective.items()))]
        for row in self.constraints:
            lhs = " + ".join(term(c, j) for j, c in sorted(row.coefs.items()))
            lines.append(f"{lhs} {row.rel} {row.rhs:g}")
        for v in self.variables:
            if v.low != 0.0 or v.up != math.inf:
                lines.append(f"{v.low:g} <= {v.name} <= {v.up:g}")
        return "\n".join(lines)


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float
    values: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]


# -- simplex engine ----------------------------------------------------------


class _Standardized:
    """Ax = b, x >= 0 form of a LinearProgram, with recovery bookkeeping."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        n_orig = len(lp.variables)
        # Transformed columns: every original variable becomes one or two
        # nonnegative columns (shift by finite lower bound, split if free).
        self.col_of: list[tuple] = []
        cols = 0
        extra_rows: list[Constraint] = []
        for j, v in enumerate(lp.variables):
            if v.low == -math.inf:
                self.col_of.append(("split", cols, cols + 1))
                cols += 2
                if v.up != math.inf:
                    extra_rows.append(Constraint({j: 1.0}, "<=", v.up))
            else:
                self.col_of.append(("shift", cols, v.low))
                cols += 1
                if v.up != math.inf:
                    extra_rows.append(Constraint({j: 1.0}, "<=", v.up))
        self.n_struct = cols

        rows = list(lp.constraints) + extra_rows
        m = len(rows)
        data, ri, ci = [], [], []
        b = np.zeros(m)
        rel = []
        for i, row in enumerate(rows):
            rhs = row.rhs
            for j, c in row.coefs.items():
                kind = self.col_of[j]
                if kind[0] == "shift":
                    data.append(c)
                    ri.append(i)
                    ci.append(kind[1])
                    rhs -= c * kind[2]
                else:
                    data.append(c)
                    ri.append(i)
                    ci.append(kind[1])
                    data.append(-c)
                    ri.append(i)
                    ci.append(kind[2])
            b[i] = rhs
            rel.append(row.rel)

        # Slack / surplus columns turn every row into an equality.
        n = cols
        basis_col = [-1] * m
        for i, r in enumerate(rel):
            if r == "<=":
                data.append(1.0)
                ri.append(i)
                ci.append(n)
                if b[i] >= 0:
                    basis_col[i] = n
                n += 1
            elif r == ">=":
                data.append(-1.0)
                ri.append(i)
                ci.append(n)
                n += 1
        # Normalize to b >= 0 (flips any slack that was usable as a basis).
        A = sparse.csr_matrix(
            (np.array(data), (np.array(ri), np.array(ci))), shape=(m, n)
        )
        neg = b < 0
        if neg.any():
            scale = np.where(neg, -1.0, 1.0)
            A = sparse.diags(scale) @ A
            b = b * scale
            for i in np.nonzero(neg)[0]:
                basis_col[i] = -1
        # Artificial columns complete the starting identity basis.
        art_rows = [i for i in range(m) if basis_col[i] == -1]
        if art_rows:
            art = sparse.csr_matrix(
                (np.ones(len(art_rows)), (art_rows, range(len(art_rows)))),
                shape=(m, len(art_rows)),
            )
            A = sparse.hstack([A, art], format="csr")
            for k, i in enumerate(art_rows):
                basis_col[i] = n + k
        self.n_artificial = len(art_rows)
        self.A = A.tocsc()
        self.At = self.A.T.tocsr()
        self.b = b
        self.basis = np.array(basis_col, dtype=np.int64)
        self.m, self.n_total = self.A.shape

        c = np.zeros(self.n_total)
        for j, coef in lp.objective.items():
            kind = self.col_of[j]
            if kind[0] == "shift":
                c[kind[1]] += coef
            else:
                c[kind[1]] += coef
                c[kind[2]] -= coef
        self.c = c

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(self.A.indptr[j], self.A.indptr[j + 1])
        return self.A.indices[sl], self.A.data[sl]

    def recover(self, x: np.ndarray) -> tuple[np.ndarray, dict[str, float]]:
        vals = np.zeros(len(self.lp.variables))
        for j, kind in enumerate(self.col_of):
            if kind[0] == "shift":
                vals[j] = x[kind[1]] + kind[2]
            else:
                vals[j] = x[kind[1]] - x[kind[2]]
        named = {v.name: float(vals[j]) for j, v in enumerate(self.lp.variables)}
        return vals, named


class _Simplex:
    """Revised simplex over a _Standardized program, explicit basis inverse.

    The inverse is kept Fortran-ordered so the rank-1 pivot update runs as an
    in-place BLAS ``dger``; the simplex multipliers y are updated in O(m) per
    pivot and recomputed from scratch at every refactorization.
    """

    def __init__(self, std: _Standardized):
        from scipy.linalg.blas import dger

        self._dger = dger
        self.std = std
        self.basis = std.basis.copy()
        self._refresh()

    def _refresh(self) -> None:
        B = self.std.A[:, self.basis].toarray()
        self.binv = np.asfortranarray(np.linalg.inv(B))
        self.xb = self.binv @ self.std.b
        if self.xb.min(initial=0.0) < -1e-6:
            raise RuntimeError("basis refactorization lost feasibility")
        self.xb[self.xb < 0] = 0.0

    def _iterate(self, c: np.ndarray, allowed: np.ndarray) -> str:
        std = self.std
        blocked = ~allowed
        stall = 0
        max_iter = 5000 + 60 * (std.m + std.n_total)
        y = c[self.basis] @ self.binv
        for it in range(max_iter):
            if it and it % _REFRESH_EVERY == 0:
                self._refresh()
                y = c[self.basis] @ self.binv
            d = c - std.At.dot(y)
            d[self.basis] = 0.0
            d[blocked] = 0.0
            if stall < _STALL_LIMIT:
                j = int(np.argmin(d))
            else:  # Bland: lowest-index improving column, guarantees finiteness
                improving = np.nonzero(d < -COST_TOL)[0]
                j = int(improving[0]) if improving.size else int(np.argmin(d))
            if d[j] >= -COST_TOL:
                return "optimal"
            rows, vals = std.column(j)
            u = self.binv[:, rows] @ vals
            pos = np.nonzero(u > PIVOT_TOL)[0]
            if pos.size == 0:
                return "unbounded"
            ratios = self.xb[pos] / u[pos]
            theta = ratios.min()
            ties = pos[ratios <= theta * (1 + 1e-9) + 1e-12]
            r = int(ties[np.argmin(self.basis[ties])])  # Bland-style leave rule
            theta = max(self.xb[r] / u[r], 0.0)
            stall = stall + 1 if theta <= 1e-11 else 0
            self.xb -= theta * u
            self.xb[self.xb < 0] = 0.0
            self.xb[r] = theta
            self.binv[r, :] /= u[r]
            dj = d[j]
            u[r] = 0.0
            self.binv = self._dger(
                -1.0, u, self.binv[r, :].copy(), a=self.binv, overwrite_a=1
            )
            y += dj * self.binv[r, :]
            self.basis[r] = j
        raise RuntimeError("simplex iteration cap exceeded (numerical livelock)")

    def _verified(self, c: np.ndarray, allowed: np.ndarray) -> bool:
        """Recompute everything from a fresh inverse; True when still optimal."""
        self._refresh()
        y = c[self.basis] @ self.binv
        d = c - self.std.At.dot(y)
        d[self.basis] = 0.0
        d[~allowed] = 0.0
        return bool(d.min(initial=0.0) >= -COST_TOL * 10)

    def _optimize(self, c: np.ndarray, allowed: np.ndarray) -> str:
        for _ in range(5):
            status = self._iterate(c, allowed)
            if status != "optimal" or self._verified(c, allowed):
                return status
        raise RuntimeError("simplex failed to converge after repeated polish")

    def solve(self) -> tuple[str, np.ndarray]:
        std = self.std
        n_real = std.n_total - std.n_artificial
        allowed = np.ones(std.n_total, dtype=bool)
        if std.n_artificial:
            phase1_c = np.zeros(std.n_total)
            phase1_c[n_real:] = 1.0
            status = self._optimize(phase1_c, allowed)
            if status != "optimal":  # pragma: no cover - phase 1 is bounded
                raise RuntimeError("phase 1 terminated abnormally")
            scale = max(1.0, float(np.abs(std.b).max()))
            if float(phase1_c[self.basis] @ self.xb) > FEAS_TOL * scale:
                return "infeasible", np.zeros(std.n_total)
            allowed[n_real:] = False
        status = self._optimize(std.c, allowed)
        x = np.zeros(std.n_total)
        if status == "optimal":
            x[self.basis] = self.xb
        return status, x


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve a LinearProgram exactly (to FEAS_TOL) with the embedded simplex.

    Returns status "optimal", "infeasible", or "unbounded"; never raises for
    those outcomes.  Optimal solutions are verified against every constraint
    before being returned.
    """
    if not lp.variables:
        raise ValueError("LP has no variables")
    std = _Standardized(lp)
    status, x_std = _Simplex(std).solve()
    if status != "optimal":
        return LpSolution(status=status, objective=math.nan)
    vals, named = std.recover(x_std)
    _check_feasible(lp, vals)
    obj = float(sum(c * vals[j] for j, c in lp.objective.items()))
    return LpSolution(status="optimal", objective=obj, values=named)


def _check_feasible(lp: LinearProgram, vals: np.ndarray) -> None:
    scale = 1.0 + float(np.abs(vals).max(initial=0.0))
    for v, x in zip(lp.variables, vals):
        if x < v.low - FEAS_TOL * scale or x > v.up + FEAS_TOL * scale:
            raise ArithmeticError(f"solution violates bounds of {v.name}")
    for row in lp.constraints:
        lhs = sum(c * vals[j] for j, c in row.coefs.items())
        err = lhs - row.rhs
        bad = (
            (row.rel == "<=" and err > FEAS_TOL * scale)
            or (row.rel == ">=" and err < -FEAS_TOL * scale)
            or (row.rel == "=" and abs(err) > FEAS_TOL * scale)
        )
        if bad:
            raise ArithmeticError(f"solution violates constraint ({err=:g})")


# -- the relaxed coflow-scheduling LP ----------------------------------------


def build_cos_relax_cvx(net: Network, coflow: Coflow) -> LinearProgram:
    """Assemble the relaxed joint routing + allocation LP for one coflow.

    Variables: T (the completion-time bound), one q per flow (q = T * rate),
    and a nonnegative pair (pp, pm) per flow and link encoding the signed
    per-link shipment p = pp - pm relative to the link's canonical
    orientation.  Constraints: q_i >= V_i; net outflow q_i at each source
    and net inflow q_i at each destination; flow conservation elsewhere;
    per-link total |p| at most T * available; T >= 0.
    """
    if not coflow.flows:
        raise ValueError("empty coflow")
    for f in coflow.flows:
        if not (0 <= f.src < net.node_count and 0 <= f.dst < net.node_count):
            raise ValueError(f"flow {f.id} endpoints outside network")

    lp = LinearProgram()
    t = lp.add_variable("T")
    q = {f.id: lp.add_variable(f"q[{f.id}]") for f in coflow.flows}
    pp: dict[tuple[int, int], int] = {}
    pm: dict[tuple[int, int], int] = {}
    for f in coflow.flows:
        for lid in range(len(net.links)):
            pp[f.id, lid] = lp.add_variable(f"pp[{f.id},{lid}]")
            pm[f.id, lid] = lp.add_variable(f"pm[{f.id},{lid}]")

    for f in coflow.flows:
        lp.add_constraint({q[f.id]: 1.0}, ">=", f.volume)

    def balance_coefs(fid: int, node: int) -> dict[int, float]:
        # net inflow at `node`: + for canonical links pointing in, - for out
        coefs: dict[int, float] = {}
        for nb, lid in net.neighbors(node):
            sign = 1.0 if net.links[lid].v == node else -1.0
            coefs[pp[fid, lid]] = sign
            coefs[pm[fid, lid]] = -sign
        return coefs

    for f in coflow.flows:
        src_row = balance_coefs(f.id, f.src)
        src_row[q[f.id]] = 1.0  # net inflow at the source is -q
        lp.add_constraint(src_row, "=", 0.0)
        dst_row = balance_coefs(f.id, f.dst)
        dst_row[q[f.id]] = -1.0  # net inflow at the destination is +q
        lp.add_constraint(dst_row, "=", 0.0)
    for f in coflow.flows:
        for node in range(net.node_count):
            if node in (f.src, f.dst):
                continue
            lp.add_constraint(balance_coefs(f.id, node), "=", 0.0)
    for lid in range(len(net.links)):
        coefs = {t: -net.available_of(lid)}
        for f in coflow.flows:
            coefs[pp[f.id, lid]] = 1.0
            coefs[pm[f.id, lid]] = 1.0
        lp.add_constraint(coefs, "<=", 0.0)
    lp.set_objective({t: 1.0})
    return lp


@dataclass
class RelaxedSolution:
    """Relaxed routing/rate variables recovered from an LP optimum.

    ``x[fid]`` is the signed per-link routing fraction vector for one flow
    (entry per canonical link, in [-1, 1]); ``b[fid]`` is the relaxed rate.
    """

    T: float
    b: dict[int, float]
    x: dict[int, np.ndarray]


def recover_relaxed(
    solution: LpSolution, coflow: Coflow, n_links: int
) -> RelaxedSolution:
    """Invert the q = T*b and p = x*q substitutions on an optimal solution."""
    if solution.status != "optimal":
        raise ValueError(f"cannot recover from status {solution.status!r}")
    T = solution["T"]
    if T <= 0.0:
        raise DegenerateInstanceError("relaxation optimum has T = 0")
    b: dict[int, float] = {}
    x: dict[int, np.ndarray] = {}
    for f in coflow.flows:
        qv = solution[f"q[{f.id}]"]
        if qv <= 0.0:  # pragma: no cover - impossible while q >= V > 0
            raise DegenerateInstanceError(f"flow {f.id} ships no volume")
        b[f.id] = qv / T
        frac = np.empty(n_links)
        for lid in range(n_links):
            p = solution[f"pp[{f.id},{lid}]"] - solution[f"pm[{f.id},{lid}]"]
            frac[lid] = p / qv
        x[f.id] = frac
    return RelaxedSolution(T=T, b=b, x=x)
