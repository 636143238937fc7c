"""Exact rational sparse linear algebra and chain-complex algorithms.

All matrices are over Q and every identity asserted here is exact: no
tolerances appear anywhere in this module.  The elimination core keeps a
sparse row representation and falls back to a dense sweep for small
matrices (below 64x64) where the bookkeeping overhead dominates.  Pivots
are chosen to limit fill-in first and entry bit-growth second.
"""

from __future__ import annotations

from .rationals import Q, ZERO, ONE, qstr

__all__ = [
    "QMatrix",
    "rank_kernel_image",
    "solve",
    "congruence_diagonalize",
    "signature",
    "ChainComplexQ",
    "ChainMap",
    "homology",
    "homology_dims",
    "fast_homology_dims",
    "homology_reps_at",
    "matrix_rank_fast",
    "IncrementalRank",
    "minimize",
    "lift_quasi_iso",
    "tensor_complexes",
    "direct_sum",
]

_DENSE_LIMIT = 64


class QMatrix:
    """Sparse rational matrix; stored zero entries are forbidden.

    Instances are treated as immutable after construction; all operations
    return new matrices.
    """

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries=None):
        if rows < 0 or cols < 0:
            raise ValueError("negative matrix dimensions")
        self.rows = rows
        self.cols = cols
        ent = {}
        if entries:
            for (i, j), v in (entries.items() if isinstance(entries, dict) else entries):
                if not (0 <= i < rows and 0 <= j < cols):
                    raise ValueError(f"entry ({i},{j}) outside {rows}x{cols}")
                v = Q(v) if isinstance(v, int) else v
                if v != 0:
                    ent[(i, j)] = v
        self.entries = ent

    # -- constructors ---------------------------------------------------

    @staticmethod
    def from_rows(data) -> "QMatrix":
        rows = len(data)
        cols = len(data[0]) if rows else 0
        ent = {}
        for i, row in enumerate(data):
            if len(row) != cols:
                raise ValueError("ragged rows")
            for j, v in enumerate(row):
                v = Q(v) if isinstance(v, int) else v
                if v != 0:
                    ent[(i, j)] = v
        return QMatrix(rows, cols, ent)

    @staticmethod
    def identity(n: int) -> "QMatrix":
        return QMatrix(n, n, {(i, i): ONE for i in range(n)})

    @staticmethod
    def zero(rows: int, cols: int) -> "QMatrix":
        return QMatrix(rows, cols)

    @staticmethod
    def from_columns(cols_list, rows: int) -> "QMatrix":
        ent = {}
        for j, col in enumerate(cols_list):
            for i, v in col.items():
                if v != 0:
                    ent[(i, j)] = v
        return QMatrix(rows, len(cols_list), ent)

    # -- accessors ------------------------------------------------------

    def __getitem__(self, ij):
        return self.entries.get(ij, ZERO)

    def is_zero(self) -> bool:
        return not self.entries

    def column(self, j: int) -> dict:
        return {i: v for (i, jj), v in self.entries.items() if jj == j}

    def columns(self):
        cols = [dict() for _ in range(self.cols)]
        for (i, j), v in self.entries.items():
            cols[j][i] = v
        return cols

    def to_rows(self):
        data = [[ZERO] * self.cols for _ in range(self.rows)]
        for (i, j), v in self.entries.items():
            data[i][j] = v
        return data

    def __eq__(self, other):
        return (
            isinstance(other, QMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash((self.rows, self.cols, tuple(sorted(self.entries.items()))))

    def __repr__(self):
        if self.rows * self.cols <= 64:
            body = "; ".join(
                " ".join(qstr(self[(i, j)]) for j in range(self.cols))
                for i in range(self.rows)
            )
            return f"QMatrix({self.rows}x{self.cols}: {body})"
        return f"QMatrix({self.rows}x{self.cols}, {len(self.entries)} nonzero)"

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: "QMatrix") -> "QMatrix":
        self._same_shape(other)
        ent = dict(self.entries)
        for k, v in other.entries.items():
            s = ent.get(k, ZERO) + v
            if s == 0:
                ent.pop(k, None)
            else:
                ent[k] = s
        return QMatrix(self.rows, self.cols, ent)

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return self + other.scale(Q(-1))

    def __neg__(self) -> "QMatrix":
        return self.scale(Q(-1))

    def scale(self, c) -> "QMatrix":
        if c == 0:
            return QMatrix(self.rows, self.cols)
        return QMatrix(self.rows, self.cols, {k: c * v for k, v in self.entries.items()})

    def __mul__(self, other: "QMatrix") -> "QMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} * {other.rows}x{other.cols}")
        # sparse row-by-column via other's row slices
        other_rows = {}
        for (i, j), v in other.entries.items():
            other_rows.setdefault(i, []).append((j, v))
        acc = {}
        for (i, k), v in self.entries.items():
            row = other_rows.get(k)
            if not row:
                continue
            for j, w in row:
                key = (i, j)
                s = acc.get(key, ZERO) + v * w
                acc[key] = s
        acc = {k: v for k, v in acc.items() if v != 0}
        return QMatrix(self.rows, other.cols, acc)

    def transpose(self) -> "QMatrix":
        return QMatrix(self.cols, self.rows, {(j, i): v for (i, j), v in self.entries.items()})

    def apply(self, vec: dict) -> dict:
        """Apply to a sparse column vector {index: value}."""
        out = {}
        for (i, j), v in self.entries.items():
            w = vec.get(j)
            if w is not None:
                s = out.get(i, ZERO) + v * w
                out[i] = s
        return {i: v for i, v in out.items() if v != 0}

    def hstack(self, other: "QMatrix") -> "QMatrix":
        if self.rows != other.rows:
            raise ValueError("hstack: row mismatch")
        ent = dict(self.entries)
        for (i, j), v in other.entries.items():
            ent[(i, j + self.cols)] = v
        return QMatrix(self.rows, self.cols + other.cols, ent)

    def select_columns(self, js) -> "QMatrix":
        pos = {j: k for k, j in enumerate(js)}
        ent = {}
        for (i, j), v in self.entries.items():
            k = pos.get(j)
            if k is not None:
                ent[(i, k)] = v
        return QMatrix(self.rows, len(js), ent)

    def select_rows(self, iz) -> "QMatrix":
        pos = {i: k for k, i in enumerate(iz)}
        ent = {}
        for (i, j), v in self.entries.items():
            k = pos.get(i)
            if k is not None:
                ent[(k, j)] = v
        return QMatrix(len(iz), self.cols, ent)

    def is_symmetric(self) -> bool:
        if self.rows != self.cols:
            return False
        for (i, j), v in self.entries.items():
            if self.entries.get((j, i), ZERO) != v:
                return False
        return True

    def _same_shape(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise ValueError("shape mismatch")


# ---------------------------------------------------------------------------
# elimination core
# ---------------------------------------------------------------------------


def _rref_dense(m: QMatrix):
    """Reduced row echelon form for small matrices.

    Returns (rows as dicts col->value, pivot columns), the same contract
    as the sparse path."""
    data = m.to_rows()
    rows, cols = m.rows, m.cols
    pivots = []
    r = 0
    for c in range(cols):
        pivot_row = None
        for i in range(r, rows):
            if data[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        data[r], data[pivot_row] = data[pivot_row], data[r]
        pv = data[r][c]
        if pv != 1:
            inv = 1 / pv
            data[r] = [x * inv for x in data[r]]
        for i in range(rows):
            if i != r and data[i][c] != 0:
                f = data[i][c]
                data[i] = [x - f * y for x, y in zip(data[i], data[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    out = []
    for i in range(len(pivots)):
        out.append({j: v for j, v in enumerate(data[i]) if v != 0})
    return out, pivots


def _rref_sparse(m: QMatrix):
    """Sparse RREF.  Same contract as `_rref_dense`.

    Rows are dicts col->val with a column-to-rows incidence index kept in
    step, so each elimination touches only the rows that actually meet the
    pivot column.  The pivot row is the sparsest candidate with the
    smallest entry bit-length, which keeps fill-in and entry growth
    moderate on the incidence-type matrices this package produces.
    """
    rows = [dict() for _ in range(m.rows)]
    col_rows = {}
    for (i, j), v in m.entries.items():
        rows[i][j] = v
        s = col_rows.get(j)
        if s is None:
            col_rows[j] = {i}
        else:
            s.add(i)
    live = set(range(m.rows))
    pivots = []
    done_rows = []
    for c in range(m.cols):
        incid = col_rows.get(c)
        if not incid:
            continue
        cand = [i for i in incid if i in live]
        if not cand:
            continue

        def cost(i):
            v = rows[i][c]
            return (len(rows[i]), v.numerator.bit_length() + v.denominator.bit_length())

        pr = min(cand, key=cost)
        live.discard(pr)
        prow = rows[pr]
        pv = prow[c]
        if pv != 1:
            inv = 1 / pv
            for k in list(prow):
                prow[k] *= inv
        items = list(prow.items())
        for i in list(incid):
            if i == pr:
                continue
            ri = rows[i]
            v = ri.get(c)
            if v is None:
                continue
            for k, w in items:
                s = ri.get(k)
                if s is None:
                    nv = -v * w
                    if nv != 0:
                        ri[k] = nv
                        cs = col_rows.get(k)
                        if cs is None:
                            col_rows[k] = {i}
                        else:
                            cs.add(i)
                else:
                    nv = s - v * w
                    if nv == 0:
                        del ri[k]
                        col_rows[k].discard(i)
                    else:
                        ri[k] = nv
        done_rows.append((pr, c))
        pivots.append(c)
        if not live:
            break
    return [rows[i] for i, _ in done_rows], pivots


def _rref(m: QMatrix):
    if min(m.rows, m.cols) < _DENSE_LIMIT and m.rows * m.cols <= 64 * 1024:
        return _rref_dense(m)
    return _rref_sparse(m)


def rank_kernel_image(m: QMatrix):
    """Exact rank, a reduced-echelon kernel basis, and an image basis.

    Kernel columns span the null space of `m`; image columns are the pivot
    columns of `m` itself.  rank + kernel.cols == m.cols always.
    """
    rref, pivots = _rref(m)
    rank = len(pivots)
    pivot_set = set(pivots)
    free = [j for j in range(m.cols) if j not in pivot_set]
    free_pos = {j: k for k, j in enumerate(free)}
    kent = {}
    for k, j in enumerate(free):
        kent[(j, k)] = ONE
    for r, pc in enumerate(pivots):
        for j, v in rref[r].items():
            k = free_pos.get(j)
            if k is not None and v != 0:
                kent[(pc, k)] = -v
    kernel = QMatrix(m.cols, len(free), kent)
    image = m.select_columns(pivots)
    return rank, kernel, image


def rank(m: QMatrix) -> int:
    return len(_rref(m)[1])


def solve(m: QMatrix, rhs: QMatrix):
    """One exact solution of m x = rhs (columnwise), or None if inconsistent.

    The particular solution is the echelon one: free variables are zero.
    """
    if m.rows != rhs.rows:
        raise ValueError("solve: row mismatch")
    aug = m.hstack(rhs)
    rref, pivots = _rref(aug)
    sol = {}
    for r, pc in enumerate(pivots):
        if pc >= m.cols:
            return None  # pivot in augmented part: inconsistent
        for j, v in rref[r].items():
            if j >= m.cols and v != 0:
                sol[(pc, j - m.cols)] = v
    return QMatrix(m.cols, rhs.cols, sol)


def solve_sparse_system(rows, rhs, ncols):
    """One exact solution x of the sparse system rows . x = rhs, or None.

    `rows` are dicts column -> coefficient.  Unit propagation first fixes
    every variable pinned by a one-entry row (chain-level systems collapse
    almost entirely under this), then the residual core goes through the
    echelon solver.  Unconstrained variables are set to zero.
    """
    from collections import deque

    work = [dict(r) for r in rows]
    rv = list(rhs)
    incid = {}
    for ri, r in enumerate(work):
        for c in r:
            incid.setdefault(c, set()).add(ri)
    queue = deque(ri for ri, r in enumerate(work) if len(r) <= 1)
    assignment = {}
    while queue:
        ri = queue.popleft()
        r = work[ri]
        if not r:
            if rv[ri] != 0:
                return None
            continue
        if len(r) > 1:
            continue
        (c, a), = r.items()
        val = rv[ri] / a
        assignment[c] = val
        for rj in list(incid.get(c, ())):
            wj = work[rj]
            aj = wj.pop(c, None)
            if aj is not None:
                if val != 0:
                    rv[rj] = rv[rj] - aj * val
                if len(wj) <= 1:
                    queue.append(rj)
        incid.pop(c, None)
    live = [ri for ri, r in enumerate(work) if r]
    for ri, r in enumerate(work):
        if not r and rv[ri] != 0:
            return None
    if live:
        cols = sorted({c for ri in live for c in work[ri]})
        cpos = {c: k for k, c in enumerate(cols)}
        ent = {}
        for k, ri in enumerate(live):
            for c, v in work[ri].items():
                ent[(k, cpos[c])] = v
        mat = QMatrix(len(live), len(cols), ent)
        vec = QMatrix(len(live), 1,
                      {(k, 0): rv[ri] for k, ri in enumerate(live) if rv[ri] != 0})
        sol = solve(mat, vec)
        if sol is None:
            return None
        for c, k in cpos.items():
            v = sol[(k, 0)]
            if v != 0:
                assignment[c] = v
    return assignment


def congruence_diagonalize(s: QMatrix):
    """Invertible p with pT s p diagonal; returns (p, diagonal entries).

    Symmetric Gaussian elimination.  When every remaining diagonal entry
    vanishes but some off-diagonal s_ij is not zero, row/column j is added
    into i; over Q (2 invertible) this always produces a usable pivot.
    """
    if not s.is_symmetric():
        raise ValueError("congruence_diagonalize: matrix not symmetric")
    n = s.rows
    a = s.to_rows()
    p = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]

    def add_col(dst, src, coef):
        # column op on a (and symmetric row op), recorded in p
        for i in range(n):
            a[i][dst] += coef * a[i][src]
        for j in range(n):
            a[dst][j] += coef * a[src][j]
        for i in range(n):
            p[i][dst] += coef * p[i][src]

    def swap_cols(i, j):
        for r in range(n):
            a[r][i], a[r][j] = a[r][j], a[r][i]
        for c in range(n):
            a[i][c], a[j][c] = a[j][c], a[i][c]
        for r in range(n):
            p[r][i], p[r][j] = p[r][j], p[r][i]

    for k in range(n):
        if a[k][k] == 0:
            # prefer a later index with nonzero diagonal
            piv = None
            for i in range(k + 1, n):
                if a[i][i] != 0:
                    piv = i
                    break
            if piv is not None:
                swap_cols(k, piv)
            else:
                # all remaining diagonals vanish; find off-diagonal entry
                off = None
                for i in range(k, n):
                    for j in range(i + 1, n):
                        if a[i][j] != 0:
                            off = (i, j)
                            break
                    if off:
                        break
                if off is None:
                    break  # remaining block is identically zero
                i, j = off
                add_col(i, j, ONE)  # now a[i][i] = 2 s_ij != 0
                if i != k:
                    swap_cols(k, i)
        pv = a[k][k]
        if pv == 0:
            continue
        for j in range(k + 1, n):
            if a[k][j] != 0:
                add_col(j, k, -a[k][j] / pv)
    diag = [a[i][i] for i in range(n)]
    pm = QMatrix.from_rows(p)
    return pm, diag


def signature(s: QMatrix) -> int:
    """Signature (#positive - #negative diagonal entries after congruence)."""
    _, diag = congruence_diagonalize(s)
    return sum(1 for d in diag if d > 0) - sum(1 for d in diag if d < 0)


# ---------------------------------------------------------------------------
# chain complexes over a point
# ---------------------------------------------------------------------------


class ChainComplexQ:
    """Bounded chain complex of finite-dimensional Q-vector spaces.

    `dims[i]` is the dimension in degree i (missing means zero) and
    `diffs[i]` the differential C_i -> C_{i-1}.  d_{i-1} d_i = 0 is checked
    on construction.
    """

    __slots__ = ("dims", "diffs")

    def __init__(self, dims: dict, diffs: dict, check: bool = True):
        self.dims = {i: d for i, d in dims.items() if d}
        self.diffs = {}
        for i, m in diffs.items():
            ri, ci = self.dim(i - 1), self.dim(i)
            if m.rows != ri or m.cols != ci:
                raise ValueError(f"differential at degree {i} has shape "
                                 f"{m.rows}x{m.cols}, expected {ri}x{ci}")
            if not m.is_zero():
                self.diffs[i] = m
        if check:
            for i in list(self.diffs):
                if i - 1 in self.diffs:
                    if not (self.diffs[i - 1] * self.diffs[i]).is_zero():
                        raise ValueError(f"d^2 != 0 at degree {i}")

    def dim(self, i: int) -> int:
        return self.dims.get(i, 0)

    def degrees(self):
        return sorted(self.dims)

    def support(self):
        ds = self.degrees()
        return (ds[0], ds[-1]) if ds else (0, -1)

    def differential(self, i: int) -> QMatrix:
        return self.diffs.get(i) or QMatrix.zero(self.dim(i - 1), self.dim(i))

    def total_dim(self) -> int:
        return sum(self.dims.values())

    def shift(self, k: int) -> "ChainComplexQ":
        """Sigma^k: degree i of the result is degree i-k of the input.

        Shifts are pure reindexings with no sign twist; this is what makes
        D(Sigma^k A) = Sigma^{-k} D(A) and Sigma T = T Sigma^{-1} hold as
        strict equalities throughout the package.
        """
        return ChainComplexQ(
            {i + k: d for i, d in self.dims.items()},
            {i + k: m for i, m in self.diffs.items()},
            check=False,
        )

    def dual(self) -> "ChainComplexQ":
        """(DA)_i = (A_{-i})*, with d_{DA,i} = -(d_{A,1-i})^T.

        With this convention D(Sigma^k A) = Sigma^{-k} D(A) strictly and
        the double-dual identification is the identity matrix degreewise.
        """
        dims = {-i: d for i, d in self.dims.items()}
        diffs = {}
        for i, m in self.diffs.items():
            # m: A_i -> A_{i-1}; transpose: (A_{i-1})* -> (A_i)*
            # lives at dual degree 1-i: (DA)_{1-i} -> (DA)_{-i}
            diffs[1 - i] = m.transpose().scale(-ONE)
        return ChainComplexQ(dims, diffs, check=False)

    def __eq__(self, other):
        return (
            isinstance(other, ChainComplexQ)
            and self.dims == other.dims
            and self.diffs == other.diffs
        )

    def __repr__(self):
        ds = self.degrees()
        if not ds:
            return "ChainComplexQ(0)"
        body = ", ".join(f"{i}:{self.dims[i]}" for i in ds)
        return f"ChainComplexQ({body})"


class ChainMap:
    """Graded map between chain complexes.

    A map of degree k has components C_i -> D_{i+k} and satisfies
    d f = (-1)^k f d, the global sign convention of this package.
    """

    __slots__ = ("source", "target", "degree", "components")

    def __init__(self, source, target, degree, components, check=True):
        self.source = source
        self.target = target
        self.degree = degree
        self.components = {}
        for i, m in components.items():
            ri, ci = target.dim(i + degree), source.dim(i)
            if m.rows != ri or m.cols != ci:
                raise ValueError(f"component at {i}: shape {m.rows}x{m.cols} != {ri}x{ci}")
            if not m.is_zero():
                self.components[i] = m
        if check:
            self.check_chain_condition()

    def component(self, i: int) -> QMatrix:
        return self.components.get(i) or QMatrix.zero(
            self.target.dim(i + self.degree), self.source.dim(i)
        )

    def check_chain_condition(self):
        sg = ONE if self.degree % 2 == 0 else -ONE
        for i in set(self.source.dims) | {i + 1 for i in self.source.dims}:
            lhs = self.target.differential(i + self.degree) * self.component(i)
            rhs = (self.component(i - 1) * self.source.differential(i)).scale(sg)
            if lhs != rhs:
                raise ValueError(f"chain condition fails at degree {i}")

    def compose(self, other: "ChainMap") -> "ChainMap":
        """self o other (other first)."""
        comps = {}
        for i in other.source.dims:
            m = self.component(i + other.degree) * other.component(i)
            if not m.is_zero():
                comps[i] = m
        return ChainMap(other.source, self.target,
                        self.degree + other.degree, comps, check=False)

    def __add__(self, other: "ChainMap") -> "ChainMap":
        comps = {}
        for i in set(self.components) | set(other.components):
            comps[i] = self.component(i) + other.component(i)
        return ChainMap(self.source, self.target, self.degree, comps, check=False)

    def scale(self, c) -> "ChainMap":
        return ChainMap(self.source, self.target, self.degree,
                        {i: m.scale(c) for i, m in self.components.items()}, check=False)

    @staticmethod
    def identity(c: ChainComplexQ) -> "ChainMap":
        return ChainMap(c, c, 0, {i: QMatrix.identity(d) for i, d in c.dims.items()},
                        check=False)

    def __eq__(self, other):
        return (
            isinstance(other, ChainMap)
            and self.degree == other.degree
            and self.source.dims == other.source.dims
            and self.target.dims == other.target.dims
            and self.components == other.components
        )


class IncrementalRank:
    """Streaming exact rank of rational columns (dicts row -> value).

    Feeding a column reports whether it enlarged the span; the pivot table
    persists, so a basis can be filtered out of any ordered stream."""

    __slots__ = ("pivots",)

    def __init__(self):
        self.pivots = {}

    def feed(self, col: dict) -> bool:
        col = {r: v for r, v in col.items() if v != 0}
        while col:
            r = max(col)
            hit = self.pivots.get(r)
            if hit is None:
                inv = 1 / col[r]
                if inv != 1:
                    col = {k: v * inv for k, v in col.items()}
                self.pivots[r] = col
                return True
            v = col[r]
            for k, w in hit.items():
                s = col.get(k, ZERO) - v * w
                if s == 0:
                    col.pop(k, None)
                else:
                    col[k] = s
        return False

    @property
    def rank(self) -> int:
        return len(self.pivots)


def matrix_rank_fast(m: QMatrix) -> int:
    """Rank via streaming elimination; fastest path for wide sparse input."""
    inc = IncrementalRank()
    for col in m.columns():
        inc.feed(col)
    return inc.rank


def fast_homology_dims(c: ChainComplexQ) -> dict:
    """Homology dimensions from two ranks per degree, no representatives."""
    ranks = {}
    for i, d in c.diffs.items():
        ranks[i] = matrix_rank_fast(d)
    out = {}
    for i in c.degrees():
        h = c.dim(i) - ranks.get(i, 0) - ranks.get(i + 1, 0)
        if h:
            out[i] = h
    return out


def homology_reps_at(c: ChainComplexQ, i: int) -> QMatrix:
    """Representative cycles for H_i alone, streamed from the kernel basis.

    Boundary columns are fed to the rank structure first; canonical kernel
    columns are then kept while they add rank, stopping at the homology
    dimension.  Matches the basis `homology` produces degree by degree.
    """
    d_i = c.differential(i)
    d_up = c.differential(i + 1)
    inc = IncrementalRank()
    img_rank = 0
    for col in d_up.columns():
        if inc.feed(col):
            img_rank += 1
    _, kernel, _ = rank_kernel_image(d_i)
    h = kernel.cols - img_rank
    keep = []
    if h > 0:
        for j in range(kernel.cols):
            if inc.feed(kernel.column(j)):
                keep.append(j)
                if len(keep) == h:
                    break
    return kernel.select_columns(keep)


def homology(c: ChainComplexQ):
    """Per-degree homology dimension and representative cycles.

    Representatives are reduced-echelon kernel columns completing the
    boundary space, so the output is deterministic for a fixed input.
    Returns {degree: (dim, QMatrix of representative columns)}.
    """
    out = {}
    for i in c.degrees():
        _, kernel, _ = rank_kernel_image(c.differential(i))
        _, _, image = rank_kernel_image(c.differential(i + 1))
        # pick kernel columns that extend the column space of `image`
        combined = image.hstack(kernel)
        _, pivots = _rref(combined)
        reps = [j - image.cols for j in pivots if j >= image.cols]
        h = kernel.select_columns(reps)
        if h.cols:
            out[i] = (h.cols, h)
    return out


def homology_dims(c: ChainComplexQ) -> dict:
    return {i: d for i, (d, _) in homology(c).items()}


def minimize(c: ChainComplexQ):
    """Strong deformation retract onto a complex with zero differentials.

    Returns (min, incl, proj, htpy) with proj o incl = id exactly and
    id - incl o proj = d htpy + htpy d exactly; min has per-degree
    dimension equal to homology dimension.
    """
    pivot_cols = {}   # degree -> original columns on which d is injective
    kernels = {}
    for i in c.degrees():
        d = c.differential(i)
        rref, pivots = _rref(d)
        pivot_cols[i] = pivots
        _, kernel, _ = rank_kernel_image(d)
        kernels[i] = kernel

    hdims = {}
    incl_comps = {}
    proj_comps = {}
    htpy_comps = {}
    for i in c.degrees():
        n = c.dim(i)
        dn = c.differential(i + 1)
        u_next = pivot_cols.get(i + 1, [])
        b_basis = dn.select_columns(u_next)          # boundary basis, iso image of U_{i+1}
        kernel = kernels[i]
        combined = b_basis.hstack(kernel)
        _, pivots = _rref(combined)
        h_cols = [j - b_basis.cols for j in pivots if j >= b_basis.cols]
        h_basis = kernel.select_columns(h_cols)
        u_cols = pivot_cols[i]
        u_basis = QMatrix(n, len(u_cols), {(r, k): ONE for k, r in enumerate(u_cols)})
        basis = b_basis.hstack(h_basis).hstack(u_basis)   # columns form a basis of C_i
        inv = solve(basis, QMatrix.identity(n))
        if inv is None or basis.cols != n:
            raise RuntimeError("internal: splitting basis is not a basis")
        nb, nh = b_basis.cols, h_basis.cols
        if nh:
            hdims[i] = nh
            incl_comps[i] = h_basis
            proj_comps[i] = inv.select_rows(range(nb, nb + nh))
        # homotopy: B_i -> U_{i+1}-span; zero on h and u parts
        if nb:
            coords_b = inv.select_rows(range(nb))        # coordinates in boundary basis
            lift = QMatrix(c.dim(i + 1), nb,
                           {(r, k): ONE for k, r in enumerate(u_next)})
            htpy_comps[i] = lift * coords_b
    minimal = ChainComplexQ(hdims, {}, check=False)
    incl = ChainMap(minimal, c, 0, incl_comps, check=False)
    proj = ChainMap(c, minimal, 0, proj_comps, check=False)
    return minimal, incl, proj, htpy_comps


def lift_quasi_iso(c: ChainComplexQ, d: ChainComplexQ, target_homology_map: dict) -> ChainMap:
    """Chain map c -> d inducing exactly the given map on homology.

    `target_homology_map[i]` is a QMatrix from the canonical homology basis
    of c (as produced by `minimize`/`homology`) to that of d.  Raises if
    the dimensions disagree or the map is not an isomorphism degreewise.
    """
    mc, inc_c, proj_c, _ = minimize(c)
    md, inc_d, proj_d, _ = minimize(d)
    comps = {}
    for i in set(mc.dims) | set(md.dims) | set(target_homology_map):
        m = target_homology_map.get(i)
        rows, cols = md.dim(i), mc.dim(i)
        if m is None:
            m = QMatrix.zero(rows, cols)
        if (m.rows, m.cols) != (rows, cols):
            raise ValueError(f"homology map at degree {i}: shape {m.rows}x{m.cols}, "
                             f"expected {rows}x{cols}")
        if rows != cols or (rows and rank(m) != rows):
            raise ValueError(f"homology map at degree {i} is not an isomorphism")
        if not m.is_zero():
            comps[i] = m
    mid = ChainMap(mc, md, 0, comps, check=False)
    return inc_d.compose(mid).compose(proj_c)


def tensor_complexes(a: ChainComplexQ, b: ChainComplexQ) -> ChainComplexQ:
    """Tensor product with Koszul signs: d(x@y) = dx@y + (-1)^|x| x@dy."""
    pairs = {}
    for i, da in a.dims.items():
        for j, db in b.dims.items():
            pairs.setdefault(i + j, []).append((i, j, da, db))
    offsets = {}
    dims = {}
    for n, ps in pairs.items():
        off = 0
        for (i, j, da, db) in ps:
            offsets[(i, j)] = off
            off += da * db
        dims[n] = off
    diffs = {}
    for n in dims:
        if n - 1 not in dims:
            continue
        ent = {}
        for (i, j, da, db) in pairs[n]:
            base = offsets[(i, j)]
            dA = a.differential(i)
            if (i - 1, j) in offsets:
                tgt = offsets[(i - 1, j)]
                for (r, cidx), v in dA.entries.items():
                    for t in range(db):
                        ent[(tgt + r * db + t, base + cidx * db + t)] = v
            dB = b.differential(j)
            if (i, j - 1) in offsets:
                tgt = offsets[(i, j - 1)]
                sg = ONE if i % 2 == 0 else -ONE
                for (r, cidx), v in dB.entries.items():
                    for s in range(da):
                        key = (tgt + s * (b.dim(j - 1)) + r, base + s * db + cidx)
                        ent[key] = ent.get(key, ZERO) + sg * v
        m = QMatrix(dims[n - 1], dims[n], ent)
        diffs[n] = m
    return ChainComplexQ(dims, diffs)


def direct_sum(a: ChainComplexQ, b: ChainComplexQ):
    """Returns (sum complex, inclusion of a, inclusion of b)."""
    dims = {}
    for i in set(a.dims) | set(b.dims):
        dims[i] = a.dim(i) + b.dim(i)
    diffs = {}
    for i in dims:
        if i - 1 not in dims and a.dim(i - 1) + b.dim(i - 1) == 0:
            continue
        da, db = a.differential(i), b.differential(i)
        ent = dict(da.entries)
        ra, ca = da.rows, da.cols
        for (r, cidx), v in db.entries.items():
            ent[(ra + r, ca + cidx)] = v
        m = QMatrix(a.dim(i - 1) + b.dim(i - 1), dims[i], ent)
        if not m.is_zero():
            diffs[i] = m
    s = ChainComplexQ(dims, diffs, check=False)
    ia = ChainMap(a, s, 0, {i: QMatrix(s.dim(i), a.dim(i),
                                       {(r, r): ONE for r in range(a.dim(i))})
                            for i in a.dims}, check=False)
    ib = ChainMap(b, s, 0, {i: QMatrix(s.dim(i), b.dim(i),
                                       {(a.dim(i) + r, r): ONE for r in range(b.dim(i))})
                            for i in b.dims}, check=False)
    return s, ia, ib
