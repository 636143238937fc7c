"""Face-graded chain complexes over Q and their chain duality.

A face-graded complex assigns to every simplex sigma of a fixed complex K
a bounded chain complex of Q-vector spaces, with differentials allowed to
move only upward in the face order: the block from sigma may hit tau only
when sigma is a face of tau.  Assembling all blocks gives an ordinary
chain complex; restricting to the faces above a fixed sigma gives the
stalk at sigma, the local structure every duality statement is about.

The duality T sends a complex `a` to the complex with

    T(a)_i(sigma) = sum over tau >= sigma of a_q(tau)^*,  q = -i - dim sigma,

with differential the simplicial coboundary on the sigma index plus the
transposed differential of `a` weighted by (-1)^{dim sigma + 1}.  The two
sign choices are forced: the coboundary part is kept sign-free so that
T of a generator complex is literally the dual-cone complex with plain
coboundary entries, and the internal sign is then the unique one with
d^2 = 0 for which the comparison map from the dual of the assembly is a
strict chain map.  Shifts are signless reindexings, which makes
Sigma T = T Sigma^{-1} an equality of data, not just an isomorphism.
"""

from __future__ import annotations

from functools import cached_property

from .rationals import Q, ONE, ZERO
from .exactlinalg import ChainComplexQ, ChainMap, QMatrix, homology_dims, minimize, solve
from .simplicial import SimplicialComplex, SimplicialMap, coboundary_sign

__all__ = [
    "RKComplex",
    "RKMap",
    "SymmetricPoincareStructure",
    "generator",
    "cochain_generator",
    "chains_dissection",
    "chain_dual",
    "dual_map",
    "build_e",
    "pushforward_rk",
    "check_symmetric_poincare",
    "symmetry_defect",
    "boundary_bracket",
    "dual_assembly_comparison",
    "is_stalkwise_quasi_iso",
    "mapping_cone",
    "solve_rk_homotopy",
]


def _face_key(f):
    return (len(f), f)


class RKComplex:
    """Bounded face-graded chain complex over Q on a simplicial complex."""

    def __init__(self, complex: SimplicialComplex, dims, diffs, check=True):
        self.complex = complex
        self.dims = {}
        for i, by_face in dims.items():
            cleaned = {f: d for f, d in by_face.items() if d}
            if cleaned:
                self.dims[i] = cleaned
        self.diffs = {}
        for i, blocks in diffs.items():
            kept = {}
            for (tau, sigma), m in blocks.items():
                if m.is_zero():
                    continue
                if not set(sigma) <= set(tau):
                    raise ValueError(f"block ({tau},{sigma}) violates upward support")
                rows = self.dim(i - 1, tau)
                cols = self.dim(i, sigma)
                if (m.rows, m.cols) != (rows, cols):
                    raise ValueError(f"block ({tau},{sigma}) at degree {i}: "
                                     f"{m.rows}x{m.cols} != {rows}x{cols}")
                kept[(tau, sigma)] = m
            if kept:
                self.diffs[i] = kept
        if check:
            self._check_d_squared()

    def dim(self, i: int, face) -> int:
        return self.dims.get(i, {}).get(face, 0)

    def degrees(self):
        return sorted(self.dims)

    def faces_in_degree(self, i: int):
        return sorted(self.dims.get(i, {}), key=_face_key)

    def total_dim(self) -> int:
        return sum(sum(v.values()) for v in self.dims.values())

    def block(self, i: int, tau, sigma) -> QMatrix:
        m = self.diffs.get(i, {}).get((tau, sigma))
        return m if m is not None else QMatrix.zero(self.dim(i - 1, tau), self.dim(i, sigma))

    def _check_d_squared(self):
        for i in list(self.diffs):
            lower = self.diffs.get(i - 1)
            if not lower:
                continue
            acc = {}
            for (tau, sigma), m2 in lower.items():
                for (tau2, sigma2), m1 in self.diffs[i].items():
                    if tau2 == sigma:
                        key = (tau, sigma2)
                        prod = m2 * m1
                        acc[key] = acc.get(key, QMatrix.zero(prod.rows, prod.cols)) + prod
            for key, m in acc.items():
                if not m.is_zero():
                    raise ValueError(f"d^2 != 0 at degree {i}, block {key}")

    # -- assembled and local views -----------------------------------------

    def _labels(self, i: int):
        out = []
        for f in self.faces_in_degree(i):
            for k in range(self.dims[i][f]):
                out.append((f, k))
        return out

    @cached_property
    def assembly_data(self):
        """(ChainComplexQ, labels per degree, lookup (i,face,k) -> index)."""
        labels = {i: self._labels(i) for i in self.degrees()}
        lookup = {}
        for i, ls in labels.items():
            for idx, (f, k) in enumerate(ls):
                lookup[(i, f, k)] = idx
        dims = {i: len(ls) for i, ls in labels.items()}
        diffs = {}
        for i, blocks in self.diffs.items():
            ent = {}
            for (tau, sigma), m in blocks.items():
                for (r, c), v in m.entries.items():
                    ent[(lookup[(i - 1, tau, r)], lookup[(i, sigma, c)])] = v
            diffs[i] = QMatrix(dims.get(i - 1, 0), dims.get(i, 0), ent)
        return ChainComplexQ(dims, diffs, check=False), labels, lookup

    @property
    def assembly(self) -> ChainComplexQ:
        return self.assembly_data[0]

    @cached_property
    def _diffs_by_source(self):
        """Blocks indexed by (degree, source face) for star-local slicing."""
        out = {}
        for i, blocks in self.diffs.items():
            for (tau, sigma), m in blocks.items():
                out.setdefault((i, sigma), []).append((tau, m))
        return out

    @cached_property
    def _faces_with_gens(self):
        """face -> sorted degrees where the face carries generators."""
        out = {}
        for i, by in self.dims.items():
            for f in by:
                out.setdefault(f, []).append(i)
        for f in out:
            out[f].sort()
        return out

    def stalk_data(self, sigma):
        """Stalk at sigma: the subcomplex on blocks over faces >= sigma."""
        star = sorted((f for f in self.complex.star(sigma)
                       if f in self._faces_with_gens), key=_face_key)
        labels = {}
        for f in star:
            for i in self._faces_with_gens[f]:
                ls = labels.setdefault(i, [])
                for k in range(self.dims[i][f]):
                    ls.append((f, k))
        lookup = {}
        for i, ls in labels.items():
            for idx, (f, k) in enumerate(ls):
                lookup[(i, f, k)] = idx
        dims = {i: len(ls) for i, ls in labels.items()}
        diffs_ent = {}
        for f in star:
            for i in self._faces_with_gens[f]:
                for (tau, m) in self._diffs_by_source.get((i, f), ()):
                    ent = diffs_ent.setdefault(i, {})
                    for (r, c), v in m.entries.items():
                        ent[(lookup[(i - 1, tau, r)], lookup[(i, f, c)])] = v
        diffs = {}
        for i, ent in diffs_ent.items():
            if i in dims and (i - 1) in dims and ent:
                diffs[i] = QMatrix(dims[i - 1], dims[i], ent)
        return ChainComplexQ(dims, diffs, check=False), labels, lookup

    def stalk(self, sigma) -> ChainComplexQ:
        return self.stalk_data(sigma)[0]

    def shift(self, k: int) -> "RKComplex":
        return RKComplex(
            self.complex,
            {i + k: dict(v) for i, v in self.dims.items()},
            {i + k: dict(v) for i, v in self.diffs.items()},
            check=False,
        )

    def direct_sum(self, other: "RKComplex") -> "RKComplex":
        if self.complex != other.complex:
            raise ValueError("direct sum needs a common base complex")
        dims = {}
        for i in set(self.dims) | set(other.dims):
            by = {}
            for f in set(self.dims.get(i, {})) | set(other.dims.get(i, {})):
                by[f] = self.dim(i, f) + other.dim(i, f)
            dims[i] = by
        diffs = {}
        for i in set(self.diffs) | set(other.diffs):
            blocks = {}
            keys = set(self.diffs.get(i, {})) | set(other.diffs.get(i, {}))
            for (tau, sigma) in keys:
                a = self.block(i, tau, sigma)
                b = other.block(i, tau, sigma)
                rows = self.dim(i - 1, tau) + other.dim(i - 1, tau)
                cols = self.dim(i, sigma) + other.dim(i, sigma)
                ent = dict(a.entries)
                for (r, c), v in b.entries.items():
                    ent[(self.dim(i - 1, tau) + r, self.dim(i, sigma) + c)] = v
                blocks[(tau, sigma)] = QMatrix(rows, cols, ent)
            diffs[i] = blocks
        return RKComplex(self.complex, dims, diffs, check=False)

    def __eq__(self, other):
        return (
            isinstance(other, RKComplex)
            and self.complex == other.complex
            and self.dims == other.dims
            and self.diffs == other.diffs
        )

    def __repr__(self):
        degs = self.degrees()
        return f"RKComplex(degrees {degs[0]}..{degs[-1]}, total dim {self.total_dim()})" \
            if degs else "RKComplex(0)"


class RKMap:
    """Face-graded chain map of a given degree.

    Component blocks source_i(sigma) -> target_{i+degree}(tau) exist only
    for tau >= sigma, and d f = (-1)^degree f d blockwise.
    """

    def __init__(self, source: RKComplex, target: RKComplex, degree: int,
                 blocks, check=True):
        self.source = source
        self.target = target
        self.degree = degree
        self.blocks = {}
        for i, bs in blocks.items():
            kept = {}
            for (tau, sigma), m in bs.items():
                if m.is_zero():
                    continue
                if not set(sigma) <= set(tau):
                    raise ValueError(f"map block ({tau},{sigma}) violates support")
                rows = target.dim(i + degree, tau)
                cols = source.dim(i, sigma)
                if (m.rows, m.cols) != (rows, cols):
                    raise ValueError(f"map block ({tau},{sigma}) at {i}: "
                                     f"{m.rows}x{m.cols} != {rows}x{cols}")
                kept[(tau, sigma)] = m
            if kept:
                self.blocks[i] = kept
        if check:
            self.check_chain_condition()

    def block(self, i, tau, sigma) -> QMatrix:
        m = self.blocks.get(i, {}).get((tau, sigma))
        return m if m is not None else QMatrix.zero(
            self.target.dim(i + self.degree, tau), self.source.dim(i, sigma))

    def assembly(self) -> ChainMap:
        src, _, src_lookup = self.source.assembly_data
        tgt, _, tgt_lookup = self.target.assembly_data
        comps = {}
        for i, bs in self.blocks.items():
            ent = {}
            for (tau, sigma), m in bs.items():
                for (r, c), v in m.entries.items():
                    ent[(tgt_lookup[(i + self.degree, tau, r)],
                         src_lookup[(i, sigma, c)])] = v
            comps[i] = QMatrix(tgt.dim(i + self.degree), src.dim(i), ent)
        return ChainMap(src, tgt, self.degree, comps, check=False)

    @cached_property
    def _blocks_by_source(self):
        out = {}
        for i, bs in self.blocks.items():
            for (tau, sigma), m in bs.items():
                out.setdefault(sigma, []).append((i, tau, m))
        return out

    def stalk_map(self, sigma) -> ChainMap:
        src, _, src_lookup = self.source.stalk_data(sigma)
        tgt, _, tgt_lookup = self.target.stalk_data(sigma)
        by_source = self._blocks_by_source
        comps_ent = {}
        for s2 in self.source.complex.star(sigma):
            for (i, tau, m) in by_source.get(s2, ()):
                ent = comps_ent.setdefault(i, {})
                for (r, c), v in m.entries.items():
                    ent[(tgt_lookup[(i + self.degree, tau, r)],
                         src_lookup[(i, s2, c)])] = v
        comps = {}
        for i, ent in comps_ent.items():
            if ent:
                comps[i] = QMatrix(tgt.dim(i + self.degree), src.dim(i), ent)
        return ChainMap(src, tgt, self.degree, comps, check=False)

    def check_chain_condition(self):
        sg = ONE if self.degree % 2 == 0 else -ONE
        degs = set(self.source.dims) | set(self.blocks)
        for i in list(degs) + [i + 1 for i in degs]:
            acc = {}
            # d_target o f at source degree i
            for (tau, sigma), m in self.blocks.get(i, {}).items():
                for (tau2, sigma2), dm in self.target.diffs.get(i + self.degree, {}).items():
                    if sigma2 == tau:
                        key = (tau2, sigma)
                        prod = dm * m
                        acc[key] = acc.get(key, QMatrix.zero(prod.rows, prod.cols)) + prod
            for (tau, sigma), dm in self.source.diffs.get(i, {}).items():
                for (tau2, sigma2), m in self.blocks.get(i - 1, {}).items():
                    if sigma2 == tau:
                        key = (tau2, sigma)
                        prod = (m * dm).scale(-sg)
                        acc[key] = acc.get(key, QMatrix.zero(prod.rows, prod.cols)) + prod
            for key, m in acc.items():
                if not m.is_zero():
                    raise ValueError(f"rk chain condition fails at degree {i}, block {key}")

    def compose(self, other: "RKMap") -> "RKMap":
        """self o other."""
        blocks = {}
        for i, bs in other.blocks.items():
            acc = {}
            for (tau, sigma), m in bs.items():
                for (tau2, sigma2), m2 in self.blocks.get(i + other.degree, {}).items():
                    if sigma2 == tau:
                        key = (tau2, sigma)
                        prod = m2 * m
                        acc[key] = acc.get(key, QMatrix.zero(prod.rows, prod.cols)) + prod
            if acc:
                blocks[i] = acc
        return RKMap(other.source, self.target, self.degree + other.degree,
                     blocks, check=False)

    def __add__(self, other: "RKMap") -> "RKMap":
        blocks = {}
        for i in set(self.blocks) | set(other.blocks):
            bs = {}
            for key in set(self.blocks.get(i, {})) | set(other.blocks.get(i, {})):
                bs[key] = self.block(i, *key) + other.block(i, *key)
            blocks[i] = bs
        return RKMap(self.source, self.target, self.degree, blocks, check=False)

    def scale(self, c) -> "RKMap":
        return RKMap(self.source, self.target, self.degree,
                     {i: {k: m.scale(c) for k, m in bs.items()}
                      for i, bs in self.blocks.items()}, check=False)

    def shift(self, k: int) -> "RKMap":
        """The same blocks viewed between the k-shifted complexes."""
        return RKMap(self.source.shift(k), self.target.shift(k), self.degree,
                     {i + k: dict(bs) for i, bs in self.blocks.items()}, check=False)

    def retarget(self, source: RKComplex, target: RKComplex) -> "RKMap":
        """Reinterpret between equal-data complexes (e.g. strict shift identities)."""
        return RKMap(source, target, self.degree,
                     {i: dict(bs) for i, bs in self.blocks.items()}, check=False)

    @staticmethod
    def identity(a: RKComplex) -> "RKMap":
        blocks = {}
        for i, by in a.dims.items():
            blocks[i] = {(f, f): QMatrix.identity(d) for f, d in by.items()}
        return RKMap(a, a, 0, blocks, check=False)

    def __eq__(self, other):
        return (
            isinstance(other, RKMap)
            and self.degree == other.degree
            and self.blocks == other.blocks
        )


# ---------------------------------------------------------------------------
# standard complexes
# ---------------------------------------------------------------------------


def generator(k: SimplicialComplex, sigma) -> RKComplex:
    """The one-line complex concentrated at sigma in degree 0."""
    sigma = tuple(sorted(sigma))
    if not k.has_face(sigma):
        raise ValueError(f"{sigma} is not a face")
    return RKComplex(k, {0: {sigma: 1}}, {})


def cochain_generator(k: SimplicialComplex) -> RKComplex:
    """Simplicial cochains re-graded as a chain complex: one line per face
    sigma in degree -dim(sigma), with coboundary differentials."""
    dims = {}
    for d in range(k.dim + 1):
        dims[-d] = {f: 1 for f in k.faces(d)}
    diffs = {}
    for d in range(k.dim):
        blocks = {}
        for sigma in k.faces(d):
            for tau in k.cofacets(sigma):
                blocks[(tau, sigma)] = QMatrix(1, 1, {(0, 0): Q(coboundary_sign(tau, sigma))})
        diffs[-d] = blocks
    return RKComplex(k, dims, diffs, check=False)


def chains_dissection(k: SimplicialComplex):
    """Chains of the barycentric subdivision, face-graded over k.

    A subdivision simplex is a flag of faces of k; its block is the
    smallest member of the flag.  Deleting the smallest vertex moves the
    block upward, so the boundary respects the upward-support rule.  The
    assembly is the full simplicial chain complex of the subdivision, and
    the stalk at sigma is the chain complex of the closed dual cone of
    sigma (a cone, hence acyclic): this is the combinatorial model of the
    constant sheaf.  Returns (RKComplex, sd complex).
    """
    sd = k.barycentric_subdivision()
    vf = sd.sd_vertex_faces
    dims = {}
    for d in range(sd.dim + 1):
        by = {}
        for s in sd.faces(d):
            carrier = min((vf[v] for v in s), key=_face_key)
            by[carrier] = by.get(carrier, 0) + 1
        dims[d] = by
    # local index = position among same-block faces in the sd face order
    local = {}
    counters = {}
    for d in range(sd.dim + 1):
        for s in sd.faces(d):
            carrier = min((vf[v] for v in s), key=_face_key)
            key = (d, carrier)
            local[s] = counters.get(key, 0)
            counters[key] = local[s] + 1
    diffs = {}
    for d in range(1, sd.dim + 1):
        blocks = {}
        for s in sd.faces(d):
            carrier = min((vf[v] for v in s), key=_face_key)
            for pos in range(len(s)):
                face = s[:pos] + s[pos + 1:]
                fc = min((vf[v] for v in face), key=_face_key)
                key = (fc, carrier)
                blk = blocks.setdefault(key, {})
                blk[(local[face], local[s])] = blk.get((local[face], local[s]), ZERO) \
                    + Q((-1) ** pos)
        mats = {}
        for (tau, sigma), ent in blocks.items():
            mats[(tau, sigma)] = QMatrix(dims[d - 1].get(tau, 0), dims[d].get(sigma, 0),
                                         {k2: v for k2, v in ent.items() if v != 0})
        diffs[d] = mats
    return RKComplex(k, dims, diffs, check=False), sd


# ---------------------------------------------------------------------------
# the duality T
# ---------------------------------------------------------------------------


def _internal_sign(sigma) -> int:
    return (-1) ** (len(sigma))  # (-1)^{dim sigma + 1}


def dual_labels(a: RKComplex, i: int, sigma):
    """Basis of T(a)_i(sigma): pairs (tau >= sigma, k) dualizing a_q(tau)."""
    q = -i - (len(sigma) - 1)
    if q not in a.dims:
        return []
    sg = set(sigma)
    out = []
    for tau in a.faces_in_degree(q):
        if sg <= set(tau):
            for k in range(a.dims[q][tau]):
                out.append((tau, k))
    return out


def chain_dual(a: RKComplex) -> RKComplex:
    """The chain duality T applied to a face-graded complex."""
    K = a.complex
    q_degrees = a.degrees()
    dims = {}
    label_cache = {}
    for d in range(K.dim + 1):
        for sigma in K.faces(d):
            for q in q_degrees:
                i = -d - q
                ls = dual_labels(a, i, sigma)
                if ls:
                    dims.setdefault(i, {})[sigma] = len(ls)
                    label_cache[(i, sigma)] = {lab: pos for pos, lab in enumerate(ls)}
    diffs = {}
    for i, by_face in dims.items():
        blocks = {}
        for sigma, n in by_face.items():
            src = label_cache[(i, sigma)]
            d_sig = len(sigma) - 1
            q = -i - d_sig
            # coboundary part: move the face index up with plain incidence signs
            for tau in K.cofacets(sigma):
                tgt = label_cache.get((i - 1, tau))
                if tgt is None:
                    continue
                sgn = Q(coboundary_sign(tau, sigma))
                ent = {}
                tset = set(tau)
                for (upsilon, k), c in src.items():
                    if tset <= set(upsilon):
                        ent[(tgt[(upsilon, k)], c)] = sgn
                if ent:
                    key = (tau, sigma)
                    blocks[key] = blocks.get(key, QMatrix.zero(len(tgt), n)) + \
                        QMatrix(len(tgt), n, ent)
            # internal part: transposed differential of a, sign (-1)^{dim+1}
            tgt = label_cache.get((i - 1, sigma))
            if tgt is not None:
                mu = Q(_internal_sign(sigma))
                ent = {}
                for (tau2, upsilon), m in a.diffs.get(q + 1, {}).items():
                    # m: a_{q+1}(upsilon) -> a_q(tau2); transpose into dual pieces
                    if not (set(sigma) <= set(upsilon)):
                        continue
                    for (r, c), v in m.entries.items():
                        row = tgt.get((upsilon, c))
                        col = src.get((tau2, r))
                        if row is not None and col is not None:
                            ent[(row, col)] = ent.get((row, col), ZERO) + mu * v
                if ent:
                    key = (sigma, sigma)
                    blocks[key] = blocks.get(key, QMatrix.zero(len(tgt), n)) + \
                        QMatrix(len(tgt), n, {k2: v for k2, v in ent.items() if v != 0})
        if blocks:
            diffs[i] = blocks
    return RKComplex(K, dims, diffs, check=False)


def dual_map(f: RKMap) -> RKMap:
    """T is contravariant: a degree-0 map a -> b dualizes to T(b) -> T(a)."""
    if f.degree != 0:
        raise ValueError("dual_map expects a degree-0 map")
    a, b = f.source, f.target
    ta, tb = chain_dual(a), chain_dual(b)
    blocks = {}
    for i in tb.degrees():
        for sigma in tb.faces_in_degree(i):
            d_sig = len(sigma) - 1
            q = -i - d_sig
            src_labels = {lab: pos for pos, lab in enumerate(dual_labels(b, i, sigma))}
            tgt_labels = {lab: pos for pos, lab in enumerate(dual_labels(a, i, sigma))}
            if not src_labels or not tgt_labels:
                continue
            ent = {}
            for (tau2, tau), m in f.blocks.get(q, {}).items():
                # m: a_q(tau) -> b_q(tau2); transpose: b(tau2)^* -> a(tau)^*
                if not (set(sigma) <= set(tau)):
                    continue
                for (r, c), v in m.entries.items():
                    col = src_labels.get((tau2, r))
                    row = tgt_labels.get((tau, c))
                    if row is not None and col is not None:
                        ent[(row, col)] = ent.get((row, col), ZERO) + v
            ent = {k2: v for k2, v in ent.items() if v != 0}
            if ent:
                blocks.setdefault(i, {})[(sigma, sigma)] = QMatrix(
                    len(tgt_labels), len(src_labels), ent)
    return RKMap(tb, ta, 0, blocks, check=False)


def dual_assembly_comparison(a: RKComplex) -> ChainMap:
    """The canonical chain map (assembly a)^dual -> assembly T(a).

    A functional on a_q lands in the vertex blocks of T(a), one copy per
    vertex of each supporting face.  With the package sign conventions
    this is a strict chain map; it is a quasi-isomorphism, which is the
    assembled form of the duality being an equivalence.
    """
    ta = chain_dual(a)
    dual = a.assembly.dual()
    tgt, _, tgt_lookup = ta.assembly_data
    comps = {}
    for i in dual.degrees():
        q = -i
        ent = {}
        col = 0
        for tau in a.faces_in_degree(q):
            for k in range(a.dims[q][tau]):
                for v in tau:
                    vert = (v,)
                    row = tgt_lookup.get((i, vert, _label_pos(a, i, vert, tau, k)))
                    if row is not None:
                        ent[(row, col)] = ONE
                col += 1
        comps[i] = QMatrix(tgt.dim(i), dual.dim(i), ent)
    return ChainMap(dual, tgt, 0, comps, check=False)


def _label_pos(a: RKComplex, i: int, sigma, tau, k) -> int:
    for pos, lab in enumerate(dual_labels(a, i, sigma)):
        if lab == (tau, k):
            return pos
    raise KeyError((i, sigma, tau, k))


# ---------------------------------------------------------------------------
# e : T^2 -> 1 and symmetric structures
# ---------------------------------------------------------------------------


def build_e(a: RKComplex) -> RKMap:
    """The chain equivalence T^2(a) -> a.

    T^2(a)_i(sigma) decomposes into pieces indexed by chains
    sigma <= tau <= upsilon carrying a copy of a_{i + dim sigma - dim tau}
    (upsilon); the equivalence keeps exactly the pieces with tau = sigma.
    With the package sign conventions no sign twist is needed: the plain
    projection is a chain map, stalkwise a quasi-isomorphism, and the
    homology-level composite with its own dual is the identity (all three
    facts are asserted by the test suite; the first is checked here).
    """
    ta = chain_dual(a)
    tta = chain_dual(ta)
    blocks = {}
    for i in tta.degrees():
        for sigma in tta.faces_in_degree(i):
            d_sig = len(sigma) - 1
            q = -i - d_sig  # degree in ta of the dualized pieces
            outer = dual_labels(ta, i, sigma)  # pairs (tau, k): ta_q(tau)^*
            if not outer:
                continue
            ent_by_target = {}
            for pos, (tau, k) in enumerate(outer):
                if tau != sigma:
                    continue
                # ta_q(sigma) piece k is (upsilon, j) with a in degree i
                upsilon, j = dual_labels(a, q, sigma)[k]
                ent_by_target.setdefault(upsilon, {})[(j, pos)] = ONE
            for upsilon, ent in ent_by_target.items():
                m = QMatrix(a.dim(i, upsilon), len(outer), ent)
                if not m.is_zero():
                    blocks.setdefault(i, {})[(upsilon, sigma)] = m
    return RKMap(tta, a, 0, blocks)


def mapping_cone(f: ChainMap) -> ChainComplexQ:
    """Cone of a degree-0 chain map; acyclic iff f is a quasi-isomorphism."""
    a, b = f.source, f.target
    dims = {}
    for i in set(a.dims) | set(b.dims) | {i + 1 for i in a.dims}:
        d = a.dim(i - 1) + b.dim(i)
        if d:
            dims[i] = d
    diffs = {}
    for i in dims:
        ra, rb = a.dim(i - 2), b.dim(i - 1)
        ent = {}
        for (r, c), v in a.differential(i - 1).entries.items():
            ent[(r, c)] = -v
        for (r, c), v in f.component(i - 1).entries.items():
            ent[(ra + r, c)] = v
        for (r, c), v in b.differential(i).entries.items():
            ent[(ra + r, a.dim(i - 1) + c)] = v
        m = QMatrix(ra + rb, a.dim(i - 1) + b.dim(i), ent)
        if not m.is_zero():
            diffs[i] = m
    return ChainComplexQ(dims, diffs, check=False)


def is_stalkwise_quasi_iso(f: RKMap, report=False):
    """Exact check that every stalk map is a quasi-isomorphism."""
    from .exactlinalg import fast_homology_dims

    for d in range(f.source.complex.dim + 1):
        for sigma in f.source.complex.faces(d):
            cone = mapping_cone(f.stalk_map(sigma))
            hd = fast_homology_dims(cone)
            if hd:
                if report:
                    return False, (sigma, hd)
                return False
    return (True, None) if report else True


class SymmetricPoincareStructure:
    """A face-graded complex with duality maps phi_s : T(base) -> base shifted.

    phi_s is a degree-0 map into base.shift(-n-s): phi_0 pairs degree j
    of the dual with degree j+n of the base, and each later phi is one
    step higher, the homotopy controlling the symmetry of its predecessor.
    phi_0 being a stalkwise equivalence is the Poincare condition.
    """

    def __init__(self, base: RKComplex, n: int, phis):
        self.base = base
        self.n = n
        self.phis = list(phis)
        for s, phi in enumerate(self.phis):
            if phi.degree != 0:
                raise ValueError(f"phi_{s} must have degree 0")


def symmetry_defect(phi_s: RKMap, s: int, shifted: RKComplex,
                    e_builder=build_e) -> RKMap:
    """phi_s + (-1)^{s+1} e(shifted) o shifted T(phi_s), a map T(base) -> shifted.

    This is the left side of the coherence identity at level s; a valid
    structure exhibits it as d phi_{s+1} + phi_{s+1} d.
    """
    ta = phi_s.source
    tphi = dual_map(phi_s)                  # T(shifted) -> T(T base)
    # T(shift(m) x) and shift(-m) T(x) are the same data, so after the
    # compensating shift the dualized map runs T(base) -> shift T^2(base),
    # where e of the shifted complex lands back in `shifted`.
    shift_amount = _shift_between(tphi.source, ta)
    tphi_aligned = tphi.shift(shift_amount)
    e = e_builder(shifted)
    comp = RKMap(ta, e.target, 0,
                 e.compose(RKMap(ta, e.source, 0,
                                 {i: dict(bs) for i, bs in tphi_aligned.blocks.items()},
                                 check=False)).blocks,
                 check=False)
    return phi_s + comp.scale(Q((-1) ** (s + 1)))


def _shift_between(x: RKComplex, y: RKComplex) -> int:
    """k with x.shift(k) having the degrees of y (data-identical complexes)."""
    dx, dy = x.degrees(), y.degrees()
    if not dx or not dy:
        return 0
    k = dy[0] - dx[0]
    if [d + k for d in dx] != dy:
        raise ValueError("complexes are not shifts of one another")
    return k


def boundary_bracket(phi: RKMap, lower: RKComplex) -> RKMap:
    """d o phi + phi o d for phi : X -> upper, viewed as a map X -> lower.

    `upper` must be lower.shift(1) as data; the bracket's components then
    land exactly in `lower` degreewise.
    """
    X, upper = phi.source, phi.target
    # d_upper as a degree-0 map upper -> lower (content drops one slot)
    d_blocks = {i: dict(bs) for i, bs in upper.diffs.items()}
    d_deg0 = RKMap(upper, lower, 0, d_blocks, check=False)
    term1 = d_deg0.compose(phi)
    # phi o d_X: compose then reinterpret as degree 0 into lower
    comps = {}
    for i, bs in X.diffs.items():
        acc = {}
        for (tau, sigma), dm in bs.items():
            for (ups, tau2), pm in phi.blocks.get(i - 1, {}).items():
                if tau2 == tau:
                    key = (ups, sigma)
                    prod = pm * dm
                    acc[key] = acc.get(key, QMatrix.zero(prod.rows, prod.cols)) + prod
        if acc:
            comps[i] = acc
    term2 = RKMap(X, lower, 0, comps, check=False)
    return term1 + term2


def check_symmetric_poincare(spc: SymmetricPoincareStructure, e_builder=build_e):
    """Verify the Poincare condition and the coherence identities exactly.

    Returns {ok, poincare, failures}; `failures` lists the first offending
    (s, degree, block, entry) per failing level.
    """
    a, n = spc.base, spc.n
    ok0, witness = is_stalkwise_quasi_iso(spc.phis[0], report=True)
    failures = []
    for s in range(len(spc.phis) - 1):
        shifted = a.shift(-n - s)
        lhs = symmetry_defect(spc.phis[s], s, shifted, e_builder)
        rhs = boundary_bracket(spc.phis[s + 1], shifted)
        diff = lhs + rhs.scale(Q(-1))
        bad = _first_nonzero_block(diff)
        if bad is not None:
            failures.append((s,) + bad)
    return {"ok": ok0 and not failures, "poincare": (ok0, witness),
            "failures": failures}


def _first_nonzero_block(f: RKMap):
    for i in sorted(f.blocks):
        for key in sorted(f.blocks[i], key=lambda t: (_face_key(t[0]), _face_key(t[1]))):
            m = f.blocks[i][key]
            if not m.is_zero():
                ent = sorted(m.entries.items())[0]
                return (i, key, ent)
    return None


def solve_rk_homotopy(rhs: RKMap):
    """Find phi with d phi + phi d = rhs (phi one degree above), or None.

    rhs : X -> Y; the unknown is a support-respecting block map X -> Y of
    degree rhs.degree + 1.  Used to produce the higher coherence maps of
    symmetric structures.
    """
    X, Y = rhs.source, rhs.target
    deg = rhs.degree + 1
    # enumerate unknown blocks: X_i(sigma) -> Y_{i+deg}(tau), tau >= sigma
    unknowns = []
    index = {}
    for i in X.degrees():
        for sigma in X.faces_in_degree(i):
            sg = set(sigma)
            ncols = X.dims[i][sigma]
            for tau, nrows in Y.dims.get(i + deg, {}).items():
                if sg <= set(tau):
                    for r in range(nrows):
                        for c in range(ncols):
                            index[(i, tau, sigma, r, c)] = len(unknowns)
                            unknowns.append((i, tau, sigma, r, c))
    rows = []
    rhs_rows = []
    row_index = {}

    def eq_row(i, tau, sigma, r, c):
        key = (i, tau, sigma, r, c)
        if key not in row_index:
            row_index[key] = len(rows)
            rows.append({})
            rhs_rows.append(ZERO)
        return row_index[key]

    sgn = ONE if deg % 2 == 0 else -ONE
    # equation: d_Y phi - (-1)^deg phi d_X = rhs   (degree-(deg) map rule
    # rearranged; with deg = rhs.degree + 1 the bracket d phi + phi d has
    # the plain plus sign exactly when deg is odd, matching the coherence
    # identity's shape)
    for i in set(X.dims):
        # d_Y o phi
        for sigma in X.faces_in_degree(i):
            ncols = X.dims[i][sigma]
            for (tau2, tau), dm in Y.diffs.get(i + deg, {}).items():
                if not (set(sigma) <= set(tau)):
                    continue
                for (r2, r), v in dm.entries.items():
                    for c in range(ncols):
                        col = index.get((i, tau, sigma, r, c))
                        if col is None:
                            continue
                        row = eq_row(i, tau2, sigma, r2, c)
                        rows[row][col] = rows[row].get(col, ZERO) + v
        # + phi o d_X
        for (tau, sigma), dm in X.diffs.get(i, {}).items():
            for upsilon, nrows in Y.dims.get(i - 1 + deg, {}).items():
                if not (set(tau) <= set(upsilon)):
                    continue
                for (r2, c2), v in dm.entries.items():
                    # dm: X_i(sigma) -> X_{i-1}(tau), entry (r2, c2)
                    for r in range(nrows):
                        col = index.get((i - 1, upsilon, tau, r, r2))
                        if col is None:
                            continue
                        row = eq_row(i, upsilon, sigma, r, c2)
                        rows[row][col] = rows[row].get(col, ZERO) + v
    # rhs entries
    for i, bs in rhs.blocks.items():
        for (tau, sigma), m in bs.items():
            for (r, c), v in m.entries.items():
                row = eq_row(i, tau, sigma, r, c)
                rhs_rows[row] = v
    mat = QMatrix(len(rows), len(unknowns),
                  {(r, c): v for r, rowd in enumerate(rows) for c, v in rowd.items()})
    b = QMatrix(len(rows), 1, {(r, 0): v for r, v in enumerate(rhs_rows) if v != 0})
    sol = solve(mat, b)
    if sol is None:
        return None
    blocks = {}
    for (i, tau, sigma, r, c), idx in index.items():
        v = sol[(idx, 0)]
        if v != 0:
            key = (tau, sigma)
            blocks.setdefault(i, {}).setdefault(key, {})[(r, c)] = v
    out = {}
    for i, bs in blocks.items():
        out[i] = {key: QMatrix(Y.dim(i + deg, key[0]), X.dim(i, key[1]), ent)
                  for key, ent in bs.items()}
    return RKMap(X, Y, deg, out, check=False)


# ---------------------------------------------------------------------------
# pushforward
# ---------------------------------------------------------------------------


def pushforward_rk(f: SimplicialMap, a: RKComplex) -> RKComplex:
    """Regroup blocks along a simplicial map: block at sigma collects the
    blocks over the faces mapping onto sigma.  The assembly is unchanged.

    Each generator keeps a label tracing it to the original block; merged
    blocks are ordered by label, so pushing forward is strictly functorial:
    (g o f)_* equals g_* o f_* as data, not just up to permutation.
    """
    if a.complex != f.source:
        raise ValueError("complex mismatch")
    tgt = f.target
    labels = getattr(a, "block_labels", None)
    if labels is None:
        labels = {i: {face: tuple((face, k) for k in range(n))
                      for face, n in by.items()}
                  for i, by in a.dims.items()}
    image = {}
    for d in range(a.complex.dim + 1):
        for face in a.complex.faces(d):
            image[face] = f.image_face(face)
    dims = {}
    new_labels = {}
    offsets = {}
    for i, by in a.dims.items():
        merged = {}
        for face, n in by.items():
            g = image[face]
            merged.setdefault(g, []).extend(
                (lab, face, k) for k, lab in enumerate(labels[i][face]))
        nb = {}
        lb = {}
        for g, items in merged.items():
            items.sort(key=lambda t: t[0])
            nb[g] = len(items)
            lb[g] = tuple(t[0] for t in items)
            for pos, (_, face, k) in enumerate(items):
                offsets[(i, face, k)] = pos
        dims[i] = nb
        new_labels[i] = lb
    diffs = {}
    for i, bs in a.diffs.items():
        blocks = {}
        for (tau, sigma), m in bs.items():
            gt, gs = image[tau], image[sigma]
            key = (gt, gs)
            rows = dims.get(i - 1, {}).get(gt, 0)
            cols = dims[i].get(gs, 0)
            blk = blocks.get(key)
            ent = dict(blk.entries) if blk is not None else {}
            for (r, c), v in m.entries.items():
                ent[(offsets[(i - 1, tau, r)], offsets[(i, sigma, c)])] = v
            blocks[key] = QMatrix(rows, cols, ent)
        diffs[i] = blocks
    out = RKComplex(tgt, dims, diffs, check=False)
    out.block_labels = new_labels
    return out
