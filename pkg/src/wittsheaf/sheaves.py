"""Combinatorial sheaf complexes on the face poset and their duality.

A sheaf complex assigns to each face a bounded cochain complex of stalks
(the value on the open star) with restriction maps toward larger faces.
Sheaves arising from face-graded chain complexes via `from_rk` are sums
of the elementary injective sheaves supported on closed faces, so their
hypercohomology is computed by global sections alone; for arbitrary
sheaf complexes the order-complex (nerve) cochain model of derived
sections is used instead, and the two routes agree where both apply.

Verdier duality is computed by transporting the chain duality through
`from_rk`; every sheaf produced here carries its presentation, and a
sheaf given only by stalks and restrictions is first resolved by
elementary injectives.
"""

from __future__ import annotations

from .rationals import Q, ONE, ZERO
from .exactlinalg import (
    ChainComplexQ,
    ChainMap,
    QMatrix,
    _rref,
    homology,
    homology_dims,
    rank_kernel_image,
    solve,
)
from .simplicial import SimplicialComplex, SimplicialMap
from .rk import (
    RKComplex,
    RKMap,
    chain_dual,
    dual_assembly_comparison,
    generator,
    cochain_generator,
    pushforward_rk,
)

__all__ = [
    "SheafComplex",
    "SheafMap",
    "from_rk",
    "constant_sheaf",
    "dualizing_complex",
    "chains_on_stars",
    "hypercohomology",
    "hypercohomology_dims",
    "verdier_dual",
    "global_duality_pairing",
    "pushforward_sheaf",
    "rk_resolution",
    "natural_pushforward_iso",
]


def _face_key(f):
    return (len(f), f)


class SheafComplex:
    """Bounded complex of combinatorial sheaves on the face poset.

    stalks[j][sigma] is the stalk dimension in cohomological degree j;
    restrictions[j][(sigma, tau)] (tau a cofacet of sigma) are the
    generating restriction maps; differentials[j][sigma] raises j by one
    stalkwise.  Composition-independence of restrictions and naturality
    of differentials are checked on construction.
    """

    def __init__(self, complex: SimplicialComplex, stalks, restrictions,
                 differentials, rk_source: RKComplex | None = None, check=True):
        self.complex = complex
        self.stalks = {j: {f: d for f, d in by.items() if d}
                       for j, by in stalks.items()}
        self.stalks = {j: by for j, by in self.stalks.items() if by}
        self.restrictions = {j: dict(r) for j, r in restrictions.items()}
        self.differentials = {j: {f: m for f, m in by.items() if not m.is_zero()}
                              for j, by in differentials.items()}
        self.differentials = {j: by for j, by in self.differentials.items() if by}
        self.rk_source = rk_source
        if check:
            self._validate()

    def stalk_dim(self, j: int, face) -> int:
        return self.stalks.get(j, {}).get(face, 0)

    def degrees(self):
        return sorted(self.stalks)

    def restriction_step(self, j: int, sigma, tau) -> QMatrix:
        m = self.restrictions.get(j, {}).get((sigma, tau))
        if m is None:
            return QMatrix.zero(self.stalk_dim(j, tau), self.stalk_dim(j, sigma))
        return m

    def restriction(self, j: int, sigma, tau) -> QMatrix:
        """Composite restriction stalk(sigma) -> stalk(tau) for sigma <= tau."""
        if sigma == tau:
            return QMatrix.identity(self.stalk_dim(j, sigma))
        if not set(sigma) <= set(tau):
            raise ValueError(f"{sigma} is not a face of {tau}")
        # walk up one vertex at a time along sorted insertion order
        extra = sorted(set(tau) - set(sigma))
        cur = sigma
        m = QMatrix.identity(self.stalk_dim(j, sigma))
        for v in extra:
            nxt = tuple(sorted(cur + (v,)))
            m = self.restriction_step(j, cur, nxt) * m
            cur = nxt
        return m

    def differential(self, j: int, face) -> QMatrix:
        m = self.differentials.get(j, {}).get(face)
        if m is None:
            return QMatrix.zero(self.stalk_dim(j + 1, face), self.stalk_dim(j, face))
        return m

    def stalk_complex(self, face) -> ChainComplexQ:
        """The stalk at a face as a chain complex in degrees -j."""
        dims = {-j: self.stalk_dim(j, face) for j in self.degrees()}
        diffs = {}
        for j in self.degrees():
            m = self.differential(j, face)
            if not m.is_zero():
                diffs[-j] = m
        return ChainComplexQ(dims, diffs, check=False)

    def stalk_cohomology_dims(self, face) -> dict:
        return {-i: d for i, d in homology_dims(self.stalk_complex(face)).items()}

    def _validate(self):
        K = self.complex
        for j, by in self.restrictions.items():
            for (sigma, tau), m in by.items():
                if (m.rows, m.cols) != (self.stalk_dim(j, tau), self.stalk_dim(j, sigma)):
                    raise ValueError(f"restriction ({sigma}->{tau}) at {j} has wrong shape")
                if len(tau) != len(sigma) + 1 or not set(sigma) <= set(tau):
                    raise ValueError("restriction steps must go to cofacets")
        # composition independence on squares sigma < tau_a, tau_b < upsilon
        for j in self.degrees():
            for d in range(K.dim - 1):
                for sigma in K.faces(d):
                    if not any(self.stalk_dim(j, f) for f in K.star(sigma)):
                        continue
                    for upsilon in K.faces(d + 2):
                        if not set(sigma) <= set(upsilon):
                            continue
                        mids = [t for t in K.cofacets(sigma) if set(t) <= set(upsilon)]
                        mats = [self.restriction_step(j, t, upsilon) *
                                self.restriction_step(j, sigma, t) for t in mids]
                        for m in mats[1:]:
                            if m != mats[0]:
                                raise ValueError(
                                    f"restriction functoriality fails over {sigma}<{upsilon}")
        # naturality of differentials and d^2 = 0
        for j in self.degrees():
            for d in range(K.dim):
                for sigma in K.faces(d):
                    for tau in K.cofacets(sigma):
                        lhs = self.differential(j, tau) * self.restriction_step(j, sigma, tau)
                        rhs = self.restriction_step(j + 1, sigma, tau) * self.differential(j, sigma)
                        if lhs != rhs:
                            raise ValueError(f"differential not natural at {sigma}->{tau}, {j}")
            for sigma in K.all_faces():
                m = self.differential(j + 1, sigma) * self.differential(j, sigma)
                if not m.is_zero():
                    raise ValueError(f"sheaf d^2 != 0 at {sigma}")

    def __eq__(self, other):
        if not isinstance(other, SheafComplex) or self.complex != other.complex:
            return False
        if self.stalks != other.stalks:
            return False
        degs = set(self.degrees())
        for j in degs:
            for d in range(self.complex.dim):
                for sigma in self.complex.faces(d):
                    for tau in self.complex.cofacets(sigma):
                        if self.restriction_step(j, sigma, tau) != \
                                other.restriction_step(j, sigma, tau):
                            return False
            for sigma in self.complex.all_faces():
                if self.differential(j, sigma) != other.differential(j, sigma):
                    return False
        return True

    def __repr__(self):
        degs = self.degrees()
        if not degs:
            return "SheafComplex(0)"
        tot = sum(sum(by.values()) for by in self.stalks.values())
        return f"SheafComplex(degrees {degs[0]}..{degs[-1]}, total stalk dim {tot})"


class SheafMap:
    """Degree-0 map of sheaf complexes: stalkwise matrices commuting with
    restrictions and differentials (checked)."""

    def __init__(self, source: SheafComplex, target: SheafComplex, comps, check=True):
        self.source = source
        self.target = target
        self.comps = {j: {f: m for f, m in by.items() if not m.is_zero()}
                      for j, by in comps.items()}
        if check:
            self._validate()

    def component(self, j: int, face) -> QMatrix:
        m = self.comps.get(j, {}).get(face)
        if m is None:
            return QMatrix.zero(self.target.stalk_dim(j, face),
                                self.source.stalk_dim(j, face))
        return m

    def _validate(self):
        K = self.source.complex
        for j in set(self.source.degrees()) | set(self.target.degrees()):
            for d in range(K.dim):
                for sigma in K.faces(d):
                    for tau in K.cofacets(sigma):
                        lhs = self.component(j, tau) * self.source.restriction_step(j, sigma, tau)
                        rhs = self.target.restriction_step(j, sigma, tau) * self.component(j, sigma)
                        if lhs != rhs:
                            raise ValueError(f"sheaf map not natural at {sigma}->{tau}")
            for sigma in K.all_faces():
                lhs = self.component(j + 1, sigma) * self.source.differential(j, sigma)
                rhs = self.target.differential(j, sigma) * self.component(j, sigma)
                if lhs != rhs:
                    raise ValueError(f"sheaf map not a cochain map at {sigma}")

    def is_isomorphism(self) -> bool:
        for j in set(self.source.degrees()) | set(self.target.degrees()):
            for sigma in self.source.complex.all_faces():
                m = self.component(j, sigma)
                if m.rows != m.cols:
                    return False
                r, _, _ = rank_kernel_image(m)
                if r != m.rows:
                    return False
        return True


# ---------------------------------------------------------------------------
# the bridge functor
# ---------------------------------------------------------------------------


def from_rk_labels(a: RKComplex, j: int, sigma):
    sg = set(sigma)
    out = []
    for tau in a.faces_in_degree(j):
        if sg <= set(tau):
            for k in range(a.dims[j][tau]):
                out.append((tau, k))
    return out


def from_rk(a: RKComplex) -> SheafComplex:
    """Sections over the star of sigma are the duals of the blocks above sigma.

    Restrictions are the projections; the stalkwise differential is the
    negated transpose of the stalk differential, so global sections are
    literally the dual of the assembly.
    """
    K = a.complex
    stalks = {}
    label_pos = {}
    for j in a.degrees():
        by = {}
        for d in range(K.dim + 1):
            for sigma in K.faces(d):
                ls = from_rk_labels(a, j, sigma)
                if ls:
                    by[sigma] = len(ls)
                    label_pos[(j, sigma)] = {lab: p for p, lab in enumerate(ls)}
        if by:
            stalks[j] = by
    restrictions = {}
    for j, by in stalks.items():
        rs = {}
        for sigma in by:
            src = label_pos[(j, sigma)]
            for tau in K.cofacets(sigma):
                tgt = label_pos.get((j, tau))
                if tgt is None:
                    if by.get(tau):
                        rs[(sigma, tau)] = QMatrix.zero(by[tau], by[sigma])
                    continue
                ent = {}
                for lab, p in src.items():
                    p2 = tgt.get(lab)
                    if p2 is not None:
                        ent[(p2, p)] = ONE
                rs[(sigma, tau)] = QMatrix(len(tgt), len(src), ent)
        restrictions[j] = rs
    differentials = {}
    for j in a.degrees():
        by = {}
        for d in range(K.dim + 1):
            for sigma in K.faces(d):
                src = label_pos.get((j + 1, sigma))
                tgt = label_pos.get((j, sigma))
                if src is None or tgt is None:
                    continue
                ent = {}
                for (tau, s2), m in a.diffs.get(j + 1, {}).items():
                    if not (set(sigma) <= set(s2)):
                        continue
                    for (r, c), v in m.entries.items():
                        row = src.get((s2, c))
                        col = tgt.get((tau, r))
                        if row is not None and col is not None:
                            ent[(row, col)] = ent.get((row, col), ZERO) - v
                m2 = QMatrix(len(src), len(tgt), {k: v for k, v in ent.items() if v != 0})
                if not m2.is_zero():
                    by[sigma] = m2
        if by:
            differentials[j] = by
    return SheafComplex(K, stalks, restrictions, differentials, rk_source=a,
                        check=False)


def constant_sheaf(k: SimplicialComplex) -> SheafComplex:
    """The literal constant sheaf Q in degree 0 (no presentation attached)."""
    stalks = {0: {f: 1 for f in k.all_faces()}}
    restrictions = {0: {}}
    for d in range(k.dim):
        for sigma in k.faces(d):
            for tau in k.cofacets(sigma):
                restrictions[0][(sigma, tau)] = QMatrix.identity(1)
    return SheafComplex(k, stalks, restrictions, {}, check=False)


def dualizing_complex(k: SimplicialComplex) -> SheafComplex:
    """Stalk at sigma in degree -i: the i-chains on the star of sigma.

    This is the bridge image of the re-graded cochain generator; its
    stalkwise homology is the local homology of the realization.
    """
    return from_rk(cochain_generator(k))


def chains_on_stars(k: SimplicialComplex, top) -> SheafComplex:
    """Chains on st(tau) within the closure of `top`, built directly.

    Stalk at tau in degree -i is spanned by the i-faces of `top`'s closure
    containing tau; restrictions drop the simplices that leave the star
    and the differential is the star-truncated boundary (negated, the
    package's dualization sign).  This is the independent model of the
    dual of the sheaf extending Q over the closed simplex `top`.
    """
    top = tuple(sorted(top))
    if not k.has_face(top):
        raise ValueError(f"{top} is not a face")
    ts = set(top)
    stalks = {}
    label_pos = {}
    for d in range(len(top)):
        j = -d
        by = {}
        for dd in range(k.dim + 1):
            for tau in k.faces(dd):
                if not set(tau) <= ts:
                    continue
                gens = [u for u in k.faces(d) if set(tau) <= set(u) <= ts]
                if gens:
                    by[tau] = len(gens)
                    label_pos[(j, tau)] = {u: p for p, u in enumerate(gens)}
        if by:
            stalks[j] = by
    restrictions = {}
    for j, by in stalks.items():
        rs = {}
        for sigma in by:
            src = label_pos[(j, sigma)]
            for tau in k.cofacets(sigma):
                if not set(tau) <= ts:
                    continue
                tgt = label_pos.get((j, tau), {})
                ent = {}
                for u, p in src.items():
                    p2 = tgt.get(u)
                    if p2 is not None:
                        ent[(p2, p)] = ONE
                rs[(sigma, tau)] = QMatrix(len(tgt), len(src), ent)
        restrictions[j] = rs
    differentials = {}
    for j in stalks:
        by = {}
        for sigma, n in stalks[j].items():
            src = label_pos[(j, sigma)]
            tgt = label_pos.get((j + 1, sigma))
            if tgt is None:
                continue
            ent = {}
            for u, p in src.items():
                for pos in range(len(u)):
                    face = u[:pos] + u[pos + 1:]
                    p2 = tgt.get(face)
                    if p2 is not None:
                        ent[(p2, p)] = ent.get((p2, p), ZERO) - Q((-1) ** pos)
            m = QMatrix(len(tgt), len(src), {kk: v for kk, v in ent.items() if v != 0})
            if not m.is_zero():
                by[sigma] = m
        if by:
            differentials[j] = by
    return SheafComplex(k, stalks, restrictions, differentials, check=False)


# ---------------------------------------------------------------------------
# hypercohomology
# ---------------------------------------------------------------------------


def sections_complex(e: SheafComplex) -> ChainComplexQ:
    """Global sections degreewise, as a chain complex in degrees -j.

    Only valid as a model of derived sections when every term is a sum of
    elementary injectives (always the case for `from_rk` images)."""
    a = e.rk_source
    if a is None:
        raise ValueError("sections_complex needs an rk presentation")
    return a.assembly.dual()


def _nerve_flags(k: SimplicialComplex):
    faces = list(k.all_faces())
    flags = {0: [(f,) for f in faces]}
    p = 0
    while True:
        nxt = []
        for flag in flags[p]:
            last = flag[-1]
            ls = set(last)
            for g in k.star(last):
                if g != last and ls <= set(g):
                    nxt.append(flag + (g,))
        if not nxt:
            break
        p += 1
        flags[p] = nxt
    return flags


def nerve_complex(e: SheafComplex) -> ChainComplexQ:
    """Order-complex cochain model of derived sections over the poset.

    Basis cells are (flag sigma_0 < ... < sigma_p, stalk degree q) carrying
    stalk_q(sigma_p); the differential is the alternating flag-extension
    sum (with a restriction when extending on top) plus (-1)^p times the
    stalkwise differential.
    """
    flags = _nerve_flags(e.complex)
    degrees = e.degrees()
    cells = {}  # total degree j -> list of (p, flag, q, dim)
    for p, fl in flags.items():
        for q in degrees:
            for flag in fl:
                d = e.stalk_dim(q, flag[-1])
                if d:
                    cells.setdefault(p + q, []).append((p, flag, q, d))
    index = {}
    dims = {}
    for j, ls in cells.items():
        off = 0
        for (p, flag, q, d) in ls:
            index[(p, flag, q)] = off
            off += d
        dims[j] = off
    ent_by_degree = {j: {} for j in dims}
    for j, ls in cells.items():
        ent = ent_by_degree.setdefault(j + 1, {})
        for (p, flag, q, d) in ls:
            src = index[(p, flag, q)]
            last = flag[-1]
            # Cech part: insert one face into the flag
            for pos in range(p + 2):
                lower = flag[pos - 1] if pos > 0 else None
                upper = flag[pos] if pos <= p else None
                for g in e.complex.all_faces():
                    if g in flag:
                        continue
                    if lower is not None and not (set(lower) < set(g)):
                        continue
                    if upper is not None and not (set(g) < set(upper)):
                        continue
                    new_flag = flag[:pos] + (g,) + flag[pos:]
                    sgn = Q((-1) ** pos)
                    if pos == p + 1:
                        tgt = index.get((p + 1, new_flag, q))
                        if tgt is None:
                            continue
                        rho = e.restriction(q, last, g)
                        for (r, c), v in rho.entries.items():
                            kk = (tgt + r, src + c)
                            ent[kk] = ent.get(kk, ZERO) + sgn * v
                    else:
                        tgt = index.get((p + 1, new_flag, q))
                        if tgt is None:
                            continue
                        for c in range(d):
                            kk = (tgt + c, src + c)
                            ent[kk] = ent.get(kk, ZERO) + sgn
            # sheaf part with sign (-1)^p
            dm = e.differential(q, last)
            tgt = index.get((p, flag, q + 1))
            if not dm.is_zero() and tgt is not None:
                sgn = Q((-1) ** p)
                for (r, c), v in dm.entries.items():
                    kk = (tgt + r, src + c)
                    ent[kk] = ent.get(kk, ZERO) + sgn * v
    dims_chain = {-j: d for j, d in dims.items()}
    diffs = {}
    for j1, ent in ent_by_degree.items():
        rows = dims.get(j1, 0)
        cols = dims.get(j1 - 1, 0)
        if rows == 0 or cols == 0:
            continue
        m = QMatrix(rows, cols, {kk: v for kk, v in ent.items() if v != 0})
        if not m.is_zero():
            diffs[-(j1 - 1)] = m
    return ChainComplexQ(dims_chain, diffs, check=True)


def hypercohomology(e: SheafComplex):
    """{degree j: (dim, representative columns)} of derived global sections.

    Presented sheaves use the sections complex (their terms are sums of
    elementary injectives); others fall back to the nerve model.
    Representatives refer to the basis of the model used.
    """
    c = sections_complex(e) if e.rk_source is not None else nerve_complex(e)
    h = homology(c)
    return {-i: v for i, v in h.items()}


def hypercohomology_dims(e: SheafComplex) -> dict:
    return {j: d for j, (d, _) in hypercohomology(e).items()}


# ---------------------------------------------------------------------------
# Verdier duality and the global pairing
# ---------------------------------------------------------------------------


def verdier_dual(e: SheafComplex) -> SheafComplex:
    """Dual via the bridge: the dual of F(a) is F(T a).

    Sheaves without a presentation are first resolved by elementary
    injectives (single-degree inputs), after which the transport applies.
    """
    a = e.rk_source
    if a is None:
        a = rk_resolution(e)
    return from_rk(chain_dual(a))


def biduality_map_check(e: SheafComplex) -> bool:
    """Stalkwise homology of the double dual agrees with that of e."""
    dd = verdier_dual(verdier_dual(e))
    for sigma in e.complex.all_faces():
        if dd.stalk_cohomology_dims(sigma) != e.stalk_cohomology_dims(sigma):
            return False
    return True


def global_duality_pairing(e: SheafComplex, alpha: RKMap, n: int, degrees=None,
                           alpha_checked: bool = False):
    """Pairing matrices H^j(X;e) x H^{n-j}(X;e) -> Q from a self-duality.

    `alpha` is the presentation-level duality T(a) -> a.shift(-n) of the
    rk source of e (a stalkwise quasi-isomorphism; set `alpha_checked` if
    the caller already verified this).  For each j with nonzero H^j the
    returned matrix pairs the canonical hypercohomology bases; every
    matrix is checked nondegenerate.  `degrees` restricts the computation
    to selected cohomological degrees.
    """
    a = e.rk_source
    if a is None:
        raise ValueError("global_duality_pairing needs a presented sheaf")
    from .rk import is_stalkwise_quasi_iso
    from .exactlinalg import homology_reps_at

    if not alpha_checked and not is_stalkwise_quasi_iso(alpha):
        raise ValueError("alpha is not a stalkwise quasi-isomorphism")
    asm = a.assembly
    dual = asm.dual()
    cm = dual_assembly_comparison(a)        # dual -> assembly(T a)
    phi_asm = alpha.assembly()              # assembly(T a) -> assembly(a.shift(-n))
    if degrees is None:
        wanted = sorted({-i for i in dual.degrees()})
    else:
        wanted = sorted(set(degrees) | {n - j for j in degrees})
    reps = {}
    for j in wanted:
        m = homology_reps_at(dual, -j)
        if m.cols:
            reps[j] = m
    out = {}
    for j, w_j in reps.items():
        wn = reps.get(n - j)
        if wn is None:
            raise ValueError(f"duality pairing defect: H^{j} has no partner")
        # theta(w) = alpha(comparison(w)) in assembly degree n - j
        theta_cols = phi_asm.component(-j) * cm.component(-j) * w_j
        pairing = wn.transpose() * theta_cols
        r, _, _ = rank_kernel_image(pairing)
        if r != pairing.rows or pairing.rows != pairing.cols:
            raise ValueError(f"global duality pairing degenerate at j={j}")
        out[j] = pairing
    return out


# ---------------------------------------------------------------------------
# pushforward and resolution
# ---------------------------------------------------------------------------


class _LimitSpace:
    """Sections of a sheaf degree over a downward-arbitrary sub-poset.

    Coordinates are the concatenated stalks over the member faces; the
    section space is the kernel of the cover-compatibility matrix.
    """

    def __init__(self, e: SheafComplex, j: int, faces):
        self.e = e
        self.j = j
        self.faces = sorted((f for f in faces if e.stalk_dim(j, f)), key=_face_key)
        self.offs = {}
        off = 0
        for f in self.faces:
            self.offs[f] = off
            off += e.stalk_dim(j, f)
        self.total = off
        member = set(self.faces)
        ent = {}
        nrow = 0
        for tau in self.faces:
            for ups in e.complex.cofacets(tau):
                if ups not in member:
                    continue
                rho = e.restriction_step(j, tau, ups)
                for (r, c), v in rho.entries.items():
                    ent[(nrow + r, self.offs[tau] + c)] = v
                for r in range(e.stalk_dim(j, ups)):
                    key = (nrow + r, self.offs[ups] + r)
                    ent[key] = ent.get(key, ZERO) - ONE
                nrow += e.stalk_dim(j, ups)
        m = QMatrix(nrow, self.total, {k: v for k, v in ent.items() if v != 0})
        _, self.kernel, _ = rank_kernel_image(m)

    @property
    def dim(self):
        return self.kernel.cols

    def project_coords(self, other: "_LimitSpace") -> QMatrix:
        """Coordinate projection from this ambient space onto other's."""
        ent = {}
        for f, off2 in other.offs.items():
            off = self.offs.get(f)
            if off is None:
                continue
            for r in range(self.e.stalk_dim(self.j, f)):
                ent[(off2 + r, off + r)] = ONE
        return QMatrix(other.total, self.total, ent)

    def express(self, coords: QMatrix) -> QMatrix:
        """Coordinates of section columns in the kernel basis."""
        sol = solve(self.kernel, coords)
        if sol is None:
            raise RuntimeError("vector is not a section of the limit")
        return sol


def pushforward_sheaf(f: SimplicialMap, e: SheafComplex) -> SheafComplex:
    """Direct image: sections over the preimage of each star, as poset limits."""
    K, L = f.source, f.target
    if e.complex != K:
        raise ValueError("complex mismatch")
    fibers = {}
    all_K = list(K.all_faces())
    for sigma in L.all_faces():
        fs = set(sigma)
        fibers[sigma] = [tau for tau in all_K if fs <= set(f.image_face(tau))]
    spaces = {}
    stalks = {}
    for j in e.degrees():
        by = {}
        for sigma in L.all_faces():
            sp = _LimitSpace(e, j, fibers[sigma])
            if sp.dim:
                by[sigma] = sp.dim
                spaces[(j, sigma)] = sp
        if by:
            stalks[j] = by
    restrictions = {}
    for j, by in stalks.items():
        rs = {}
        for sigma in by:
            src = spaces[(j, sigma)]
            for tau in L.cofacets(sigma):
                tgt = spaces.get((j, tau))
                if tgt is None:
                    rs[(sigma, tau)] = QMatrix.zero(0, by[sigma])
                    continue
                rs[(sigma, tau)] = tgt.express(src.project_coords(tgt) * src.kernel)
        restrictions[j] = rs
    differentials = {}
    for j in stalks:
        by = {}
        for sigma, n0 in stalks[j].items():
            tgt = spaces.get((j + 1, sigma))
            if tgt is None:
                continue
            src = spaces[(j, sigma)]
            ent = {}
            for (r, c), v in src.kernel.entries.items():
                tau, local = _block_of(src, r)
                dm = e.differential(j, tau)
                off2 = tgt.offs.get(tau)
                if off2 is None:
                    continue
                for (r2, c2), w in dm.entries.items():
                    if c2 == local:
                        key = (off2 + r2, c)
                        ent[key] = ent.get(key, ZERO) + v * w
            img = QMatrix(tgt.total, n0, {k: v for k, v in ent.items() if v != 0})
            sol = tgt.express(img)
            if not sol.is_zero():
                by[sigma] = sol
        if by:
            differentials[j] = by
    return SheafComplex(L, stalks, restrictions, differentials, check=False)


def _block_of(space: _LimitSpace, row: int):
    for tau in reversed(space.faces):
        off = space.offs[tau]
        if row >= off:
            return tau, row - off
    raise KeyError(row)


def natural_pushforward_iso(f: SimplicialMap, a: RKComplex):
    """The canonical identification F(f_* a) -> f_* F(a).

    Returns (lhs sheaf, rhs sheaf, iso components {(j, face): QMatrix});
    a functional on a block over upsilon determines the section whose
    value at tau is its projection, which is exactly how the two stalk
    models line up.
    """
    lhs = from_rk(pushforward_rk(f, a))
    Fa = from_rk(a)
    rhs = pushforward_sheaf(f, Fa)
    pushed = pushforward_rk(f, a)
    labels = pushed.block_labels
    comps = {}
    for j in lhs.degrees():
        for sigma in f.target.all_faces():
            n = lhs.stalk_dim(j, sigma)
            if n == 0:
                if rhs.stalk_dim(j, sigma):
                    raise ValueError("stalk dimension mismatch in naturality check")
                continue
            # lhs basis: labels (upsilon, k) over faces of the target >= sigma
            cols = []
            sg = set(sigma)
            for sigma2 in pushed.faces_in_degree(j):
                if sg <= set(sigma2):
                    cols.extend(labels[j][sigma2])
            fibers = [tau for tau in f.source.all_faces()
                      if sg <= set(f.image_face(tau))]
            sp = _LimitSpace(Fa, j, fibers)
            ent = {}
            for cidx, (upsilon, k) in enumerate(cols):
                for tau in sp.faces:
                    if set(tau) <= set(upsilon):
                        pos = from_rk_labels(a, j, tau).index((upsilon, k))
                        ent[(sp.offs[tau] + pos, cidx)] = ONE
            coords = QMatrix(sp.total, n, ent)
            comps[(j, sigma)] = sp.express(coords)
    return lhs, rhs, comps


def rk_resolution(e: SheafComplex) -> RKComplex:
    """Present a single-degree sheaf by elementary injectives.

    The sheaf embeds in the sum of one elementary injective per face with
    multiplicity its stalk; iterating on cokernels terminates within the
    poset height, and the resulting complex of injectives is the bridge
    image of the returned face-graded complex (stalkwise exact, so it
    computes the sheaf in the derived sense).
    """
    degs = e.degrees()
    if len(degs) != 1:
        raise ValueError("rk_resolution handles single-degree sheaves; "
                         "construct complexes through from_rk instead")
    j0 = degs[0]
    K = e.complex
    faces = list(K.all_faces())
    # current sheaf data: stalk dims and composite restrictions
    cur_dims = {f: e.stalk_dim(j0, f) for f in faces}
    cur_restr = {}
    for sigma in faces:
        for tau in K.star(sigma):
            cur_restr[(sigma, tau)] = e.restriction(j0, sigma, tau)
    mults = []
    connecting = []
    for _ in range(K.dim + 3):
        if not any(cur_dims.values()):
            break
        mults.append(dict(cur_dims))
        # ambient stalk at tau: sum over sigma' >= tau of cur(sigma')
        amb_labels = {}
        for tau in faces:
            ls = []
            for sig2 in sorted(K.star(tau), key=_face_key):
                for k in range(cur_dims[sig2]):
                    ls.append((sig2, k))
            amb_labels[tau] = {lab: p for p, lab in enumerate(ls)}
        # embedding u_tau and cokernel projection pi_tau
        pi = {}
        sect = {}
        new_dims = {}
        for tau in faces:
            nl = len(amb_labels[tau])
            n0 = cur_dims[tau]
            ent = {}
            for (sig2, k), p in amb_labels[tau].items():
                rho = cur_restr[(tau, sig2)]
                for (r, c), v in rho.entries.items():
                    if r == k:
                        ent[(p, c)] = v
            u = QMatrix(nl, n0, ent)
            comp_rows = _complement_rows(u)
            new_dims[tau] = len(comp_rows)
            if nl:
                basis = u.hstack(QMatrix(nl, len(comp_rows),
                                         {(r, i): ONE for i, r in enumerate(comp_rows)}))
                inv = solve(basis, QMatrix.identity(nl))
                pi[tau] = inv.select_rows(range(n0, n0 + len(comp_rows)))
                sect[tau] = QMatrix(nl, len(comp_rows),
                                    {(r, i): ONE for i, r in enumerate(comp_rows)})
            else:
                pi[tau] = QMatrix.zero(0, 0)
                sect[tau] = QMatrix.zero(0, 0)
        # connecting blocks: c[(sigma'', sigma')] = pi_{sigma''} restricted to
        # the sigma'-summand of the ambient stalk at sigma''
        blocks = {}
        for tau in faces:
            p = pi[tau]
            if p.rows == 0:
                continue
            for (sig2, k), pos in amb_labels[tau].items():
                colm = {r: p[(r, pos)] for r in range(p.rows) if p[(r, pos)] != 0}
                if colm:
                    key = (tau, sig2)
                    blk = blocks.setdefault(key, {})
                    for r, v in colm.items():
                        blk[(r, k)] = v
        connecting.append((blocks, dict(cur_dims), new_dims))
        # next sheaf: cokernel with induced restrictions
        nxt_restr = {}
        for sigma in faces:
            for tau2 in K.star(sigma):
                if new_dims[sigma] == 0 or new_dims[tau2] == 0:
                    nxt_restr[(sigma, tau2)] = QMatrix.zero(new_dims[tau2],
                                                            new_dims[sigma])
                    continue
                # lift, restrict ambient coordinates, project
                ent = {}
                for (sig2, k), p_src in amb_labels[sigma].items():
                    p_tgt = amb_labels[tau2].get((sig2, k))
                    if p_tgt is not None:
                        ent[(p_tgt, p_src)] = ONE
                drop = QMatrix(len(amb_labels[tau2]), len(amb_labels[sigma]), ent)
                nxt_restr[(sigma, tau2)] = pi[tau2] * drop * sect[sigma]
        cur_dims = new_dims
        cur_restr = nxt_restr
    if any(cur_dims.values()):
        raise RuntimeError("injective resolution did not terminate")
    dims = {}
    for k, m in enumerate(mults):
        by = {f: d for f, d in m.items() if d}
        if by:
            dims[j0 + k] = by
    diffs = {}
    for k, (blocks, src_m, tgt_m) in enumerate(connecting):
        if not any(tgt_m.values()):
            continue
        bs = {}
        for (tau, sig2), ent in blocks.items():
            # sheaf map block I_{sig2} -> I_{tau} transposes to the rk block
            # R_{j0+k+1}(tau) -> R_{j0+k}(sig2) with sig2 >= tau... and the
            # bridge's sign convention contributes the global minus.
            m = QMatrix(tgt_m[tau], src_m[sig2], ent)
            bs[(sig2, tau)] = m.transpose().scale(-ONE)
        diffs[j0 + k + 1] = bs
    return RKComplex(K, dims, diffs, check=False)


def _complement_rows(u: QMatrix):
    """Row indices spanning a complement of the column space of u."""
    aug = u.hstack(QMatrix.identity(u.rows))
    _, pivots = _rref(aug)
    return [p - u.cols for p in pivots if p >= u.cols]
