import json
import random

import pytest

from wittsheaf.exactlinalg import signature
from wittsheaf.wittq import witt_class_of_symmetric_matrix
from wittsheaf.simplicial import (
    NonOrientableError,
    Orientation,
    SimplicialComplex,
    SimplicialMap,
    boundary_simplex,
    bowtie,
    bundled_names,
    cup_pairing,
    from_json,
    links_are_homology_spheres,
    load_bundled,
    orient,
    pinched_torus,
    product_orientation,
    simplex,
    to_json,
)


@pytest.fixture(scope="module")
def torus():
    return load_bundled("torus_7")[0]


@pytest.fixture(scope="module")
def cp2():
    return load_bundled("cp2_9")


@pytest.fixture(scope="module")
def rp2():
    return load_bundled("rp2_6")[0]


# -- pseudomanifold recognition ------------------------------------------------

def test_pm_boundary_tetrahedron():
    ok, wit = boundary_simplex(3).is_pseudomanifold()
    assert ok and wit is None


def test_pm_bowtie_fails_with_edge_witness():
    ok, wit = bowtie().is_pseudomanifold()
    assert not ok
    assert len(wit) == 2  # an edge lying in a single triangle


def test_pm_solid_tetrahedron_fails():
    ok, wit = simplex(3).is_pseudomanifold()
    assert not ok
    assert len(wit) == 3  # a boundary triangle in one 3-simplex


# -- links and stars -------------------------------------------------------------

def test_link_of_vertex_in_sphere():
    s2 = boundary_simplex(3)
    lk = s2.link((0,))
    assert lk.f_vector() == (3, 3)
    assert lk.homology_dims() == {0: 1, 1: 1}


def test_link_of_edge_in_sphere():
    lk = boundary_simplex(3).link((0, 1))
    assert lk.f_vector() == (2,)
    assert lk.homology_dims() == {0: 2}


def test_link_of_cone_point_in_suspended_torus(torus):
    st = torus.suspension()
    north = (torus.vertex_count,)
    lk = st.link(north)
    assert lk.vertex_count == 7
    assert lk.f_vector() == (7, 21, 14)
    assert lk.homology_dims() == {0: 1, 1: 2, 2: 1}


def test_closed_star_is_join_of_face_and_link(torus):
    for k in (boundary_simplex(3), torus, pinched_torus()):
        for d in range(k.dim):
            for face in k.faces(d)[:6]:
                cs = k.closed_star(face)
                lk = k.link(face)
                sigma = SimplicialComplex(len(face), [tuple(range(len(face)))])
                jn = sigma.join(lk)
                # canonical vertex identification of the join with the star
                labels = list(face) + list(lk.vertex_labels)
                mapped = sorted(tuple(sorted(labels[v] for v in f)) for f in jn.facets)
                assert mapped == sorted(cs.facets)


# -- constructions ----------------------------------------------------------------

def test_suspension_of_circle_is_sphere():
    s = boundary_simplex(2).suspension()
    assert s.homology_dims() == {0: 1, 2: 1}


def test_cone_is_acyclic(torus):
    c = torus.cone()
    assert c.homology_dims() == {0: 1}


def test_barycentric_subdivision_counts_and_homology():
    sd = boundary_simplex(3).barycentric_subdivision()
    assert sd.f_vector() == (14, 36, 24)
    assert sd.homology_dims() == {0: 1, 2: 1}
    assert len(sd.sd_vertex_faces) == 14


def test_staircase_square():
    prod, p1, p2 = simplex(1).staircase_product(simplex(1))
    assert prod.f_vector() == (4, 5, 2)
    assert p1.image_face((0, 3)) == (0, 1)


def test_staircase_torus():
    circle = boundary_simplex(2)
    prod, _, _ = circle.staircase_product(circle)
    assert prod.homology_dims() == {0: 1, 1: 2, 2: 1}


def test_staircase_s2_x_s2():
    prod = load_bundled("s2xs2")[0]
    assert prod.homology_dims() == {0: 1, 2: 2, 4: 1}


def test_euler_characteristic_multiplicative(torus):
    rng = random.Random(1)
    pairs = [(boundary_simplex(2), torus), (simplex(2), boundary_simplex(3))]
    for a, b in pairs:
        prod, _, _ = a.staircase_product(b)
        assert prod.euler_characteristic() == (
            a.euler_characteristic() * b.euler_characteristic()
        )


def test_euler_characteristic_invariant_under_subdivision(torus):
    for k in (torus, boundary_simplex(4)):
        assert k.barycentric_subdivision().euler_characteristic() == k.euler_characteristic()


def test_projections_are_simplicial(torus):
    prod, p1, p2 = boundary_simplex(2).staircase_product(torus)
    for f in prod.facets[:10]:
        assert boundary_simplex(2).has_face(p1.image_face(f))
        assert torus.has_face(p2.image_face(f))


# -- orientations -----------------------------------------------------------------

def test_orient_sphere():
    o = orient(boundary_simplex(3))
    assert o.check()


def test_orient_rp2_fails_with_witness(rp2):
    with pytest.raises(NonOrientableError) as exc:
        orient(rp2)
    assert len(exc.value.witness) >= 3


def test_orient_suspended_torus(torus):
    assert orient(torus.suspension()).check()


def test_fundamental_cycle_is_cycle(torus):
    for k in (boundary_simplex(3), boundary_simplex(5), torus):
        o = orient(k)
        assert o.check()
        assert not o.reversed().fundamental_cycle() == o.fundamental_cycle()
        assert o.reversed().check()


# -- cup pairing ------------------------------------------------------------------

def test_cup_pairing_s4_empty():
    m = cup_pairing(boundary_simplex(5))
    assert m.rows == 0 and m.cols == 0


def test_cup_pairing_s2xs2_hyperbolic():
    prod, ori = load_bundled("s2xs2")
    m = cup_pairing(prod, ori)
    assert m.rows == 2
    assert signature(m) == 0
    assert witt_class_of_symmetric_matrix(m).is_zero()


def test_cup_pairing_cp2_signature_one(cp2):
    k, o = cp2
    m = cup_pairing(k, o)
    assert m.rows == 1
    assert signature(m) == 1


def test_cup_pairing_reversal_negates(cp2):
    k, o = cp2
    assert cup_pairing(k, o.reversed()) == -cup_pairing(k, o)


def test_cup_pairing_relabeling_congruent(cp2):
    k, o = cp2
    base = witt_class_of_symmetric_matrix(cup_pairing(k, o))
    rng = random.Random(5)
    for _ in range(3):
        perm = list(range(k.vertex_count))
        rng.shuffle(perm)
        facets = [tuple(sorted(perm[v] for v in f)) for f in k.facets]
        k2 = SimplicialComplex(k.vertex_count, facets)
        o2 = orient(k2)
        m2 = cup_pairing(k2, o2)
        cls = witt_class_of_symmetric_matrix(m2)
        assert cls in (base, -base)  # propagation root sign is arbitrary


def test_cup_pairing_rejects_nonmanifold(torus):
    st = torus.suspension()
    prod, _, _ = st.staircase_product(boundary_simplex(2))
    with pytest.raises(ValueError):
        cup_pairing(prod)


# -- JSON interchange ---------------------------------------------------------------

def test_json_round_trip(cp2):
    k, o = cp2
    text = to_json(k, o)
    k2, o2 = from_json(text)
    assert k2 == k
    assert o2.signs == o.signs
    assert to_json(k2, o2) == text


def test_json_rejects_bad_orientation():
    k = boundary_simplex(3)
    o = orient(k)
    bad = list(o.signs)
    bad[0] = -bad[0]
    obj = json.loads(to_json(k, o))
    obj["orientation"] = bad
    with pytest.raises(ValueError):
        from_json(json.dumps(obj))


def test_json_rejects_missing_keys():
    with pytest.raises(ValueError):
        from_json(json.dumps({"vertices": 3}))


def test_bundled_inventory():
    names = bundled_names()
    for expected in ("boundary_delta_3", "boundary_delta_5", "torus_7",
                     "rp2_6", "cp2_9", "susp_t2", "bowtie", "pinched_torus",
                     "s2xs2"):
        assert expected in names


def test_bundled_cp2_is_normalized(cp2):
    k, o = cp2
    assert signature(cup_pairing(k, o)) == 1


def test_pinched_torus_structure():
    pt = pinched_torus()
    ok, _ = pt.is_pseudomanifold()
    assert ok
    lk = pt.link((0,))
    assert lk.homology_dims() == {0: 2, 1: 2}  # two disjoint circles
    assert pt.homology_dims() == {0: 1, 1: 1, 2: 1}


def test_simplicial_map_validation(torus):
    with pytest.raises(ValueError):
        SimplicialMap(boundary_simplex(3), torus, (0, 0, 1, 2))
    collapse = SimplicialMap(simplex(1), simplex(0), (0, 0))
    assert collapse.image_face((0, 1)) == (0,)
