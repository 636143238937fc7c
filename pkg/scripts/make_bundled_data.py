#!/usr/bin/env python3
"""Regenerate the bundled complexes in src/wittsheaf/data and ./data.

Each file is validated before writing (pseudomanifold structure, homology,
orientability, and for cp2_9 the +1 cup signature normalization), so the
bundled data cannot silently drift from what the tests assume.
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from wittsheaf.simplicial import (
    SimplicialComplex,
    NonOrientableError,
    boundary_simplex,
    bowtie,
    cup_pairing,
    links_are_homology_spheres,
    orient,
    pinched_torus,
    product_orientation,
    to_json,
)
from wittsheaf.exactlinalg import signature


def heisenberg_translate(v, a, b):
    x, y = divmod(v, 3)
    return 3 * ((x + a) % 3) + ((y + b) % 3)


def make_cp2():
    reps = [(0, 1, 2, 3, 4), (0, 1, 3, 4, 6), (0, 1, 3, 5, 7), (0, 1, 4, 5, 6)]
    facets = set()
    for s in reps:
        for a in range(3):
            for b in range(3):
                facets.add(tuple(sorted(heisenberg_translate(v, a, b) for v in s)))
    k = SimplicialComplex(9, sorted(facets), name="cp2_9")
    assert k.f_vector() == (9, 36, 84, 90, 36)
    assert k.homology_dims() == {0: 1, 2: 1, 4: 1}
    assert links_are_homology_spheres(k)[0]
    o = orient(k)
    if signature(cup_pairing(k, o)) != 1:
        o = o.reversed()
    assert signature(cup_pairing(k, o)) == 1
    return k, o


def make_torus():
    facets = []
    for i in range(7):
        facets.append(tuple(sorted((i % 7, (i + 1) % 7, (i + 3) % 7))))
        facets.append(tuple(sorted((i % 7, (i + 2) % 7, (i + 3) % 7))))
    k = SimplicialComplex(7, facets, name="torus_7")
    assert k.homology_dims() == {0: 1, 1: 2, 2: 1}
    return k, orient(k)


def make_rp2():
    facets = [(0, 1, 2), (0, 1, 3), (0, 2, 4), (0, 3, 5), (0, 4, 5),
              (1, 2, 5), (1, 3, 4), (1, 4, 5), (2, 3, 4), (2, 3, 5)]
    k = SimplicialComplex(6, facets, name="rp2_6")
    assert k.homology_dims() == {0: 1}
    assert k.euler_characteristic() == 1
    try:
        orient(k)
        raise AssertionError("rp2_6 must be non-orientable")
    except NonOrientableError:
        pass
    return k, None


def main():
    out = {}

    for n, want in ((3, {0: 1, 2: 1}), (4, {0: 1, 3: 1}), (5, {0: 1, 4: 1})):
        k = boundary_simplex(n)
        assert k.homology_dims() == want
        out[f"boundary_delta_{n}"] = (k, orient(k))

    t2, t2o = make_torus()
    out["torus_7"] = (t2, t2o)
    out["rp2_6"] = make_rp2()
    cp2, cp2o = make_cp2()
    out["cp2_9"] = (cp2, cp2o)

    st2 = t2.suspension()
    st2.name = "susp_t2"
    assert st2.homology_dims() == {0: 1, 2: 2, 3: 1}
    out["susp_t2"] = (st2, orient(st2))

    pt = pinched_torus()
    assert pt.is_pseudomanifold()[0]
    out["pinched_torus"] = (pt, orient(pt))

    bw = bowtie()
    assert not bw.is_pseudomanifold()[0]
    out["bowtie"] = (bw, None)

    s2 = boundary_simplex(3)
    prod, _, _ = s2.staircase_product(s2)
    prod.name = "s2xs2"
    assert prod.homology_dims() == {0: 1, 2: 2, 4: 1}
    po = product_orientation(orient(s2), orient(s2), prod)
    assert po.check()
    out["s2xs2"] = (prod, po)

    root = pathlib.Path(__file__).resolve().parents[1]
    for target in (root / "src" / "wittsheaf" / "data", root / "data"):
        target.mkdir(parents=True, exist_ok=True)
        for name, (k, o) in sorted(out.items()):
            text = to_json(k, o)
            json.loads(text)
            (target / f"{name}.json").write_text(text + "\n")
            print(f"wrote {target / (name + '.json')}  f={k.f_vector()}")


if __name__ == "__main__":
    main()
