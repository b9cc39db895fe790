import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from conftest import decompose
from radlap.errors import NodalError
from radlap.geometry import Domain, Field, circle, interval, rectangle
from radlap.nodal import UnionFind, courant_check, nodal_domains, nodal_tone_check, pleijel_ratio


def ndimage_count(f: Field, zero_tol=1e-8):
    """Independent count: ndimage.label on each sign, then periodic seams glued with csgraph."""
    d = f.domain
    v = f.values
    cut = zero_tol * np.abs(v).max()
    total = 0
    for sign in (1, -1):
        grid = np.zeros(d.grid, dtype=bool)
        grid[tuple(d.lattice_positions[sign * v > cut].T)] = True
        labels, n = ndimage.label(grid)
        if n == 0:
            continue
        rows, cols = [], []
        for axis in range(d.dim):
            if d.axis_bc(axis)[0] == "periodic":
                a, b = np.take(labels, 0, axis=axis).ravel(), np.take(labels, -1, axis=axis).ravel()
                keep = (a > 0) & (b > 0)
                rows.extend(a[keep] - 1)
                cols.extend(b[keep] - 1)
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        total += connected_components(graph, directed=False)[0]
    return total


class TestNodalDomains:
    def test_first_modes(self, square_64):
        assert nodal_domains(square_64.mode(1)).count == 1
        assert nodal_domains(square_64.mode(2)).count == 2

    def test_sin_three(self):
        d = interval(1.0, 200)
        part = nodal_domains(d.sample(lambda x: np.sin(3 * np.pi * x)))
        assert part.count == 3
        assert part.signs == ("+", "-", "+")

    def test_zero_field(self):
        with pytest.raises(NodalError):
            nodal_domains(Field(interval(1.0, 5), np.zeros(5)))

    def test_zero_tagged(self):
        d = interval(1.0, 5, "neumann")
        part = nodal_domains(Field(d, np.array([1.0, 1.0, 0.0, -1.0, -1.0])))
        assert part.labels[2] == -1 and part.count == 2
        np.testing.assert_array_equal(part.sizes(), [2, 2])

    def test_four_adjacency(self):
        dom = rectangle(1, 1, (3, 3))
        checker = np.indices((3, 3)).sum(axis=0) % 2 * 2.0 - 1.0
        part = nodal_domains(Field(dom, checker[tuple(dom.lattice_positions.T)]))
        assert part.count == 9

    def test_periodic_wrap(self):
        c = circle(1.0, 40)
        part = nodal_domains(c.sample(lambda x: np.cos(2 * np.pi * x)))
        assert part.count == 2

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from(["dirichlet", "periodic"]))
    def test_matches_ndimage(self, seed, bc):
        rng = np.random.default_rng(seed)
        dom = rectangle(1, 1, (9, 7), bc)
        smooth = ndimage.gaussian_filter(rng.standard_normal((9, 7)), 1.0, mode="wrap")
        f = Field(dom, smooth[tuple(dom.lattice_positions.T)])
        assert nodal_domains(f).count == ndimage_count(f)

    def test_masked_grid(self):
        mask = np.ones((6, 6), bool)
        mask[2:4, 2:4] = False
        dom = Domain("masked-grid", (1, 1), (6, 6), "dirichlet", mask=mask)
        f = Field(dom, np.where(dom.lattice_positions[:, 0] < 3, 1.0, -1.0))
        assert nodal_domains(f).count == 2 == ndimage_count(f)


def test_union_find():
    uf = UnionFind(6)
    uf.union(0, 1)
    uf.union(2, 3)
    uf.union(1, 3)
    assert uf.find(0) == uf.find(2)
    assert uf.find(4) != uf.find(5)
    assert uf.size[uf.find(0)] == 4


class TestCourant:
    def test_interval_tight(self, interval_2000):
        rows = courant_check(interval_2000, 50)
        assert [r.count for r in rows] == list(range(1, 51))

    def test_square(self, square_64):
        rows = courant_check(square_64, 60)
        assert all(r.ok for r in rows)
        assert rows[3].count <= 4

    @pytest.mark.parametrize("domain", [
        interval(1.0, 300, "neumann", metric="exp2x"),
        circle(2 * np.pi, 200),
        rectangle(1.0, 1.6, (30, 40), ("neumann", "dirichlet", "dirichlet", "neumann")),
        Domain("masked-grid", (1, 1), (40, 40), "dirichlet",
               mask=np.add.outer(np.arange(40), np.arange(40)) < 50),
    ], ids=["metric", "circle", "rect-mixed", "triangle"])
    def test_bound_and_simple_ground_state(self, domain):
        d = decompose(domain, 25)
        assert all(r.ok for r in courant_check(d, 25))
        assert len(d.multiplicity_groups[0]) == 1
        phi1 = nodal_domains(d.mode(1))
        assert phi1.count == 1 and np.all(phi1.labels >= 0)

    def test_kmax_checked(self, circle_256):
        with pytest.raises(ValueError):
            courant_check(circle_256, 6)


def second_order_ok(errs, floor=1e-11):
    return all(f <= c / 3.5 or f <= floor for c, f in zip(errs, errs[1:]))


class TestTone:
    def test_identity(self, interval_2000):
        assert nodal_tone_check(interval_2000, 1).rel_err <= 1e-10
        assert nodal_tone_check(interval_2000, 2).rel_err <= 5e-3

    @pytest.mark.parametrize("bc, metric", [
        ("dirichlet", None), (("dirichlet", "neumann"), None), ("neumann", None), ("dirichlet", "exp2x"),
    ], ids=["dir", "mixed", "neu", "exp2x"])
    def test_rate(self, bc, metric):
        grids = (50, 100, 200, 400)
        errs = {k: [] for k in (2, 3, 4)}
        for n in grids:
            d = decompose(interval(1.0, n, bc, metric=metric), 4)
            for k in errs:
                errs[k].append(nodal_tone_check(d, k).rel_err)
        # k=2: halving h cuts the error at least 3.5x
        assert second_order_ok(errs[2])
        # higher k: sub-grid lengths are rounded to whole cells, so only an h^2 envelope is asserted
        for k in (3, 4):
            assert all(e <= 1.0 / (n + 1) ** 2 for e, n in zip(errs[k], grids))

    def test_square(self, square_64):
        c = nodal_tone_check(square_64, 2)
        assert c.rel_err <= 0.05

    def test_2d_needs_dirichlet(self):
        d = decompose(rectangle(1, 1, (10, 10), "neumann"), 2)
        with pytest.raises(NodalError):
            nodal_tone_check(d, 2)

    def test_unresolvable(self):
        d = decompose(interval(1.0, 20), 12)
        with pytest.raises(NodalError):
            nodal_tone_check(d, 12)


class TestPleijel:
    def test_square_window(self, square_64):
        rep = pleijel_ratio(square_64, (5, 60))
        assert rep.asserted
        assert all(n <= k - 1 for n, k in zip(rep.counts, rep.ks))
        assert pleijel_ratio(square_64, (30, 60)).max_ratio < 1

    def test_interval_reports_only(self, interval_2000):
        rep = pleijel_ratio(interval_2000, (1, 50))
        assert not rep.asserted and rep.notice
        assert set(rep.ratios) == {1.0}

    def test_first_ratio(self, circle_256):
        assert pleijel_ratio(circle_256, (1, 1)).ratios == (1.0,)

    def test_range_checked(self, circle_256):
        with pytest.raises(ValueError):
            pleijel_ratio(circle_256, (0, 3))
