import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radlap.errors import DomainEmptyError, DomainError, DomainMismatchError
from radlap.geometry import (
    Domain, Field, MetricWeight, VecField, build_domain, christoffel, christoffel_field, circle,
    covariant_derivative, diffgeo_report, divergence, divergence_via_christoffel, gradient, interval,
    lie_bracket, load_domain_spec, metric_by_name, metric_compatibility_defect, product_rule_defect,
    rectangle, refine, torsion_defect, volume,
)


class TestBuildDomain:
    def test_dirichlet_interval_layout(self):
        d = build_domain({"kind": "interval", "lengths": [1.0], "grid": [4], "bc": "dirichlet"})
        np.testing.assert_allclose(d.x, [0.2, 0.4, 0.6, 0.8])
        assert d.spacing == pytest.approx((0.2,))

    def test_circle_forces_periodic(self):
        d = build_domain({"kind": "circle", "lengths": 2 * np.pi, "grid": 8, "bc": "dirichlet"})
        assert d.n == 8
        assert d.spacing[0] == pytest.approx(np.pi / 4)
        assert set(d.bc) == {"periodic"}

    def test_rectangle_interior_nodes(self):
        assert build_domain({"kind": "rectangle", "lengths": [1, 1], "grid": [3, 3]}).n == 9

    def test_neumann_includes_boundary(self):
        d = interval(1.0, 5, "neumann")
        np.testing.assert_allclose(d.x, [0, 0.25, 0.5, 0.75, 1.0])

    def test_mixed_layout(self):
        d = interval(1.0, 4, ("neumann", "dirichlet"))
        np.testing.assert_allclose(d.x, [0, 0.25, 0.5, 0.75])

    @pytest.mark.parametrize("spec, field", [
        ({"kind": "sphere", "lengths": 1, "grid": 8}, "kind"),
        ({"kind": "interval", "lengths": -1, "grid": 8}, "lengths"),
        ({"kind": "interval", "lengths": 1, "grid": 2}, "grid"),
        ({"kind": "interval", "lengths": 1, "grid": 8, "bc": "robin"}, "bc"),
        ({"kind": "rectangle", "lengths": [1, 1], "grid": [8, 8], "metric": "exp2x"}, "metric"),
        ({"kind": "interval", "lengths": 1, "grid": 8, "metric": "cosh"}, "metric"),
    ])
    def test_malformed_spec_names_field(self, spec, field):
        with pytest.raises(DomainError) as exc:
            build_domain(spec)
        assert exc.value.field == field

    def test_empty_mask(self):
        with pytest.raises(DomainEmptyError):
            build_domain({"kind": "masked-grid", "lengths": [1, 1], "grid": [4, 4], "mask": np.zeros((4, 4))})

    def test_disconnected_mask(self):
        mask = np.zeros((5, 5), dtype=int)
        mask[0, 0] = mask[4, 4] = 1
        with pytest.raises(DomainError) as exc:
            build_domain({"kind": "masked-grid", "lengths": [1, 1], "grid": [5, 5], "mask": mask})
        assert exc.value.field == "mask"

    def test_equality_and_hash(self):
        assert interval(1.0, 10) == interval(1.0, 10)
        assert hash(interval(1.0, 10)) == hash(interval(1.0, 10))
        assert interval(1.0, 10) != interval(1.0, 11)


class TestSpecFiles:
    def test_json(self, tmp_path):
        p = tmp_path / "d.json"
        p.write_text(json.dumps({"kind": "interval", "lengths": [1.0], "grid": [50],
                                 "bc": ["dirichlet", "neumann"], "metric": "exp2x"}))
        d = load_domain_spec(p)
        assert d.bc == ("dirichlet", "neumann")
        assert d.metric.name == "exp2x"

    def test_yaml_mask(self, tmp_path):
        p = tmp_path / "d.yaml"
        p.write_text("kind: masked-grid\nlengths: [1, 1]\ngrid: [3, 3]\n"
                     "mask:\n  - [1, 1, 0]\n  - [0, 1, 0]\n  - [0, 1, 1]\n")
        d = load_domain_spec(p)
        assert d.n == 5

    def test_sampled_metric_array(self):
        x = np.linspace(0, 1, 401)
        d = build_domain({"kind": "interval", "lengths": 1, "grid": 200, "metric": list(np.exp(2 * x))})
        assert volume(d) == pytest.approx(np.e - 1, rel=1e-4)


class TestVolume:
    def test_flat_interval(self):
        assert volume(interval(1.0, 37)) == pytest.approx(1.0)

    def test_exp_metric_second_order(self):
        errs = [abs(volume(interval(1.0, n, metric="exp2x")) - (np.e - 1)) for n in (100, 201)]
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)

    def test_rectangle(self):
        assert volume(rectangle(np.pi, np.pi, (20, 30))) == pytest.approx(np.pi ** 2)

    def test_circle(self):
        assert volume(circle(2 * np.pi, 16)) == pytest.approx(2 * np.pi)


class TestMetric:
    @pytest.mark.parametrize("name", ["flat", "exp2x", "one_plus_x2"])
    def test_sqrt_squares_back(self, name):
        m = metric_by_name(name)
        x = np.linspace(-1, 2, 50)
        np.testing.assert_allclose(m.sqrt_samples(x) ** 2, m.samples(x), rtol=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            MetricWeight.from_samples(np.array([1.0, 0.0, 1.0]), 1.0)


class TestCalculusOfFields:
    def test_gradient_quadratic_exact(self):
        d = interval(1.0, 4)
        np.testing.assert_allclose(gradient(d.sample(lambda x: x ** 2)).components[0], 2 * d.x, atol=1e-14)

    def test_gradient_of_constant(self):
        d = rectangle(1, 2, (6, 5), ("neumann", "dirichlet", "periodic", "periodic"))
        for comp in gradient(Field(d, np.full(d.n, 3.0))).components:
            assert np.abs(comp).max() < 1e-12

    def test_gradient_raises_index(self):
        d = interval(1.0, 50, metric="exp2x")
        np.testing.assert_allclose(gradient(d.sample(lambda x: x)).components[0], np.exp(-2 * d.x), atol=1e-14)

    def test_divergence_flat_linear(self):
        d = interval(1.0, 30, "neumann")
        np.testing.assert_allclose(divergence(VecField(d, (d.x,))).values, 1.0, atol=1e-12)

    def test_divergence_constant_on_circle(self):
        d = circle(2 * np.pi, 32)
        assert np.abs(divergence(VecField.constant(d, 2.0)).values).max() < 1e-12

    def test_divergence_metric_constant(self):
        d = interval(1.0, 400, metric="exp2x")
        np.testing.assert_allclose(divergence(VecField.constant(d, 1.5)).values[2:-2], 1.5, rtol=1e-4)

    def test_divergence_via_christoffel(self):
        d = interval(1.0, 60, metric="exp2x")
        np.testing.assert_allclose(divergence_via_christoffel(VecField.constant(d, 2.0)).values, 2.0)
        np.testing.assert_allclose(divergence_via_christoffel(VecField(d, (d.x,))).values, 1 + d.x, atol=1e-12)

    def test_divergence_forms_agree_second_order(self):
        gaps = []
        for n in (100, 201):
            d = interval(1.0, n, metric="exp2x")
            P = VecField(d, (np.sin(3 * d.x),))
            gaps.append(np.abs(divergence(P).values - divergence_via_christoffel(P).values)[3:-3].max())
        assert gaps[0] / gaps[1] > 3.5


class TestChristoffel:
    def test_flat_rectangle_zero(self):
        assert not christoffel_field(rectangle(1, 1, (5, 5))).any()

    def test_exp_metric_is_one(self):
        assert np.all(christoffel_field(interval(1.0, 40, metric="exp2x")) == 1.0)

    def test_one_plus_x2_at_one(self):
        d = interval(2.0, 101, metric="one_plus_x2")
        i = int(np.argmin(np.abs(d.x - 1.0)))
        assert d.x[i] == pytest.approx(1.0)
        assert christoffel(d, i)[0, 0, 0] == pytest.approx(0.5)

    def test_sampled_metric_matches_analytic(self):
        errs = []
        for n in (100, 201):
            d = interval(1.0, n, metric="exp2x")
            fine = np.linspace(0, 1, 4 * n + 1)
            sampled = build_domain({"kind": "interval", "lengths": 1, "grid": n,
                                    "metric": list(np.exp(2 * fine))})
            errs.append(np.abs(christoffel_field(sampled) - christoffel_field(d))[5:-5].max())
        assert errs[1] < errs[0]


class TestBracketAndConnection:
    def test_bracket_antisymmetric(self, rng):
        d = interval(1.0, 20)
        P = VecField(d, (rng.standard_normal(d.n),))
        assert np.abs(lie_bracket(P, P).components[0]).max() == 0

    def test_bracket_of_constants(self):
        d = rectangle(1, 1, (5, 6))
        B = lie_bracket(VecField.constant(d, 1.0, 2.0), VecField.constant(d, -1.0, 0.5))
        assert all(np.abs(c).max() < 1e-12 for c in B.components)

    def test_bracket_example(self):
        d = interval(1.0, 12)
        B = lie_bracket(VecField.constant(d, 1.0), VecField(d, (d.x,)))
        np.testing.assert_allclose(B.components[0], 1.0)

    def test_bracket_mismatch(self):
        with pytest.raises(DomainMismatchError):
            lie_bracket(VecField.constant(interval(1.0, 10), 1.0), VecField.constant(interval(1.0, 11), 1.0))

    def test_covariant_examples(self):
        flat = interval(1.0, 10)
        assert np.abs(covariant_derivative(VecField.constant(flat, 1.0),
                                           VecField.constant(flat, 3.0)).components[0]).max() < 1e-12
        np.testing.assert_allclose(covariant_derivative(VecField.constant(flat, 1.0),
                                                        VecField(flat, (flat.x,))).components[0], 1.0)
        curved = interval(1.0, 10, metric="exp2x")
        one = VecField.constant(curved, 1.0)
        np.testing.assert_allclose(covariant_derivative(one, one).components[0], 1.0)

    def test_covariant_mismatch(self):
        with pytest.raises(DomainMismatchError):
            covariant_derivative(VecField.constant(interval(1.0, 10), 1.0),
                                 VecField.constant(circle(1.0, 10), 1.0))


@pytest.mark.parametrize("make", [
    lambda: interval(1.0, 80, metric="exp2x"),
    lambda: interval(2.0, 80, "neumann", metric="one_plus_x2"),
    lambda: circle(2 * np.pi, 64),
    lambda: rectangle(1.0, 1.5, (24, 30)),
], ids=["exp2x", "one_plus_x2", "circle", "rectangle"])
def test_second_order_identities(make):
    coarse = make()
    fine = refine(coarse)
    for defect in (metric_compatibility_defect, product_rule_defect):
        c, f = defect(coarse), defect(fine)
        assert c / f > 3.5 or f < 1e-11, defect.__name__
    assert torsion_defect(fine) <= torsion_defect(coarse) / 4 + 1e-11


def test_refine_halves_spacing():
    for d in (interval(1.0, 20), interval(1.0, 20, "neumann"), circle(1.0, 20), rectangle(1, 1, (9, 9))):
        assert refine(d).spacing == pytest.approx(tuple(h / 2 for h in d.spacing))


def test_diffgeo_report_passes():
    assert all(r.ok for r in diffgeo_report(interval(1.0, 200, metric="exp2x")))


class TestField:
    def test_length_checked(self):
        with pytest.raises(DomainError):
            Field(interval(1.0, 5), np.zeros(4))

    def test_finite_checked(self):
        with pytest.raises(DomainError):
            Field(interval(1.0, 3), np.array([0.0, np.nan, 1.0]))

    def test_immutable(self):
        f = Field(interval(1.0, 3), np.zeros(3))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_arithmetic_mismatch(self):
        with pytest.raises(DomainMismatchError):
            Field(interval(1.0, 3), np.zeros(3)) + Field(interval(2.0, 3), np.zeros(3))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5))
    def test_arithmetic(self, vals):
        d = interval(1.0, 5)
        f = Field(d, np.array(vals))
        np.testing.assert_allclose((f + f - f).values, f.values)
        np.testing.assert_allclose((-f).values, -np.array(vals))


def test_masked_grid_only_dirichlet():
    with pytest.raises(DomainError):
        Domain("masked-grid", (1.0, 1.0), (4, 4), "neumann", mask=np.ones((4, 4), bool))
