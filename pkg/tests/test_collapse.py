import numpy as np
import pytest

from collapsekit.collapse import check_collapsibility, check_strict_collapsibility
from collapsekit.errors import SchemeError
from collapsekit.loglinear import decompose
from collapsekit.subsets import axes_of, mask_of, submasks
from collapsekit.tables import CategoricalScheme, ContingencyTable

from conftest import ci_constructed_table, random_positive_table


def product_table(rng, shape=(2, 3, 2)):
    margins = []
    for m in shape:
        v = rng.uniform(0.2, 1.0, m)
        margins.append(v / v.sum())
    cells = margins[0][:, None, None] * margins[1][None, :, None] * margins[2][None, None, :]
    scheme = CategoricalScheme(
        tuple((f"x{j}", tuple(f"l{i}" for i in range(m))) for j, m in enumerate(shape))
    )
    return ContingencyTable(scheme, cells / cells.sum(), "probability")


class TestPlainCollapsibility:
    def test_ci_construction_collapsible(self):
        rng = np.random.default_rng(0)
        t = ci_constructed_table(rng)
        v = check_collapsibility(t, ["x1", "x2"], ["x1", "x2"])
        assert v.collapsible
        assert v.max_residual <= 1e-12

    def test_product_table_everything_collapsible(self):
        rng = np.random.default_rng(1)
        t = product_table(rng)
        for target, margin in ((["x0"], ["x0"]), (["x0"], ["x0", "x1"]), (["x0", "x1"], ["x0", "x1"])):
            v = check_collapsibility(t, target, margin)
            assert v.collapsible
            assert v.max_residual <= 1e-12

    def test_admission_not_collapsible(self, admission_table):
        v = check_collapsibility(admission_table.normalize(), ["A", "X"], ["A", "X"])
        assert not v.collapsible
        assert v.max_residual > 0.1

    def test_routes_agree_numerically(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            t = random_positive_table(rng, n=int(rng.integers(3, 5)), max_levels=3)
            n = t.scheme.n
            b_size = int(rng.integers(1, n))
            b = tuple(sorted(rng.permutation(n)[:b_size].tolist()))
            a_size = int(rng.integers(1, len(b) + 1))
            a = tuple(sorted(rng.permutation(np.array(b))[:a_size].tolist()))
            v = check_collapsibility(t, a, b)
            assert abs(v.max_residual - v.direct_gap) <= 1e-10

    def test_delta_consistency(self):
        # averaged residuals decompose into sums of per-subset differences:
        # dtilde_A = sum over Z inside A of (eta_Z - tau_Z)
        rng = np.random.default_rng(3)
        t = random_positive_table(rng, n=3, max_levels=3)
        b_axes = (0, 1)
        full = decompose(t)
        marg_table = t.marginalize(b_axes)
        marg = decompose(marg_table)
        ltilde_b = np.log(t.cells).mean(axis=2)
        d = np.log(marg_table.cells) - ltilde_b
        for a_mask in (0b01, 0b10, 0b11):
            a_axes = axes_of(a_mask)
            comp = tuple(x for x in range(2) if x not in a_axes)
            dtilde = d.mean(axis=comp) if comp else d
            total = np.zeros_like(np.asarray(dtilde, dtype=float))
            for z in submasks(a_mask):
                z_axes = axes_of(z)
                delta = np.asarray(marg.tau(z_axes)) - np.asarray(full.tau(z_axes))
                if z == a_mask:
                    total = total + delta
                else:
                    shape = tuple(
                        d.shape[x] if (z >> x) & 1 else 1 for x in a_axes
                    )
                    total = total + delta.reshape(shape)
            assert np.max(np.abs(np.asarray(dtilde) - total)) <= 1e-9

    def test_target_outside_margin(self, admission_table):
        with pytest.raises(SchemeError):
            check_collapsibility(admission_table.normalize(), ["A", "D"], ["A", "X"])

    def test_margin_full_set(self, admission_table):
        with pytest.raises(SchemeError):
            check_collapsibility(admission_table.normalize(), ["A"], ["A", "X", "D"])


class TestStrictCollapsibility:
    def test_ci_construction_strict(self):
        rng = np.random.default_rng(4)
        t = ci_constructed_table(rng)
        v = check_strict_collapsibility(t, ["x1"], ["x2"], ["x3"])
        assert v.strict
        assert v.interaction_zero_ok
        assert v.ci is not None and v.ci.holds
        # the verdict covers tau_{x1} and tau_{x1,x2}
        assert set(v.set_gaps) == {("x1",), ("x1", "x2")}
        assert all(g <= 1e-10 for g in v.set_gaps.values())

    def test_strict_implies_plain_for_every_set_member(self):
        rng = np.random.default_rng(5)
        t = ci_constructed_table(rng)
        assert check_strict_collapsibility(t, ["x1"], ["x2"], ["x3"]).strict
        for target in (["x1"], ["x1", "x2"]):
            assert check_collapsibility(t, target, ["x1", "x2"]).collapsible

    def test_product_table_strict_everywhere(self):
        rng = np.random.default_rng(6)
        t = product_table(rng)
        names = t.scheme.names
        for a, b, c in (
            ((names[0],), (names[1],), (names[2],)),
            ((names[1],), (names[2],), (names[0],)),
            ((names[0], names[1]), (), (names[2],)),
        ):
            assert check_strict_collapsibility(t, a, b, c).strict

    def test_death_penalty_not_strict(self, death_penalty_table):
        p = death_penalty_table.normalize(smoothing=0.5)
        v = check_strict_collapsibility(p, ["A", "D"], [], ["V"])
        assert not v.strict
        assert not v.ci.holds

    def test_perturbation_flips_strictness(self):
        rng = np.random.default_rng(7)
        t = ci_constructed_table(rng)
        assert check_strict_collapsibility(t, ["x1"], ["x2"], ["x3"]).strict
        cells = t.cells.copy()
        cells[(0,) * cells.ndim] += 0.01
        cells /= cells.sum()
        pert = ContingencyTable(t.scheme, cells, "probability")
        v = check_strict_collapsibility(pert, ["x1"], ["x2"], ["x3"])
        assert not v.strict
        assert v.zero_set_max > 1e-8 or max(v.set_gaps.values()) > 1e-8

    def test_partition_required(self, admission_table):
        p = admission_table.normalize()
        with pytest.raises(SchemeError):
            check_strict_collapsibility(p, ["A"], ["X"], ["X"])
        with pytest.raises(SchemeError):
            check_strict_collapsibility(p, ["A"], ["X"], [])

    def test_three_binary_iff_pattern(self):
        # strict collapsibility of a 3-way table over the third variable is
        # exactly the vanishing of the three-factor and the target-third terms
        rng = np.random.default_rng(8)
        t = ci_constructed_table(rng, 2, 2, 2)
        dec = decompose(t)
        assert dec.max_abs([0, 1, 2]) <= 1e-10
        assert dec.max_abs([0, 2]) <= 1e-10
        assert check_strict_collapsibility(t, ["x1"], ["x2"], ["x3"]).strict
