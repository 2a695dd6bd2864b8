import numpy as np
import pytest

from predfix.errors import ConfigError
from predfix.generators import (
    FAMILIES,
    GeneratorSpec,
    generate,
    label_dataset,
    tsp_best_tour,
    tsp_subtour_rows,
)
from predfix.milp import check_feasibility
from predfix.oracle import enumerate_solve
from predfix.simplex import OPTIMAL

SMALL = dict(n_train=2, n_val=1, n_test=1, timesteps=4)


def flat(series_dict):
    return series_dict["train"] + series_dict["val"] + series_dict["test"]


class TestSpecValidation:
    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            generate(GeneratorSpec(family="matching"))

    def test_unknown_param(self):
        with pytest.raises(ConfigError):
            generate(GeneratorSpec(family="caching", params={"item": 3}, **SMALL))


class TestDeterminismAndFeasibility:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_identical_specs_identical_data(self, family):
        a = flat(generate(GeneratorSpec(family=family, seed=11, **SMALL)))
        b = flat(generate(GeneratorSpec(family=family, seed=11, **SMALL)))
        assert len(a) == len(b) == 4
        for sa, sb in zip(a, b):
            assert sa.series_id == sb.series_id
            for ia, ib in zip(sa.instances, sb.instances):
                assert (ia.c == ib.c).all()
                assert (ia.b == ib.b).all()
                assert (ia.a.toarray() == ib.a.toarray()).all()

    @pytest.mark.parametrize("family", FAMILIES)
    def test_instances_feasible_and_bounded(self, family):
        data = generate(GeneratorSpec(family=family, seed=3, **SMALL))
        series = data["train"][0]
        labeled = label_dataset([series], fraction=1.0, seed=0)[0]
        for inst, label in zip(labeled.instances, labeled.labels):
            assert label.status == OPTIMAL
            assert check_feasibility(inst, label.assignment)

    def test_split_counts(self):
        data = generate(GeneratorSpec(family="caching", seed=0, n_train=3, n_val=2,
                                      n_test=1, timesteps=2))
        assert [len(data[k]) for k in ("train", "val", "test")] == [3, 2, 1]
        assert all(len(s) == 2 for s in flat(data))


class TestTsp:
    def test_constraint_counts_for_four_cities(self):
        data = generate(GeneratorSpec(family="tsp", seed=1, params={"cities": 4}, **SMALL))
        inst = data["train"][0].instances[0]
        # 8 degree equalities split to 16 rows, plus C(4,2)+C(4,3)=10 subtours
        assert inst.n_rows == 16 + 10
        assert inst.n_binary == 12

    def test_subtour_subset_counts(self):
        assert len(tsp_subtour_rows(4)) == 10
        assert len(tsp_subtour_rows(5)) == 25
        assert len(tsp_subtour_rows(6)) == 56

    def test_three_cities_perimeter(self):
        data = generate(
            GeneratorSpec(family="tsp", seed=2, params={"cities": 3},
                          n_train=1, n_val=0, n_test=0, timesteps=1)
        )
        inst = data["train"][0].instances[0]
        label = enumerate_solve(inst)
        # the only tours are the two orientations of the triangle; cost is
        # the full perimeter = sum of both arcs of each pair / 2
        perimeter = float(inst.c.sum()) / 2.0
        assert label.objective == pytest.approx(perimeter, rel=1e-9)
        assert label.assignment.sum() == 3

    def test_tour_enumeration_matches_oracle(self):
        data = generate(GeneratorSpec(family="tsp", seed=4, params={"cities": 4}, **SMALL))
        for inst in data["train"][0].instances:
            fast = tsp_best_tour(inst)
            slow = enumerate_solve(inst)
            assert fast.objective == pytest.approx(slow.objective, abs=1e-9)
            np.testing.assert_array_equal(fast.assignment, slow.assignment)

    def test_label_dataset_uses_tours_above_cap(self):
        spec = GeneratorSpec(family="tsp", seed=5, params={"cities": 6},
                             n_train=1, n_val=0, n_test=0, timesteps=2)
        series = generate(spec)["train"][0]
        assert series.instances[0].n_binary == 30
        labeled = label_dataset([series], fraction=1.0, seed=0)[0]
        for inst, label in zip(labeled.instances, labeled.labels):
            assert label.status == OPTIMAL
            assert check_feasibility(inst, label.assignment)
            assert label.assignment.sum() == 6  # one arc per city


class TestCaching:
    def test_everything_fits_when_capacity_exceeds_total(self):
        spec = GeneratorSpec(
            family="caching", seed=6,
            params={"items": 8, "capacity_fraction_range": (1.05, 1.1)},
            n_train=1, n_val=0, n_test=0, timesteps=2,
        )
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        for label in series.labels:
            np.testing.assert_array_equal(label.assignment, np.ones(8))

    def test_constant_popularity_constant_label(self):
        spec = GeneratorSpec(
            family="caching", seed=7,
            params={"items": 10, "rotation_rate": 0.0},
            n_train=1, n_val=0, n_test=0, timesteps=3,
        )
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        first = series.labels[0].assignment
        for label in series.labels[1:]:
            np.testing.assert_array_equal(label.assignment, first)

    def test_default_thirty_items_labelable(self):
        spec = GeneratorSpec(family="caching", seed=8, n_train=1, n_val=0, n_test=0,
                             timesteps=2)
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        assert series.instances[0].n_binary == 30
        assert all(lab.status == OPTIMAL for lab in series.labels)


class TestRevenueMax:
    def test_huge_capacity_selects_everything(self):
        spec = GeneratorSpec(
            family="revenue-max", seed=9,
            params={"items": 6, "rows": 2, "capacity_fraction_range": (1.5, 1.6)},
            n_train=1, n_val=0, n_test=0, timesteps=1,
        )
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        np.testing.assert_array_equal(series.labels[0].assignment, np.ones(6))

    def test_single_row_is_knapsack(self):
        spec = GeneratorSpec(family="revenue-max", seed=10, params={"rows": 1}, **SMALL)
        inst = generate(spec)["train"][0].instances[0]
        assert inst.n_rows == 1


class TestFacility:
    def test_single_facility_forces_assignment(self):
        spec = GeneratorSpec(
            family="facility-loc", seed=11, params={"facilities": 1, "clients": 3},
            n_train=1, n_val=0, n_test=0, timesteps=2,
        )
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        for label in series.labels:
            z = label.assignment
            np.testing.assert_array_equal(z[:3], np.ones(3))  # all clients there
            assert z[3] == 1.0  # facility open

    def test_assignment_costs_nonnegative(self):
        # AR demands stay nonnegative, so assignment objective terms do too
        spec = GeneratorSpec(family="facility-loc", seed=12, **SMALL)
        for series in flat(generate(spec)):
            n_assign = 4 * 3
            for inst in series.instances:
                assert (inst.c[:n_assign] >= 0).all()


class TestEnergyGrid:
    def test_no_batteries_single_prosumer_forced(self):
        spec = GeneratorSpec(
            family="energy-grid", seed=13,
            params={"prosumers": 1, "batteries": 0, "primary": 2},
            n_train=1, n_val=0, n_test=0, timesteps=2,
        )
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        for label in series.labels:
            assert label.assignment[-1] == pytest.approx(1.0, abs=1e-8)

    def test_continuous_variables_present(self):
        spec = GeneratorSpec(family="energy-grid", seed=14, **SMALL)
        inst = generate(spec)["train"][0].instances[0]
        assert inst.n_continuous == 3 and inst.n_binary == 3


class TestRouting:
    def test_path_choice_equalities_hold_at_optimum(self):
        spec = GeneratorSpec(family="routing", seed=15, **SMALL)
        series = label_dataset(generate(spec)["train"], fraction=1.0)[0]
        for inst, label in zip(series.instances, series.labels):
            assert label.status == OPTIMAL
            # equality pairs sit at the top: consecutive (row, -row) pairs
            assert check_feasibility(inst, label.assignment)

    def test_binary_budget_respected(self):
        spec = GeneratorSpec(family="routing", seed=16, **SMALL)
        inst = generate(spec)["train"][0].instances[0]
        assert inst.n_binary <= 22


class TestLabelDataset:
    def _series(self, seed=0):
        spec = GeneratorSpec(family="caching", seed=seed,
                             params={"items": 6}, n_train=2, n_val=0, n_test=0,
                             timesteps=5)
        return generate(spec)["train"]

    def test_fraction_zero(self):
        labeled = label_dataset(self._series(), fraction=0.0)
        assert all(s.n_labeled == 0 for s in labeled)

    def test_fraction_one(self):
        labeled = label_dataset(self._series(), fraction=1.0)
        assert all(s.n_labeled == len(s) for s in labeled)

    def test_fraction_half_exact_and_reproducible(self):
        first = label_dataset(self._series(), fraction=0.5, seed=3)
        second = label_dataset(self._series(), fraction=0.5, seed=3)
        total = sum(s.n_labeled for s in first)
        assert total == 5  # half of 10 instances
        mask1 = [[lab is not None for lab in s.labels] for s in first]
        mask2 = [[lab is not None for lab in s.labels] for s in second]
        assert mask1 == mask2

    def test_durations_recorded(self):
        labeled = label_dataset(self._series(), fraction=1.0)
        for series in labeled:
            for lab in series.labels:
                assert lab.duration >= 0.0
