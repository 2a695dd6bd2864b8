import numpy as np
import pytest

from predfix import autodiff as ad
from predfix.errors import EmptyDataset
from predfix.losses import (
    LossWeights,
    Schedule,
    beta_bernoulli_nll,
    class_rates,
    closed_form_marginal,
    nll_tensor,
    regularizer,
    regularizer_integral,
    regularizer_tensor,
    soft_assignment,
    supervised_loss,
    unsupervised_loss,
)
from predfix.oracle import Label
from predfix.quadrature import cc_table
from predfix.seriesio import InstanceSeries

from .test_milp import make_instance

GRID = (1.0, 1.5, 2.0, 5.0, 10.0, 50.0)


class TestNll:
    def test_symmetric_beta(self):
        assert beta_bernoulli_nll(2.0, 2.0, 1) == pytest.approx(-np.log(0.5), abs=1e-9)

    def test_conjugate_closed_forms(self):
        assert beta_bernoulli_nll(3.0, 1.0, 1) == pytest.approx(-np.log(0.75), abs=1e-9)
        assert beta_bernoulli_nll(3.0, 1.0, 0) == pytest.approx(-np.log(0.25), abs=1e-9)

    def test_closed_form_marginal_values(self):
        assert closed_form_marginal(2, 2, 1) == pytest.approx(0.5)
        assert closed_form_marginal(3, 1, 1) == pytest.approx(0.75)
        assert closed_form_marginal(1, 4, 0) == pytest.approx(0.8)

    def test_quadrature_conjugacy_agreement(self):
        table = cc_table(64)
        for a in GRID:
            for b in GRID:
                for z in (0, 1):
                    q = np.exp(-beta_bernoulli_nll(a, b, z, table))
                    assert abs(q - closed_form_marginal(a, b, z)) < 1e-8

    def test_monotone_in_alpha_for_positive_label(self):
        values = [beta_bernoulli_nll(a, 2.0, 1) for a in np.linspace(1.0, 30.0, 40)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        store = ad.ParameterStore()
        raw = store.add("raw", rng.normal(size=8))
        z = (rng.random(4) < 0.5).astype(float)
        table = cc_table(64)

        def loss_fn():
            alpha = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 0, 4)))
            beta = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 4, 8)))
            return ad.sum_(nll_tensor(alpha, beta, z, table))

        assert ad.gradient_check(loss_fn, store) < 1e-4


class TestRegularizer:
    def test_uniform_beta_is_zero(self):
        assert regularizer(1.0, 1.0, 0) == 0.0
        assert regularizer(1.0, 1.0, 1) == 0.0

    def test_symmetric_case_value(self):
        expected = 0.5 * (2.0 + np.log(1.0 / 6.0))
        assert regularizer(2.0, 2.0, 1) == pytest.approx(expected, rel=1e-12)
        assert regularizer(2.0, 2.0, 0) == pytest.approx(expected, rel=1e-12)

    def test_nonnegative_on_grid(self):
        grid = np.linspace(1.0, 20.0, 10)
        for a in grid:
            for b in grid:
                for z in (0, 1):
                    assert regularizer(a, b, z) >= -1e-12

    def test_matches_numeric_integration(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.uniform(1.0, 8.0)
            b = rng.uniform(1.0, 8.0)
            z = float(rng.integers(0, 2))
            assert regularizer(a, b, z) == pytest.approx(
                regularizer_integral(a, b, z), abs=1e-6
            )

    def test_gradient(self):
        rng = np.random.default_rng(2)
        store = ad.ParameterStore()
        raw = store.add("raw", rng.normal(size=6))
        z = np.array([0.0, 1.0, 1.0])

        def loss_fn():
            alpha = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 0, 3)))
            beta = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 3, 6)))
            return ad.sum_(regularizer_tensor(alpha, beta, z))

        assert ad.gradient_check(loss_fn, store) < 1e-4


class TestClassRates:
    def _series(self, assignments):
        instances, labels = [], []
        for zb in assignments:
            inst = make_instance(np.ones(len(zb)), [np.ones(len(zb))], [1.0])
            instances.append(inst)
            labels.append(Label("optimal", np.array(zb, dtype=float), 0.0))
        return InstanceSeries("s", instances, labels)

    def test_eighty_twenty_split(self):
        series = self._series([[0], [0], [0], [0], [1]])
        assert class_rates([series])[0] == pytest.approx(0.2)

    def test_all_ones_clamped(self):
        series = self._series([[1], [1]])
        assert class_rates([series])[0] == pytest.approx(0.999)

    def test_empty_raises(self):
        with pytest.raises(EmptyDataset):
            class_rates([InstanceSeries("s", [], [])])


class TestSoftAssignment:
    def test_symmetric_beta_value(self):
        z = soft_assignment(ad.constant([2.0]), ad.constant([2.0]))
        assert z.value[0] == pytest.approx(1.0 / (1.0 + np.exp(-0.5)))

    def test_upper_limit(self):
        z = soft_assignment(ad.constant([1e9]), ad.constant([1.0]))
        assert z.value[0] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)), abs=1e-6)

    def test_sharpened_mode_rounds_hard(self):
        z = soft_assignment(ad.constant([9.0]), ad.constant([1.0]), sharpness=1e6)
        assert z.value[0] == pytest.approx(1.0)


class TestUnsupervised:
    def test_feasible_point_no_penalty(self):
        inst = make_instance([1.0, 1.0], [[1.0, 1.0]], [3.0])
        zb = ad.constant([0.5, 0.5])
        zc = ad.constant(np.zeros(0))
        loss = unsupervised_loss(inst, zb, zc, lam_c=10.0)
        assert loss.value == pytest.approx(1.0)  # objective only

    def test_zero_assignment_zero_loss(self):
        inst = make_instance([1.0, 1.0], [[1.0, 1.0]], [1.0])
        loss = unsupervised_loss(inst, ad.constant([0.0, 0.0]), ad.constant(np.zeros(0)), 1.0)
        assert loss.value == pytest.approx(0.0)

    def test_hinge_arithmetic(self):
        inst = make_instance([3.0], [[1.0]], [0.0], n_binary=0, n_continuous=1)
        loss = unsupervised_loss(inst, ad.constant(np.zeros(0)), ad.constant([2.0]), 1.0)
        assert loss.value == pytest.approx(3.0 * 2.0 + 4.0)

    def test_quadratic_growth(self):
        inst = make_instance([0.0, 1.0], [[1.0, 0.0]], [0.0], n_binary=0, n_continuous=2)
        losses = [
            unsupervised_loss(inst, ad.constant(np.zeros(0)), ad.constant([v, 0.0]), 1.0).value
            for v in (1.0, 2.0, 3.0)
        ]
        assert losses[1] == pytest.approx(4 * losses[0])
        assert losses[2] == pytest.approx(9 * losses[0])

    def test_gradient(self):
        rng = np.random.default_rng(3)
        inst = make_instance(
            rng.normal(size=4), rng.normal(size=(3, 4)), rng.normal(size=3),
            n_binary=2, n_continuous=2,
        )
        store = ad.ParameterStore()
        raw = store.add("raw", rng.normal(size=6))

        def loss_fn():
            alpha = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 0, 2)))
            beta = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 2, 4)))
            zb = soft_assignment(alpha, beta)
            zc = ad.slice_axis(raw, 0, 4, 6)
            return unsupervised_loss(inst, zb, zc, lam_c=2.0)

        assert ad.gradient_check(loss_fn, store) < 1e-4


class TestSupervised:
    def _output(self, raw_values):
        raw = ad.constant(np.asarray(raw_values, dtype=float))
        n = raw.shape[0] // 2
        alpha = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, 0, n)))
        beta = ad.add(1.0, ad.softplus(ad.slice_axis(raw, 0, n, 2 * n)))

        class Output:
            pass

        out = Output()
        out.alpha = alpha
        out.beta = beta
        return out

    def test_no_labels_is_zero(self):
        out = self._output([0.0, 0.0])
        loss = supervised_loss([out], [None], cc_table(64))
        assert loss.value == 0.0

    def test_single_variable_equals_nll(self):
        out = self._output([0.3, -0.1])
        label = Label("optimal", np.array([1.0]), 0.0)
        loss = supervised_loss([out], [label], cc_table(64), lam_reg=0.0)
        expected = beta_bernoulli_nll(out.alpha.value[0], out.beta.value[0], 1)
        assert loss.value == pytest.approx(expected, rel=1e-12)

    def test_class_weighting_doubles_at_half_rate(self):
        out = self._output([0.3, -0.1])
        label = Label("optimal", np.array([1.0]), 0.0)
        plain = supervised_loss([out], [label], cc_table(64))
        weighted = supervised_loss(
            [out], [label], cc_table(64),
            class_rate_vec=np.array([0.5]), use_class_weights=True,
        )
        assert weighted.value == pytest.approx(2.0 * plain.value, rel=1e-12)

    def test_regularizer_term_added(self):
        out = self._output([0.3, -0.1])
        label = Label("optimal", np.array([1.0]), 0.0)
        base = supervised_loss([out], [label], cc_table(64), lam_reg=0.0)
        with_reg = supervised_loss([out], [label], cc_table(64), lam_reg=2.0)
        reg = regularizer(out.alpha.value[0], out.beta.value[0], 1.0)
        assert with_reg.value == pytest.approx(base.value + 2.0 * reg, rel=1e-10)


class TestSchedule:
    def test_step_zero_is_warmup_start(self):
        sched = Schedule(0.01, 0.1, 1.0, warmup_steps=100, total_steps=1000)
        assert sched.value(0) == 0.01

    def test_warmup_end(self):
        sched = Schedule(0.01, 0.1, 1.0, warmup_steps=100, total_steps=1000)
        assert sched.value(100) == pytest.approx(0.1)

    def test_final_value_at_last_step(self):
        sched = Schedule(0.01, 0.1, 1.0, warmup_steps=100, total_steps=1000)
        assert sched.value(1000) == pytest.approx(1.0)
        assert sched.value(5000) == pytest.approx(1.0)

    def test_linear_in_both_phases(self):
        sched = Schedule(0.0, 1.0, 3.0, warmup_steps=10, total_steps=20)
        assert sched.value(5) == pytest.approx(0.5)
        assert sched.value(15) == pytest.approx(2.0)

    def test_constant(self):
        sched = Schedule.constant(0.7)
        assert sched.value(0) == sched.value(123) == 0.7
