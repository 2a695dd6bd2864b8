import numpy as np

from predfix.oracle import Label
from predfix.seriesio import InstanceSeries, load_series, save_series

from .test_milp import make_instance


def small_series(seed=0, labeled=(0,)):
    rng = np.random.default_rng(seed)
    instances, labels = [], []
    for t in range(3):
        a = rng.normal(size=(2, 3)) * (rng.random((2, 3)) < 0.8)
        inst = make_instance(rng.normal(size=3), a, rng.normal(size=2))
        instances.append(inst)
        if t in labeled:
            labels.append(Label("optimal", np.array([1.0, 0.0, 1.0]), 1.25, 0.01))
        else:
            labels.append(None)
    return InstanceSeries(
        series_id=f"demo-{seed}", instances=instances, labels=labels, family="caching"
    )


class TestRoundTrip:
    def test_bit_exact_reload(self, tmp_path):
        series = [small_series(0), small_series(1, labeled=())]
        path = tmp_path / "data.jsonl"
        save_series(path, series)
        back = load_series(path)
        assert [s.series_id for s in back] == [s.series_id for s in series]
        for s_in, s_out in zip(series, back):
            assert s_out.family == s_in.family
            assert len(s_out) == len(s_in)
            for inst_in, inst_out in zip(s_in.instances, s_out.instances):
                assert (inst_in.c == inst_out.c).all()
                assert (inst_in.b == inst_out.b).all()
                assert (inst_in.a.toarray() == inst_out.a.toarray()).all()
                assert inst_in.n_binary == inst_out.n_binary
            for lab_in, lab_out in zip(s_in.labels, s_out.labels):
                if lab_in is None:
                    assert lab_out is None
                else:
                    assert lab_out.status == lab_in.status
                    assert (lab_out.assignment == lab_in.assignment).all()
                    assert lab_out.objective == lab_in.objective

    def test_label_counts(self, tmp_path):
        series = small_series(2, labeled=(0, 2))
        assert series.n_labeled == 2
        path = tmp_path / "labeled.jsonl"
        save_series(path, [series])
        assert load_series(path)[0].n_labeled == 2
