import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from assoclab.dissection import (
    aggregate_counts,
    dyadic_dissection,
    gamma_counts,
    refine,
)
from assoclab.geometry import PointConfiguration, Window


class TestWindow:
    def test_rejects_degenerate_axis(self):
        with pytest.raises(ValueError, match="degenerate"):
            Window(((0.0, 0.0),))

    def test_volume_and_contains(self):
        w = Window(((0.0, 2.0), (1.0, 3.0)))
        assert w.volume == 4.0
        inside = w.contains(np.array([[0.0, 1.0], [1.9, 2.9]]))
        assert inside.all()
        # half-open: the upper corner is excluded
        assert not w.contains(np.array([[2.0, 3.0]])).any()

    def test_point_configuration_rejects_outside(self):
        w = Window.unit(1)
        with pytest.raises(ValueError, match="outside"):
            PointConfiguration(w, np.array([[1.0]]))

    def test_weights_validated(self):
        w = Window.unit(1)
        with pytest.raises(ValueError, match="negative"):
            PointConfiguration(w, np.array([[0.5]]), weights=[-1.0])


class TestDyadicDissection:
    def test_depth_zero_is_window(self):
        w = Window(((0.0, 2.0),))
        d = dyadic_dissection(w, 0)
        assert d.n_boxes == 1
        assert d.boxes[0].bounds == ((0.0, 2.0),)

    def test_1d_depth2_boxes(self):
        w = Window.unit(1)
        d = dyadic_dissection(w, 2)
        bounds = [b.bounds[0] for b in d.boxes]
        assert bounds == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]

    def test_2d_depth3_counts_and_volumes(self):
        w = Window.unit(2)
        d = dyadic_dissection(w, 3)
        assert d.n_boxes == 64
        assert all(b.volume == pytest.approx(1 / 64) for b in d.boxes)

    def test_partition_property(self):
        w = Window(((0.0, 1.0), (-1.0, 3.0)))
        d = dyadic_dissection(w, 2)
        vols = sum(b.volume for b in d.boxes)
        assert vols == pytest.approx(w.volume)
        # deterministic lexicographic ordering of multi-indices
        assert [b.index for b in d.boxes][:5] == [(0, 0), (0, 1), (0, 2), (0, 3), (1, 0)]

    def test_depth_cap(self):
        with pytest.raises(ValueError, match="capped"):
            dyadic_dissection(Window.unit(1), 21)


class TestGammaCounts:
    def test_empty_config(self):
        w = Window.unit(2)
        d = dyadic_dissection(w, 2)
        counts = gamma_counts(PointConfiguration.empty(w), d)
        assert (counts == 0).all()

    def test_single_unit_atom(self):
        w = Window.unit(2)
        d = dyadic_dissection(w, 2)
        counts = gamma_counts(PointConfiguration(w, [[0.3, 0.8]]), d)
        assert counts.sum() == 1.0
        assert (counts == 1.0).sum() == 1

    def test_weighted_atoms_same_box(self):
        w = Window.unit(1)
        d = dyadic_dissection(w, 1)
        config = PointConfiguration(w, [[0.1], [0.2]], weights=[0.5, 2.0])
        counts = gamma_counts(config, d)
        assert counts[0] == pytest.approx(2.5)
        assert counts[1] == 0.0

    def test_total_mass_preserved(self):
        rng = np.random.default_rng(9)
        w = Window(((0.0, 2.0), (0.0, 1.0)))
        pts = w.sample_uniform(rng, 50)
        wts = rng.random(50)
        config = PointConfiguration(w, pts, wts)
        for depth in range(4):
            counts = gamma_counts(config, dyadic_dissection(w, depth))
            assert counts.sum() == pytest.approx(config.total_mass)

    def test_monotone_in_configuration(self):
        # sub-multisets with smaller weights give coordinatewise smaller counts
        rng = np.random.default_rng(10)
        w = Window.unit(2)
        d = dyadic_dissection(w, 3)
        pts = w.sample_uniform(rng, 40)
        wts = rng.random(40)
        small = PointConfiguration(w, pts[:25], wts[:25] * 0.5)
        big = PointConfiguration(w, pts, wts)
        assert (gamma_counts(small, d) <= gamma_counts(big, d) + 1e-12).all()

    def test_injective_at_scale(self):
        w = Window.unit(1)
        depth = 4
        d = dyadic_dissection(w, depth)
        sep = 1.0 * 2.0**-depth
        a = PointConfiguration(w, [[0.1]])
        b = PointConfiguration(w, [[0.1 + 1.5 * sep]])
        assert (gamma_counts(a, d) != gamma_counts(b, d)).any()


class TestRefine:
    def test_depth0_children(self):
        w = Window.unit(2)
        d = dyadic_dissection(w, 0)
        finer, index_map = refine(d)
        assert finer.depth == 1
        assert index_map == [[0, 1, 2, 3]]

    def test_1d_child_bounds(self):
        w = Window.unit(1)
        d = dyadic_dissection(w, 1)
        finer, index_map = refine(d)
        children = [finer.boxes[i].bounds[0] for i in index_map[0]]
        assert children == [(0.0, 0.25), (0.25, 0.5)]

    @given(st.integers(0, 3), st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_aggregation_consistency(self, depth, seed):
        rng = np.random.default_rng(seed)
        w = Window(((0.0, 1.0), (0.0, 2.0)))
        d = dyadic_dissection(w, depth)
        finer, index_map = refine(d)
        n = int(rng.integers(0, 30))
        # unit weights: integer counts aggregate without any float slack
        config = PointConfiguration(w, w.sample_uniform(rng, n))
        coarse = gamma_counts(config, d)
        fine = gamma_counts(config, finer)
        assert np.array_equal(aggregate_counts(fine, index_map), coarse)

    def test_aggregation_consistency_weighted(self):
        rng = np.random.default_rng(77)
        w = Window.unit(2)
        d = dyadic_dissection(w, 2)
        finer, index_map = refine(d)
        config = PointConfiguration(w, w.sample_uniform(rng, 200), rng.random(200))
        coarse = gamma_counts(config, d)
        fine = gamma_counts(config, finer)
        assert np.abs(aggregate_counts(fine, index_map) - coarse).max() < 1e-12

    def test_cap(self):
        d = dyadic_dissection(Window.unit(1), 20)
        with pytest.raises(ValueError, match="capped"):
            refine(d)
