"""Model catalog contracts and spec construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnmeter.errors import ConfigError
from gnnmeter.lc import aggregate
from gnnmeter.models import DUAL_MODELS, GL_MODELS, LC_MODELS, MODELS, glorot, make_spec


class TestCatalog:
    def test_twenty_one_models(self):
        assert len(MODELS) == 21

    def test_formulation_split(self):
        assert set(DUAL_MODELS) == {"gcn", "sage_mean", "gin", "commnet",
                                    "vanilla_attn", "edgeconv1"}
        lc_only = set(LC_MODELS) - set(DUAL_MODELS)
        assert lc_only == {"monet", "gat", "agnn_cosine", "ggcn", "sage_pool",
                           "edgeconv5"}
        gl_only = set(GL_MODELS) - set(DUAL_MODELS)
        assert gl_only == {"sgc", "deepwalk", "chebnet", "dcnn_gdc",
                           "node2vec", "line_sdne", "autoregress", "ppnp",
                           "arma_parwalks"}

    def test_class_taxonomy(self):
        assert {m for m, i in MODELS.items() if i.model_class == "C-GNN"} == \
            {"gcn", "sage_mean", "gin", "commnet"}
        assert {m for m, i in MODELS.items() if i.model_class == "A-GNN"} == \
            {"vanilla_attn", "monet", "gat", "agnn_cosine"}
        assert {m for m, i in MODELS.items() if i.model_class == "MP-GNN"} == \
            {"ggcn", "sage_pool", "edgeconv1", "edgeconv5"}

    def test_cgnn_coefficients_preprocessable(self):
        for mid, info in MODELS.items():
            if info.model_class == "C-GNN":
                assert not info.psi_reads_weights

    def test_gl_operator_kinds(self):
        assert MODELS["sgc"].gl_operator == "sym_norm"
        assert MODELS["deepwalk"].gl_operator == "rw_norm"
        assert MODELS["ppnp"].gl_operator == "sym_norm"


class TestMakeSpec:
    def test_weight_shapes_chain(self):
        spec = make_spec("gcn", [5, 7, 2], seed=3)
        assert spec.layers[0]["W"].shape == (5, 7)
        assert spec.layers[1]["W"].shape == (7, 2)

    def test_hyperparameter_ranges_enforced(self):
        with pytest.raises(ConfigError):
            make_spec("ppnp", [3, 3], alpha=0.0)
        with pytest.raises(ConfigError):
            make_spec("arma_parwalks", [3, 3], a=1.0)
        with pytest.raises(ConfigError):
            make_spec("node2vec", [3, 3], p=0.0)
        with pytest.raises(ConfigError):
            make_spec("gin", [3, 3], epsilon=-0.1)

    def test_gl_models_reject_layer_stacks(self):
        with pytest.raises(ConfigError):
            make_spec("ppnp", [3, 3, 3])

    def test_glorot_deterministic_and_bounded(self):
        a = glorot(6, 4, 9, 1, 0)
        b = glorot(6, 4, 9, 1, 0)
        assert np.array_equal(a, b)
        limit = np.sqrt(6.0 / 10.0)
        assert np.abs(a).max() <= limit

    def test_coefficient_patterns(self):
        assert make_spec("sgc", [3, 3], poly_order=2).coeffs == (0.0, 0.0, 1.0)
        assert make_spec("deepwalk", [3, 3], poly_order=2).coeffs == (1.0, 1.0, 1.0)
        assert make_spec("dcnn_gdc", [3, 3], poly_order=2).coeffs[0] == 0.0
        assert make_spec("node2vec", [3, 3], p=2.0, q=4.0).coeffs == \
            (0.5, 0.75, 0.25)
        assert make_spec("line_sdne", [3, 3], theta=0.6).coeffs == (0.0, 1.0, 0.6)


class TestAggregateProperties:
    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
                    min_size=0, max_size=8),
           st.sampled_from(["sum", "mean", "max"]))
    def test_permutation_invariance(self, rows, reducer):
        base = aggregate(reducer, rows, 3)
        rotated = aggregate(reducer, rows[::-1], 3)
        assert np.allclose(base, rotated, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.floats(-10, 10), min_size=2, max_size=2),
                    min_size=1, max_size=6))
    def test_mean_bounded_by_extremes(self, rows):
        out = aggregate("mean", rows, 2)
        stacked = np.array(rows)
        assert np.all(out <= stacked.max(axis=0) + 1e-12)
        assert np.all(out >= stacked.min(axis=0) - 1e-12)
