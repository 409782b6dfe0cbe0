"""File formats and export schemas: edge lists, labels, traces, reports."""

import json

import numpy as np

from conftest import random_features
from gnnmeter.costs import measure_work
from gnnmeter.generate import (
    erdos_renyi,
    read_edge_list,
    read_labels,
    write_edge_list,
    write_labels,
)
from gnnmeter.graph import partition
from gnnmeter.models import make_spec
from gnnmeter.sim import run_sync
from gnnmeter.train import Labels


class TestEdgeListFormat:
    def test_round_trip(self, tmp_path):
        g = erdos_renyi(18, 4.0, seed=6)
        path = tmp_path / "g.el"
        write_edge_list(g, path)
        back = read_edge_list(path)
        assert back.n == g.n and back.m == g.m
        assert np.array_equal(back.col_indices, g.col_indices)

    def test_comments_and_whitespace_ignored(self, tmp_path):
        path = tmp_path / "g.el"
        path.write_text("# a triangle\n0 1\n\n  0   2\n1 2\n")
        g = read_edge_list(path)
        assert g.n == 3 and g.m == 3


class TestLabelsFormat:
    def test_round_trip(self, tmp_path):
        labels = Labels(labeled=(0, 2, 5), classes=(1, 0, 1), num_classes=2)
        path = tmp_path / "l.labels"
        write_labels(labels, path)
        back = read_labels(path)
        assert back.labeled == labels.labeled
        assert back.classes == labels.classes
        assert back.num_classes == 2


class TestTraceExport:
    def test_jsonl_fields(self, triangle):
        spec = make_spec("gcn", [2, 2], seed=1)
        part = partition(triangle, 2, "range")
        _, trace = run_sync(triangle, part, random_features(3, 2, seed=0), spec)
        lines = trace.to_jsonl().splitlines()
        assert len(lines) == len(trace.events)
        first = json.loads(lines[0])
        for field in ("worker", "kernel", "part", "layer", "iter",
                      "start", "end", "reads"):
            assert field in first

    def test_measure_work_from_trace(self, triangle):
        spec = make_spec("gcn", [3, 3], seed=1)
        part = partition(triangle, 3, "hash")
        _, trace = run_sync(triangle, part, random_features(3, 3, seed=0), spec)
        report = measure_work(trace)
        # Summed over the three workers: same exact totals as a plain run.
        assert report.layer_work(0, "aggregate") == 9 * 3
        assert report.layer_work(0, "update_vertex") == 3 * 3 * 3
        assert report.comm_words == trace.comm_words


class TestCostReportExport:
    def test_json_field_names(self, triangle):
        from gnnmeter.lc import lc_forward

        spec = make_spec("gcn", [2, 2], seed=1)
        _, outputs = lc_forward(triangle, random_features(3, 2, seed=0), spec,
                                with_outputs=True)
        payload = measure_work(outputs).to_json()
        assert set(payload) == {"work_pre", "work_per_layer", "work_post",
                                "depth_pre", "depth_per_layer", "depth_post",
                                "comm_words", "sync_steps"}
        json.dumps(payload)
