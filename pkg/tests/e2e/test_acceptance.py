# -*- coding: utf-8 -*-
"""
验收测试: 使用 configs/ 下的真实配置做 eps 扫描

标记为 slow 的用例需要数分钟到数十分钟 (多核), 默认用 `pytest -m "not slow"` 跳过,
完整运行见 run_e2e_tests.sh。
"""
import json

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from app.core.levy import LevyModel
from app.core.limitchain import generator_for
from app.core.potential import PolynomialPotential, analyze
from app.data.config_loader import TomlConfigLoader
from app.services.experiment_service import ExperimentService

from tests.conftest import CONFIG_DIR


def run_config(name, out_dir, workers=None, **overrides):
    config = TomlConfigLoader(str(CONFIG_DIR / name)).load(overrides=overrides)
    return ExperimentService(config, str(out_dir), workers=workers, verbose=False).run()


def failed(report):
    return [t["test"] for t in report["tests"] if not t["pass"]]


@pytest.mark.parametrize("alpha,m1,m2", [(0.5, -1.0, 2.0), (1.0, -1.0, 1.0), (1.5, -0.5, 3.0)])
def test_stable_double_well_generator(alpha, m1, m2):
    # U' = (x - m1) x (x - m2), 鞍点在 0
    land = analyze(PolynomialPotential(tuple(P.polyint(P.polyfromroots([m1, 0.0, m2])))))
    gen = generator_for(land, LevyModel.symmetric_stable(alpha))
    q12 = 0.5 * abs(m1) ** (-alpha)
    q21 = 0.5 * abs(m2) ** (-alpha)
    np.testing.assert_allclose(gen.q, [[-q12, q12], [q21, -q21]], rtol=1e-10, atol=1e-12)


def test_reports_do_not_depend_on_worker_count(tmp_path):
    overrides = {"run.eps": [0.3], "run.h": 1e-2, "run.n_paths": 120, "run.margin": 0.1}
    run_config("double_well_exitlaw.toml", tmp_path / "w1", workers=1, **overrides)
    run_config("double_well_exitlaw.toml", tmp_path / "w3", workers=3, **overrides)
    a = (tmp_path / "w1" / "report.json").read_text(encoding="utf-8")
    b = (tmp_path / "w3" / "report.json").read_text(encoding="utf-8")
    assert json.loads(a)["results"] == json.loads(b)["results"]
    assert a == b


@pytest.mark.slow
class TestEpsSweeps:

    def test_exit_law(self, tmp_path):
        # 固定 lambda 的 KS 在 n = 2000 时能分辨 O(eps) 的速率偏差, 这里检验形状、均值与趋势
        report = run_config("double_well_exitlaw.toml", tmp_path)
        checks = {t["test"]: t for t in report["tests"]}
        for eps in ("0.1", "0.05", "0.025"):
            assert checks[f"exponential_shape[eps={eps}]"]["pass"]
        assert checks["rate_times_mean[eps=0.05]"]["pass"]
        assert checks["rate_times_mean[eps=0.025]"]["pass"]
        assert checks["ks_statistic_trend"]["pass"]
        entry = report["results"][1]
        assert entry["eps"] == 0.05
        assert entry["censored"] == 0
        assert 0.85 <= entry["rate_times_mean"] <= 1.15

    def test_three_well_transitions(self, tmp_path):
        report = run_config("three_well.toml", tmp_path, **{"run.eps": [0.05], "run.n_paths": 2000})
        assert not failed(report)
        names = [t["test"] for t in report["tests"]]
        assert "tau_split[eps=0.05]" in names
        assert "stopping_order[eps=0.05]" in names

    def test_metastable_limit(self, tmp_path):
        report = run_config("double_well_stable.toml", tmp_path, **{
            "experiment.kind": "meta", "run.eps": [0.05], "run.n_paths": 5000})
        assert not failed(report)
        assert {t["test"] for t in report["tests"]} >= {"fdd[eps=0.05,t=0.5]", "fdd[eps=0.05,t=1]",
                                                       "fdd[eps=0.05,t=2]"}
        assert all(item["unclassified"] < 0.05 for item in report["results"][1]["times"])
        assert [m["t"] for m in report["results"][0]["transition_matrices"]] == [0.5, 1.0, 2.0]

    def test_one_sided_absorption(self, tmp_path):
        report = run_config("three_well_one_sided.toml", tmp_path, **{"run.n_paths": 2000})
        assert not failed(report)
        assert report["generator"][2] == [0.0, 0.0, 0.0]
        left = next(t for t in report["tests"] if t["test"] == "leftward_transitions[eps=0.05]")
        assert left["pass"] and left["statistic"] == 0

    def test_one_sided_double_well_absorbs(self, tmp_path):
        report = run_config("double_well_one_sided.toml", tmp_path)
        assert not failed(report)
        snapshot = report["results"][1]["times"][0]
        assert snapshot["t"] == 5.0
        assert snapshot["occupation"][1] >= 0.99

    def test_one_sided_double_well_never_moves_left(self, tmp_path):
        report = run_config("double_well_one_sided.toml", tmp_path, **{
            "experiment.kind": "transitions", "run.horizon": 150.0})
        left = next(t for t in report["tests"] if t["test"] == "leftward_transitions[eps=0.05]")
        assert left["pass"] is True
        assert left["statistic"] == 0
        assert left["n"] == 4000
        assert report["results"][0]["wells"][2]["absorbing"] is True

    def test_saddle_escape(self, tmp_path):
        report = run_config("double_well_stable.toml", tmp_path, **{
            "experiment.kind": "saddle", "run.eps": [0.1, 0.05, 0.025]})
        assert not failed(report)

    def test_tube(self, tmp_path):
        report = run_config("double_well_stable.toml", tmp_path, **{
            "experiment.kind": "tube", "run.eps": [0.01]})
        assert not failed(report)

    def test_gaussian_slope(self, tmp_path):
        report = run_config("gauss_tilted.toml", tmp_path)
        assert not failed(report)
        slope = next(t for t in report["tests"] if t["test"] == "kramers_slope")
        assert slope["statistic"] > 0

    def test_logpower_tail(self, tmp_path):
        report = run_config("logpower_tail.toml", tmp_path)
        assert not failed(report)
