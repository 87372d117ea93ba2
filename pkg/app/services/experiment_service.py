# -*- coding: utf-8 -*-
"""
实验业务编排层

职责:
- 根据 experiment.kind 组织 path batch、解析计算与统计检验
- 汇总为确定性的报告 (只依赖 config 与 seed), 写出 tables / plotdata / records
- 中断时写出已完成部分 (interrupted = true)
"""
import logging
import math
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from app.core import limitchain, stats
from app.core.errors import HorizonExceeded, PreconditionError
from app.core.levy import LevyModel, decompose, tail_total
from app.core.potential import Landscape, relaxation_constant, relaxation_time
from app.core.simulate import PathSimulator, classify_positions
from app.data.batch_processor import PathBatchProcessor, PathJob
from app.models import ExperimentConfig, default_horizon
from app.utils.report_writer import ReportWriter
from app.utils.response import check_entry

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


class ExperimentService:
    """
    实验服务编排层

    Args:
        config: 已校验的实验配置
        out_dir: 输出目录
        workers: 进程数 (默认取 Settings.workers)
        verbose: 是否打印进度横幅
    """

    def __init__(self, config: ExperimentConfig, out_dir: str, workers: Optional[int] = None,
                 verbose: bool = True):
        self.config = config
        self.writer = ReportWriter(out_dir)
        self.processor = PathBatchProcessor(workers=workers, verbose=verbose)
        self.verbose = verbose
        self.landscape: Landscape = config.landscape()
        self.model: LevyModel = config.levy.build()
        self.results: List[Dict[str, Any]] = []
        self.tests: List[dict] = []

    # ---- helpers ----

    def _banner(self, title: str):
        if self.verbose:
            print(f"\n{'='*100}")
            print(title)
            print(f"{'='*100}")

    def _run_paths(self, eps: float, operation: str, horizon: float, well: int = 1,
                   model: Optional[LevyModel] = None, n_paths: Optional[int] = None, **params) -> List[Any]:
        sim = self.config.sim_config(eps, self.landscape, horizon)
        job = PathJob(landscape=self.landscape, model=model or self.model, sim=sim,
                      operation=operation, well=well, params=params)
        return self.processor.process(job, n_paths or self.config.run.n_paths)

    def _dump(self, name: str, records: List[Any]):
        if self.config.run.dump_records:
            self.writer.write_records(name, records)

    def _completed(self, records: List[Any], what: str, eps: float, horizon: float) -> List[Any]:
        """未被 horizon 截断的记录; 全部截断时无法给出任何统计量"""
        kept = [r for r in records if not r.censored]
        if not kept:
            raise HorizonExceeded(f"no {what} path stopped before the horizon",
                                  data={"eps": eps, "horizon": horizon, "n_paths": len(records)})
        return kept

    def _trace(self, name: str, eps: float, well: int, horizon: float, model: Optional[LevyModel] = None):
        stride = self.config.run.trace_stride
        if stride is None:
            return
        sim = self.config.sim_config(eps, self.landscape, horizon)
        simulator = PathSimulator(self.landscape, model or self.model, sim)
        duration = min(horizon, 10.0 * max(relaxation_time(self.landscape, eps, sim.gamma), 1.0))
        rows = simulator.trace(self.landscape.minimum(well), duration, stride=stride)
        self.writer.write_plotdata(name, [rows[:, 0], rows[:, 1]], ["t", "x"])

    def _generator(self) -> limitchain.GeneratorMatrix:
        return limitchain.generator_for(self.landscape, self.model)

    def _landscape_section(self) -> Dict[str, Any]:
        land = self.landscape
        return {
            "minima": list(land.minima),
            "saddles": list(land.saddles),
            "curvature_min": list(land.curvature_min),
            "curvature_saddle": list(land.curvature_saddle),
            "delta_0": land.delta_0,
            "delta": self.config.delta_for(land),
            "relaxation_constant": relaxation_constant(land, self.config.run.gamma),
        }

    # ---- entry point ----

    def run(self) -> Dict[str, Any]:
        """
        执行 experiment.kind 对应的实验并写出报告

        Returns:
            Dict: 报告 (report.json 内容), 其中 passed 表示全部统计检验通过
        """
        kind = self.config.experiment.kind
        handlers: Dict[str, Callable[[], None]] = {
            "analyze": self._analyze,
            "exitlaw": self._exitlaw,
            "transitions": self._transitions,
            "meta": self._meta,
            "shorttime": self._shorttime,
            "gauss": self._gauss,
            "saddle": self._saddle,
            "tube": self._tube,
        }
        self._banner(f"🧪 Experiment: {kind} | eps sweep {self.config.run.eps} | seed {self.config.run.seed}")
        interrupted = False
        try:
            handlers[kind]()
        except KeyboardInterrupt:
            interrupted = True
            logger.warning("interrupted, flushing partial report")
        report = self._report(interrupted)
        self.writer.write_report(report)
        if interrupted:
            raise KeyboardInterrupt
        return report

    def _report(self, interrupted: bool) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "experiment": self.config.experiment.kind,
            "config": self.config.model_dump(mode="json"),
            "landscape": self._landscape_section(),
            "results": self.results,
            "tests": self.tests,
            "passed": all(t["pass"] for t in self.tests),
            "interrupted": interrupted,
        }
        if self.model.tails is not None and self.config.experiment.kind != "gauss":
            report["generator"] = self._generator().to_rows()
        return report

    # ---- analyze ----

    def _analyze(self):
        land, model, run = self.landscape, self.model, self.config.run
        if model.tails is not None:
            gen = self._generator()
            self.writer.write_matrix("generator", gen.q)
            analysis: Dict[str, Any] = {
                "irreducible": limitchain.is_irreducible(gen),
                "stationary": limitchain.stationary_distribution(gen).tolist(),
            }
            if model.tails.is_pure_power:
                clock = limitchain.stable_clock_generator(gen, model)
                self.writer.write_matrix("generator_stable_clock", clock.q)
                analysis["generator_stable_clock"] = clock.to_rows()
            self.results.append({"section": "generator", **analysis})

        rows = []
        for eps in run.eps:
            dec = decompose(model, eps, run.rho)
            margin = run.margin if run.margin is not None else eps ** run.gamma
            entry: Dict[str, Any] = {
                "eps": eps,
                "beta": dec.beta,
                "small_var": dec.small_var,
                "small_mean": dec.small_mean,
                "threshold": dec.threshold,
                "relaxation_time": relaxation_time(land, eps, run.gamma),
            }
            if model.tails is not None:
                entry["time_scale"] = limitchain.time_scale(model, eps)
                entry["exit_rates"] = [limitchain.exit_rate(land, model, i, eps) for i in range(1, land.n + 1)]
                delta = self.config.delta_for(land)
                # 跳跃阈值 Delta/eps 或 4 margin/eps < 1 时尾部无定义
                if delta >= eps:
                    entry["delta_exit_rate"] = limitchain.delta_exit_rate(model, delta, eps)
                if land.n > 1 and 4.0 * margin >= eps:
                    entry["saddle_escape_bound"] = limitchain.saddle_escape_bound(model, eps, margin)
                for i, rate in enumerate(entry["exit_rates"], start=1):
                    rows.append({"eps": eps, "well": i, "exit_rate": rate,
                                 "rescaled": rate * entry["time_scale"]})
            self.results.append(entry)
        if rows:
            self.writer.write_table("exit_rates", rows)

    # ---- exit law ----

    def _exitlaw(self):
        exp, run = self.config.experiment, self.config.run
        i = exp.well
        op = exp.stop
        gen = self._generator()
        ks_stats = []
        for eps in run.eps:
            rate = limitchain.exit_rate(self.landscape, self.model, i, eps)
            if rate <= 0:
                raise PreconditionError(f"well {i} is absorbing: exit rate is 0")
            horizon = default_horizon(self.config, rate)
            self._banner(f"📈 exit law | {op} | eps={eps:g} | lambda={rate:.6g}")
            records = self._run_paths(eps, op, horizon, well=i)
            self._dump(f"exitlaw_{op}_eps{eps:g}", records)
            self._trace(f"trace_{i}_eps{eps:g}", eps, i, horizon)
            sample = stats.ExitSample.from_records(records, eps, rate, well=i)
            ks = stats.ks_exponential(sample)
            ks_stats.append(ks.statistic)
            within = abs(ks.mean_rescaled - 1.0) <= exp.mean_tolerance
            self.tests.append(check_entry(f"ks_exponential[eps={eps:g}]", ks.passed(), ks.statistic,
                                          ks.p_value, ks.n, censored=sample.censored))
            self.tests.append(check_entry(f"rate_times_mean[eps={eps:g}]", within, ks.mean_rescaled,
                                          n=ks.n, tolerance=exp.mean_tolerance))
            shape = stats.exponential_shape(sample)
            self.tests.append(check_entry(f"exponential_shape[eps={eps:g}]", shape.passed, shape.statistic,
                                          n=shape.n, critical_value=shape.critical_value, level=shape.level))
            entry = {"eps": eps, "rate": rate, "horizon": horizon, "n": sample.n,
                     "censored": sample.censored, "ks_statistic": ks.statistic, "p_value": ks.p_value,
                     "rate_times_mean": ks.mean_rescaled, "shape_statistic": shape.statistic}
            if self.landscape.n > 1 and gen.rate(i) > 0:
                split = stats.exit_split_test(sample, gen)
                self.tests.append(check_entry(f"exit_split[eps={eps:g}]", split.passed, split.max_abs_z,
                                              n=split.n, observed=split.observed, expected=split.expected,
                                              unlanded=split.unlanded))
                entry["split"] = {"observed": split.observed, "expected": split.expected, "z": split.z}
            self.results.append(entry)
            np_times = np.sort(sample.rescaled())
            ecdf = np.arange(1, len(np_times) + 1) / len(np_times)
            self.writer.write_plotdata(f"exitlaw_ecdf_eps{eps:g}", [np_times, ecdf, 1.0 - np.exp(-np_times)],
                                       ["rescaled_time", "ecdf", "exp1_cdf"])
        if len(ks_stats) >= 3:
            ordered = [s for _, s in sorted(zip(run.eps, ks_stats), reverse=True)]
            ok = stats.decreasing_trend(ordered, exp.allowed_inversions)
            self.tests.append(check_entry("ks_statistic_trend", ok, n=len(ordered), values=ordered))

    # ---- transitions ----

    def _transitions(self):
        exp, run = self.config.experiment, self.config.run
        land, model = self.landscape, self.model
        gen = self._generator()
        for eps in run.eps:
            samples: Dict[int, stats.ExitSample] = {}
            entry: Dict[str, Any] = {"eps": eps, "wells": {}}
            leftward_total, simulated = 0, 0
            for i in range(1, land.n + 1):
                rate = limitchain.exit_rate(land, model, i, eps)
                if rate <= 0 and run.horizon is None:
                    entry["wells"][i] = {"absorbing": True}
                    continue
                horizon = default_horizon(self.config, rate) if rate > 0 else run.horizon
                self._banner(f"🔁 transitions | tau from well {i} | eps={eps:g}")
                records = self._run_paths(eps, "tau", horizon, well=i)
                self._dump(f"tau_{i}_eps{eps:g}", records)
                leftward = sum(1 for r in records if r.landing is not None and r.landing < i)
                leftward_total += leftward
                simulated += len(records)
                sample = stats.ExitSample.from_records(records, eps, rate, well=i)
                info: Dict[str, Any] = {"rate": rate, "n": sample.n, "censored": sample.censored,
                                        "leftward_transitions": leftward}
                if rate > 0:
                    samples[i] = sample
                    if sample.n:
                        info["rate_times_mean"] = rate * float(np.mean(sample.times))
                else:
                    info["absorbing"] = True
                entry["wells"][i] = info
            if model.kappa == 0:
                # 单侧尾: 不允许向左转移
                self.tests.append(check_entry(f"leftward_transitions[eps={eps:g}]", leftward_total == 0,
                                              leftward_total, n=simulated))
            est = stats.empirical_generator(samples, land.n, eps, model)
            z = np.where(est.se > 0, (est.q - gen.q) / np.where(est.se > 0, est.se, 1.0), 0.0)
            present = [i - 1 for i in range(1, land.n + 1) if i not in est.missing]
            max_z = float(np.nanmax(np.abs(z[present]))) if present else 0.0
            self.tests.append(check_entry(f"empirical_generator[eps={eps:g}]", max_z <= stats.Z_LIMIT, max_z,
                                          n=sum(s.n for s in samples.values()), missing=list(est.missing)))
            self.writer.write_matrix(f"generator_estimate_eps{eps:g}", est.q)
            entry["generator_estimate"] = est.q.tolist()
            entry["generator_se"] = est.se.tolist()

            i = exp.well
            if i in samples:
                value = entry["wells"][i].get("rate_times_mean", math.nan)
                ok = abs(value - 1.0) <= exp.mean_tolerance
                self.tests.append(check_entry(f"tau_rate_times_mean[eps={eps:g}]", ok, value,
                                              n=samples[i].n, tolerance=exp.mean_tolerance))
                split = stats.exit_split_test(samples[i], gen)
                self.tests.append(check_entry(f"tau_split[eps={eps:g}]", split.passed, split.max_abs_z,
                                              n=split.n, observed=split.observed, expected=split.expected))
            if exp.instrumented:
                rate = limitchain.exit_rate(land, model, i, eps)
                triples = self._run_paths(eps, "instrumented", default_horizon(self.config, rate), well=i,
                                          n_paths=exp.instrumented)
                complete = [(s, t, u) for s, t, u in triples if not (s.censored or t.censored or u.censored)]
                ordered = sum(1 for s, t, u in complete if s.t <= t.t <= u.t)
                self.tests.append(check_entry(f"stopping_order[eps={eps:g}]", ordered == len(complete),
                                              n=len(complete), ordered=ordered))
            self.results.append(entry)

    # ---- metastability ----

    def _meta(self):
        exp, run = self.config.experiment, self.config.run
        land, model = self.landscape, self.model
        gen = self._generator()
        radius = self.config.delta_for(land)
        times = sorted(exp.times)
        chain = []
        for t in times:
            p = limitchain.chain_transition_matrix(gen, t)
            self.writer.write_matrix(f"transition_matrix_t{t:g}", p)
            chain.append({"t": t, "matrix": p.tolist()})
        self.results.append({"section": "limit_chain", "generator": gen.to_rows(), "transition_matrices": chain})
        for eps in run.eps:
            scale = limitchain.time_scale(model, eps)
            model_times = [t * scale for t in times]
            self._banner(f"⏱  metastability | eps={eps:g} | times {times} x {scale:.6g}")
            positions = self._run_paths(eps, "snapshot", max(model_times + [run.h]), well=exp.well,
                                        times=model_times)
            columns = []
            for k in range(len(times)):
                columns.append(classify_positions(land, np.array([p[k] for p in positions]), radius))
            results = stats.fdd_test(columns, times, gen, exp.well)
            entry: Dict[str, Any] = {"eps": eps, "time_scale": scale, "times": []}
            for res in results:
                self.tests.append(check_entry(f"fdd[eps={eps:g},t={res.t:g}]", res.passed(), res.statistic,
                                              res.p_value, res.n, unclassified=res.unclassified_fraction))
                entry["times"].append({
                    "t": res.t, "observed": res.observed, "expected": res.expected,
                    "occupation": [c / res.n if res.n else 0.0 for c in res.observed],
                    "unclassified": res.unclassified_fraction,
                })
            if exp.joint and len(times) >= 2:
                joint = stats.fdd_joint_test(columns[0], columns[-1], times[0], times[-1], gen, exp.well)
                self.tests.append(check_entry(f"fdd_joint[eps={eps:g}]", joint.passed(), joint.statistic,
                                              joint.p_value, joint.n))
            self.writer.write_plotdata(
                f"occupation_eps{eps:g}",
                [times] + [[e["occupation"][j] for e in entry["times"]] for j in range(land.n)],
                ["t"] + [f"well_{j}" for j in range(1, land.n + 1)],
            )
            self.results.append(entry)

    # ---- short time localization ----

    def _shorttime(self):
        exp, run = self.config.experiment, self.config.run
        land = self.landscape
        radius = self.config.delta_for(land)
        r = self.model.tails.r
        fractions, left = [], []
        for eps in run.eps:
            t = exp.short_time / eps ** exp.delta_exponent
            self._banner(f"📍 short-time localization | eps={eps:g} | t={t:.6g}")
            positions = self._run_paths(eps, "snapshot", t, well=exp.well, times=[t])
            frac = stats.short_time_localization([p[0] for p in positions], land.minimum(exp.well),
                                                 radius, exp.delta_exponent, r)
            fractions.append(frac)
            # sigma_Delta <= t 蕴含 [0, t] 上某时刻离开过 B_Delta(m_i), 比快照更强
            exits = self._run_paths(eps, "delta", t, well=exp.well)
            left_frac = sum(1 for rec in exits if not rec.censored) / len(exits)
            left.append(left_frac)
            entry = {"eps": eps, "time": t, "outside_fraction": frac, "delta_exit_fraction": left_frac}
            if radius >= eps:
                entry["delta_jump_fraction"] = -math.expm1(-limitchain.delta_exit_rate(self.model, radius, eps) * t)
            self.results.append(entry)
        ordered = [f for _, f in sorted(zip(run.eps, fractions), reverse=True)]
        self.tests.append(check_entry("localization_trend", stats.decreasing_trend(ordered, 0),
                                      n=len(ordered), values=ordered))
        ordered = [f for _, f in sorted(zip(run.eps, left), reverse=True)]
        self.tests.append(check_entry("delta_exit_trend", stats.decreasing_trend(ordered, 0),
                                      n=len(ordered), values=ordered))
        self.writer.write_plotdata("shorttime", [run.eps, fractions, left],
                                   ["eps", "outside_fraction", "delta_exit_fraction"])

    # ---- gaussian comparison ----

    def _gauss(self):
        exp, run = self.config.experiment, self.config.run
        land = self.landscape
        cmp = limitchain.gaussian_comparison(land)
        model = LevyModel.brownian(d=self.config.levy.d or 1.0, mu=self.config.levy.mu)
        i = cmp.shallow_well
        c_min = land.curvature_min[i - 1]
        c_saddle = abs(land.curvature_saddle[0])
        prefactor = max(1.0, 2.0 * math.pi / math.sqrt(c_min * c_saddle))
        means = []
        for eps in run.eps:
            horizon = run.horizon or run.horizon_factor * prefactor * math.exp(cmp.barrier / eps ** 2)
            self._banner(f"🌡  Gaussian comparison | eps={eps:g} | from well {i}")
            records = self._run_paths(eps, "tau", horizon, well=i, model=model)
            self._dump(f"gauss_eps{eps:g}", records)
            kept = [r.t for r in self._completed(records, "tau", eps, horizon)]
            censored = len(records) - len(kept)
            mean = float(np.mean(kept))
            means.append(mean)
            self.results.append({"eps": eps, "mean_exit": mean, "n": len(kept), "censored": censored,
                                 "eps2_log_mean": eps ** 2 * math.log(mean)})
        fit = stats.gaussian_slope_fit(run.eps, means)
        ok = abs(fit.slope / cmp.barrier - 1.0) <= exp.slope_tolerance
        self.tests.append(check_entry("kramers_slope", ok, fit.slope, n=len(means), barrier=cmp.barrier,
                                      intercept=fit.intercept, tolerance=exp.slope_tolerance))
        self.results.append({"section": "gaussian", "generator": cmp.generator.to_rows(),
                             "barrier": cmp.barrier, "deep_well": cmp.deep_well, "shallow_well": i})
        self.writer.write_plotdata("kramers", [[1.0 / e ** 2 for e in run.eps], np.log(means)],
                                   ["inv_eps2", "log_mean_exit"])

    # ---- saddle escape ----

    def _saddle(self):
        exp, run = self.config.experiment, self.config.run
        j = exp.saddle
        scaled = []
        for eps in run.eps:
            margin = run.margin if run.margin is not None else eps ** run.gamma
            bound = limitchain.saddle_escape_bound(self.model, eps, margin)
            horizon = run.horizon or run.horizon_factor * bound
            self._banner(f"⛰  saddle escape | s_{j} | eps={eps:g}")
            records = self._run_paths(eps, "saddle", horizon, saddle=j, keep_log=True)
            self._dump(f"saddle_{j}_eps{eps:g}", records)
            kept = self._completed(records, "saddle", eps, horizon)
            mean = float(np.mean([r.t for r in kept]))
            h = tail_total(self.model, 1.0 / eps)
            dominated = 0
            for r in kept:
                big = [t for t, size in r.jump_log if abs(size) > 4.0 * margin]
                if not big or r.t <= big[0]:
                    dominated += 1
            scaled.append(h * mean)
            self.tests.append(check_entry(f"saddle_escape[eps={eps:g}]", h * mean < exp.saddle_threshold,
                                          h * mean, n=len(kept), threshold=exp.saddle_threshold))
            self.tests.append(check_entry(f"saddle_dominance[eps={eps:g}]", dominated == len(kept),
                                          n=len(kept), dominated=dominated))
            self.results.append({"eps": eps, "mean_escape": mean, "scaled_mean": h * mean,
                                 "bound": bound, "censored": len(records) - len(kept)})
        if len(scaled) >= 2:
            ordered = [s for _, s in sorted(zip(run.eps, scaled), reverse=True)]
            self.tests.append(check_entry("saddle_trend", stats.decreasing_trend(ordered, exp.allowed_inversions),
                                          n=len(ordered), values=ordered))

    # ---- tube ----

    def _tube(self):
        exp, run = self.config.experiment, self.config.run
        i = exp.well
        for eps in run.eps:
            duration = exp.tube_duration or relaxation_time(self.landscape, eps, run.gamma)
            threshold = eps ** (2 * run.gamma) / 2.0
            self._banner(f"🧵 tube deviation | well {i} | eps={eps:g} | T={duration:.6g}")
            results = self._run_paths(eps, "tube", duration, well=i, duration=duration)
            deviations = np.array([r.deviation for r in results])
            bad = sum(1 for r in results if r.overflowed or r.deviation >= threshold)
            frac = bad / len(results)
            self.tests.append(check_entry(f"tube[eps={eps:g}]", frac < exp.tube_fraction, frac, n=len(results),
                                          threshold=threshold))
            self.results.append({"eps": eps, "duration": duration, "threshold": threshold,
                                 "exceed_fraction": frac, "max_deviation": float(np.max(deviations)),
                                 "mean_deviation": float(np.mean(deviations))})
