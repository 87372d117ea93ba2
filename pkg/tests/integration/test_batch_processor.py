# -*- coding: utf-8 -*-
"""
路径批处理: 结果只依赖 (seed, path_index), 与 worker 数量和分块无关
"""
import pytest

from app.core.errors import PreconditionError
from app.core.simulate import SimConfig, TubeResult
from app.data.batch_processor import PathBatchProcessor, PathJob, chunk_bounds


@pytest.fixture(scope="module")
def sigma_job(double_well, cauchy_model):
    sim = SimConfig(eps=0.3, rho=0.7, gamma=0.05, h=1e-2, horizon=1e4, delta=0.25, seed=99, margin=0.1)
    return PathJob(landscape=double_well, model=cauchy_model, sim=sim, operation="sigma", well=1)


class TestChunkBounds:

    def test_cover_range(self):
        bounds = chunk_bounds(10, 4, start_index=5)
        assert bounds[0][0] == 5
        assert bounds[-1][1] == 15
        assert all(a < b for a, b in bounds)
        assert all(bounds[k][1] == bounds[k + 1][0] for k in range(len(bounds) - 1))

    def test_more_chunks_than_paths(self):
        assert chunk_bounds(3, 16) == [(0, 1), (1, 2), (2, 3)]


class TestPathBatchProcessor:

    def test_worker_count_does_not_change_results(self, sigma_job):
        serial = PathBatchProcessor(workers=1, verbose=False).process(sigma_job, 16)
        parallel = PathBatchProcessor(workers=2, verbose=False).process(sigma_job, 16)
        assert serial == parallel
        assert len(serial) == 16

    def test_start_index(self, sigma_job):
        processor = PathBatchProcessor(workers=1, verbose=False)
        full = processor.process(sigma_job, 12)
        tail = processor.process(sigma_job, 6, start_index=6)
        assert tail == full[6:]

    def test_tube_operation(self, sigma_job):
        job = PathJob(landscape=sigma_job.landscape, model=sigma_job.model, sim=sigma_job.sim,
                      operation="tube", well=2, params={"duration": 1.0})
        results = PathBatchProcessor(workers=1, verbose=False).process(job, 4)
        assert all(isinstance(r, TubeResult) for r in results)

    def test_snapshot_operation(self, sigma_job):
        job = PathJob(landscape=sigma_job.landscape, model=sigma_job.model, sim=sigma_job.sim,
                      operation="snapshot", well=1, params={"times": [0.5, 1.0]})
        results = PathBatchProcessor(workers=1, verbose=False).process(job, 3)
        assert [r.shape for r in results] == [(2,)] * 3

    def test_unknown_operation(self, sigma_job):
        with pytest.raises(PreconditionError):
            PathJob(landscape=sigma_job.landscape, model=sigma_job.model, sim=sigma_job.sim,
                    operation="teleport")

    def test_needs_paths(self, sigma_job):
        with pytest.raises(PreconditionError):
            PathBatchProcessor(workers=1, verbose=False).process(sigma_job, 0)

    def test_interrupt_keeps_prefix(self, sigma_job, monkeypatch):
        import app.data.batch_processor as bp

        calls = {"n": 0}
        original = bp._run_chunk

        def interrupted_after_first(task):
            calls["n"] += 1
            if calls["n"] == 2:
                raise KeyboardInterrupt
            return original(task)

        monkeypatch.setattr(bp, "_run_chunk", interrupted_after_first)
        processor = PathBatchProcessor(workers=1, verbose=False)
        with pytest.raises(KeyboardInterrupt):
            processor.process(sigma_job, 8)
        assert processor.partial == PathBatchProcessor(workers=1, verbose=False).process(sigma_job, 2)
