"""Built-in consistency checks: registry, filtering, failure reporting."""

import numpy as np
import pytest

import rxml.local_embedding
from rxml.selftest import CHECKS, run_selftest


class TestRegistry:
    def test_names_are_unique(self):
        names = [name for name, _, _ in CHECKS]
        assert len(names) == len(set(names))

    def test_categories(self):
        cats = {cat for _, cat, _ in CHECKS}
        assert cats == {"manifold", "gradient", "solver", "metrics"}


class TestRun:
    def test_everything_passes(self):
        lines = []
        passed, failed = run_selftest(emit=lines.append)
        assert (passed, failed) == (len(CHECKS), 0)
        assert lines[-1] == f"selftest: {len(CHECKS)} passed, 0 failed"
        assert sum(ln.startswith("PASS ") for ln in lines) == len(CHECKS)

    def test_category_filter(self):
        lines = []
        passed, failed = run_selftest(name_filter="manifold", emit=lines.append)
        assert failed == 0
        assert passed == sum(1 for _, cat, _ in CHECKS if cat == "manifold")
        assert passed == 4
        assert all("(manifold)" in ln for ln in lines[:-1])

    def test_name_filter(self):
        lines = []
        passed, failed = run_selftest(name_filter="sylvester", emit=lines.append)
        assert (passed, failed) == (1, 0)
        assert lines[0] == "PASS sylvester (solver)"

    def test_unmatched_filter_runs_nothing(self):
        lines = []
        assert run_selftest(name_filter="zzz", emit=lines.append) == (0, 0)
        assert lines == ["selftest: 0 passed, 0 failed"]

    def test_lines_are_deterministic(self):
        a, b = [], []
        run_selftest(emit=a.append)
        run_selftest(emit=b.append)
        assert a == b


class TestFailureDetection:
    def test_broken_gradient_is_caught(self, monkeypatch):
        def wrong_gradient(mask, z):
            return np.zeros_like(z)

        monkeypatch.setattr(rxml.local_embedding, "masked_gradient", wrong_gradient)
        lines = []
        passed, failed = run_selftest(emit=lines.append)
        assert failed >= 1
        fail_lines = [ln for ln in lines if ln.startswith("FAIL ")]
        assert any("masked_gradient" in ln for ln in fail_lines)
        assert lines[-1] == f"selftest: {passed} passed, {failed} failed"

    def test_failures_do_not_stop_the_run(self, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("deliberately broken")

        monkeypatch.setattr(rxml.local_embedding, "masked_gradient", boom)
        passed, failed = run_selftest(emit=lambda _line: None)
        assert passed + failed == len(CHECKS)
        assert failed >= 1
        assert passed >= len(CHECKS) - 2
