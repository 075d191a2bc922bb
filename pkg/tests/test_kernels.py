import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csrisk import _pykernels, kernels

compiled = pytest.importorskip("csrisk._kernels")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=60))
def test_hull_backends_agree(ys):
    x = np.cumsum(np.ones(len(ys)))
    y = np.array(ys)
    np.testing.assert_array_equal(compiled.lower_hull_indices(x, y), _pykernels.lower_hull_indices(x, y))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50, allow_nan=False), st.floats(0.01, 20, allow_nan=False)),
                min_size=1, max_size=60))
def test_pava_backends_agree(pairs):
    y = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    np.testing.assert_allclose(compiled.pava(y, w), _pykernels.pava(y, w), rtol=1e-13, atol=1e-12)


def test_hull_keeps_endpoints_and_drops_collinear():
    x = np.arange(5.0)
    idx = _pykernels.lower_hull_indices(x, 2 * x + 1)
    np.testing.assert_array_equal(idx, [0, 4])
    np.testing.assert_array_equal(compiled.lower_hull_indices(x, 2 * x + 1), [0, 4])


def test_backend_selected_at_import():
    assert kernels.BACKEND == ("python" if os.environ.get("CSRISK_PURE_PYTHON") == "1" else "cython")
    env = dict(os.environ, CSRISK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import csrisk.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fallback_when_extension_missing():
    code = ("import sys; sys.modules['csrisk._kernels'] = None\n"
            "import csrisk.kernels as k, csrisk._pykernels as p\n"
            "print(k.BACKEND, k.pava is p.pava)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "True"]


def test_benchmark_script_runs():
    import runpy
    from pathlib import Path
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    bench = runpy.run_path(str(script))["bench"]
    rows = bench([50], repeat=1)
    assert {r[0] for r in rows} == {"hull", "pava"}
    assert all(set(r[2]) == {"python", "cython"} for r in rows)
