"""Consistency of the numba fast path and the pure-numpy fallback."""

import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from metaseg import _kernels
from metaseg._kernels import dispersion_maps, interior_mask, label_components, logistic_cd


def test_paths_agree_in_process():
    """The fallback implementations are importable regardless of the env
    flag, so compare them directly against the public dispatch."""
    rng = np.random.default_rng(0)
    probs = rng.dirichlet(np.ones(6), size=(20, 17))
    ent, diff, cls = dispersion_maps(probs)
    ent2, diff2, cls2 = _kernels._dispersion_numpy(probs, 1.0 / np.log(6))
    np.testing.assert_allclose(ent, ent2, atol=1e-12)
    np.testing.assert_allclose(diff, diff2, atol=1e-12)
    np.testing.assert_array_equal(cls, cls2)

    m = rng.integers(0, 3, size=(24, 24)).astype(np.int32)
    ignore = np.zeros((24, 24), dtype=bool)
    seg, n = label_components(m, ignore)
    raw2 = _kernels._label_numpy(m, ignore)
    seg2, n2 = _kernels._renumber_first_encounter(raw2)
    np.testing.assert_array_equal(seg, seg2)
    assert n == n2
    np.testing.assert_array_equal(interior_mask(seg), _kernels._interior_numpy(seg))


def test_solver_paths_agree_in_objective():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 6))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    y = (X @ rng.normal(size=6) + rng.normal(size=80) > 0).astype(np.float64)
    for lam in (0.02, 0.0):
        w_a, b_a, _, ok_a = logistic_cd(X, y, np.zeros(6), 0.0, lam)
        slow = _kernels._logistic_cd_numpy if lam > 0 else _kernels._logistic_newton_numpy
        args = (X, y, np.zeros(6), 0.0) + ((lam,) if lam > 0 else ()) + (10_000, 1e-8, 1e-10)
        w_b, b_b, _, ok_b = slow(*args)
        assert ok_a and ok_b

        def obj(w, b):
            z = b + X @ w
            return float(np.mean(np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z))))) + lam * np.abs(w).sum()

        assert abs(obj(w_a, b_a) - obj(w_b, b_b)) < 1e-9


@pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="already running the fallback")
def test_disabled_flag_selects_numpy_fallback():
    """Spawn a subprocess with METASEG_DISABLE_NUMBA=1 and check that its
    results match the in-process (numba) ones bit for bit."""
    rng = np.random.default_rng(2)
    probs = rng.dirichlet(np.ones(4), size=(12, 12))
    ent, diff, cls = dispersion_maps(probs)
    m = rng.integers(0, 3, size=(12, 12)).astype(np.int32)
    seg, _ = label_components(m)

    script = textwrap.dedent(
        """
        import json, sys
        import numpy as np
        from metaseg import _kernels
        assert not _kernels.NUMBA_ENABLED
        probs = np.array(json.loads(sys.argv[1]))
        m = np.array(json.loads(sys.argv[2]), dtype=np.int32)
        ent, diff, cls = _kernels.dispersion_maps(probs)
        seg, _ = _kernels.label_components(m)
        print(json.dumps({
            "ent": ent.tolist(), "diff": diff.tolist(),
            "cls": cls.tolist(), "seg": seg.tolist(),
        }))
        """
    )
    env = dict(os.environ, METASEG_DISABLE_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, "-c", script, json.dumps(probs.tolist()), json.dumps(m.tolist())],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    out = json.loads(proc.stdout)
    np.testing.assert_allclose(np.array(out["ent"]), ent, atol=1e-12)
    np.testing.assert_allclose(np.array(out["diff"]), diff, atol=1e-12)
    np.testing.assert_array_equal(np.array(out["cls"]), cls)
    np.testing.assert_array_equal(np.array(out["seg"]), seg)
