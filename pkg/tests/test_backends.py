"""The pure-numpy fallback must produce the same physics as the jitted path."""

import json
import os
import subprocess
import sys

import pytest

from windfreq._accel import backend_name

SCRIPT = r"""
import json
from dataclasses import replace
import windfreq
from windfreq import collocation as coll, trajopt as to
from windfreq.presets import load_preset
from windfreq.scenario import scenario_from_dict
from windfreq.simulator import metrics, run

sc = scenario_from_dict(load_preset("two_machine"))
sc = replace(sc, solver=replace(sc.solver, nodes=24),
             sim=replace(sc.sim, duration_s=35.0))
prob = to.build_problem(sc.grid, list(sc.governors), 0.075, 30.0)
sol = to.solve_max_nadir(prob, coll.make_grid(24, 0.0, 30.0))
res = run(sc, alpha_override=sol.alpha)
rec = metrics(res, nadir_ref_pu=sol.nadir_pu)
print(json.dumps({
    "backend": windfreq.backend_name(),
    "nadir_lp": sol.nadir_pu,
    "alpha": sol.alpha,
    "nadir_sim": rec.nadir_pu,
    "residual": rec.max_swing_residual,
}))
"""


def _run(disable: bool) -> dict:
    env = dict(os.environ)
    env["WINDFREQ_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env,
                         capture_output=True, text=True, timeout=600)
    assert out.returncode == 0, out.stderr
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_flag_selects_backend():
    assert backend_name() in ("numba", "numpy")


@pytest.mark.slow
def test_numpy_fallback_matches_numba():
    fast = _run(disable=False)
    slow = _run(disable=True)
    assert fast["backend"] == "numba"
    assert slow["backend"] == "numpy"
    assert slow["nadir_lp"] == pytest.approx(fast["nadir_lp"], rel=1e-12)
    assert slow["alpha"] == pytest.approx(fast["alpha"], rel=1e-12)
    assert slow["nadir_sim"] == pytest.approx(fast["nadir_sim"], rel=1e-10)
    assert slow["residual"] <= 1e-8
