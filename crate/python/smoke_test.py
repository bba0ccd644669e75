"""Smoke test for the Python extension.

Build the module first:

    cargo build --release -p fxts-overtake-py --features extension-module

then run ``python3 python/smoke_test.py`` from the repository root, or pass
the path of the built shared library as the first argument.
"""

import importlib.util
import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    if len(sys.argv) > 1:
        return Path(sys.argv[1])
    for profile in ("release", "debug"):
        for name in ("libfxts_overtake_py.so", "libfxts_overtake_py.dylib", "fxts_overtake_py.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                return path
    sys.exit("extension not built; see the module docstring")


def load(lib):
    tmp = Path(tempfile.mkdtemp())
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    target = tmp / ("fxts_overtake_py" + suffix)
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("fxts_overtake_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    m = load(find_library())

    p = m.FxtsParams(1.0, 1.0, 0.0, 2.0)
    assert p.regime() == "NonPositive"
    value, valid = p.settling_time_bound("theorem")
    assert valid and abs(value - math.pi) < 1e-12
    assert p.numeric_settling_time(10.0) <= value

    report = m.bounds(1.0, 1.0, 1.0, 2.0, variant="theorem", v0=10.0)
    assert report["regime"] == "Subcritical"
    assert abs(report["time_bound"] - 4.836798) < 1e-5
    assert report["oracle_time"] <= report["time_bound"]

    sol = m.solve_qp([[1.0, 0.0], [0.0, 1.0]], [-1.0, -1.0], [[1.0, 1.0]], [1.0])
    assert sol["status"] == "optimal"
    assert all(abs(z - 0.5) < 1e-9 for z in sol["z"])

    q = m.vehicle_step([0.0, 0.0, 0.0, 10.0], [0.0, 1.0], 0.1)
    assert abs(q[0] - 1.0) < 1e-12 and abs(q[3] - 10.1) < 1e-12

    cfg = json.loads(m.default_config())
    assert cfg["scenario"]["v_lead0"] == 17.0

    summary = m.run_episode("{}")
    assert summary["status"] == "Completed", summary["status"]
    assert summary["min_h_lane"] >= 0.0 and summary["min_h_lead"] >= 0.0

    try:
        m.run_episode('{"gains": {"kxv": 1.0}}')
    except ValueError as e:
        assert "validation" in str(e)
    else:
        raise AssertionError("invalid gains accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
