"""Smoke test for the dppstream_py extension.

Uses an installed module when present (e.g. after `maturin develop` in
crates/py); otherwise builds the cdylib with cargo and imports it from a
temporary directory.
"""

import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("dppstream_py")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "dppstream-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / {"darwin": "libdppstream_py.dylib", "win32": "dppstream_py.dll"}.get(
        sys.platform, "libdppstream_py.so"
    )
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / ("dppstream_py.pyd" if sys.platform == "win32" else "dppstream_py.so"))
    sys.path.insert(0, str(tmp))
    return importlib.import_module("dppstream_py")


def main():
    m = load()
    assert m.pathloss_gain(40.0) == 0.5
    assert abs(m.torus_distance((1.0, 1.0), (79.0, 79.0), 80.0) - math.sqrt(8.0)) < 1e-12
    assert m.slot_bits(2.0356, 168_000) == math.floor(168_000 * 2.0356)
    assert m.optimize_gamma(2.0, 1.0) == 0.5
    assert m.optimize_gamma(0.0, 1.0) == 1.0

    weights, sinrs = [3.0, 1.0, 2.0, 0.0], [0.5, 2.0, 1.0, 4.0]
    g = m.greedy_select(weights, sinrs, 10, 3)
    e = m.exhaustive_select(weights, sinrs, 10, 3)
    assert g[1] == e[1], (g, e)

    p = m.QualityRateProfile([[(0.5, 100), (0.9, 300)]])
    assert p.select_mode(0.0, 1.0, 0) == 2
    assert p.select_mode(1.0, 1.0, 0) == 1
    q = m.RequestQueue(p, session_length=3, n=1)
    q.theta = 1.0
    assert q.request(0) == (0, 2, 300)
    assert q.drain(250) == []
    assert q.drain(100) == [0]
    q.check()

    r = m.run_simulation({"topology.users": "6", "sim.session_chunks": "8", "sim.n": "5", "mimo.symbols_per_slot": "4000"})
    assert r["drain_complete"] is True
    assert r["users"] and all(u["delivered_chunks"] == 8 for u in r["users"]), r
    assert 0.0 < r["mean_quality"] <= 1.0
    try:
        m.run_simulation({"mimo.M": "0"})
    except ValueError as err:
        assert "mimo.M" in str(err)
    else:
        raise AssertionError("invalid config accepted")
    print("python smoke test ok:", f"utility={r['utility']:.4f}", f"users={len(r['users'])}")


if __name__ == "__main__":
    main()
