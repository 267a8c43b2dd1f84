from __future__ import annotations

import os
import time

import pytest

from ofs_chaoslab import pipeline
from ofs_chaoslab.config import load_config

# criterion id ("1".."10", "6-full") -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}

FULL = os.environ.get("OFS_CHAOSLAB_FULL") == "1"


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="full profile; set OFS_CHAOSLAB_FULL=1")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE, key=lambda k: (int(k.split("-")[0]), k)):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>6}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Desk-profile run (K=60 vs 66) shared by the acceptance and pipeline tests."""
    out = tmp_path_factory.mktemp("desk")
    cfg = load_config("desk", overrides={"output_dir": str(out)})
    timings = {}
    t0 = time.perf_counter()
    spec = pipeline.run_spectrum(cfg)
    timings["spectrum"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    stats = pipeline.run_levelstats(cfg)
    timings["levelstats"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ofs = pipeline.run_ofs(cfg)
    timings["ofs"] = time.perf_counter() - t0
    return {"cfg": cfg, "spectrum": spec, "levelstats": stats, "ofs": ofs, "timings": timings}
