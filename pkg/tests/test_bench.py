import json

import pytest

from lagmix.bench import (
    CELL_GRID,
    MEDIAN_KEYS,
    BenchError,
    derive_seed,
    run_suite,
    suite_csv,
)


def test_derive_seed_stream_is_injective():
    seen = set()
    for master in (0, 1, 7):
        for ci in range(4):
            for k in range(10):
                s = derive_seed(master, ci, k)
                assert s not in seen
                seen.add(s)
    assert derive_seed(1, 2, 3) == 10203


def test_unknown_suite_raises():
    with pytest.raises(BenchError):
        run_suite("r9")


@pytest.fixture(scope="module")
def quick_r1():
    return run_suite("r1", master_seed=0, seeds_per_cell=1, max_iter=200)


def test_suite_structure(quick_r1):
    result, runtimes = quick_r1
    assert result["schema"] == "lagmix-bench/1"
    assert result["algorithm"] == "em"
    assert len(result["cells"]) == len(CELL_GRID) == len(runtimes)
    for cell, times in zip(result["cells"], runtimes):
        assert len(cell["runs"]) == len(times) == 1
        for key in MEDIAN_KEYS:
            assert key in cell["median"]
        for run in cell["runs"]:
            assert run["seed"] == derive_seed(0, CELL_GRID.index((cell["sigma_n"], cell["kappa"])), 0)
            assert "runtime_s" not in run


def test_noise_free_cell_runs_once(quick_r1):
    result, _ = quick_r1
    cell0 = result["cells"][0]
    assert cell0["sigma_n"] == 0.0 and cell0["kappa"] == 0.0
    assert len(cell0["runs"]) == 1


def test_result_is_json_serializable_and_deterministic(quick_r1):
    result, _ = quick_r1
    text = json.dumps(result, sort_keys=True)
    result2, _ = run_suite("r1", master_seed=0, seeds_per_cell=1, max_iter=200)
    assert text == json.dumps(result2, sort_keys=True)


def test_csv_shape(quick_r1):
    result, runtimes = quick_r1
    csv = suite_csv(result, runtimes)
    lines = csv.strip().split("\n")
    # header + five medians + iterations + runtime
    assert len(lines) == 8
    assert lines[0].split(",") == ["measure", "(0|0)", "(50|3)", "(100|3)", "(150|3)"]
    assert lines[-1].startswith("runtime_s,")
    for line in lines[1:]:
        assert len(line.split(",")) == 5


def test_noise_free_r1_is_accurate(quick_r1):
    result, _ = quick_r1
    errors = result["cells"][0]["runs"][0]["errors"]
    assert errors["rmse_rho"] <= 0.1
    assert errors["rmse_theta_deg"] <= 0.01
