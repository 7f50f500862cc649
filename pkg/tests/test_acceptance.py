"""Acceptance sweeps; each prints one PASS/FAIL line to the terminal."""

import time

import pytest

from symmarkov import battery

# seconds; criteria without an entry have no stated limit
LIMITS = {1: 10.0, 4: 30.0, 7: 60.0, 8: 60.0}


def summary(r):
    c = r["criterion"]
    if c == 1:
        return f"valid max residual {r['max_residual_valid']:.1e}, broken min residual {r['min_residual_broken']:.2f}"
    if c == 2:
        return f"spectrum in [{r['min_eigenvalue']:.4f}, {r['max_eigenvalue']:.16f}]"
    if c == 3:
        return "max residual {:.1e}".format(max(r[k] for k in ("drop_isometry", "laplacian_form",
                                                                  "diagram", "indicator_energy")))
    if c == 4:
        return f"{r['graphs']} graphs, {r['subsets']} sets, min even-odd gap {r['min_even_odd_gap']:.1e}"
    if c == 5:
        return "max residual {:.1e}".format(max(r[k] for k in ("P_prime", "Delta_prime",
                                                                  "nu_prime_invariance", "q_isometry")))
    if c == 6:
        return f"solve/series {r['solve_series']:.1e}, energy identity {r['energy_identity']:.1e}"
    if c == 7:
        m = r["martingale"]
        return (f"{r['outside_3se']}/{r['comparisons']} beyond 3 se (max z {r['max_z']:.2f}), "
                f"martingale drift {m['drift']:.1e} +- {m['stderr']:.1e}")
    if c == 8:
        return "; ".join(f"{k['kernel']}: orders {k['orders']}" for k in r["kernels"])
    return ""


def report(capsys, number, passed, detail, seconds):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if passed else 'FAIL'} ({seconds:.2f} s) {detail}")


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(number, capsys):
    start = time.perf_counter()
    r = battery.CRITERIA[number - 1](0)
    seconds = time.perf_counter() - start
    limit = LIMITS.get(number)
    ok = r["passed"] and (limit is None or seconds <= limit)
    report(capsys, number, ok, summary(r), seconds)
    assert r["criterion"] == number
    if limit is not None:
        assert seconds <= limit
    assert r["passed"], summary(r)


def test_criterion_9_determinism(capsys):
    start = time.perf_counter()
    a = battery.dumps_report(battery.run_battery(0, threads=1))
    b = battery.dumps_report(battery.run_battery(0, threads=4))
    seconds = time.perf_counter() - start
    same = a.encode() == b.encode()
    report(capsys, 9, same, f"{len(a)} bytes per report", seconds)
    assert same
