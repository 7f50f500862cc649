"""Property sweeps over seeded instance families.

Each ``criterion_*`` function returns a plain dict of results (no timings)
so that two runs with the same seed serialize to identical bytes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import networkx as nx
import numpy as np
from scipy.special import erf

from . import __version__
from .discretize import (check_connected, conductance_sequence, convergence_order, discretize_kernel,
                         discretize_ladder,
                         refinement_residual, vertex_mass_sequence)
from .energy import EnergyForm, diagram_residual, drop, harmonic_solve, indicator_energy
from .equiv import EquivalenceData, laplacian_prime_identity, markov_prime_via_formula, q_isometry_check
from .errors import IdentityViolation, MonotonicityViolation
from .generators import (birth_death, complete_graph, cycle_graph, path_graph, random_connected,
                         star_graph, weighted_graph)
from .green import (green_decompose, green_energy_identities, green_series, green_solve, kill,
                    symmetric_pair_check)
from .kernel import KernelSpec, kernel_rectangle_mass
from .measure import FiniteSymmetricMeasure
from .operators import (apply_Delta, l2_inner, l2_norm, l2_rho_norm, markov_system,
                        reversibility_battery, spectrum_P)
from .pathspace import check_distribution_reversal, estimate_lambda_event, martingale_diagnostic, sample_paths


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


@lru_cache(maxsize=4)
def random_networks(seed: int = 0, count: int = 50, lo: int = 4, hi: int = 64) -> tuple:
    rng = _rng(seed, 1)
    return tuple(random_connected(int(rng.integers(lo, hi + 1)), rng) for _ in range(count))


def desymmetrize(m: FiniteSymmetricMeasure, rng: np.random.Generator) -> FiniteSymmetricMeasure:
    """Scale the strict upper triangle by random factors in [1.5, 2.5); validation off."""
    W = m.dense().copy()
    up = np.triu(np.ones_like(W, dtype=bool), 1)
    W[up] *= rng.uniform(1.5, 2.5, size=int(up.sum()))
    return FiniteSymmetricMeasure(m.mu, W, check=False)


def criterion_1(seed: int = 0) -> dict:
    nets = random_networks(seed)
    rng = _rng(seed, 11)
    good, bad = [], []
    for m in nets:
        good.append(reversibility_battery(markov_system(m)))
        bad.append(reversibility_battery(markov_system(desymmetrize(m, rng))))
    return {
        "criterion": 1,
        "instances": len(nets),
        "sizes": [m.n for m in nets],
        "max_residual_valid": max(r.max_residual for r in good),
        "min_residual_broken": min(min(c.residual for c in r.clauses) for r in bad),
        "valid_all_pass": all(r.all_passed for r in good),
        "broken_all_fail": all(r.all_failed for r in bad),
        "passed": all(r.all_passed for r in good) and all(r.all_failed for r in bad),
    }


def criterion_2(seed: int = 0) -> dict:
    lo, hi, top = math.inf, -math.inf, []
    for m in random_networks(seed):
        ev = spectrum_P(markov_system(m))
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        top.append(abs(ev[-1] - 1.0))
    ok = lo >= -1 - 1e-10 and hi <= 1 + 1e-10 and max(top) <= 1e-10
    return {"criterion": 2, "min_eigenvalue": float(lo), "max_eigenvalue": float(hi),
            "max_top_gap": float(max(top)), "passed": bool(ok)}


def criterion_3(seed: int = 0, functions: int = 1000, sets: int = 500) -> dict:
    nets = random_networks(seed)
    rng = _rng(seed, 3)
    iso = lap = diag = 0.0
    for k in range(functions):
        m = nets[k % len(nets)]
        sys = markov_system(m)
        form = EnergyForm.from_measure(m)
        f = rng.standard_normal(m.n)
        e = form.norm_sq(f)
        iso = max(iso, abs(l2_rho_norm(sys, drop(form, f)) ** 2 - e) / (1.0 + e))
        lap = max(lap, abs(l2_inner(f, apply_Delta(sys, f), m.mu) - e) / (1.0 + e))
        diag = max(diag, diagram_residual(sys, form, f) / (1.0 + l2_norm(f, m.nu)))
    ind = 0.0
    bound_ok = True
    for k in range(sets):
        m = nets[k % len(nets)]
        A = np.flatnonzero(rng.random(m.n) < 0.5)
        form = EnergyForm.from_measure(m)
        try:
            r = indicator_energy(form, m, A)
            ind = max(ind, abs(r.energy - r.crossing_mass) / (1.0 + r.crossing_mass))
            bound_ok &= r.crossing_mass <= r.nu_A * (1 + 1e-12)
        except IdentityViolation:
            bound_ok = False
    ok = iso <= 1e-10 and lap <= 1e-10 and diag <= 1e-10 and ind <= 1e-12 and bound_ok
    return {"criterion": 3, "drop_isometry": iso, "laplacian_form": lap, "diagram": diag,
            "indicator_energy": ind, "indicator_bound": bool(bound_ok), "passed": bool(ok)}


def small_graph_family(seed: int = 0, extra_eight: int = 50) -> list:
    """Every graph of the atlas (up to 7 nodes) without isolated nodes, seeded
    weights, plus random connected 8-state graphs."""
    rng = _rng(seed, 4)
    out = []
    for g in nx.graph_atlas_g():
        if g.number_of_nodes() == 0 or min((d for _, d in g.degree()), default=0) == 0:
            continue
        out.append(weighted_graph(nx.to_numpy_array(g), rng))
    for _ in range(extra_eight):
        out.append(random_connected(8, rng))
    return out


def _ladder_residuals(m: FiniteSymmetricMeasure, n_max: int) -> tuple:
    n = m.n
    W = m.dense()
    nu = m.nu
    P = W / nu[:, None]
    X = ((np.arange(1, 2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    # ||P^k chi_A||^2 from iterated application
    V = X.T.copy()
    norms = []
    for k in range(n_max + 1):
        norms.append(np.einsum("i,ia,ia->a", nu, V, V))
        V = P @ V
    # rho_k(A x A) from the matrices diag(nu) P^k
    M = np.diag(nu)
    rho = []
    for k in range(2 * n_max + 2):
        rho.append(np.einsum("ai,ij,aj->a", X, M, X))
        M = M @ P
    eq = max(float(np.max(np.abs(norms[k] - rho[2 * k]) / (1.0 + rho[2 * k]))) for k in range(n_max + 1))
    gap = min(float(np.min(rho[2 * k] - rho[2 * k + 1])) for k in range(n_max + 1))
    return eq, gap, X.shape[0]


def criterion_4(seed: int = 0, n_max: int = 6) -> dict:
    fam = small_graph_family(seed)
    eq, gap, sets = 0.0, math.inf, 0
    for m in fam:
        e, g, s = _ladder_residuals(m, n_max)
        eq, gap, sets = max(eq, e), min(gap, g), sets + s
    return {"criterion": 4, "graphs": len(fam), "subsets": sets, "max_norm_residual": eq,
            "min_even_odd_gap": gap, "passed": bool(eq <= 1e-12 and gap >= -1e-12)}


def criterion_5(seed: int = 0, pairs: int = 1000, chains: int = 50) -> dict:
    rng = _rng(seed, 5)
    worst = {"P_prime": 0.0, "Delta_prime": 0.0, "nu_prime_invariance": 0.0}
    for _ in range(pairs):
        m = random_connected(int(rng.integers(3, 13)), rng)
        sys = markov_system(m)
        r = rng.uniform(0.1, 3.0, size=(m.n, m.n))
        r = np.triu(r) + np.triu(r, 1).T
        f = rng.standard_normal(m.n)
        rep = markov_prime_via_formula(sys, EquivalenceData(r=r), f)
        worst["P_prime"] = max(worst["P_prime"], rep.formula_residual)
        worst["nu_prime_invariance"] = max(worst["nu_prime_invariance"], rep.invariance_residual)
        q = rng.uniform(0.1, 3.0, size=m.n)
        lp = laplacian_prime_identity(sys, EquivalenceData(q=q), f)
        worst["Delta_prime"] = max(worst["Delta_prime"], lp.full_residual)
    iso = 0.0
    for _ in range(chains):
        n = int(rng.integers(5, 21))
        m = birth_death(n, base=float(rng.uniform(0.5, 3.0)), mu=rng.uniform(0.1, 2.0, size=n))
        sys = markov_system(m)
        q = harmonic_solve(sys, [0, n - 1], rng.uniform(0.5, 3.0, size=2))
        f = np.zeros(n)
        f[1:n - 1] = rng.standard_normal(n - 2)
        iso = max(iso, q_isometry_check(sys, q, f).residual)
    ok = max(worst.values()) <= 1e-12 and iso <= 1e-10
    return {"criterion": 5, **worst, "q_isometry": iso, "passed": bool(ok)}


def green_windows(seed: int = 0, count: int = 50) -> list:
    rng = _rng(seed, 6)
    out = []
    for _ in range(count):
        interior = int(rng.integers(5, 65))
        outside = int(rng.integers(1, 6))
        m = random_connected(interior + outside, rng)
        out.append((m, np.arange(interior)))
    return out


def criterion_6(seed: int = 0) -> dict:
    rng = _rng(seed, 16)
    worst = {"green_residual": 0.0, "solve_series": 0.0, "energy_identity": 0.0,
             "riesz_identity": 0.0, "symmetric_pair": 0.0, "decomposition": 0.0}
    tails_ok = True
    max_terms = 0
    for m, D in green_windows(seed):
        sys = markov_system(m)
        ks = kill(sys, D)
        A = D[rng.random(D.size) < 0.3]
        B = D[rng.random(D.size) < 0.3]
        if A.size == 0:
            A = D[:1]
        if B.size == 0:
            B = D[-1:]
        g = green_solve(ks, A)
        worst["green_residual"] = max(worst["green_residual"], g.residual)
        s = green_series(ks, A, tol=1e-11)
        max_terms = max(max_terms, s.terms)
        diff = float(np.max(np.abs(g.values - s.green.values)))
        worst["solve_series"] = max(worst["solve_series"], diff / (1.0 + float(np.max(g.values))))
        rep = green_energy_identities(ks, A, B, seed=int(rng.integers(2 ** 31)))
        tails_ok &= rep.passed
        worst["energy_identity"] = max(worst["energy_identity"], rep.inner_residual)
        worst["riesz_identity"] = max(worst["riesz_identity"], rep.riesz_residual)
        worst["symmetric_pair"] = max(worst["symmetric_pair"], symmetric_pair_check(ks, A, B).residual)
        dec = green_decompose(ks, rng.standard_normal(m.n))
        worst["decomposition"] = max(worst["decomposition"], dec.reconstruction_residual)
    ok = (worst["green_residual"] <= 1e-12 and worst["solve_series"] <= 1e-10 and tails_ok
          and worst["energy_identity"] <= 1e-8 and worst["riesz_identity"] <= 1e-8
          and worst["symmetric_pair"] <= 1e-10 and worst["decomposition"] <= 1e-10)
    return {"criterion": 6, **worst, "certified_tails": bool(tails_ok), "max_series_terms": max_terms,
            "passed": bool(ok)}


def path_graphs(seed: int = 0) -> list:
    rng = _rng(seed, 7)
    return [("path4", path_graph(4)), ("cycle5", cycle_graph(5)), ("star6", star_graph(5)),
            ("complete4", complete_graph(4)), ("random6", random_connected(6, rng))]


def criterion_7(seed: int = 0, paths: int = 100_000, horizon: int = 4) -> dict:
    comparisons = failures = 0
    worst_z = 0.0
    per_graph = []
    for k, (name, m) in enumerate(path_graphs(seed)):
        sys = markov_system(m)
        P = sys.dense_P()
        local_fail = 0
        for a in range(m.n):
            ens = sample_paths(sys, [a], horizon, paths, seed=seed * 1000 + k * 10 + a)
            v = np.zeros(m.n)
            v[a] = m.nu[a]
            for n in range(1, horizon + 1):
                v = v @ P  # row a of diag(nu) P^n
                for b in range(m.n):
                    est, se = estimate_lambda_event(ens, [a], [b], n)
                    exact = float(v[b])
                    comparisons += 1
                    if se > 0:
                        z = abs(est - exact) / se
                        worst_z = max(worst_z, z)
                        bad = z > 3.0
                    else:
                        bad = abs(est - exact) > 1e-12 * (1.0 + exact)
                    failures += bad
                    local_fail += bad
        per_graph.append({"graph": name, "states": m.n, "failures": int(local_fail)})
    bd = birth_death(7)
    bsys = markov_system(bd)
    h = harmonic_solve(bsys, [0, 6], [0.0, 1.0])
    ens = sample_paths(bsys, range(1, 6), 10, 30_000, seed=seed + 99)
    mart = martingale_diagnostic(bsys, h, ens, region=range(1, 6))
    rng = _rng(seed, 17)
    rev = 0.0
    for _, m in path_graphs(seed):
        sys = markov_system(m)
        for _ in range(20):
            A0 = np.flatnonzero(rng.random(m.n) < 0.5)
            A1 = np.flatnonzero(rng.random(m.n) < 0.5)
            rev = max(rev, check_distribution_reversal(sys, A0, A1).residual)
    ok = failures == 0 and mart.passed and rev <= 1e-12
    return {"criterion": 7, "comparisons": comparisons, "outside_3se": int(failures),
            "max_z": worst_z, "graphs": per_graph,
            "martingale": {"increments": mart.increments, "drift": mart.mean_drift,
                           "stderr": mart.stderr, "exact_residual": mart.exact_residual,
                           "passed": mart.passed},
            "reversal_residual": rev, "passed": bool(ok)}


def _c_gauss(x: float) -> float:
    return math.sqrt(math.pi) / 4.0 * (erf(2.0 * (1.0 - x)) + erf(2.0 * x))


KERNELS = (("1", lambda x: 1.0), ("4*x*y", lambda x: 2.0 * x), ("exp(-4*(x-y)^2)", _c_gauss))
PROBES = (0.25, 0.5, 0.75)


def criterion_8(seed: int = 0, levels: int = 8) -> dict:
    lvls = list(range(1, levels + 1))
    out = []
    ok = True
    for text, c_exact in KERNELS:
        spec = KernelSpec.from_expr(text)
        nets = discretize_ladder(spec, levels)
        refine = max(refinement_residual(nets[k], nets[k + 1]) for k in range(levels - 1))
        # diagnostic only: each level integrated with its own cells
        solo = [discretize_kernel(spec, lv) for lv in lvls]
        solo_refine = max(refinement_residual(solo[k], solo[k + 1]) for k in range(levels - 1))
        connected = all(check_connected(n).connected for n in nets)
        mono = True
        try:
            for x in PROBES:
                vertex_mass_sequence(spec, x, lvls)
                for y in PROBES + (0.1, 0.9):
                    if y != x:
                        conductance_sequence(spec, x, y, lvls)
        except MonotonicityViolation:
            mono = False
        orders, tail_orders = [], []
        for x in PROBES:
            err = np.abs(vertex_mass_sequence(spec, x, lvls, normalized=True) - c_exact(x))
            orders.append(convergence_order(err, lvls))
            # diagnostic only: order between the two finest levels
            tail_orders.append(convergence_order(err[-2:], lvls[-2:]))
        conv = all(o >= 0.9 for o in orders)
        entry = {"kernel": text, "refinement": refine, "independent_level_refinement": solo_refine,
                 "connected": connected, "monotone": mono,
                 "orders": [o if math.isfinite(o) else "exact" for o in orders],
                 "finest_pair_orders": [o if math.isfinite(o) else "exact" for o in tail_orders],
                 "convergence": conv}
        good = refine <= 1e-10 and connected and mono and conv
        if text == "4*x*y":
            analytic = 0.0
            for net in nets:
                e = np.linspace(0.0, 1.0, net.n + 1)
                sq = np.diff(e ** 2)
                exact = np.outer(sq, sq)
                analytic = max(analytic, float(np.max(np.abs(net.weights - exact) / exact)))
            rng = _rng(seed, 8)
            for _ in range(50):
                a, b, c, d = rng.random(4)
                A, B = (min(a, b), max(a, b)), (min(c, d), max(c, d))
                exact = (A[1] ** 2 - A[0] ** 2) * (B[1] ** 2 - B[0] ** 2)
                got = kernel_rectangle_mass(spec, [A], [B])
                analytic = max(analytic, float(abs(got - exact) / max(exact, 1e-300)))
            entry["analytic_rectangles"] = analytic
            good &= analytic <= 1e-12
        entry["passed"] = bool(good)
        ok &= good
        out.append(entry)
    return {"criterion": 8, "levels": levels, "kernels": out, "passed": bool(ok)}


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8)


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("SYMMARKOV_THREADS", "1")))
    except ValueError:
        return 1


def run_battery(seed: int = 0, threads: int = None) -> dict:
    threads = threads or thread_cap()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda fn: fn(seed), CRITERIA))
    return {"version": __version__, "seed": seed, "criteria": results,
            "passed": all(r["passed"] for r in results)}


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
