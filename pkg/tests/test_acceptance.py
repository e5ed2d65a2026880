"""Acceptance criteria, one test per criterion.

Each test appends a ``criterion N: PASS|FAIL|SKIP ...`` line to
``conftest.ACCEPTANCE_LINES`` before asserting, so the summary at the end of
the session lists every criterion whatever the outcome.
"""

import os
import time

import numpy as np
import pytest

import conftest
from oracles import (
    fd_complex_gradient, h_dense, naive_dft, tproduct_bcirc, w_slice_objective, w_slice_qp,
)
from tubal_traffic.cli import main
from tubal_traffic.data_io import (
    MaskSpec, generate_mask, load_traffic_csv, nmae, shape_tensor, synth_low_tubal_rank,
)
from tubal_traffic.regularizers import make_toeplitz
from tubal_traffic.solver import SolverConfig, grad_h, kkt_residuals, run
from tubal_traffic.spectral import forward, forward_full, inverse
from tubal_traffic.tprod import tproduct
from tubal_traffic.wsolve import solve_w_slice


def record(n: int, ok: bool, detail: str) -> None:
    conftest.ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def test_criterion_1_spectral_roundtrip_and_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_rt = worst_dft = 0.0
    for _ in range(100):
        dims = tuple(rng.integers(1, 9, size=3))
        t = rng.standard_normal(dims)
        worst_rt = max(worst_rt, rel(inverse(forward(t)), t))
        worst_dft = max(worst_dft, rel(forward_full(t), naive_dft(t)))
    secs = time.perf_counter() - t0
    ok = worst_rt < 1e-10 and worst_dft < 1e-12 and secs < 1.0
    record(1, ok, f"roundtrip {worst_rt:.1e}, vs naive DFT {worst_dft:.1e}, {secs:.2f}s")
    assert ok


def test_criterion_2_tproduct_oracle():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        m1, r, m2, m3 = rng.integers(1, 7, size=4)
        a = rng.standard_normal((m1, r, m3))
        b = rng.standard_normal((r, m2, m3))
        worst = max(worst, rel(tproduct(a, b), tproduct_bcirc(a, b)))
    secs = time.perf_counter() - t0
    ok = worst < 1e-10 and secs < 5.0
    record(2, ok, f"max rel error {worst:.1e}, {secs:.2f}s")
    assert ok


def test_criterion_3_gradient_check():
    rng = np.random.default_rng(3)
    cplx = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        m1, r, m2 = rng.integers(1, 6, size=3)
        rho1 = float(rng.choice([0.0, 0.01, 0.5]))
        X, Y, W = cplx(m1, r), cplx(r, m2), cplx(m1, m2)
        gX, gY = grad_h(X, Y, W, rho1)
        fX = fd_complex_gradient(lambda A: h_dense(A, Y, W, rho1), X, 1e-6)
        fY = fd_complex_gradient(lambda B: h_dense(X, B, W, rho1), Y, 1e-6)
        worst = max(worst, rel(gX, fX), rel(gY, fY))
    secs = time.perf_counter() - t0
    ok = worst < 1e-5 and secs < 10.0
    record(3, ok, f"max rel error {worst:.1e}, {secs:.2f}s")
    assert ok


def test_criterion_4_w_subproblem():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst_obj = worst_sol = 0.0
    grid = [(mu, rho2, p) for mu in (1e-4, 0.1) for rho2 in (0.0, 0.5) for p in (0.2, 0.8)]
    for i in range(50):
        mu, rho2, p = grid[i % len(grid)]
        Z, G = rng.standard_normal((2, 6, 8))
        mask = rng.random((6, 8)) >= p
        W = solve_w_slice(Z, G, mask, mu, rho2)
        W_ref, obj_ref = w_slice_qp(Z, G, mask, mu, rho2)
        worst_obj = max(worst_obj, abs(w_slice_objective(W, Z, mu, rho2) - obj_ref) / abs(obj_ref))
        worst_sol = max(worst_sol, rel(W, W_ref))
    secs = time.perf_counter() - t0
    ok = worst_obj < 1e-8 and worst_sol < 1e-8 and secs < 10.0
    record(4, ok, f"objective {worst_obj:.1e}, solution {worst_sol:.1e}, {secs:.2f}s")
    assert ok


# criteria 5 and 6 share the same 20 runs
RUN_CFG = dict(rank=3, rho1=1e-3, rho2=1e-3, mu=1e-4, max_iters=300)


@pytest.fixture(scope="module")
def synthetic_runs():
    t0 = time.perf_counter()
    out = []
    for seed in range(20):
        G = synth_low_tubal_rank((20, 14, 9), 2, seed=seed)
        mask = generate_mask(G.shape, MaskSpec(0.5, seed))
        cfg = SolverConfig(seed=seed, **RUN_CFG)
        out.append((mask, cfg, run(G, mask, cfg)))
    return out, time.perf_counter() - t0


def test_criterion_5_monotone_descent(synthetic_runs):
    runs, secs = synthetic_runs
    worst = -np.inf
    for _, _, res in runs:
        tr = np.array(res.trace)
        worst = max(worst, float(np.max(np.diff(tr) / np.abs(tr[:-1]))))
    ok = worst <= 1e-12 and secs < 30.0
    record(5, ok, f"largest relative increase {worst:.1e} over 20 runs, {secs:.1f}s")
    assert ok


def test_criterion_6_stationarity(synthetic_runs):
    runs, _ = synthetic_runs
    worst_x = worst_y = worst_w = 0.0
    for mask, cfg, res in runs:
        m3 = mask.shape[2]
        k0 = kkt_residuals(res.initial, cfg, mask=mask)
        k1 = kkt_residuals(res.state, cfg, mask=mask)
        worst_x = max(worst_x, k1.total_proj_x(m3) / k0.total_proj_x(m3))
        worst_y = max(worst_y, k1.total_proj_y(m3) / k0.total_proj_y(m3))
        worst_w = max(worst_w, k1.w_residual / (1 + k1.z_scale))
    ok = worst_x < 1e-3 and worst_y < 1e-3 and worst_w < 1e-9
    record(6, ok, f"projected gradient ratios X {worst_x:.1e}, Y {worst_y:.1e}; "
                  f"W residual {worst_w:.1e}")
    assert ok


def test_criterion_7_synthetic_recovery(fixtures_dir):
    G = shape_tensor(load_traffic_csv(fixtures_dir / "smooth_20x14x9_r2.csv", negative="allow"), 20)
    assert G.shape == (20, 14, 9)
    t0 = time.perf_counter()
    scores = {}
    for p, limit in ((0.5, 0.05), (0.8, 0.25)):
        vals = []
        for seed in range(3):
            mask = generate_mask(G.shape, MaskSpec(p, seed))
            res = run(G, mask, SolverConfig(rank=2, seed=seed))
            vals.append(nmae(G, res.W, mask))
        scores[p] = (max(vals), limit)
    secs = time.perf_counter() - t0
    ok = all(v < lim for v, lim in scores.values()) and secs < 60.0
    record(7, ok, f"worst NMAE {scores[0.5][0]:.3f} at 50% loss, {scores[0.8][0]:.3f} at 80% loss, "
                  f"{secs:.1f}s")
    assert ok


ABILENE = os.environ.get("TUBAL_ABILENE_CSV")


@pytest.mark.skipif(not ABILENE, reason="set TUBAL_ABILENE_CSV to a 121x1008 Abilene matrix")
def test_criterion_8_abilene(tmp_path):
    table = tmp_path / "sweep.csv"
    t0 = time.perf_counter()
    code = main(["sweep", "--input", ABILENE, "--slots-per-day", "144", "--negative", "clamp",
                 "--threads", str(os.cpu_count() or 1), "--out", str(table)])
    secs = time.perf_counter() - t0
    rows = [ln.split(",") for ln in table.read_text().splitlines()[1:]] if code == 0 else []
    curve = {float(p): float(m) for p, m, _ in rows}
    at_09 = curve.get(0.9, np.nan)
    vals = [curve[p] for p in sorted(curve)]
    ok = code == 0 and abs(at_09 - 0.22) <= 0.10 and all(np.diff(vals) >= 0) and secs < 600
    record(8, ok, f"NMAE at p=0.9 {at_09:.3f}, curve {[round(v, 3) for v in vals]}, {secs:.0f}s")
    assert ok


if not ABILENE:
    conftest.ACCEPTANCE_LINES.append(
        "criterion 8: SKIP  no Abilene matrix (set TUBAL_ABILENE_CSV)")


def test_criterion_9_toeplitz_spectrum():
    lo, hi, worst_min = np.inf, -np.inf, 0.0
    for m in range(2, 31):
        D = make_toeplitz(m).todense()
        ev = np.linalg.eigvalsh(D.T @ D)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        worst_min = max(worst_min, ev[0])
    ok = lo >= -1e-10 and hi <= 4 + 1e-10 and worst_min < 1e-10
    record(9, ok, f"eigenvalues in [{lo:.1e}, {hi:.6f}], largest minimum {worst_min:.1e}")
    assert ok


def test_criterion_10_determinism(tmp_path, fixtures_dir):
    common = ["--input", str(fixtures_dir / "smooth_20x14x9_r2.csv"), "--slots-per-day", "20",
              "--negative", "allow", "--rank", "2"]
    recover = ["recover", *common, "--loss-p", "0.5", "--seed", "11", "--trials", "4",
               "--max-iters", "150"]
    sweep_args = ["sweep", *common, "--loss-p", "0.3,0.6", "--seed", "2", "--trials", "2",
                  "--max-iters", "100"]
    blobs, sweep, codes = [], [], []
    for i, threads in enumerate((1, 4, 1, 3)):
        rep = tmp_path / f"r{i}.json"
        codes.append(main(recover + ["--threads", str(threads), "--report", str(rep)]))
        blobs.append(rep.read_bytes() if rep.exists() else b"")
    for i, threads in enumerate((1, 4)):
        rep, table = tmp_path / f"s{i}.json", tmp_path / f"s{i}.csv"
        codes.append(main(sweep_args + ["--threads", str(threads), "--report", str(rep),
                                        "--out", str(table)]))
        sweep.append(rep.read_bytes() + table.read_bytes() if rep.exists() else b"")
    ok = not any(codes) and len(set(blobs)) == 1 and len(set(sweep)) == 1
    record(10, ok, f"{len(blobs)} recover reports and {len(sweep)} sweep reports, "
                   f"{'byte-identical' if ok else 'differ'} across thread counts")
    assert ok
