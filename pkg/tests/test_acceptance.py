"""End-to-end checks for the library's headline guarantees.

Each test verifies one guarantee and prints a single [PASS]/[FAIL] line with
the measured numbers; run ``pytest tests/test_acceptance.py -s`` to see the
lines for passing criteria too.  Sub-millisecond budgets are measured as
best-of-N after a warmup so scheduler noise cannot flake the suite; the
whole-suite budgets are measured as plain wall time around the work.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from linopkit import (
    AppMatrix,
    AppVector,
    BatchCsr,
    BatchDense,
    Csr,
    Dense,
    Iteration,
    MatrixData,
    ResidualNorm,
    SolverFactory,
    SolverOptions,
    batch_solve,
    copy_stats,
    create_solver,
    executor_from_name,
    lu_factorize,
    reset_copy_stats,
)
from linopkit.apps.bench import REPORT_KEYS
from linopkit.apps.euler import ImplicitEulerStepper, integrate_decay
from linopkit.apps.heat import run_heat_demo

from helpers import (
    csr_from_numpy,
    dense_from_numpy,
    matmul_oracle,
    random_dd_dense,
    random_spd_dense,
    relative_residual,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
REF = executor_from_name("reference")


def verdict(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def test_c01_cg_closed_form():
    data = MatrixData((2, 2), [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)])
    solver = SolverFactory("cg", criteria=(ResidualNorm(1e-10),)).generate(
        Csr.from_data(REF, data)
    )
    b = dense_from_numpy(REF, [1.0, 2.0])
    x = dense_from_numpy(REF, [0.0, 0.0])
    report = solver.solve(b, x)
    err = np.abs(x.view2d()[:, 0] - np.array([1.0 / 11.0, 7.0 / 11.0])).max()
    best = math.inf
    for _ in range(50):
        x.view2d()[:, 0] = 0.0
        t0 = time.perf_counter()
        solver.solve(b, x)
        best = min(best, time.perf_counter() - t0)
    ok = err <= 1e-9 and report.iterations <= 2 and best < 1e-3
    verdict(
        "C1 CG exactness",
        ok,
        f"max|x - x*| = {err:.2e} (tol 1e-9) in {report.iterations} iterations"
        f" (cap 2), best solve {best * 1e3:.3f} ms (budget 1 ms)",
    )


def test_c02_spmv_oracle_suite():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        rows = int(rng.integers(1, 51))
        cols = int(rng.integers(1, 51))
        density = float(rng.uniform(0.05, 0.6))
        dense = np.where(
            rng.random((rows, cols)) < density, rng.normal(size=(rows, cols)), 0.0
        )
        vec = rng.normal(size=cols)
        x = Dense.create(REF, (rows, 1))
        csr_from_numpy(REF, dense).apply(dense_from_numpy(REF, vec), x)
        want = matmul_oracle(dense, vec[:, None])
        scale = max(1.0, float(np.abs(want).max()))
        worst = max(worst, float(np.abs(x.view2d() - want).max()) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-13 and elapsed < 1.0
    verdict(
        "C2 SpMV oracle suite",
        ok,
        f"200 random instances, worst relative deviation {worst:.2e}"
        f" (tol 1e-13), {elapsed:.2f} s (budget 1 s)",
    )


def test_c03_krylov_convergence_suite():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    cg_rels, cg_caps = [], []
    for _ in range(30):
        n = int(rng.integers(2, 31))
        dense = random_spd_dense(rng, n)
        b = rng.normal(size=n)
        for precond in (None, "jacobi"):
            factory = SolverFactory(
                "cg",
                criteria=(ResidualNorm(1e-10), Iteration(n + 2)),
                preconditioner=precond,
            )
            x = Dense.create(REF, (n, 1))
            x.fill(0.0)
            report = factory.generate(csr_from_numpy(REF, dense)).solve(
                dense_from_numpy(REF, b), x
            )
            cg_rels.append(relative_residual(dense, x.view2d()[:, 0], b))
            cg_caps.append(report.iterations <= n + 2)
    other_rels = []
    for _ in range(30):
        n = int(rng.integers(2, 31))
        dense = random_dd_dense(rng, n)
        b = rng.normal(size=n)
        for algorithm in ("bicgstab", "gmres"):
            factory = SolverFactory(
                algorithm, criteria=(ResidualNorm(1e-10), Iteration(200)), restart=30
            )
            x = Dense.create(REF, (n, 1))
            x.fill(0.0)
            factory.generate(csr_from_numpy(REF, dense)).solve(
                dense_from_numpy(REF, b), x
            )
            other_rels.append(relative_residual(dense, x.view2d()[:, 0], b))
    elapsed = time.perf_counter() - t0
    ok = (
        max(cg_rels) <= 1e-8
        and all(cg_caps)
        and max(other_rels) <= 1e-8
        and elapsed < 5.0
    )
    verdict(
        "C3 Krylov convergence suite",
        ok,
        f"CG (plain+Jacobi) worst recomputed rel residual {max(cg_rels):.2e}"
        f" within n+2 iterations, BiCGStab/GMRES(30) worst {max(other_rels):.2e}"
        f" (tol 1e-8), {elapsed:.2f} s (budget 5 s)",
    )


def test_c04_direct_solver():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    recon, wrapped_iters = [], []
    for _ in range(20):
        dense = rng.normal(size=(20, 20))
        perm, lower, upper = lu_factorize(dense.copy())
        recon.append(
            float(np.abs(dense[perm] - lower @ upper).max() / np.abs(dense).max())
        )
        solver = SolverFactory(
            "gmres_lu", criteria=(ResidualNorm(1e-10), Iteration(10))
        ).generate(csr_from_numpy(REF, dense))
        b = dense_from_numpy(REF, rng.normal(size=20))
        x = Dense.create(REF, (20, 1))
        x.fill(0.0)
        report = solver.solve(b, x)
        wrapped_iters.append(report.iterations if report.converged else 10)
    elapsed = time.perf_counter() - t0
    ok = max(recon) <= 1e-12 and max(wrapped_iters) <= 2 and elapsed < 1.0
    verdict(
        "C4 direct solver",
        ok,
        f"20 random 20x20 systems, worst |PA - LU| / |A| = {max(recon):.2e}"
        f" (tol 1e-12), GMRES_LU converged in <= {max(wrapped_iters)} iterations"
        f" (cap 2), {elapsed:.2f} s (budget 1 s)",
    )


def test_c05_batch_matches_singles():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    count, n = 1000, 8
    denses = np.empty((count, n, n))
    for k in range(count):
        denses[k] = random_spd_dense(rng, n)
    template = MatrixData((n, n), [(i, j, 1.0) for i in range(n) for j in range(n)])
    a = BatchCsr.from_template(REF, count, template, denses.reshape(count, n * n))
    rhs = rng.normal(size=(count, n, 1))
    b = BatchDense.from_values(REF, rhs)
    x = BatchDense.zeros(REF, count, (n, 1))
    criteria = (Iteration(40), ResidualNorm(1e-12))
    batch = batch_solve("cg", a, b, x, criteria=criteria)

    worst = 0.0
    iters_equal = True
    for k in range(count):
        solver = SolverFactory("cg", criteria=criteria).generate(a.extract_system(k))
        xs = Dense.create(REF, (n, 1))
        xs.fill(0.0)
        single = solver.solve(dense_from_numpy(REF, rhs[k, :, 0]), xs)
        worst = max(worst, float(np.abs(xs.view2d()[:, 0] - x.values[k, :, 0]).max()))
        iters_equal = iters_equal and single.iterations == batch.iterations[k]
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and iters_equal and batch.converged.all() and elapsed < 5.0
    verdict(
        "C5 batch-loop equivalence",
        ok,
        f"1000 SPD 8x8 systems, worst |x_batch - x_single| = {worst:.2e}"
        f" (tol 1e-12), per-system iteration counts identical: {iters_equal},"
        f" {elapsed:.2f} s (budget 5 s)",
    )


def test_c06_backend_equivalence_on_the_heat_demo():
    t0 = time.perf_counter()
    base = run_heat_demo(32, backend="reference")
    par = {wc: run_heat_demo(32, backend="parallel", worker_count=wc) for wc in (1, 2, 4)}
    elapsed = time.perf_counter() - t0
    gap = max(float(np.abs(base.solution - rep.solution).max()) for rep in par.values())
    bitwise = all(np.array_equal(par[1].solution, par[wc].solution) for wc in (2, 4))
    ok = gap <= 1e-8 and bitwise and elapsed < 5.0
    verdict(
        "C6 backend equivalence",
        ok,
        f"heat(n=32) reference vs parallel max-norm gap {gap:.2e} (tol 1e-8),"
        f" parallel bitwise identical across 1/2/4 workers: {bitwise},"
        f" {elapsed:.2f} s (budget 5 s)",
    )


def test_c07_heat_demo_convergence_order():
    t0 = time.perf_counter()
    coarse = run_heat_demo(32)
    fine = run_heat_demo(64)
    elapsed = time.perf_counter() - t0
    ratio = coarse.max_error / fine.max_error
    ok = 3.5 <= ratio <= 4.5 and coarse.converged and fine.converged and elapsed < 10.0
    verdict(
        "C7 heat convergence order",
        ok,
        f"error(32)/error(64) = {ratio:.3f} (window [3.5, 4.5]),"
        f" {elapsed:.2f} s (budget 10 s)",
    )


def test_c08_implicit_euler_demo():
    value = integrate_decay(10, 0.1, REF)
    err = abs(value - 1.1 ** -10)

    stepper = ImplicitEulerStepper(
        REF, csr_from_numpy(REF, np.array([[-1.0]])), 0.1, algorithm="cg"
    )
    u = dense_from_numpy(REF, [1.0])
    best = math.inf
    for _ in range(40):
        u.view2d()[0, 0] = 1.0
        t0 = time.perf_counter()
        for _ in range(10):
            stepper.advance(u)
        best = min(best, time.perf_counter() - t0)
    ok = err <= 1e-10 and best < 1e-3
    verdict(
        "C8 implicit Euler demo",
        ok,
        f"|u - 1.1^-10| = {err:.2e} (tol 1e-10), 10 steps best"
        f" {best * 1e3:.3f} ms (budget 1 ms)",
    )


def test_c09_zero_copy_contract():
    rng = np.random.default_rng(9)
    n = 12
    dense = random_spd_dense(rng, n)
    matrix = AppMatrix(n, n)
    for i in range(n):
        for j in range(n):
            if dense[i, j] != 0.0:
                matrix.add_entry(i, j, float(dense[i, j]))
    reset_copy_stats()
    solver = create_solver(REF, matrix, SolverOptions("cg"))
    b = AppVector(n)
    x = AppVector(n)
    for _ in range(100):
        b.data()[:] = rng.normal(size=n)  # caller-side write, not a library copy
        solver.solve(b, x)
    stats = copy_stats()
    ok = stats.element_copies == 0 and stats.matrix_conversions == 1
    verdict(
        "C9 zero-copy contract",
        ok,
        f"100 facade solves: {stats.element_copies} vector element copies"
        f" (required 0), {stats.matrix_conversions} matrix conversions (required 1)",
    )


def test_c10_facade_size():
    lines = (REPO_ROOT / "src" / "linopkit" / "facade.py").read_text().splitlines()
    code = [ln for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    ok = len(code) <= 500
    verdict(
        "C10 facade size",
        ok,
        f"facade.py is {len(code)} non-blank non-comment lines (cap 500)",
    )


def test_c11_cli_round_trip(tmp_path):
    def run(matrix_path):
        return subprocess.run(
            [sys.executable, "-m", "linopkit.apps.cli", "--matrix", str(matrix_path)],
            capture_output=True,
            text=True,
            cwd=REPO_ROOT,
        )

    good = run(REPO_ROOT / "data" / "spd_lattice.mtx")
    payload = json.loads(good.stdout) if good.stdout else {}
    ints = ("rows", "cols", "nnz", "iterations")
    floats = ("initial_residual_norm", "final_residual_norm", "wall_time_ms")
    schema_ok = (
        list(payload.keys()) == list(REPORT_KEYS)
        and all(isinstance(payload[k], str) for k in ("matrix", "backend", "algorithm"))
        and all(type(payload[k]) is int for k in ints)
        and all(isinstance(payload[k], float) for k in floats)
        and payload["converged"] is True
    )

    bad_file = tmp_path / "broken.mtx"
    bad_file.write_text("this is not a matrix market file\n")
    bad = run(bad_file)

    ok = good.returncode == 0 and schema_ok and bad.returncode != 0 and bad.stdout == ""
    verdict(
        "C11 CLI round trip",
        ok,
        f"lattice run exit {good.returncode} with schema-valid JSON"
        f" (converged=true), malformed file exit {bad.returncode} with no JSON",
    )
