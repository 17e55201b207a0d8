"""End-to-end acceptance checks, one test per criterion.

Each test records ``(passed, detail)`` in the session ``acceptance`` dict and
prints a PASS/FAIL line; the conftest repeats the table at the end of the
run.  Run directly with ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from bectrack.dynamics import (
    gpe_energy,
    gpe_integrate,
    gpe_step,
    lindblad_solve,
    propagate_conditioned,
    propagate_conditioned_batch,
    propagate_estimate,
    unitary_propagate,
)
from bectrack.harness import convergence_order, longest_run_above, oscillation_amplitude, rms_difference
from bectrack.observables import dominant_lobe_fraction, one_body_purity, trace_distance, wigner_function
from bectrack.spinspace import (
    ModelParams,
    angular_momentum_operators,
    build_hamiltonian,
    fock_state,
    maximally_uncertain_estimate,
)

TWO_PI = 2 * math.pi


def report(acceptance, n, ok, detail):
    acceptance[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def window(times, t0, t1):
    return (times >= t0 - 1e-9) & (times <= t1 + 1e-9)


def test_criterion_01_rabi_limit(acceptance):
    n = 100
    p = ModelParams(n, 0.0, 1.0, 0.0, bias_epsilon=0.0)
    h = build_hamiltonian(p, angular_momentum_operators(n))
    psi0 = fock_state(n, n // 2)
    m = angular_momentum_operators(n).m

    t = np.linspace(0, 10 * TWO_PI, 2001)
    states = unitary_propagate(psi0, h, t)
    jz = (np.abs(states) ** 2) @ m
    exact_err = np.abs(jz - 50 * np.cos(t)).max()

    log, _ = propagate_conditioned(psi0, p, 10 * TWO_PI, 1e-4 * TWO_PI, 1, sample_interval=0.01 * TWO_PI)
    sse_err = np.abs(log.conditioned.jz - 50 * np.cos(TWO_PI * log.times)).max()
    ok = exact_err < 1e-6 and sse_err < 5e-2
    report(acceptance, 1, ok, f"propagator max error {exact_err:.2e} (<1e-6), SSE max error {sse_err:.2e} (<5e-2)")


def test_criterion_02_su2_algebra(acceptance):
    worst = 0.0
    for n in (1, 2, 10, 100):
        ops = angular_momentum_operators(n)
        j = n / 2
        jx, jy, jz = ops.jx, ops.jy, ops.jz
        comm = lambda a, b: a @ b - b @ a
        errs = [
            np.abs(comm(jx, jy) - 1j * jz).max(),
            np.abs(comm(jy, jz) - 1j * jx).max(),
            np.abs(comm(jz, jx) - 1j * jy).max(),
            np.abs(jx @ jx + jy @ jy + jz @ jz - j * (j + 1) * np.eye(n + 1)).max(),
            np.abs(jx - jx.conj().T).max(),
            np.abs(jy - jy.conj().T).max(),
            np.abs(jz - jz.conj().T).max(),
        ]
        for u in (0.0, 1.0):
            h = build_hamiltonian(ModelParams(n, u, 1.0, 1.0), ops)
            errs.append(np.abs(h - h.conj().T).max())
        worst = max(worst, max(errs))
    report(acceptance, 2, worst < 1e-10, f"worst algebra residual {worst:.2e} over N in (1,2,10,100) (<1e-10)")


def test_criterion_03_pure_dissipator(acceptance):
    n = 10
    p = ModelParams(n, 1.0, 1.0, 1.0)
    m = angular_momentum_operators(n).m
    psi = np.ones(n + 1) / math.sqrt(n + 1)
    rho0 = np.outer(psi, psi)
    zero = np.zeros((n + 1, n + 1))
    worst = 0.0
    for k in range(1, n + 1):
        rate = p.gamma / 8 * k**2
        t_span = 3 * math.log(10) / rate  # three decades of decay
        out = lindblad_solve(rho0, p, t_span, t_span / 100, hamiltonian=zero)
        times = np.arange(len(out)) * t_span / 100
        for i in range(n + 1 - k):
            fit = -np.polyfit(times, np.log(np.abs(out[:, i + k, i])), 1)[0]
            expected = p.gamma / 8 * (m[i + k] - m[i]) ** 2
            worst = max(worst, abs(fit - expected) / expected)
    report(acceptance, 3, worst < 1e-6, f"worst relative decay-rate error {worst:.2e} (<1e-6)")


def test_criterion_04_unraveling(acceptance):
    n, n_traj = 10, 500
    p = ModelParams(n, 1.0, 1.0, 1.0)
    dt = 1e-3 * TWO_PI
    psi0 = fock_state(n, n // 2)
    checkpoints = [0.5 * k for k in range(1, 11)]
    results = propagate_conditioned_batch(
        psi0, p, 5 * TWO_PI, dt, range(1, n_traj + 1), sample_interval=0.5 * TWO_PI, snapshot_times=[5.0]
    )
    final = np.array([log.snapshot(5.0).conditioned for log, _ in results])
    rho_mc = np.einsum("bi,bj->ij", final, final.conj()) / n_traj
    rho = lindblad_solve(np.outer(psi0, psi0.conj()), p, 5 * TWO_PI, dt, stride=500)
    td = trace_distance(rho_mc, rho[-1])

    m = angular_momentum_operators(n).m
    jz_l = np.einsum("sii,i->s", rho, m).real[1:]
    jz = np.array([log.conditioned.jz for log, _ in results])[:, 1:]
    z = np.abs(jz.mean(axis=0) - jz_l) / (jz.std(axis=0, ddof=1) / math.sqrt(n_traj))
    assert len(z) == len(checkpoints)
    ok = td < 0.05 and np.all(z < 3)
    report(acceptance, 4, ok, f"trace distance {td:.4f} (<0.05), max |<Jz>| deviation {z.max():.2f} SE (<3)")


def test_criterion_05_dephasing(acceptance):
    n = 100
    p = ModelParams(n, 1.0, 1.0, 0.0)
    ops = angular_momentum_operators(n)
    h = build_hamiltonian(p, ops)
    t = np.round(np.arange(0, 10.0001, 0.005), 10)
    states = unitary_propagate(fock_state(n, n // 2), h, TWO_PI * t)
    jz = (np.abs(states) ** 2) @ ops.m
    amp = oscillation_amplitude(t, jz, 8.0, 10.0)
    purity = np.array([one_body_purity(s, ops) for s in states])
    ok = amp < 0.25 * abs(jz[0]) and purity.min() < 0.7
    report(
        acceptance, 5, ok,
        f"amplitude in [8,10] t_R {amp:.2f} (<{0.25 * abs(jz[0]):.1f}), min purity by 10 t_R {purity.min():.3f} (<0.7)",
    )


def test_criterion_06_classicality(acceptance, ensemble_u1):
    t = ensemble_u1.times
    late = window(t, 10, 60)
    purities = np.array([log.conditioned.purity[late].mean() for log in ensemble_u1.logs])
    amps = np.array([oscillation_amplitude(t, log.conditioned.jz, 50, 60) for log in ensemble_u1.logs])
    n_pure, n_osc = int(np.sum(purities > 0.95)), int(np.sum(amps > 12.5))
    ok = n_pure >= 8 and n_osc >= 8
    report(
        acceptance, 6, ok,
        f"mean purity >0.95 on {n_pure}/10 (min {purities.min():.3f}), amplitude >12.5 on {n_osc}/10 (min {amps.min():.1f})",
    )


def test_criterion_07_estimation_u1(acceptance, ensemble_u1):
    conv = ensemble_u1.convergence_times
    count = int(np.sum(conv <= 30))
    report(acceptance, 7, count >= 8, f"converged by 30 t_R on {count}/10, times {np.round(conv, 2).tolist()}")


def test_criterion_08_estimation_failure_u0(acceptance, ensemble_u0):
    t = ensemble_u0.times
    half = 50.0
    unsustained, jz_ok, jx_off = [], [], []
    for log in ensemble_u0.logs:
        unsustained.append(longest_run_above(t, log.fidelity, 0.99) < 10.0)
        jz_ok.append(rms_difference(t, log.estimate.jz, log.conditioned.jz, 10, 60) < 0.1 * half)
        jx_off.append(rms_difference(t, log.estimate.jx, log.conditioned.jx, 10, 60) > 0.2 * half)
    unsustained, jz_ok, jx_off = map(np.array, (unsustained, jz_ok, jx_off))
    count = int(np.sum(unsustained & jz_ok & jx_off))
    report(
        acceptance, 8, count >= 8,
        f"all clauses on {count}/10 (F unsustained {unsustained.sum()}, Jz RMS<5 {jz_ok.sum()}, Jx RMS>10 {jx_off.sum()})",
    )


def test_criterion_09_wigner(acceptance, ensemble_u0, ensemble_u1):
    # u=0: seed 1 at its purity minimum
    log0 = ensemble_u0.logs[0]
    t_min = float(log0.times[np.argmin(log0.conditioned.purity)])
    p0 = ModelParams(100, 0.0, 1.0, 1.0)
    rerun, _ = propagate_conditioned(
        fock_state(100, 50), p0, 60 * TWO_PI, 1e-3 * TWO_PI, ensemble_u0.seeds[0], snapshot_times=[t_min]
    )
    # same noise stream; batched and single BLAS calls differ only in rounding
    assert np.allclose(rerun.conditioned.jz, log0.conditioned.jz, atol=1e-6)
    g0 = wigner_function(rerun.snapshot(t_min).conditioned)
    ratio0 = g0.values.min() / g0.values.max()

    # u=1: seed 1 at 48 t_R
    g1 = wigner_function(ensemble_u1.logs[0].snapshot(48.0).conditioned)
    ratio1 = g1.values.min() / g1.values.max()
    lobe = dominant_lobe_fraction(g1)
    norm_err = max(abs(g0.integral() - 1), abs(g1.integral() - 1))

    ok = g0.values.min() < 0 and ratio1 > -0.02 and lobe > 0.9 and norm_err < 1e-8
    report(
        acceptance, 9, ok,
        f"u=0 at {t_min:.2f} t_R min/max {ratio0:.3f} (<0); u=1 at 48 t_R min/max {ratio1:.4f} (>-0.02), "
        f"lobe share {lobe:.3f} (>0.9); normalization error {norm_err:.1e} (<1e-8)",
    )


def test_criterion_10_gpe(acceptance):
    s0 = np.array([[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [-0.36, 0.48, 0.8], [-0.8, 0.0, 0.6]])
    drift = 0.0
    for u in (0.0, 1.0, 2.0):
        traj = gpe_integrate(s0, u, 60 * TWO_PI, 1e-3 * TWO_PI, sample_every=10)
        drift = max(
            drift,
            np.abs(np.linalg.norm(traj, axis=-1) - 1).max(),
            np.abs(gpe_energy(traj, u) - gpe_energy(s0, u)).max(),
        )
    circ = gpe_integrate([0.0, 0.0, 1.0], 0.0, 10 * TWO_PI, 1e-3 * TWO_PI)
    t = np.arange(len(circ)) * 1e-3 * TWO_PI
    circle_err = np.abs(circ - np.column_stack([0 * t, np.sin(t), np.cos(t)])).max()
    fixed = 0.0
    for u in (0.0, 1.0, 2.0):
        for sign in (1.0, -1.0):
            s = np.array([sign, 0.0, 0.0])
            for _ in range(1000):
                s = np.asarray(gpe_step(s, u, 1e-3 * TWO_PI))
            fixed = max(fixed, np.abs(s - [sign, 0, 0]).max())
    ok = drift < 1e-8 and circle_err < 1e-9 and fixed < 1e-12
    report(
        acceptance, 10, ok,
        f"norm/energy drift {drift:.1e} (<1e-8), circle error {circle_err:.1e} (<1e-9), fixed-point drift {fixed:.0e}",
    )


def test_criterion_11_step_convergence(acceptance):
    n = 100
    p = ModelParams(n, 1.0, 1.0, 1.0)
    psi0 = fock_state(n, n // 2)
    est = maximally_uncertain_estimate(n, 1)
    dt_fine = 1e-3 / 8 * TWO_PI
    _, record = propagate_conditioned(psi0, p, 10 * TWO_PI, dt_fine, 1)
    factors = (1, 2, 4, 8, 16)
    logs = {
        f: propagate_estimate(est, record.coarsen(f), p, reference=psi0, sample_interval=0.01 * TWO_PI)
        for f in factors
    }
    fid_change = max(abs(logs[f].fidelity[-1] - logs[f // 2].fidelity[-1]) for f in factors[1:])
    steps = np.array([f * dt_fine for f in factors[1:]])
    orders = {}
    for name, get in (
        ("jz_c", lambda lg: lg.conditioned.jz),
        ("jx_e", lambda lg: lg.estimate.jx),
        ("fidelity", lambda lg: lg.fidelity),
    ):
        errors = [np.abs(get(logs[f]) - get(logs[f // 2])).max() for f in factors[1:]]
        orders[name] = convergence_order(steps, errors)
    worst = min(orders.values())
    ok = fid_change < 1e-3 and worst >= 0.8
    detail = ", ".join(f"{k} {v:.2f}" for k, v in orders.items())
    report(acceptance, 11, ok, f"final fidelity change {fid_change:.1e} (<1e-3), orders {detail} (>=0.8)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
