"""Acceptance suite: one test per acceptance criterion, pinned tolerances.

Every test prints one `[ACCEPTANCE] <criterion>: PASS/FAIL` line (visible
with `pytest -s`; under capture the verbose test name carries the verdict).
The BER-gain criterion is implemented exactly as stated and is expected to
fail: the best per-realization power allocation in this system model buys
about 1.2 dB over equal allocation, below the required 2 dB (see the
decisions ledger for the supporting oracle experiment).
"""

from collections import deque
from dataclasses import replace

import numpy as np
import pytest

from coopmimo.complexity import complexity_counts
from coopmimo.core import (
    PowerAllocation,
    SystemConfig,
    bpsk_symbols,
    draw_channel_set,
    epa_init,
    trial_rng,
)
from coopmimo.dstc import alamouti_encode, apply_conjugation, build_equivalent_channel
from coopmimo.dstc import equivalent_channels
from coopmimo.feedback import mse_decomposition_residual, mse_excess
from coopmimo.harness import ExperimentSpec, run_experiment
from coopmimo.japa import (
    TrainingBlock,
    init_state,
    kernel_width,
    mber_gradients,
    mmse_closed_form_iterate,
    mmse_gradients,
    msr_gradients,
    q_function,
    sg_mber_step,
    sg_mmse_step,
    sg_msr_step,
    theoretical_ber,
    training_block_from,
)
from coopmimo.transceiver import (
    effective_model,
    instantaneous_snr,
    linear_detect,
    ml_detect,
    mmse_receive_filter,
    simulate_block,
)

JAPA_ALGS = ("JAPA-MMSE-SG", "JAPA-MBER-SG", "JAPA-MSR-SG")


def report(name: str, passed: bool, detail: str = ""):
    verdict = "PASS" if passed else "FAIL"
    print(f"[ACCEPTANCE] {name}: {verdict}" + (f" ({detail})" if detail else ""))


def required_snr_db(points, target):
    """Log-linear interpolation of the SNR where a BER curve crosses target."""
    pts = sorted(points, key=lambda p: p.x)
    for a, b in zip(pts, pts[1:]):
        ya, yb = max(a.y, 1e-9), max(b.y, 1e-9)
        if ya >= target >= yb:
            la, lb, lt = np.log10(ya), np.log10(yb), np.log10(target)
            return a.x + (lt - la) * (b.x - a.x) / (lb - la)
    return None


# ---------------------------------------------------------------------------
# criterion: power constraints after every optimizer step (1e-10 relative)
# ---------------------------------------------------------------------------

def test_criterion_power_constraint_invariant():
    cfg = SystemConfig(noise_power=0.3, step_filter=0.05, step_source=0.02,
                       step_relay=0.02, n_relays=2, source_power=1.3,
                       relay_power=0.8)
    rng = trial_rng(2024)
    channels = draw_channel_set(cfg, rng)
    geq = equivalent_channels(channels)
    state = init_state(cfg)
    buffer = deque(maxlen=8)
    worst = 0.0
    for i in range(300):
        s = bpsk_symbols(cfg.n_antennas, rng)
        model = effective_model(channels, state.pa, cfg, geq)
        block = simulate_block(cfg, channels, state.pa, s, rng, model=model)
        buffer.append(block)
        kind = i % 4
        if kind == 0:
            state = sg_mmse_step(state, block, channels, cfg, geq)
        elif kind == 1:
            state = sg_mber_step(state, training_block_from(list(buffer)),
                                 channels, cfg, geq)
        elif kind == 2:
            state = sg_msr_step(state, channels, cfg, geq)
        else:
            state = mmse_closed_form_iterate(cfg, channels, state, 1, geq)
        worst = max(worst,
                    abs(state.pa.source_norm2() - cfg.source_power) / cfg.source_power,
                    abs(state.pa.relay_norm2() - cfg.relay_power) / cfg.relay_power)
    passed = worst < 1e-10
    report("power-constraint invariant", passed, f"worst relative error {worst:.2e}")
    assert passed


# ---------------------------------------------------------------------------
# criterion: analytic gradients vs central finite differences (< 1e-4)
# ---------------------------------------------------------------------------

def _fd(fun, x, h=1e-6):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def test_criterion_gradient_oracle():
    worst = 0.0
    for seed in range(20):
        cfg = SystemConfig(noise_power=0.4)
        rng = trial_rng(3000 + seed)
        channels = draw_channel_set(cfg, rng)
        pa = PowerAllocation(source=rng.uniform(0.3, 1.2, 2),
                             relay=rng.uniform(0.3, 1.2, (1, 2)))
        filt = 0.5 * (rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2)))
        s = bpsk_symbols(2, rng)
        model = effective_model(channels, pa, cfg)
        noise = np.sqrt(model.noise_var / 2) * (
            rng.standard_normal(6) + 1j * rng.standard_normal(6))

        def rel_err(fd, an):
            return abs(fd - an) / max(abs(fd), 1e-9)

        # MMSE: cost_j = |s_j - w_j^H (H_D(a) s + n)|^2
        block = type("B", (), {"received": model.h_eff @ s + noise, "symbols": s})()
        g_filt, g_src, g_rel = mmse_gradients(filt, pa, block, channels, cfg)

        def mmse_cost(src, rel, w, j):
            m = effective_model(channels, PowerAllocation(source=src, relay=rel), cfg)
            e = s - w.conj().T @ (m.h_eff @ s + noise)
            return float(np.abs(e[j]) ** 2)

        for j in range(2):
            fd = _fd(lambda v: mmse_cost(np.where(np.arange(2) == j, v, pa.source),
                                         pa.relay, filt, j), pa.source[j])
            worst = max(worst, rel_err(fd, g_src[j]))
            fd = _fd(lambda v: mmse_cost(pa.source,
                                         np.where(np.arange(2)[None, :] == j, v,
                                                  pa.relay), filt, j), pa.relay[0, j])
            worst = max(worst, rel_err(fd, g_rel[0, j]))
        for i in (0, 3, 5):
            for j in range(2):
                def cost_re(v):
                    w = filt.copy()
                    w[i, j] = v + 1j * filt[i, j].imag
                    return mmse_cost(pa.source, pa.relay, w, j)
                worst = max(worst, rel_err(_fd(cost_re, filt[i, j].real),
                                           2 * g_filt[i, j].real))

        # MBER: kernel-smoothed BER over a 6-sample window
        symbols = 2.0 * rng.integers(0, 2, (6, 2)) - 1.0
        wnoise = np.sqrt(model.noise_var / 2) * (
            rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        tblock = TrainingBlock(received=symbols @ model.h_eff.T + wnoise,
                               symbols=symbols)
        rho = kernel_width(6, np.sqrt(model.noise_real_var))
        g_filt, g_src, g_rel, _ = mber_gradients(filt, pa, tblock, channels, cfg,
                                                 rho=rho)

        def mber_cost(src, rel, w, j):
            m = effective_model(channels, PowerAllocation(source=src, relay=rel), cfg)
            rr = symbols @ m.h_eff.T + wnoise
            margins = np.real(rr @ w.conj())
            c = symbols * margins / (rho * np.linalg.norm(w, axis=0)[None, :])
            return float(np.mean(q_function(c[:, j])))

        for j in range(2):
            fd = _fd(lambda v: mber_cost(np.where(np.arange(2) == j, v, pa.source),
                                         pa.relay, filt, j), pa.source[j])
            worst = max(worst, rel_err(fd, g_src[j]))
            fd = _fd(lambda v: mber_cost(pa.source,
                                         np.where(np.arange(2)[None, :] == j, v,
                                                  pa.relay), filt, j), pa.relay[0, j])
            worst = max(worst, rel_err(fd, g_rel[0, j]))
        for i in (1, 4):
            for j in range(2):
                def cost_im(v):
                    w = filt.copy()
                    w[i, j] = filt[i, j].real + 1j * v
                    return mber_cost(pa.source, pa.relay, w, j)
                worst = max(worst, rel_err(_fd(cost_im, filt[i, j].imag),
                                           2 * g_filt[i, j].imag))

        # MSR: instantaneous relay-hop SNR
        g_filt, g_src, g_rel, _ = msr_gradients(filt, pa, channels, cfg)

        def snr(src, rel, w):
            return instantaneous_snr(w, channels,
                                     PowerAllocation(source=src, relay=rel), cfg)

        for j in range(2):
            fd = _fd(lambda v: snr(np.where(np.arange(2) == j, v, pa.source),
                                   pa.relay, filt), pa.source[j])
            worst = max(worst, rel_err(fd, g_src[j]))
            fd = _fd(lambda v: snr(pa.source,
                                   np.where(np.arange(2)[None, :] == j, v, pa.relay),
                                   filt), pa.relay[0, j])
            worst = max(worst, rel_err(fd, g_rel[0, j]))
        for i in (0, 2, 5):
            for j in range(2):
                def snr_re(v):
                    w = filt.copy()
                    w[i, j] = v + 1j * filt[i, j].imag
                    return snr(pa.source, pa.relay, w)
                worst = max(worst, rel_err(_fd(snr_re, filt[i, j].real),
                                           2 * g_filt[i, j].real))

    passed = worst < 1e-4
    report("gradient oracle", passed, f"worst relative error {worst:.2e}")
    assert passed


# ---------------------------------------------------------------------------
# criterion: Alamouti equivalent channel exactness and orthogonality (1e-12)
# ---------------------------------------------------------------------------

def test_criterion_alamouti_equivalent_channel():
    rng = trial_rng(4000)
    worst_lin = worst_orth = 0.0
    for _ in range(1000):
        g = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        s = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        eq = build_equivalent_channel(g)
        physical = apply_conjugation(g @ alamouti_encode(s), eq.conj_mask)
        worst_lin = max(worst_lin, float(np.max(np.abs(physical - eq.matrix @ s))))
        gram = eq.matrix.conj().T @ eq.matrix
        target = np.sum(np.abs(g) ** 2) * np.eye(2)
        worst_orth = max(worst_orth, float(np.linalg.norm(gram - target)))
    passed = worst_lin < 1e-12 and worst_orth < 1e-12
    report("alamouti equivalent channel", passed,
           f"linearization {worst_lin:.2e}, orthogonality {worst_orth:.2e}")
    assert passed


# ---------------------------------------------------------------------------
# criterion: exact BER expression vs 1e6-trial Monte Carlo, three SNR points
# ---------------------------------------------------------------------------

def test_criterion_ber_formula_vs_monte_carlo():
    rng = trial_rng(5000)
    cfg0 = SystemConfig()
    channels = draw_channel_set(cfg0, rng)
    pa = epa_init(cfg0)
    n = 10 ** 6
    passed = True
    details = []
    for noise_power in (0.8, 0.4, 0.2):
        cfg = SystemConfig(noise_power=noise_power)
        model = effective_model(channels, pa, cfg)
        filt = mmse_receive_filter(model, 1.0)
        _, predicted = theoretical_ber(filt, model)
        s = 2.0 * rng.integers(0, 2, (2, n)) - 1.0
        noise = np.sqrt(model.noise_var / 2) * (
            rng.standard_normal((6, n)) + 1j * rng.standard_normal((6, n)))
        detected = np.where(
            np.real(filt.conj().T @ (model.h_eff @ s + noise)) >= 0, 1.0, -1.0)
        measured = float(np.mean(detected != s))
        se = np.sqrt(predicted * (1 - predicted) / (2 * n))
        ok = abs(measured - predicted) <= 3 * se
        passed = passed and ok
        details.append(f"{predicted:.3e} vs {measured:.3e} ({abs(measured - predicted) / se:.1f} se)")
    report("BER formula vs Monte Carlo", passed, "; ".join(details))
    assert passed


# ---------------------------------------------------------------------------
# criterion: BER curves, each JAPA loop >= 2 dB below EPA at BER 1e-3
# ---------------------------------------------------------------------------

def test_criterion_fig2_ber_gain_over_epa():
    spec = ExperimentSpec(
        experiment="ber-vs-snr",
        snr_grid_db=(3.0, 5.0, 7.0, 9.0, 11.0),
        trials=120,
        training_len=350,
        payload_blocks=100,
        target_errors=100,
        max_extra_trials=1200,
        algorithms=("EPA",) + JAPA_ALGS,
        calibration_channels=128,
    )
    points = run_experiment(spec)
    curves = {}
    for p in points:
        curves.setdefault(p.algorithm, []).append(p)

    # reference-figure side check: at moderate SNR the EPA curve sits above
    # every adaptive curve (allowing 3 sigma)
    epa_by_x = {p.x: p for p in curves["EPA"]}
    for alg in JAPA_ALGS:
        for p in curves[alg]:
            if p.x in (5.0, 7.0):
                e = epa_by_x[p.x]
                assert e.y >= p.y - 3 * (e.y_stderr + p.y_stderr), (
                    f"{alg} above EPA at {p.x} dB beyond 3 sigma")

    required = {alg: required_snr_db(curves[alg], 1e-3) for alg in curves}
    assert required["EPA"] is not None, "EPA curve never crosses BER 1e-3 on the grid"
    gains = {}
    for alg in JAPA_ALGS:
        assert required[alg] is not None, f"{alg} curve never crosses BER 1e-3"
        gains[alg] = required["EPA"] - required[alg]
    passed = all(g >= 2.0 for g in gains.values())
    detail = ", ".join(f"{alg} {g:+.2f} dB" for alg, g in gains.items())
    report("fig2 BER gain over EPA (>= 2 dB each)", passed, detail)
    assert passed, (
        f"measured gains over EPA at BER 1e-3: {detail}. The criterion asks for "
        ">= 2 dB per algorithm; a grid-search oracle over all feasible "
        "allocations of this system model tops out near 1.2 dB, so the stated "
        "margin is not attainable here (see decisions ledger)."
    )


# ---------------------------------------------------------------------------
# criterion: quantized feedback ordering and 4-bit penalty <= 1.5 dB
# ---------------------------------------------------------------------------

def test_criterion_fig3_feedback_bits():
    spec = ExperimentSpec(
        experiment="feedback-bits",
        snr_grid_db=(2.0, 5.0, 8.0, 11.0),
        trials=60,
        training_len=250,
        payload_blocks=100,
        target_errors=80,
        max_extra_trials=600,
        feedback_bits=(2, 3, 4),
        calibration_channels=128,
    )
    points = run_experiment(spec)
    curves = {}
    for p in points:
        curves.setdefault(p.algorithm, []).append(p)
    order = ["JAPA-MBER-SG-2bit", "JAPA-MBER-SG-3bit", "JAPA-MBER-SG-4bit",
             "JAPA-MBER-SG-perfect"]
    ordering_ok = True
    for coarse, fine in zip(order, order[1:]):
        for pc, pf in zip(sorted(curves[coarse], key=lambda p: p.x),
                          sorted(curves[fine], key=lambda p: p.x)):
            if pc.y < pf.y - 3 * (pc.y_stderr + pf.y_stderr):
                ordering_ok = False
    req4 = required_snr_db(curves["JAPA-MBER-SG-4bit"], 1e-2)
    req_perfect = required_snr_db(curves["JAPA-MBER-SG-perfect"], 1e-2)
    assert req4 is not None and req_perfect is not None
    penalty_db = req4 - req_perfect
    passed = ordering_ok and penalty_db <= 1.5
    report("fig3 feedback quantization", passed,
           f"ordering {'ok' if ordering_ok else 'violated'}, "
           f"4-bit penalty {penalty_db:+.2f} dB")
    assert passed


# ---------------------------------------------------------------------------
# criterion: MSR sum rate dominates EPA and the other two loops (3 sigma)
# ---------------------------------------------------------------------------

def test_criterion_fig4_sum_rate():
    spec = ExperimentSpec(
        experiment="sum-rate",
        snr_grid_db=(0.0, 4.0, 8.0, 12.0, 16.0),
        trials=100,
        training_len=300,
        algorithms=("EPA",) + JAPA_ALGS,
        calibration_channels=128,
    )
    points = run_experiment(spec)
    curves = {}
    for p in points:
        curves.setdefault(p.algorithm, []).append(p)
    msr = sorted(curves["JAPA-MSR-SG"], key=lambda p: p.x)
    passed = True
    margins = []
    for other in ("EPA", "JAPA-MMSE-SG", "JAPA-MBER-SG"):
        rows = sorted(curves[other], key=lambda p: p.x)
        for pm, po in zip(msr, rows):
            margin = pm.y - po.y + 3 * (pm.y_stderr + po.y_stderr)
            margins.append(pm.y - po.y)
            if margin < 0:
                passed = False
    report("fig4 sum-rate dominance of MSR", passed,
           f"min raw margin {min(margins):+.3f} bits/s/Hz")
    assert passed


# ---------------------------------------------------------------------------
# criterion: convergence from cold start (0.5 at symbol 1, MBER plateau ~80)
# ---------------------------------------------------------------------------

def test_criterion_fig5_convergence():
    spec = ExperimentSpec(
        experiment="convergence",
        trials=1000,
        convergence_symbols=160,
        convergence_snr_db=10.0,
        algorithms=JAPA_ALGS,
        calibration_channels=128,
    )
    points = run_experiment(spec)
    curves = {}
    for p in points:
        curves.setdefault(p.algorithm, []).append(p)
    passed = True
    details = []
    for alg in JAPA_ALGS:
        rows = sorted(curves[alg], key=lambda p: p.x)
        first = rows[0]
        start_ok = abs(first.y - 0.5) <= 3 * first.y_stderr
        passed = passed and start_ok
        details.append(f"{alg} starts at {first.y:.3f}")
    # MBER plateau: successive 20-symbol windows past symbol 80 differ < 3 sigma
    rows = sorted(curves["JAPA-MBER-SG"], key=lambda p: p.x)
    ys = np.array([p.y for p in rows])
    bits = rows[0].trials
    windows = [ys[i:i + 20].mean() for i in range(80, 160, 20)]
    window_se = np.sqrt(np.maximum(np.array(windows) * (1 - np.array(windows)), 1e-9)
                        / (20 * bits))
    plateau_ok = all(
        abs(a - b) < 3 * (sa + sb)
        for (a, sa), (b, sb) in zip(zip(windows, window_se),
                                    zip(windows[1:], window_se[1:]))
    )
    passed = passed and plateau_ok
    details.append(f"MBER windows past 80: {[f'{w:.4f}' for w in windows]}")
    report("fig5 convergence", passed, "; ".join(details))
    assert passed


# ---------------------------------------------------------------------------
# criterion: feedback MSE terms (m_eo >= 0, residual reported)
# ---------------------------------------------------------------------------

def test_criterion_feedback_mse_terms():
    cfg = SystemConfig(n_relays=1)
    rng = trial_rng(6000)
    channels = draw_channel_set(cfg, rng)
    pa = epa_init(cfg)
    min_excess = np.inf
    residuals = []
    for _ in range(1000):
        err = 0.2 * rng.standard_normal(2)
        excess = mse_excess(channels, err, 1.0, 0.4)
        min_excess = min(min_excess, excess)
        residuals.append(
            mse_decomposition_residual(channels, pa, err, 1.0, 0.4, 0.4))
    passed = min_excess >= 0.0
    report("feedback MSE terms", passed,
           f"min excess {min_excess:.3e}; decomposition residual "
           f"mean {np.mean(residuals):.3e}, max {np.max(residuals):.3e} (reported, not asserted)")
    assert passed


# ---------------------------------------------------------------------------
# criterion: complexity counters, exact integer equality
# ---------------------------------------------------------------------------

def test_criterion_complexity_counters():
    mmse = complexity_counts("JAPA-MMSE-SG", 2, 2)
    msr = complexity_counts("JAPA-MSR-SG", 2, 2)
    mber = complexity_counts("JAPA-MBER-SG", 2, 2, window=10)
    got = [(mmse.multiplications, mmse.additions),
           (msr.multiplications, msr.additions),
           (mber.multiplications, mber.additions)]
    expected = [(38, 24), (45, 46), (76, 126)]
    passed = got == expected
    report("complexity counters", passed, f"{got}")
    assert passed


# ---------------------------------------------------------------------------
# criterion: ML never worse than linear MMSE detection (3 sigma, >= 1e4 trials)
# ---------------------------------------------------------------------------

def test_criterion_detector_dominance():
    rng = trial_rng(7000)
    passed = True
    details = []
    for noise_power in (0.8, 0.4, 0.15):
        cfg = SystemConfig(noise_power=noise_power)
        ml_err = lin_err = bits = 0
        for _ in range(2500):
            channels = draw_channel_set(cfg, rng)
            pa = epa_init(cfg)
            model = effective_model(channels, pa, cfg)
            filt = mmse_receive_filter(model, 1.0)
            for _ in range(5):
                s = bpsk_symbols(cfg.n_antennas, rng)
                block = simulate_block(cfg, channels, pa, s, rng, model=model)
                ml_err += int(np.sum(ml_detect(model, block.received) != s))
                lin_err += int(np.sum(linear_detect(filt, block.received) != s))
                bits += cfg.n_antennas
        se = np.sqrt(ml_err + lin_err + 1) / bits
        ok = ml_err / bits <= lin_err / bits + 3 * se
        passed = passed and ok
        details.append(f"noise {noise_power}: ML {ml_err / bits:.4f} vs "
                       f"linear {lin_err / bits:.4f}")
    report("detector dominance", passed, "; ".join(details))
    assert passed
