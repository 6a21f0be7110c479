"""End-to-end acceptance checks A1-A7.

Each check reports into the session's acceptance log, which prints one
PASS/FAIL line per criterion at the end of the run.  A5 runs about a quarter
of an hour on one core.
"""

import math

import numpy as np
import pytest

from wsdec.channel import SnrSpec, bpsk_modulate, snr_to_sigma
from wsdec.cli import main
from wsdec.codes import LinearCode, build_ca_polar
from wsdec.decoders import HardDecisionDecoder, MlDecoder, SclDecoder
from wsdec.gf2 import BitVector
from wsdec.sim import CodeConfig, SimConfig, SnrGrid, TrialConfig, run_bler_point, run_sweep
from wsdec.sphere import build_sphere, enumerate_spectrum, recenter
from wsdec.wsd import TwoStageDecoder, WsdConfig, candidate_metrics_sq

# Cumulative sphere sizes |S_r(0)|, r = 1, 2, ... for CRC-11 aided polar codes.
EXPECTED_SIZES = {
    (64, 16): (9, 246, 4002),
    (128, 16): (1, 24, 1078, 12995),
    (256, 16): (1, 10, 537, 6471),
}
A1_CELLS = [(n, k, r) for (n, k), sizes in EXPECTED_SIZES.items() for r in range(1, len(sizes) + 1)]


# A1: sphere cardinalities


@pytest.mark.parametrize("N,K,r", A1_CELLS, ids=[f"N{n}-r{r}" for n, _, r in A1_CELLS])
def test_a1_sphere_cardinality(acceptance, N, K, r):
    with acceptance.check("A1", f"({N},{K}) r={r}") as note:
        code = build_ca_polar(N, K)
        got = build_sphere(code, r).member_count
        want = EXPECTED_SIZES[(N, K)][r - 1]
        note["detail"] = f"|S_r(0)|={got} expected {want}"
        assert got == want


@pytest.mark.parametrize("N", [64, 128, 256])
def test_a1_internal_consistency(acceptance, N):
    with acceptance.check("A1", f"({N},16) invariants"):
        code = build_ca_polar(N, 16)
        spec = enumerate_spectrum(code)
        assert sum(spec.shell_counts) == 2**16
        sphere = build_sphere(code, 2, spec)
        book = code.encode_array((np.arange(2**16)[:, None] >> np.arange(16)) & 1)
        books = {r.tobytes() for r in book}
        rng = np.random.default_rng(N)
        for c in book[rng.integers(0, 2**16, 20)]:
            moved = c[None] ^ sphere.bits
            assert len({m.tobytes() for m in moved}) == sphere.member_count
            assert all(m.tobytes() in books for m in moved)
            assert np.array_equal((moved ^ c).sum(axis=1), sphere.weights)


# A2: always-on WSD with a full-codebook sphere is ML


def test_a2_full_sphere_equals_mld(acceptance):
    with acceptance.check("A2", "(12,4) AOM r=L J=5, 10^4 blocks at 0 dB") as note:
        rng = np.random.default_rng(2024)
        code = LinearCode.random(12, 4, rng)
        spec = enumerate_spectrum(code)
        sphere = build_sphere(code, spec.L)
        assert sphere.member_count == 15
        noise = snr_to_sigma(SnrSpec("ebn0", 0.0), code.rate)
        m = rng.integers(0, 2, (10_000, 4))
        y = bpsk_modulate(code.encode_array(m)) + noise.sigma * rng.standard_normal((10_000, 12))
        two = TwoStageDecoder(code, HardDecisionDecoder(code), sphere,
                              WsdConfig(spec.L, 5, "always_on")).decode_batch(y, noise)
        mld = MlDecoder(code).decode_batch(y)
        bad = int((~np.isclose(two.metric_sq, mld.metric_sq, rtol=1e-12, atol=0)).sum())
        note["detail"] = f"mismatches={bad}"
        assert bad == 0
        assert np.array_equal(two.codewords, mld.codewords)


# A3: monotone refinement over 10^5 blocks


def test_a3_monotone_refinement(acceptance):
    with acceptance.check("A3", "(64,16) SCL(8)+WSD(r=2,J=3), 10^5 blocks at 2 dB") as note:
        code = build_ca_polar(64, 16)
        noise = snr_to_sigma(SnrSpec("ebn0", 2.0), code.rate)
        dec = TwoStageDecoder(code, SclDecoder(code, 8), build_sphere(code, 2), WsdConfig(2, 3))
        rng = np.random.Generator(np.random.Philox(3))
        violations = boosted = 0
        for _ in range(50):
            m = rng.integers(0, 2, (2000, 16))
            y = bpsk_modulate(code.encode_array(m)) + noise.sigma * rng.standard_normal((2000, 64))
            out = dec.decode_batch(y, noise)
            for i in np.flatnonzero(out.boosted):
                trace = out.outcome(int(i)).trace
                ms = trace.metrics
                boosted += 1
                if not (all(a > b for a, b in zip(ms, ms[1:])) and 1 <= trace.rounds_executed <= 3):
                    violations += 1
            violations += int((out.boost_rounds > 3).sum())
        note["detail"] = f"boosted={boosted} violations={violations}"
        assert boosted > 0 and violations == 0


# A4: complexity bound and adaptivity


def test_a4_complexity_bound_and_trend(acceptance):
    with acceptance.check("A4", "(64,16) SCL(32)+WSD(r=2), 0-6 dB, 2*10^4 blocks/point") as note:
        cfg = SimConfig(code=CodeConfig(64, 16), decoder="scl_wsd", list_size=32, wsd=WsdConfig(2, 3),
                        snr=SnrGrid.arange(0.0, 6.0, 1.0), trials=TrialConfig(20_000, 10**9), seed=4)
        pts = run_sweep(cfg)
        size = 246
        cost = [p.avg_metric_evals_per_block for p in pts]
        note["detail"] = "evals/block=" + ",".join(f"{c:.2f}" for c in cost)
        for p in pts:
            assert p.avg_metric_evals_per_block <= p.crc_fail_rate_hat * 3 * size
        # per-block cost lies in [0, 3 * size], so Var <= (3*size - mu) * mu
        for a, b in zip(pts, pts[1:]):
            se = [math.sqrt(max((3 * size - p.avg_metric_evals_per_block) * p.avg_metric_evals_per_block, 0.0)
                            / p.blocks_simulated) for p in (a, b)]
            slack = 1.96 * math.hypot(*se)
            assert b.avg_metric_evals_per_block <= a.avg_metric_evals_per_block + slack
        assert cost[-1] < cost[0]


# A5: BLER gain over SCL and closeness to ML


A5_SNR = 4.2


def test_a5_bler_gain_and_ml_match(acceptance):
    with acceptance.check("A5", f"(64,16) at {A5_SNR} dB") as note:
        base = dict(code=CodeConfig(64, 16), list_size=32, seed=5)
        wsd_cfg = SimConfig(decoder="scl_wsd", wsd=WsdConfig(3, 3), snr=SnrGrid("ebn0", (A5_SNR,)),
                            trials=TrialConfig(10**6, 10**9), **base)
        mld_cfg = SimConfig(decoder="mld", wsd=None, snr=SnrGrid("ebn0", (A5_SNR,)),
                            trials=TrialConfig(10**6, 10**9), **base)
        hi = A5_SNR + 0.2
        scl_hi_cfg = SimConfig(decoder="scl", wsd=None, snr=SnrGrid("ebn0", (hi,)),
                               trials=TrialConfig(300_000, 10**9), **base)
        # same seed and point seed: WSD and MLD see identical noise realizations
        wsd = run_bler_point(wsd_cfg, A5_SNR, 0)
        mld = run_bler_point(mld_cfg, A5_SNR, 0)
        scl_hi = run_bler_point(scl_hi_cfg, hi, 1)
        scl_errors = wsd.initial_block_errors
        scl_bler = scl_errors / wsd.blocks_simulated
        note["detail"] = (f"SCL={scl_bler:.3g} ({scl_errors} err), SCL@{hi:.1f}={scl_hi.bler:.3g} "
                          f"({scl_hi.block_errors} err), WSD={wsd.bler:.3g} ({wsd.block_errors} err), "
                          f"MLD={mld.bler:.3g} ({mld.block_errors} err)")
        print(note["detail"])
        assert scl_errors >= 100 and 5e-4 <= scl_bler <= 2e-3
        assert scl_hi.block_errors >= 100
        assert wsd.bler <= scl_hi.bler
        assert mld.block_errors > 0
        assert 0.5 <= wsd.bler / mld.bler <= 2.0


# A6: byte-identical CSV across runs and worker counts


@pytest.mark.parametrize("decoder", ["scl_wsd", "scl", "mld"])
def test_a6_determinism(acceptance, tmp_path, decoder):
    with acceptance.check("A6", decoder):
        args = ["simulate", "--decoder", decoder, "--snr-start", "1", "--snr-stop", "2", "--snr-step", "0.5",
                "--max-blocks", "1200", "--target-errors", "25", "--seed", "77"]
        if decoder != "mld":
            args += ["--list-size", "8"]
        if decoder == "scl_wsd":
            args += ["--radius", "2"]
        outs = []
        for i, workers in enumerate((1, 1, 2)):
            path = tmp_path / f"run{i}.csv"
            assert main(args + ["--workers", str(workers), "--csv-out", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1] == outs[2]


# A7: coset and metric properties on random small codes


def brute_codebook(code):
    idx = np.arange(1 << code.K)
    return ((idx[:, None] >> np.arange(code.K)) & 1) @ code.g_combined.array.astype(np.int64) % 2


def test_a7_small_code_properties(acceptance):
    with acceptance.check("A7", "10^4 random codes N<=16, K<=8") as note:
        rng = np.random.default_rng(7)
        failures = {"coset": 0, "distance": 0, "recentering": 0, "delta": 0}
        for _ in range(10_000):
            N = int(rng.integers(2, 17))
            K = int(rng.integers(1, min(N, 8) + 1))
            code = LinearCode.random(N, K, rng)
            book = brute_codebook(code)
            spec = enumerate_spectrum(code)
            full = build_sphere(code, spec.L, spec)
            r = int(rng.integers(1, spec.L + 1))
            part = build_sphere(code, r, spec)
            c = book[rng.integers(len(book))]
            cv = code.encode_array(code.codeword_to_v(c))  # sanity: c is a codeword
            assert np.array_equal(cv, c)

            moved = np.array([list(b) for b in recenter(BitVector.from_bits(c), full)], dtype=np.int64)
            as_set = {m.tobytes() for m in moved.astype(np.uint8)}
            if len(as_set) != len(moved) or as_set | {c.astype(np.uint8).tobytes()} != \
                    {b.astype(np.uint8).tobytes() for b in book}:
                failures["coset"] += 1
            d_r = spec.weights[r]
            near = {b.astype(np.uint8).tobytes() for b in book if 0 < (b ^ c).sum() <= d_r}
            if {m.tobytes() for m in (part.bits ^ c.astype(np.uint8))} != near:
                failures["coset"] += 1

            i, j = rng.integers(0, full.member_count, 2)
            a, b = full.bits[i].astype(np.int64), full.bits[j].astype(np.int64)
            if ((a ^ c) ^ (b ^ c)).sum() != (a ^ b).sum() or ((a ^ c) ^ c).sum() != full.weights[i]:
                failures["distance"] += 1

            dist = np.bincount((book ^ c).sum(axis=1), minlength=N + 1)
            if {w: n for w, n in enumerate(dist.tolist()) if n} != dict(zip(spec.weights, spec.shell_counts)):
                failures["recentering"] += 1

            y = 1.5 * rng.standard_normal(N)
            fast = candidate_metrics_sq(y[None], c[None].astype(np.uint8), part)[0]
            slow = ((y[None] - (1.0 - 2.0 * (part.bits ^ c.astype(np.uint8)))) ** 2).sum(axis=1)
            if not np.allclose(fast, slow, rtol=1e-9, atol=1e-12):
                failures["delta"] += 1
        note["detail"] = " ".join(f"{k}={v}" for k, v in failures.items())
        assert not any(failures.values())
