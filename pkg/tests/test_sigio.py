import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_frame
from iqprompt.exceptions import (
    CorruptDataset,
    DegenerateSignal,
    InvalidArgument,
    InvalidWarp,
    ShapeMismatch,
    UnsupportedFormat,
    UnsupportedScheme,
)
from iqprompt.sigio import (
    NOISELESS,
    SCHEMES,
    ChannelSpec,
    GeneratorConfig,
    IQFrame,
    SignalDataset,
    apply_channel,
    augment_phase_rotate,
    augment_reverse,
    augment_time_warp,
    constellation,
    estimate_snr,
    generate_modulated,
    load_dataset,
    make_synthetic_benchmark,
    manifest_path,
    normalize,
    random_warp_knots,
    save_dataset,
    sg_filter,
    split_counts,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


class TestFrames:
    def test_validates_lengths(self):
        with pytest.raises(ShapeMismatch):
            IQFrame(np.zeros(3), np.zeros(4))
        with pytest.raises(InvalidArgument):
            IQFrame(np.zeros(0), np.zeros(0))
        with pytest.raises(InvalidArgument):
            IQFrame(np.array([np.nan]), np.array([0.0]))

    def test_dataset_rejects_bad_label(self):
        with pytest.raises(InvalidArgument):
            SignalDataset([IQFrame([1.0], [0.0], label=2)], ["a", "b"])

    def test_dataset_rejects_mixed_lengths(self):
        with pytest.raises(ShapeMismatch):
            SignalDataset([IQFrame([1.0], [0.0]), IQFrame([1.0, 2.0], [0.0, 0.0])], ["a"])

    def test_channel_spec_validation(self):
        with pytest.raises(InvalidArgument):
            ChannelSpec(taps=(0j, 0j))
        with pytest.raises(InvalidArgument):
            ChannelSpec(taps=(complex(np.inf, 0),))
        assert ChannelSpec(snr_db="noiseless").noiseless


class TestModulation:
    def test_bpsk_all_zero_symbols(self):
        f = generate_modulated("BPSK", 16, 4, symbols=np.zeros(16, dtype=int))
        assert_array_equal(f.i, np.ones(64))
        assert_array_equal(f.q, np.zeros(64))

    def test_qpsk_constant_modulus(self):
        f = generate_modulated("QPSK", 200, 3, seed=7)
        assert_allclose(f.i**2 + f.q**2, 1.0, atol=1e-9)

    def test_qam16_histogram(self):
        f = generate_modulated("QAM16", 1000, 1, seed=3)
        levels = np.array([-3, -1, 1, 3]) / np.sqrt(10)
        for axis in (f.i, f.q):
            assert np.all(np.min(np.abs(axis[:, None] - levels[None, :]), axis=1) < 1e-12)
        grid = np.stack(np.meshgrid(levels, levels), -1).reshape(-1, 2)
        pts = np.stack([f.i, f.q], -1)
        counts = np.array([np.sum(np.all(np.isclose(pts, g), axis=1)) for g in grid])
        assert counts.sum() == 1000
        assert np.all(np.abs(counts / 1000 - 1 / 16) <= 0.05)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_unit_power_and_length(self, scheme):
        assert len(generate_modulated(scheme, 64, 8, seed=1)) == 512
        f = generate_modulated(scheme, 4000, 2, seed=1)
        assert_allclose(f.mean_power(), 1.0, rtol=0.05)

    @pytest.mark.parametrize("scheme", ["BPSK", "QPSK", "8PSK", "PAM4", "QAM16", "QAM64"])
    def test_constellation_unit_power(self, scheme):
        assert_allclose(np.mean(np.abs(constellation(scheme)) ** 2), 1.0, atol=1e-12)

    def test_gray_mapping_neighbours_differ_by_one_bit(self):
        pts = constellation("8PSK")
        order = np.argsort(np.angle(pts))
        for a, b in zip(order, np.roll(order, -1)):
            assert bin(int(a) ^ int(b)).count("1") == 1

    def test_deterministic_per_seed(self):
        assert generate_modulated("QAM64", 32, 2, seed=5).equals(generate_modulated("QAM64", 32, 2, seed=5))
        assert not generate_modulated("QAM64", 32, 2, seed=5).equals(generate_modulated("QAM64", 32, 2, seed=6))

    def test_errors(self):
        with pytest.raises(UnsupportedScheme):
            generate_modulated("OOK", 4, 4)
        with pytest.raises(InvalidArgument):
            generate_modulated("BPSK", 0, 4)
        with pytest.raises(InvalidArgument):
            generate_modulated("BPSK", 4, 0)

    def test_rrc_pulse_unit_power(self):
        f = generate_modulated("QPSK", 64, 8, seed=2, pulse="rrc")
        assert_allclose(f.mean_power(), 1.0, atol=1e-9)


class TestChannel:
    def test_identity_noiseless_is_bit_exact(self, rng):
        f = random_frame(rng)
        out = apply_channel(f, ChannelSpec())
        assert_array_equal(out.i, f.i)
        assert_array_equal(out.q, f.q)
        assert out.i is not f.i

    def test_unit_delay(self, rng):
        f = random_frame(rng, 16)
        out = apply_channel(f, ChannelSpec(taps=(0, 1)))
        assert out.i[0] == 0 and out.q[0] == 0
        assert_array_equal(out.i[1:], f.i[:-1])
        assert_array_equal(out.q[1:], f.q[:-1])

    @pytest.mark.parametrize("snr", [0.0, 6.0, 10.0, 20.0])
    def test_snr_calibration(self, snr):
        clean = generate_modulated("QPSK", 65536, 1, seed=11)
        noisy = apply_channel(clean, ChannelSpec(snr_db=snr, seed=4))
        assert abs(estimate_snr(clean, noisy) - snr) <= 0.5

    def test_calibrates_from_post_convolution_power(self):
        clean = generate_modulated("QPSK", 65536, 1, seed=1)
        taps = (0.5, 0.25j)
        faded = apply_channel(clean, ChannelSpec(taps=taps))
        noisy = apply_channel(clean, ChannelSpec(taps=taps, snr_db=10.0, seed=9))
        assert abs(estimate_snr(faded, noisy) - 10.0) <= 0.5

    def test_deterministic(self, rng):
        f = random_frame(rng)
        a = apply_channel(f, ChannelSpec(snr_db=3.0, seed=1))
        b = apply_channel(f, ChannelSpec(snr_db=3.0, seed=1))
        assert a.equals(b)


class TestEstimateSnr:
    def test_noiseless_sentinel(self, rng):
        f = random_frame(rng)
        assert estimate_snr(f, f) == NOISELESS

    def test_equal_power_is_zero_db(self):
        clean = IQFrame(np.ones(4), np.zeros(4))
        noisy = IQFrame(np.ones(4), np.array([1.0, -1.0, 1.0, -1.0]))
        assert_allclose(estimate_snr(clean, noisy), 0.0, atol=1e-12)

    def test_quarter_residual(self):
        clean = IQFrame(np.ones(4), np.zeros(4))
        noisy = IQFrame(np.ones(4) + 0.5, np.zeros(4))
        assert_allclose(estimate_snr(clean, noisy), 10 * math.log10(4), atol=1e-12)
        assert_allclose(estimate_snr(clean, noisy), 6.0206, atol=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatch):
            estimate_snr(IQFrame([1.0], [0.0]), IQFrame([1.0, 1.0], [0.0, 0.0]))


class TestAugment:
    def test_rotation_cases(self, rng):
        f = random_frame(rng)
        assert_allclose(augment_phase_rotate(f, 0.0).as_array(), f.as_array(), atol=0)
        r = augment_phase_rotate(f, math.pi)
        assert_allclose(r.i, -f.i, atol=1e-12)
        assert_allclose(r.q, -f.q, atol=1e-12)
        r = augment_phase_rotate(f, math.pi / 2)
        assert_allclose(r.i, -f.q, atol=1e-12)
        assert_allclose(r.q, f.i, atol=1e-12)

    @given(finite, finite)
    def test_rotation_composes(self, t1, t2):
        f = random_frame(np.random.default_rng(0), 16)
        a = augment_phase_rotate(augment_phase_rotate(f, t1), t2)
        b = augment_phase_rotate(f, t1 + t2)
        assert_allclose(a.as_array(), b.as_array(), atol=1e-9)

    @given(finite)
    def test_rotation_preserves_power(self, theta):
        f = random_frame(np.random.default_rng(1), 64)
        assert_allclose(augment_phase_rotate(f, theta).mean_power(), f.mean_power(), rtol=1e-12)

    def test_reverse(self, rng):
        f = random_frame(rng, 9)
        r = augment_reverse(f)
        assert len(r) == len(f)
        assert r.i[0] == f.i[-1] and r.q[0] == f.q[-1]
        assert augment_reverse(r).equals(f)
        assert r.mean_power() == pytest.approx(f.mean_power(), rel=1e-12)

    def test_identity_warp(self, rng):
        f = random_frame(rng, 10)
        out = augment_time_warp(f, [(0, 0), (9, 9)])
        assert_allclose(out.as_array(), f.as_array(), atol=0)

    def test_warp_example_against_direct_interpolation(self):
        f = IQFrame(np.array([0.0, 1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0, 0.0]))
        knots = [(0, 0), (2, 1), (3, 3)]
        out = augment_time_warp(f, knots)
        # phi through the knots: phi(0)=0, phi(1)=0.5, phi(2)=1, phi(3)=3.
        phi = [0.0, 0.5, 1.0, 3.0]

        def lerp(x, p):
            lo = int(math.floor(p))
            hi = min(lo + 1, len(x) - 1)
            return x[lo] + (p - lo) * (x[hi] - x[lo])

        assert_allclose(out.i, [lerp(f.i, p) for p in phi], atol=1e-12)
        assert_allclose(out.q, [lerp(f.q, p) for p in phi], atol=1e-12)
        assert_allclose(out.i, [0.0, 0.5, 1.0, 3.0], atol=1e-12)

    @pytest.mark.parametrize("knots", [
        [(0, 0), (2, 2), (1, 1), (3, 3)],
        [(0, 0), (1, 2), (2, 1), (3, 3)],
        [(0, 1), (3, 3)],
        [(0, 0), (3, 2)],
        [(0, 0)],
    ])
    def test_invalid_warps(self, knots):
        with pytest.raises(InvalidWarp):
            augment_time_warp(IQFrame(np.arange(4.0), np.zeros(4)), knots)

    @given(st.integers(2, 200), st.integers(0, 2**32 - 1))
    def test_random_warps_valid_and_length_preserving(self, n, seed):
        f = random_frame(np.random.default_rng(seed), n)
        out = augment_time_warp(f, random_warp_knots(n, np.random.default_rng(seed)))
        assert len(out) == n

    def test_normalize_cases(self, rng):
        f = normalize(random_frame(rng))
        assert_allclose(f.mean_power(), 1.0, atol=1e-9)
        assert_allclose(normalize(f).as_array(), f.as_array(), atol=1e-9)
        g = random_frame(np.random.default_rng(3))
        scaled = g.with_samples(3 * g.i, 3 * g.q)
        assert_allclose(normalize(scaled).as_array(), normalize(g).as_array(), atol=1e-9)
        c = normalize(IQFrame(np.full(5, 2.0), np.zeros(5)))
        assert_allclose(c.i, 1.0, atol=1e-12)
        assert_allclose(c.q, 0.0, atol=1e-12)
        with pytest.raises(DegenerateSignal):
            normalize(IQFrame(np.zeros(3), np.zeros(3)))


def _sg_oracle(x, window, order):
    """Least-squares fit by normal equations in every length-``window`` window.

    Interior samples take the fitted value at the window center; the first
    and last ``window // 2`` samples take the fit of the first / last window.
    """
    half = window // 2
    n = len(x)
    out = np.empty(n)
    t = np.arange(window) - half
    a = np.vander(t, order + 1, increasing=True)
    ata = a.T @ a
    for c in range(n):
        lo = min(max(c - half, 0), n - window)
        coef = np.linalg.solve(ata, a.T @ x[lo: lo + window])
        u = c - (lo + half)
        out[c] = sum(coef[k] * u**k for k in range(order + 1))
    return out


class TestSGFilter:
    def test_polynomial_reproduction(self):
        t = np.linspace(-2, 2, 40)
        f = IQFrame(1 + 2 * t - 0.5 * t**2, 3 - t)
        out = sg_filter(f, 5, 2)
        assert_allclose(out.as_array(), f.as_array(), atol=1e-9)

    def test_constant_unchanged(self):
        f = IQFrame(np.full(20, 1.5), np.full(20, -2.0))
        assert_allclose(sg_filter(f, 7, 3).as_array(), f.as_array(), atol=1e-12)

    def test_matches_normal_equations(self, rng):
        f = random_frame(rng, 32)
        out = sg_filter(f, 5, 2)
        assert_allclose(out.i, _sg_oracle(f.i, 5, 2), atol=1e-9)
        assert_allclose(out.q, _sg_oracle(f.q, 5, 2), atol=1e-9)

    def test_mirror_mode_interior_matches(self, rng):
        f = random_frame(rng, 32)
        a = sg_filter(f, 5, 2, mode="mirror")
        assert_allclose(a.i[2:-2], _sg_oracle(f.i, 5, 2)[2:-2], atol=1e-9)

    @given(finite, finite)
    def test_linearity(self, a, b):
        r = np.random.default_rng(2)
        x, y = random_frame(r, 24), random_frame(r, 24)
        combo = x.with_samples(a * x.i + b * y.i, a * x.q + b * y.q)
        lhs = sg_filter(combo, 5, 2).as_array()
        rhs = a * sg_filter(x, 5, 2).as_array() + b * sg_filter(y, 5, 2).as_array()
        assert_allclose(lhs, rhs, atol=1e-9)

    @pytest.mark.parametrize("window,order", [(4, 2), (5, 5), (0, 0), (5, -1), (41, 2)])
    def test_invalid(self, rng, window, order):
        with pytest.raises(InvalidArgument):
            sg_filter(random_frame(rng, 32), window, order)


class TestBenchmark:
    def test_split_arithmetic(self):
        cfg = GeneratorConfig(schemes=["BPSK", "QPSK", "PAM4", "QAM16"], snr_grid_db=[0, 10],
                              frames_per_cell=100, length=64)
        train, val, test = make_synthetic_benchmark(cfg)
        assert (len(train), len(val), len(test)) == (640, 80, 80)
        assert split_counts(100) == (80, 10, 10)
        for ds in (train, val, test):
            hist = np.bincount(ds.labels(), minlength=4)
            assert np.all(hist == hist[0])

    def test_regeneration_bit_identical(self):
        cfg = GeneratorConfig(frames_per_cell=20, length=32)
        a = make_synthetic_benchmark(cfg)
        b = make_synthetic_benchmark(cfg)
        assert all(x.equals(y) for x, y in zip(a, b))
        c = make_synthetic_benchmark(cfg, seed=1)
        assert not a[0].equals(c[0])

    def test_splits_disjoint(self):
        train, val, test = make_synthetic_benchmark(GeneratorConfig(frames_per_cell=30, length=32))
        keys = [{f.as_array().tobytes() for f in ds.frames} for ds in (train, val, test)]
        assert not (keys[0] & keys[1]) and not (keys[0] & keys[2]) and not (keys[1] & keys[2])

    def test_frames_carry_metadata(self):
        train, _, _ = make_synthetic_benchmark(GeneratorConfig(frames_per_cell=10, snr_grid_db=[4.0]))
        f = train.frames[0]
        assert f.snr_db == 4.0 and f.scheme == train.class_names[f.label] and len(f) == 128

    def test_empty_scheme_list(self):
        with pytest.raises(InvalidArgument):
            make_synthetic_benchmark(GeneratorConfig(schemes=[]))


class TestStorage:
    def test_round_trip(self, tmp_path):
        train, _, _ = make_synthetic_benchmark(GeneratorConfig(frames_per_cell=10, length=32,
                                                               snr_grid_db=[5.0, "noiseless"]))
        save_dataset(train, tmp_path / "d.iq")
        back = load_dataset(tmp_path / "d.iq")
        assert back.equals(train)
        assert back.manifest["seed"] == train.manifest["seed"]
        assert (tmp_path / "d.iq").stat().st_size == len(train) * 32 * 2 * 4

    def test_records_are_interleaved_little_endian(self, tmp_path):
        ds = SignalDataset([IQFrame(np.array([1.0, 2.0], np.float32), np.array([3.0, 4.0], np.float32))], [])
        save_dataset(ds, tmp_path / "x.iq")
        raw = np.frombuffer((tmp_path / "x.iq").read_bytes(), dtype="<f4")
        assert_array_equal(raw, [1, 3, 2, 4])

    def test_empty_dataset(self, tmp_path):
        ds = SignalDataset([], ["a"], "test", {"length": 16})
        save_dataset(ds, tmp_path / "e.iq")
        back = load_dataset(tmp_path / "e.iq")
        assert len(back) == 0 and back.class_names == ["a"]

    def test_version_mismatch(self, tmp_path):
        ds = SignalDataset([IQFrame([1.0], [0.0])], [])
        save_dataset(ds, tmp_path / "v.iq")
        m = manifest_path(tmp_path / "v.iq")
        m.write_text(m.read_text().replace('"format_version": "1"', '"format_version": "9"'))
        with pytest.raises(UnsupportedFormat):
            load_dataset(tmp_path / "v.iq")

    def test_truncated(self, tmp_path):
        train, _, _ = make_synthetic_benchmark(GeneratorConfig(frames_per_cell=10, length=32))
        save_dataset(train, tmp_path / "t.iq")
        p = tmp_path / "t.iq"
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(CorruptDataset):
            load_dataset(p)

    def test_class_count_mismatch(self, tmp_path):
        ds = SignalDataset([IQFrame([1.0], [0.0], label=1)], ["a", "b"])
        save_dataset(ds, tmp_path / "c.iq")
        m = manifest_path(tmp_path / "c.iq")
        doc = json.loads(m.read_text())
        doc["class_names"] = ["a"]
        m.write_text(json.dumps(doc))
        with pytest.raises(CorruptDataset):
            load_dataset(tmp_path / "c.iq")
