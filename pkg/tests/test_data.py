import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acnn_kspace.data import (
    MAX_CORRELATED_DRIFT,
    DatasetSplit,
    PhantomSpec,
    VolumeFormatError,
    coil_sensitivities,
    gen_phantom,
    make_neighborhood,
    neighborhood_indices,
    read_volume,
    split_dataset,
    write_volume,
    zero_pad_to,
)
from acnn_kspace.kspace import IMAGE, KSPACE, ComplexVolume, rss_combine
from acnn_kspace.validation import ShapeError


class TestPhantom:
    def test_deterministic(self):
        a = gen_phantom(PhantomSpec(n_slices=3, height=32, width=32, seed=5))
        b = gen_phantom(PhantomSpec(n_slices=3, height=32, width=32, seed=5))
        assert np.array_equal(a.data, b.data)
        c = gen_phantom(PhantomSpec(n_slices=3, height=32, width=32, seed=6))
        assert not np.array_equal(a.data, c.data)

    def test_shape_domain_and_complexity(self):
        vol = gen_phantom(PhantomSpec(n_slices=4, height=32, width=32, n_coils=3))
        assert vol.data.shape == (4, 3, 32, 32) and vol.domain == IMAGE
        assert vol.data.dtype == np.complex64
        assert np.abs(vol.data.imag).max() > 0.05

    def test_single_coil_rss_is_magnitude(self):
        vol = gen_phantom(PhantomSpec(n_slices=2, height=32, width=32, n_coils=1))
        assert np.array_equal(coil_sensitivities(1, 32), np.ones((1, 32, 32)))
        np.testing.assert_allclose(rss_combine(vol), np.abs(vol.data[:, 0]), rtol=1e-6)

    def test_sensitivities_unit_rss(self):
        sens = coil_sensitivities(4, 32)
        np.testing.assert_allclose(np.sqrt(np.sum(np.abs(sens) ** 2, axis=0)), 1.0, rtol=1e-12)
        assert not np.allclose(np.abs(sens[0]), np.abs(sens[1]))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adjacent_slice_correlation(self, seed):
        spec = PhantomSpec(n_slices=8, height=64, width=64, seed=seed, slice_drift=MAX_CORRELATED_DRIFT)
        mag = np.abs(rss_combine(gen_phantom(spec)))
        for z in range(7):
            r = np.corrcoef(mag[z].ravel(), mag[z + 1].ravel())[0, 1]
            assert r > 0.9
        # and the slices are not copies of each other
        assert not np.allclose(mag[0], mag[1])

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PhantomSpec(height=32, width=16)
        with pytest.raises(ValueError):
            PhantomSpec(n_ellipses=0)


class TestNeighborhood:
    def test_examples(self):
        assert neighborhood_indices(0, 1, 4) == [0, 0, 1]
        assert neighborhood_indices(3, 2, 4) == [1, 2, 3, 3, 3]
        vol = np.arange(4)[:, None, None, None] * np.ones((4, 2, 3, 3))
        (only,) = make_neighborhood(vol, 2, 0)
        assert np.array_equal(only, vol[2])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 4), st.data())
    def test_properties(self, n, s, data):
        i = data.draw(st.integers(0, n - 1))
        idx = neighborhood_indices(i, s, n)
        assert len(idx) == 2 * s + 1
        assert idx[s] == i
        assert all(0 <= j < n for j in idx)
        assert idx == sorted(idx)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            neighborhood_indices(4, 1, 4)

    def test_zero_pad(self):
        x = np.ones((2, 3, 3))
        out = zero_pad_to(x, 5, 7)
        assert out.shape == (2, 5, 7) and out.sum() == 18
        assert out[0, 1:4, 2:5].all()
        with pytest.raises(ShapeError):
            zero_pad_to(x, 2, 7)


class TestSplit:
    @pytest.mark.parametrize("n,fractions,sizes", [
        (20, (15 / 20, 1 / 20, 4 / 20), (15, 1, 4)),
        (570, (500 / 570, 10 / 570, 60 / 570), (500, 10, 60)),
        (12, (0.75, 0.05, 0.2), (9, 1, 2)),
    ])
    def test_sizes(self, n, fractions, sizes):
        split = split_dataset(range(n), fractions, seed=0)
        assert (len(split.train), len(split.validation), len(split.test)) == sizes
        assert sorted(split.train + split.validation + split.test) == list(range(n))

    def test_deterministic(self):
        a = split_dataset(range(30), seed=4)
        b = split_dataset(range(30), seed=4)
        assert a == b

    def test_errors(self):
        with pytest.raises(ValueError):
            split_dataset([], seed=0)
        with pytest.raises(ValueError):
            split_dataset(range(5), (0.5, 0.5, 0.5))

    def test_manifest_round_trip(self, tmp_path):
        split = split_dataset([f"v{i}" for i in range(7)], seed=1)
        split.write(tmp_path / "split.txt")
        back = DatasetSplit.read(tmp_path / "split.txt")
        assert (back.train, back.validation, back.test) == (split.train, split.validation, split.test)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 200), st.integers(0, 100))
    def test_partition_property(self, n, seed):
        split = split_dataset(range(n), seed=seed)
        parts = [set(split.train), set(split.validation), set(split.test)]
        assert sum(len(p) for p in parts) == n
        assert set().union(*parts) == set(range(n))


class TestKSPV:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        data = (rng.standard_normal((2, 2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2, 2))).astype(np.complex64)
        for domain in (KSPACE, IMAGE):
            write_volume(tmp_path / "v.kspv", ComplexVolume(data, domain))
            back = read_volume(tmp_path / "v.kspv")
            assert back.domain == domain
            assert back.data.tobytes() == data.tobytes()

    def test_layout(self, tmp_path):
        data = np.array([1 + 2j], np.complex64).reshape(1, 1, 1, 1)
        write_volume(tmp_path / "v.kspv", ComplexVolume(data))
        raw = (tmp_path / "v.kspv").read_bytes()
        assert raw[:4] == b"KSPV"
        assert len(raw) == 4 + 2 + 1 + 16 + 8
        assert np.frombuffer(raw[-8:], "<f4").tolist() == [1.0, 2.0]

    def test_errors_are_distinct(self, tmp_path):
        write_volume(tmp_path / "v.kspv", ComplexVolume(np.zeros((1, 1, 4, 4), np.complex64)))
        raw = (tmp_path / "v.kspv").read_bytes()
        cases = {
            "bad magic": b"KSPX" + raw[4:],
            "truncated header": raw[:10],
            "truncated payload": raw[:-1],
            "version mismatch": raw[:4] + (2).to_bytes(2, "little") + raw[6:],
        }
        for message, blob in cases.items():
            (tmp_path / "bad.kspv").write_bytes(blob)
            with pytest.raises(VolumeFormatError, match=message):
                read_volume(tmp_path / "bad.kspv")
