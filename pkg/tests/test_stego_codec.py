import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stegogan import keystream
from stegogan import stego_codec as sc
from stegogan.errors import CapacityError, UsageError
from stegogan.image_core import PixelImage, to_tensor


def random_cover(rng, shape=(64, 64, 3)):
    return PixelImage(rng.integers(0, 256, shape, dtype=np.uint8))


def test_splitmix_reference_values():
    # first outputs for seed 0 as published with the reference C implementation
    assert keystream.splitmix64_scalar(0, 0) == 0xE220A8397B1DCDAF
    assert keystream.splitmix64_scalar(0, 1) == 0x6E789E6AA1B965F4
    vec = keystream.splitmix64(1234567, 50, start=7)
    assert [int(v) for v in vec] == [keystream.splitmix64_scalar(1234567, 7 + i) for i in range(50)]


def test_bounded_range():
    words = keystream.splitmix64(9, 10000)
    vals = keystream.bounded(words, np.full(10000, 7, dtype=np.uint64))
    assert vals.min() == 0 and vals.max() == 6


def test_capacity():
    assert sc.capacity((64, 64, 1), 0.4) == 1638
    assert sc.capacity((64, 64, 3), 0.4) == 4915
    with pytest.raises(UsageError):
        sc.capacity((64, 64, 3), 0)
    with pytest.raises(UsageError):
        sc.capacity((64, 64, 3), 1.5)


def test_plan_deterministic():
    a = sc.derive_plan(42, (64, 64, 3), 1000)
    b = sc.derive_plan(42, (64, 64, 3), 1000)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.signs, b.signs)
    assert len(set(a.positions.tolist())) == 1000
    assert set(np.unique(a.signs).tolist()) <= {-1, 1}


def test_plan_prefix_property():
    short = sc.derive_plan(7, (8, 8, 1), 10)
    long = sc.derive_plan(7, (8, 8, 1), 30)
    assert np.array_equal(short.positions, long.positions[:10])
    assert np.array_equal(short.signs, long.signs[:10])


def test_full_plan_is_permutation():
    plan = sc.derive_plan(3, (16, 16, 3), 16 * 16 * 3)
    assert sorted(plan.positions.tolist()) == list(range(768))


def test_plan_too_long():
    with pytest.raises(CapacityError):
        sc.derive_plan(1, (4, 4, 1), 17)


def test_distinct_keys_give_distinct_plans():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k1, k2 = (int(k) for k in rng.integers(0, 2**63, 2))
        p1 = sc.derive_plan(k1, (64, 64, 1), 1638)
        p2 = sc.derive_plan(k2, (64, 64, 1), 1638)
        assert not np.array_equal(p1.positions, p2.positions)


def test_matching_bit_is_noop():
    cover = PixelImage(np.full((4, 4, 1), 10, dtype=np.uint8))
    stego = sc.embed(cover, np.zeros(16, dtype=np.uint8), key=5)
    assert stego == cover


def test_boundary_pixels_clamp():
    zeros = PixelImage(np.zeros((4, 4, 1), dtype=np.uint8))
    assert np.all(sc.embed(zeros, np.ones(16, dtype=np.uint8), key=11).flat() == 1)
    full = PixelImage(np.full((4, 4, 1), 255, dtype=np.uint8))
    assert np.all(sc.embed(full, np.zeros(16, dtype=np.uint8), key=11).flat() == 254)


def test_both_signs_used():
    cover = PixelImage(np.full((32, 32, 1), 100, dtype=np.uint8))
    stego = sc.embed(cover, np.ones(1024, dtype=np.uint8), key=2)
    vals = set(stego.flat().tolist())
    assert vals == {99, 101}


def test_extract_on_cover_reads_lsbs():
    rng = np.random.default_rng(4)
    cover = random_cover(rng)
    plan = sc.derive_plan(99, cover.shape, 500)
    assert np.array_equal(sc.extract(cover, 99, 500), cover.flat()[plan.positions] & 1)


def test_roundtrip_locality_and_distortion():
    rng = np.random.default_rng(5)
    for trial in range(50):
        cover = random_cover(rng, (64, 64, 1))
        msg = rng.integers(0, 2, 1638).astype(np.uint8)
        key = int(rng.integers(0, 2**63))
        stego = sc.embed(cover, msg, key)
        assert np.array_equal(sc.extract(stego, key, msg.size), msg)
        diff = stego.flat().astype(int) - cover.flat().astype(int)
        assert np.abs(diff).max() <= 1
        outside = np.ones(cover.flat().size, dtype=bool)
        outside[sc.derive_plan(key, cover.shape, msg.size).positions] = False
        assert np.all(diff[outside] == 0)


def test_wrong_key_extracts_noise():
    rng = np.random.default_rng(6)
    cover = random_cover(rng, (64, 64, 1))
    msg = rng.integers(0, 2, 1638).astype(np.uint8)
    stego = sc.embed(cover, msg, 1)
    agree = [np.mean(sc.extract(stego, k, msg.size) == msg) for k in range(1000, 1100)]
    # each agreement rate ~ Binomial(1638, 0.5)/1638, sd ~ 0.0124
    assert all(abs(a - 0.5) <= 0.05 for a in agree)
    assert abs(np.mean(agree) - 0.5) < 0.01


def test_message_too_long():
    cover = PixelImage(np.zeros((4, 4, 1), dtype=np.uint8))
    with pytest.raises(CapacityError):
        sc.embed(cover, np.zeros(17, dtype=np.uint8), 1)


def test_deterministic_embedding():
    rng = np.random.default_rng(7)
    cover = random_cover(rng)
    msg = rng.integers(0, 2, 300)
    assert sc.embed(cover, msg, 8) == sc.embed(cover, msg, 8)


def test_lsb_replacement_roundtrip():
    rng = np.random.default_rng(8)
    cover = random_cover(rng)
    msg = rng.integers(0, 2, 4915).astype(np.uint8)
    emb = sc.get_embedder("lsb-replacement")
    stego = emb.embed(cover, msg, 3)
    assert np.array_equal(emb.extract(stego, 3, 4915), msg)
    # replacement never moves a pixel across an even/odd pair boundary
    assert np.all(stego.flat() // 2 == cover.flat() // 2)


def test_bytes_bits_roundtrip():
    data = b"hidden text \x00\xff"
    assert sc.bits_to_bytes(sc.bytes_to_bits(data)) == data


def test_stego_batch_modification_rate():
    rng = np.random.default_rng(9)
    covers = [random_cover(rng) for _ in range(100)]
    t = to_tensor(covers, dtype=np.float64)
    s = sc.stego_batch(t, 0.4, "per-image", seed=123)
    q_cover = np.rint((t + 1) * 127.5)
    q_stego = np.rint((s + 1) * 127.5)
    assert np.abs(q_stego - q_cover).max() <= 1
    frac = np.mean(q_stego != q_cover)
    assert abs(frac - 0.2) <= 0.02


def test_stego_batch_seed_dependence():
    rng = np.random.default_rng(10)
    cover = to_tensor([random_cover(rng)] * 2, dtype=np.float64)
    a = sc.stego_batch(cover, 0.4, "per-image", seed=1)
    b = sc.stego_batch(cover, 0.4, "per-image", seed=2)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a[0], a[1])
    assert np.array_equal(a, sc.stego_batch(cover, 0.4, "per-image", seed=1))


def test_fixed_key_policy_shares_key():
    assert len(set(sc.image_keys(5, 10, "fixed"))) == 1
    assert len(set(sc.image_keys(5, 10, "per-image"))) == 10
    with pytest.raises(UsageError):
        sc.image_keys(5, 1, "sometimes")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.sampled_from([1, 3]), st.integers(0, 2**64 - 1),
       st.data())
def test_roundtrip_property(h, w, c, key, data):
    rng = np.random.default_rng(key % 2**32)
    cover = random_cover(rng, (h, w, c))
    n = data.draw(st.integers(0, h * w * c))
    msg = rng.integers(0, 2, n).astype(np.uint8)
    stego = sc.embed(cover, msg, key)
    assert np.array_equal(sc.extract(stego, key, n), msg)
    assert np.abs(stego.flat().astype(int) - cover.flat()).max(initial=0) <= 1
