import numpy as np
import pytest

from chromafix import (
    ChannelId,
    DegenerateNeighbourhoodError,
    InsufficientMatchesError,
    Keypoint,
    RgbImage,
    SearchConfig,
    l_at,
    match_all,
    search_match,
)


def brute_force_match(image, kp, cfg, reference=ChannelId.GREEN):
    """Independent exhaustive scan written directly against l_at."""
    best = None
    rng_d = range(-cfg.radius_px, cfg.radius_px + 1)
    for d1y in rng_d:
        for d1x in rng_d:
            for d2y in rng_d:
                for d2x in rng_d:
                    v = l_at(image, kp.x, kp.y, cfg.window_radius,
                             (d1x, d1y), (d2x, d2y), reference)
                    if v is None:
                        continue
                    key = (v, d1x**2 + d1y**2 + d2x**2 + d2y**2, d1x, d1y, d2x, d2y)
                    if best is None or key < best:
                        best = key
    if best is None:
        return None
    return (best[2], best[3]), (best[4], best[5]), best[0]


def kp_at(image, x, y, radius=3, reference=ChannelId.GREEN):
    pre = l_at(image, x, y, radius, (0, 0), (0, 0), reference)
    return Keypoint(x=x, y=y, grad=1.0, pre_l=pre)


def shifted_image(base_red, s_first, s_second):
    """Moving channels are integer translations of the reference content."""
    green = base_red
    red = np.roll(base_red, shift=(s_first[1], s_first[0]), axis=(0, 1))
    blue = np.roll(base_red, shift=(s_second[1], s_second[0]), axis=(0, 1))
    return RgbImage.from_channels(red, green, blue)


class TestSearchMatch:
    def test_recovers_pure_integer_translation(self, rng):
        # noise base: windows have full 3D colour structure, so the true
        # shift is the unique exactly-collinear disparity
        base = rng.uniform(size=(64, 64))
        s1, s2 = (2, -1), (-1, 2)
        img = shifted_image(base, s1, s2)
        cfg = SearchConfig(radius_px=3, window_radius=4)
        kp = kp_at(img, 30, 30, 4)
        m = search_match(img, kp, cfg, ChannelId.GREEN)
        assert m.d_first == s1
        assert m.d_second == s2

    def test_aligned_image_zero_disparity_by_tiebreak(self, small_texture):
        cfg = SearchConfig(radius_px=2, window_radius=4)
        kp = kp_at(small_texture, 25, 25, 4)
        m = search_match(small_texture, kp, cfg, ChannelId.GREEN)
        assert m.d_first == (0, 0)
        assert m.d_second == (0, 0)

    def test_exact_tie_broken_by_norm_then_lex(self):
        # unit check of the selection chain with crafted exact ties
        from chromafix.disparity import _best_index

        d1 = np.array([[2, 0], [0, 1], [1, 0], [-1, 0], [0, 0]])
        d2 = np.array([[0, 0], [0, 0], [0, 0], [0, 0], [3, 3]])
        defined = np.ones(5, dtype=bool)

        # strictly smaller metric wins regardless of norm
        l = np.array([0.5, 0.5, 0.5, 0.5, 0.2])
        assert _best_index(l, defined, d1, d2) == 4
        # exact metric tie: smallest combined squared norm, then lexicographic
        # (d1x, d1y, d2x, d2y); rows 1..3 share norm 1 and (-1, 0) sorts first
        l = np.array([0.5, 0.5, 0.5, 0.5, 0.5])
        assert _best_index(l, defined, d1, d2) == 3
        # with that row undefined the lex order falls to (0, 1)
        defined = np.array([True, True, True, False, True])
        assert _best_index(l, defined, d1, d2) == 1

    def test_joint_matches_brute_force_oracle(self, rng):
        cfg = SearchConfig(radius_px=2, window_radius=3)
        hits = 0
        while hits < 50:
            img = RgbImage(rng.uniform(size=(3, 32, 32)))
            x = int(rng.integers(6, 26))
            y = int(rng.integers(6, 26))
            kp = kp_at(img, x, y)
            expected = brute_force_match(img, kp, cfg)
            got = search_match(img, kp, cfg, ChannelId.GREEN)
            assert expected is not None
            assert (got.d_first, got.d_second) == (expected[0], expected[1])
            assert got.post_l == expected[2]
            hits += 1

    def test_post_l_not_above_zero_disparity_l(self, small_texture):
        cfg = SearchConfig(radius_px=2, window_radius=4)
        for x, y in [(20, 20), (30, 40), (40, 25)]:
            kp = kp_at(small_texture, x, y, 4)
            m = search_match(small_texture, kp, cfg, ChannelId.GREEN)
            zero = l_at(small_texture, x, y, 4, (0, 0), (0, 0), ChannelId.GREEN)
            if zero is not None:
                assert m.post_l <= zero + 1e-12

    def test_sequential_never_beats_joint(self, rng):
        for _ in range(10):
            img = RgbImage(rng.uniform(size=(3, 32, 32)))
            kp = kp_at(img, 16, 16)
            joint = search_match(img, kp, SearchConfig(2, 3, joint=True), ChannelId.GREEN)
            seq = search_match(img, kp, SearchConfig(2, 3, joint=False), ChannelId.GREEN)
            assert seq.post_l >= joint.post_l - 1e-12

    def test_mirror_symmetry(self, rng):
        base = rng.uniform(size=(64, 64))
        img = shifted_image(base, (2, 1), (-1, -2))
        mirrored = RgbImage(img.channels[:, :, ::-1])
        cfg = SearchConfig(radius_px=3, window_radius=4)
        w = img.width
        x, y = 30, 30
        m = search_match(img, kp_at(img, x, y, 4), cfg, ChannelId.GREEN)
        mm = search_match(mirrored, kp_at(mirrored, w - 1 - x, y, 4), cfg, ChannelId.GREEN)
        assert mm.d_first == (-m.d_first[0], m.d_first[1])
        assert mm.d_second == (-m.d_second[0], m.d_second[1])

    def test_degenerate_neighbourhood(self):
        img = RgbImage(np.full((3, 32, 32), 0.5))
        cfg = SearchConfig(radius_px=2, window_radius=3)
        kp = Keypoint(x=16, y=16, grad=0.0, pre_l=None)
        with pytest.raises(DegenerateNeighbourhoodError):
            search_match(img, kp, cfg, ChannelId.GREEN)


class TestMatchAll:
    def test_empty_list(self, small_texture):
        assert match_all(small_texture, [], SearchConfig(2, 3)) == []

    def test_singleton(self, small_texture):
        kp = kp_at(small_texture, 25, 25)
        cfg = SearchConfig(2, 3)
        out = match_all(small_texture, [kp], cfg)
        assert len(out) == 1
        assert out[0] == search_match(small_texture, kp, cfg)

    def test_parallel_matches_serial(self, small_texture):
        cfg = SearchConfig(2, 3)
        kps = [kp_at(small_texture, x, y) for x, y in
               [(15, 15), (25, 30), (40, 20), (30, 45), (45, 45)]]
        serial = match_all(small_texture, kps, cfg, workers=None)
        threaded = match_all(small_texture, kps, cfg, workers=4)
        assert serial == threaded

    def test_all_degenerate_raises(self):
        img = RgbImage(np.full((3, 32, 32), 0.5))
        kps = [Keypoint(x=16, y=16, grad=0.0, pre_l=None)]
        with pytest.raises(InsufficientMatchesError):
            match_all(img, kps, SearchConfig(2, 3))

    def test_degenerate_keypoints_dropped(self, small_texture):
        chans = small_texture.channels.copy()
        chans[:, 5:25, 5:25] = 0.5  # flatten one corner
        img = RgbImage(chans)
        good = kp_at(img, 40, 40)
        flat = Keypoint(x=14, y=14, grad=0.0, pre_l=None)
        out = match_all(img, [flat, good], SearchConfig(2, 3))
        assert [m.keypoint for m in out] == [good]


class TestSearchConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(radius_px=0)
        with pytest.raises(ValueError):
            SearchConfig(window_radius=1)

    def test_match_json_keys(self, small_texture):
        m = search_match(small_texture, kp_at(small_texture, 25, 25), SearchConfig(2, 3))
        d = m.to_json_dict()
        assert set(d) == {"x", "y", "dgx", "dgy", "dbx", "dby", "pre_l", "post_l"}
