import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellflow.errors import DimensionError
from cellflow.flow import FlowParams, video_flow
from cellflow.patches import (
    PatchSample,
    PatchSpec,
    SourceVideo,
    augment,
    axis_origins,
    export_dataset,
    extract_patches,
    fill_flow_channels,
    load_frames_dir,
    normalize_per_channel,
    patch_grid,
)
from cellflow.containers import read_manifest, read_patch_file

from oracles import patch_origins_scalar
from test_flow import smooth_texture


def seed_with_flips(want_h, want_v):
    """Smallest seed whose two uniform draws give the requested flips."""
    for seed in range(200):
        rng = np.random.default_rng(seed)
        if (rng.random() < 0.5, rng.random() < 0.5) == (want_h, want_v):
            return seed
    raise AssertionError("no such seed in range")


def make_video(n_frames=10, h=40, w=40, culture="c1"):
    frames = [smooth_texture(h, w, seed=s) for s in range(n_frames)]
    return SourceVideo(frames=tuple(frames), culture_meta={"culture": culture})


def make_sample(k=4, n=16, seed=0):
    rng = np.random.default_rng(seed)
    tensor = np.zeros((k, n, n, 3), dtype=np.float32)
    tensor[:, :, :, 0] = rng.random((k, n, n), dtype=np.float32)
    return PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)


class TestPatchGrid:
    def test_default_enumeration_1400(self):
        # Stride (1 - 0.25) * 128 = 96 with a tail origin snapped to 1272.
        origins = axis_origins(1400, 128, 0.25)
        assert origins == list(range(0, 1249, 96)) + [1272]
        assert len(origins) == 15
        assert len(patch_grid(1400, 1400, PatchSpec())) == 225

    def test_matches_loop_oracle(self):
        for extent, patch, a in [(1400, 128, 0.25), (500, 64, 0.5), (130, 128, 0.25)]:
            assert axis_origins(extent, patch, a) == patch_origins_scalar(extent, patch, a)

    def test_literal_step_matches_loop_oracle(self):
        got = axis_origins(1400, 128, 0.25, literal_step=True)
        assert got == patch_origins_scalar(1400, 128, 0.25, literal_step=True)
        assert got == list(range(0, 1249, 32))

    def test_exact_fit_single_origin(self):
        assert patch_grid(128, 128, PatchSpec()) == [(0, 0)]

    def test_zero_overlap_tiling(self):
        origins = axis_origins(300, 100, 0.0)
        assert origins == [0, 100, 200]

    def test_patch_larger_than_frame(self):
        with pytest.raises(DimensionError):
            patch_grid(100, 100, PatchSpec(patch_size=128))

    @settings(max_examples=50, deadline=None)
    @given(
        extent=st.integers(16, 600),
        patch=st.integers(8, 128),
        a=st.floats(0.0, 0.9),
    )
    def test_grid_bounds_and_coverage(self, extent, patch, a):
        if patch > extent:
            extent = patch + extent
        origins = axis_origins(extent, patch, a)
        assert all(0 <= o <= extent - patch for o in origins)
        assert origins[-1] == extent - patch  # tail snap covers every pixel
        covered = np.zeros(extent, dtype=bool)
        for o in origins:
            covered[o:o + patch] = True
        assert covered.all()


class TestExtractPatches:
    def test_single_origin_crops_frames(self):
        video = make_video(n_frames=10, h=16, w=16)
        spec = PatchSpec(patch_size=16, frame_count=10)
        samples = extract_patches(video, spec)
        assert len(samples) == 1
        s = samples[0]
        assert s.tensor.shape == (10, 16, 16, 3)
        for i in range(10):
            np.testing.assert_array_equal(
                s.tensor[i, :, :, 0], video.frames[i].astype(np.float32)
            )
        assert np.all(s.tensor[:, :, :, 1:] == 0.0)

    def test_frame_stride_selects_arithmetic_sequence(self):
        video = make_video(n_frames=10, h=8, w=8)
        spec = PatchSpec(patch_size=8, frame_count=4, frame_stride=3)
        (sample,) = extract_patches(video, spec, start_frame=0)
        for i, src in enumerate([0, 3, 6, 9]):
            np.testing.assert_array_equal(
                sample.tensor[i, :, :, 0], video.frames[src].astype(np.float32)
            )

    def test_grid_count_and_provenance(self):
        video = make_video(n_frames=3, h=160, w=160)
        spec = PatchSpec(patch_size=128, frame_count=3)
        samples = extract_patches(video, spec)
        assert len(samples) == 4  # origins [0, 32] per axis
        assert {(s.x, s.y) for s in samples} == {(0, 0), (32, 0), (0, 32), (32, 32)}
        assert all(s.culture == "c1" for s in samples)

    def test_insufficient_frames(self):
        video = make_video(n_frames=5, h=8, w=8)
        with pytest.raises(ValueError):
            extract_patches(video, PatchSpec(patch_size=8, frame_count=4, frame_stride=2))

    def test_culture_meta_vocabulary(self):
        frames = (np.zeros((4, 4)),)
        SourceVideo(frames=frames, culture_meta={
            "culture": "3", "culture_density": "Moderate", "cell_maturity": "Very Young",
        })
        with pytest.raises(ValueError):
            SourceVideo(frames=frames, culture_meta={"culture_density": "Crowded"})
        with pytest.raises(ValueError):
            SourceVideo(frames=frames, culture_meta={"cell_maturity": "Elderly"})

    def test_variance_filter_drops_flat_patches(self):
        flat = [np.full((8, 8), 0.5) for _ in range(2)]
        video = SourceVideo(frames=tuple(flat))
        spec = PatchSpec(patch_size=8, frame_count=2)
        assert extract_patches(video, spec, min_variance=1e-4) == []
        assert len(extract_patches(video, spec)) == 1


class TestFillFlowChannels:
    def test_static_patch_zero_flow(self):
        tensor = np.zeros((3, 8, 8, 3), dtype=np.float32)
        tensor[:, :, :, 0] = 0.5
        sample = PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)
        filled = fill_flow_channels(sample)
        assert np.all(filled.tensor[:, :, :, 1:] == 0.0)

    def test_last_frame_zero_padded(self):
        sample = fill_flow_channels(make_sample(k=10, n=12, seed=3))
        assert np.all(sample.tensor[9, :, :, 1:] == 0.0)
        assert np.any(sample.tensor[:9, :, :, 1] != 0.0)

    def test_matches_video_flow(self):
        sample = fill_flow_channels(make_sample(k=5, n=10, seed=4))
        frames = [sample.tensor[i, :, :, 0].astype(np.float64) for i in range(5)]
        fields = video_flow(frames, FlowParams())
        for i, f in enumerate(fields):
            np.testing.assert_array_equal(
                sample.tensor[i, :, :, 1], f.u.astype(np.float32)
            )
            np.testing.assert_array_equal(
                sample.tensor[i, :, :, 2], f.v.astype(np.float32)
            )

    def test_single_frame_rejected(self):
        with pytest.raises(ValueError):
            fill_flow_channels(make_sample(k=1))


class TestNormalize:
    def test_min_max_arithmetic(self):
        tensor = np.zeros((1, 2, 2, 3), dtype=np.float32)
        tensor[0, :, :, 0] = [[2.0, 6.0], [4.0, 2.0]]
        sample = PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)
        out = normalize_per_channel(sample)
        assert out.tensor[0, 1, 0, 0] == pytest.approx(0.5)
        assert out.normalized

    def test_constant_channel_maps_to_zero(self):
        tensor = np.full((2, 4, 4, 3), 7.0, dtype=np.float32)
        sample = PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)
        assert np.all(normalize_per_channel(sample).tensor == 0.0)

    def test_range_property_and_independence(self):
        rng = np.random.default_rng(8)
        tensor = rng.standard_normal((4, 8, 8, 3)).astype(np.float32) * [1, 10, 100]
        sample = PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)
        out = normalize_per_channel(sample)
        for c in range(3):
            assert out.tensor[:, :, :, c].min() == pytest.approx(0.0, abs=1e-7)
            assert out.tensor[:, :, :, c].max() == pytest.approx(1.0, abs=1e-7)

    def test_idempotent(self):
        once = normalize_per_channel(fill_flow_channels(make_sample(k=4, n=8, seed=5)))
        twice = normalize_per_channel(once)
        np.testing.assert_array_equal(once.tensor, twice.tensor)


class TestAugment:
    def test_no_flip_is_identity(self):
        sample = fill_flow_channels(make_sample(k=3, n=8, seed=6))
        out = augment(sample, seed_with_flips(False, False))
        np.testing.assert_array_equal(out.tensor, sample.tensor)
        assert not out.flipped_h and not out.flipped_v

    def test_hflip_on_zero_flow(self):
        tensor = np.zeros((2, 4, 4, 3), dtype=np.float32)
        tensor[:, :, :, 0] = np.arange(16, dtype=np.float32).reshape(4, 4) / 16.0
        sample = PatchSample(tensor=tensor, x=0, y=0, start_frame=0, frame_stride=1)
        out = augment(sample, seed_with_flips(True, False))
        np.testing.assert_array_equal(out.tensor[:, :, :, 0], tensor[:, :, ::-1, 0])
        assert np.all(out.tensor[:, :, :, 1:] == 0.0)
        assert out.flipped_h and not out.flipped_v

    def test_flow_negation_consistency(self):
        # Flipping the video and flipping/negating the flow must agree with
        # recomputing flow from the flipped video (away from borders).
        sample = fill_flow_channels(make_sample(k=3, n=16, seed=9))
        out = augment(sample, seed_with_flips(True, False))
        frames = [out.tensor[i, :, :, 0].astype(np.float64) for i in range(3)]
        refields = video_flow(frames, FlowParams())
        m = 3
        for i, f in enumerate(refields):
            np.testing.assert_allclose(
                out.tensor[i, m:-m, m:-m, 1],
                f.u.astype(np.float32)[m:-m, m:-m],
                atol=1e-6,
            )

    def test_double_flip_restores(self):
        sample = fill_flow_channels(make_sample(k=3, n=8, seed=10))
        seed = seed_with_flips(True, True)
        out = augment(augment(sample, seed), seed)
        np.testing.assert_array_equal(out.tensor, sample.tensor)
        assert not out.flipped_h and not out.flipped_v

    def test_deterministic(self):
        sample = make_sample(k=2, n=8)
        a = augment(sample, 1234)
        b = augment(sample, 1234)
        np.testing.assert_array_equal(a.tensor, b.tensor)


class TestExport:
    def test_empty_dataset(self, tmp_path):
        summary = export_dataset([], tmp_path / "out")
        assert summary["count"] == 0
        assert read_manifest(tmp_path / "out" / "manifest.json") == []
        assert list((tmp_path / "out").glob("*.cvid")) == []

    def test_three_samples(self, tmp_path):
        samples = [make_sample(k=2, n=8, seed=s) for s in range(3)]
        summary = export_dataset(samples, tmp_path / "out")
        assert summary["count"] == 3
        manifest = read_manifest(tmp_path / "out" / "manifest.json")
        assert len(manifest) == 3
        assert sorted(r["file"] for r in manifest) == [
            "patch_00000.cvid", "patch_00001.cvid", "patch_00002.cvid",
        ]

    def test_round_trip_bitwise(self, tmp_path):
        sample = normalize_per_channel(fill_flow_channels(make_sample(k=3, n=8, seed=11)))
        sample.culture = "c7"
        export_dataset([sample], tmp_path)
        tensor, meta = read_patch_file(tmp_path / "patch_00000.cvid")
        np.testing.assert_array_equal(tensor, sample.tensor)
        assert meta == sample.metadata()

    def test_shape_mismatch_rejected(self, tmp_path):
        with pytest.raises(DimensionError):
            export_dataset([make_sample(k=2, n=8), make_sample(k=3, n=8)], tmp_path)


class TestLoadFrames:
    def test_png_round_trip_8bit(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(12)
        raw = (rng.random((12, 10)) * 255).astype(np.uint8)
        Image.fromarray(raw, mode="L").save(tmp_path / "frame_000.png")
        Image.fromarray(raw, mode="L").save(tmp_path / "frame_001.png")
        frames = load_frames_dir(tmp_path)
        assert len(frames) == 2
        np.testing.assert_allclose(frames[0], raw / 255.0)

    def test_png_16bit(self, tmp_path):
        from PIL import Image

        raw = (np.arange(64, dtype=np.uint16).reshape(8, 8)) * 1000
        Image.fromarray(raw).save(tmp_path / "a.png")
        (frame,) = load_frames_dir(tmp_path)
        np.testing.assert_allclose(frame, raw / 65535.0)

    def test_lexicographic_order(self, tmp_path):
        from PIL import Image

        for name, val in [("b.png", 200), ("a.png", 100)]:
            Image.fromarray(np.full((4, 4), val, dtype=np.uint8), mode="L").save(tmp_path / name)
        frames = load_frames_dir(tmp_path)
        assert frames[0][0, 0] == pytest.approx(100 / 255.0)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_frames_dir(tmp_path / "nope")
