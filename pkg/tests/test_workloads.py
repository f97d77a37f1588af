import pytest

from dashpipe.analysis import AnalysisConfig, analyze_video
from dashpipe.errors import ConfigError
from dashpipe.model import VideoKind, manifest_from_json
from dashpipe.workloads import WorkloadSpec, generate_catalog


class TestGeneration:
    def test_pair_and_file_counts(self, tmp_path):
        written = generate_catalog(WorkloadSpec(pairs=4, seed=1), out_dir=tmp_path)
        assert len(written) == 8
        names = sorted(p.name for p in tmp_path.glob("*.json"))
        assert "out_0003.json" in names and "in_0003.json" in names

    def test_two_second_granularity_frame_count(self, tmp_path):
        generate_catalog(
            WorkloadSpec(pairs=1, duration_ms=2000, fps=30, seed=2), out_dir=tmp_path
        )
        manifest = manifest_from_json((tmp_path / "out_0000.json").read_bytes())
        assert len(manifest.frames) == 60
        assert manifest.duration_ms == 2000

    def test_same_seed_is_byte_identical(self, tmp_path):
        spec = WorkloadSpec(pairs=2, seed=9)
        first = tmp_path / "a"
        second = tmp_path / "b"
        generate_catalog(spec, out_dir=first)
        generate_catalog(spec, out_dir=second)
        for path in sorted(first.glob("*.json")):
            assert path.read_bytes() == (second / path.name).read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        generate_catalog(WorkloadSpec(pairs=1, seed=1), out_dir=tmp_path / "a")
        generate_catalog(WorkloadSpec(pairs=1, seed=2), out_dir=tmp_path / "b")
        assert (tmp_path / "a" / "out_0000.json").read_bytes() != (
            tmp_path / "b" / "out_0000.json"
        ).read_bytes()

    def test_manifests_are_valid_and_kinded(self, tmp_path):
        generate_catalog(WorkloadSpec(pairs=1, seed=3), out_dir=tmp_path)
        outer = manifest_from_json((tmp_path / "out_0000.json").read_bytes())
        inner = manifest_from_json((tmp_path / "in_0000.json").read_bytes())
        assert outer.kind is VideoKind.OUTER
        assert inner.kind is VideoKind.INNER
        assert all(f.detections is not None for f in outer.frames)
        assert all(f.keypoints is not None for f in inner.frames)

    def test_injection_rates_surface_in_classification(self, tmp_path):
        generate_catalog(
            WorkloadSpec(pairs=2, seed=4, hazard_rate=0.9, distraction_rate=0.9),
            out_dir=tmp_path,
        )
        outer = manifest_from_json((tmp_path / "out_0000.json").read_bytes())
        inner = manifest_from_json((tmp_path / "in_0000.json").read_bytes())
        outer_result, _ = analyze_video(outer, AnalysisConfig())
        inner_result, _ = analyze_video(inner, AnalysisConfig())
        assert any(d.danger for entry in outer_result.body for d in entry.detections)
        assert any(entry.distracted for entry in inner_result.body)

    def test_bad_spec_rejected(self):
        with pytest.raises(ConfigError):
            WorkloadSpec(pairs=0)
        with pytest.raises(ConfigError):
            WorkloadSpec(pairs=1, hazard_rate=1.5)
        with pytest.raises(ConfigError):
            WorkloadSpec.from_dict({"pairs": 1, "bogus": True})
