import json

import pytest

from twinsync import cli
from twinsync.emit import load_bundle
from twinsync.metrics import state_consistency_index
from twinsync.model import descriptor_from_json, descriptor_to_json

from conftest import FIXTURES


@pytest.fixture
def descriptor_file(tmp_path, descriptor):
    path = tmp_path / "descriptor.json"
    path.write_bytes(descriptor_to_json(descriptor))
    return path


class TestIngestCommand:
    def test_happy_path(self, tmp_path, capsys):
        out = tmp_path / "descriptor.json"
        code = cli.main(["ingest", "--phys-config", str(FIXTURES / "mme.cfg"), "--out", str(out)])
        assert code == 0
        descriptor = descriptor_from_json(out.read_bytes())
        assert descriptor.window_seconds == 120.0
        assert [s.dnn for s in descriptor.slices] == ["internet", "mec"]

    def test_malformed_config_exits_2_with_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text('ue_count: 2\napn: "oops')
        code = cli.main(["ingest", "--phys-config", str(bad), "--out", str(tmp_path / "d.json")])
        assert code == 2
        err = capsys.readouterr().err
        assert "line 2" in err

    def test_missing_input_exits_2(self, tmp_path):
        code = cli.main(["ingest", "--phys-config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "d.json")])
        assert code == 2

    def test_overlapping_subnets_exit_3(self, tmp_path):
        bad = tmp_path / "overlap.cfg"
        bad.write_text(
            "ue_count: 1, access_point_list: ["
            '{ apn: "a", ip: 10.45.0.1, cidr: 10.45.0.0/16, tun_bw: 1000 },'
            '{ apn: "b", ip: 10.45.0.2, cidr: 10.45.0.0/16, tun_bw: 1000 }]'
        )
        code = cli.main(["ingest", "--phys-config", str(bad), "--out", str(tmp_path / "d.json")])
        assert code == 3


class TestEmitCommand:
    def test_emits_four_files_with_full_consistency(self, tmp_path, descriptor_file, descriptor):
        out_dir = tmp_path / "deploy"
        code = cli.main(["emit", "--descriptor", str(descriptor_file), "--out-dir", str(out_dir)])
        assert code == 0
        for name in ("smf.yaml", "nssf.yaml", "amf.yaml", "topology.json"):
            assert (out_dir / name).exists()
        assert state_consistency_index(descriptor, load_bundle(out_dir)) == 1.0

    def test_missing_descriptor_exits_2(self, tmp_path):
        code = cli.main(["emit", "--descriptor", str(tmp_path / "none.json"), "--out-dir", str(tmp_path)])
        assert code == 2

    def test_descriptor_missing_field_exits_2(self, tmp_path, descriptor):
        doc = json.loads(descriptor_to_json(descriptor))
        del doc["slices"]
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(doc))
        code = cli.main(["emit", "--descriptor", str(path), "--out-dir", str(tmp_path / "out")])
        assert code == 2

    def test_unwritable_out_dir_exits_4(self, tmp_path, descriptor_file, capsys):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file where a directory should go")
        code = cli.main(["emit", "--descriptor", str(descriptor_file), "--out-dir", str(blocker)])
        assert code == 4
        assert "blocked" in capsys.readouterr().err


class TestRunCommand:
    def run_args(self, descriptor_file, tmp_path, **extra):
        args = [
            "run",
            "--descriptor", str(descriptor_file),
            "--scenario", "browse",
            "--duration", "20",
            "--report", str(tmp_path / "report.json"),
            "--out-dir", str(tmp_path),
        ]
        for key, value in extra.items():
            args += [f"--{key.replace('_', '-')}", str(value)]
        return args

    def test_run_writes_report_and_series(self, tmp_path, descriptor_file):
        code = cli.main(self.run_args(descriptor_file, tmp_path))
        assert code == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["metrics"]["twin_alignment_ratio"] == 1.0
        assert doc["metrics"]["pearson_r"] >= 0.999
        assert doc["metrics"]["rmse_bps"] == 0.0
        assert (tmp_path / "npt_throughput.csv").exists()
        assert (tmp_path / "ndt_throughput.csv").exists()
        assert (tmp_path / "sync_log.csv").exists()

    def test_window_override_controls_segmentation(self, tmp_path, descriptor_file):
        code = cli.main(self.run_args(descriptor_file, tmp_path, window_seconds=5))
        assert code == 0
        lines = (tmp_path / "sync_log.csv").read_text().strip().split("\n")
        assert len(lines) - 1 == 4  # 20 s at T = 5 s

    def test_env_seed_override(self, tmp_path, descriptor_file, monkeypatch):
        monkeypatch.setenv("TWINSYNC_SEED", "77")
        code = cli.main(self.run_args(descriptor_file, tmp_path, seed=5))
        assert code == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["config"]["seed"] == 77

    def test_bad_env_seed_exits_2(self, tmp_path, descriptor_file, monkeypatch):
        monkeypatch.setenv("TWINSYNC_SEED", "not-a-number")
        assert cli.main(self.run_args(descriptor_file, tmp_path)) == 2

    def test_virtual_mode_with_wall_channel_exits_5(self, tmp_path, descriptor_file, capsys):
        args = self.run_args(descriptor_file, tmp_path, channel="directory-exchange",
                             exchange_dir=tmp_path / "xchg")
        code = cli.main(args)
        assert code == 5
        assert "transport" in capsys.readouterr().err

    def test_voice_needs_two_ues(self, tmp_path, descriptor):
        from dataclasses import replace

        lone = replace(descriptor, ue_count=1)
        path = tmp_path / "lone.json"
        path.write_bytes(descriptor_to_json(lone))
        args = [
            "run", "--descriptor", str(path), "--scenario", "voice",
            "--duration", "5", "--report", str(tmp_path / "r.json"),
        ]
        assert cli.main(args) == 3

    def test_unknown_scenario_is_an_argparse_error(self, tmp_path, descriptor_file):
        with pytest.raises(SystemExit) as err:
            cli.main(self.run_args(descriptor_file, tmp_path, scenario="gaming"))
        assert err.value.code == 2

    def test_deterministic_reports_for_equal_configs(self, tmp_path, descriptor_file):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for out in (a_dir, b_dir):
            args = [
                "run", "--descriptor", str(descriptor_file), "--scenario", "browse",
                "--duration", "20", "--seed", "13",
                "--report", str(out / "report.json"), "--out-dir", str(out),
            ]
            assert cli.main(args) == 0
        assert (a_dir / "report.json").read_bytes() == (b_dir / "report.json").read_bytes()
