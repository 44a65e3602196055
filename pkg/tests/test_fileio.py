"""Instance parsing, deterministic reports, hashing, and replay logs."""

from __future__ import annotations

import json

import numpy as np
import pytest

from termlq import (
    IoError,
    ParseError,
    ReplayLog,
    SimulatedPlant,
    TransitionSample,
    ValidationError,
    default_gaussian_spec,
    sample_stage_data,
)
from termlq.fileio import (
    dumps_report,
    instance_hash,
    load_instance,
    load_instance_file,
    read_replay_log,
    read_report,
    write_report,
    write_replay_log,
)

from golden import FIXTURE_HASH, example_instance


class TestLoadInstance:
    def test_fixture_matches_builtin_example(self, fixture_file):
        doc = load_instance_file(fixture_file)
        inst = doc.instance
        ref = example_instance()
        assert (inst.n, inst.m, inst.N) == (2, 1, 2)
        for k in range(3):
            np.testing.assert_array_equal(inst.A[k], ref.A[k])
            np.testing.assert_array_equal(inst.B[k], ref.B[k])
        np.testing.assert_array_equal(inst.x0, ref.x0)
        np.testing.assert_array_equal(inst.xi, ref.xi)
        assert doc.learn is not None
        assert doc.learn.l == 30
        assert doc.learn.seed == 7
        assert doc.learn.mean == 0.0
        assert doc.learn.covariance_scale == 1.0

    def test_load_instance_drops_learn_block(self, fixture_file):
        inst = load_instance(fixture_file)
        np.testing.assert_array_equal(inst.xi, [6.0, 7.0])

    def test_short_matrix_list_names_key(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["A"] = doc["A"][:2]
        p = tmp_path / "short.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match=r"key 'A': expected length 3, found 2"):
            load_instance_file(p)

    def test_bad_matrix_shape_names_index(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["B"][1] = [[2, 0], [1, 0]]
        p = tmp_path / "wide.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match=r"key 'B\[1\]'"):
            load_instance_file(p)

    def test_missing_key_reported(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        del doc["x0"]
        p = tmp_path / "nox0.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match=r"key 'x0' is missing"):
            load_instance_file(p)

    def test_empty_file_is_a_parse_error(self, tmp_path):
        p = tmp_path / "empty.json"
        p.write_text("")
        with pytest.raises(ParseError, match="document root"):
            load_instance_file(p)

    def test_non_object_root_rejected(self, tmp_path):
        p = tmp_path / "list.json"
        p.write_text("[1, 2, 3]")
        with pytest.raises(ParseError, match="expected an object"):
            load_instance_file(p)

    def test_missing_file_is_a_parse_error(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            load_instance_file(tmp_path / "absent.json")

    def test_unknown_learn_key_rejected(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["learn"]["episodes"] = 10
        p = tmp_path / "extra.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match=r"unknown entries \['episodes'\]"):
            load_instance_file(p)

    def test_nonpositive_covariance_scale_rejected(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["learn"]["covariance_scale"] = 0.0
        p = tmp_path / "zerocov.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="covariance_scale"):
            load_instance_file(p)

    def test_invalid_instance_is_a_validation_error(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["R"] = [[0]]
        p = tmp_path / "singular.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="R_pd"):
            load_instance_file(p)

    def test_bool_dimension_rejected(self, fixture_file, tmp_path):
        doc = json.loads(fixture_file.read_text())
        doc["N"] = True
        p = tmp_path / "boolN.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match=r"key 'N': expected an integer"):
            load_instance_file(p)


class TestReports:
    def test_round_trip_preserves_values(self, tmp_path):
        report = {
            "name": "solve",
            "count": 3,
            "ok": True,
            "none": None,
            "lam": [-7.2802313354363903, -6.646109358569916],
            "nested": {"P": [[1.5, 0.25], [0.25, 2.0]]},
        }
        p = tmp_path / "r.json"
        write_report(report, p)
        back = read_report(p)
        assert back["name"] == "solve"
        assert back["count"] == 3
        assert back["ok"] is True
        assert back["none"] is None
        np.testing.assert_array_equal(back["lam"], report["lam"])
        np.testing.assert_array_equal(back["nested"]["P"], report["nested"]["P"])

    def test_identical_reports_are_byte_identical(self, tmp_path):
        report = {"a": 1 / 3, "b": [np.float64(0.1), 2], "c": {"d": -0.0}}
        p1 = tmp_path / "one.json"
        p2 = tmp_path / "two.json"
        write_report(report, p1)
        write_report(report, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_floats_rendered_at_full_precision(self):
        text = dumps_report({"v": 1 / 3})
        assert "0.33333333333333331" in text
        assert float(json.loads(text)["v"]) == 1 / 3

    def test_numpy_scalars_serialize_like_python(self):
        assert dumps_report({"v": np.float64(2.5)}) == dumps_report({"v": 2.5})
        assert dumps_report({"v": np.int64(4)}) == dumps_report({"v": 4})

    def test_non_finite_value_refused(self):
        with pytest.raises(IoError, match="non-finite"):
            dumps_report({"v": float("inf")})

    def test_unserializable_type_refused(self):
        with pytest.raises(IoError, match="cannot serialize"):
            dumps_report({"v": {1, 2}})


class TestInstanceHash:
    def test_fixture_hash_is_stable(self, example):
        assert instance_hash(example) == FIXTURE_HASH

    def test_hash_tracks_content(self, example):
        moved = example_instance()
        object.__setattr__(moved, "xi", np.array([6.0, 7.0 + 1e-12]))
        assert instance_hash(moved) != instance_hash(example)


class TestReplayLogFile:
    def _samples(self, example):
        dist = default_gaussian_spec(example.n, example.m)
        return sample_stage_data(SimulatedPlant(example), 2, 15, dist, seed=11).samples

    def test_round_trip_is_exact(self, example, tmp_path):
        samples = self._samples(example)
        p = tmp_path / "log.txt"
        write_replay_log(samples, p)
        log = read_replay_log(p, example.n, example.m)
        assert len(log.samples) == len(samples)
        for got, want in zip(log.samples, samples):
            assert got.k == want.k
            np.testing.assert_array_equal(got.x, want.x)
            np.testing.assert_array_equal(got.u, want.u)
            np.testing.assert_array_equal(got.lam, want.lam)
            np.testing.assert_array_equal(got.x_next, want.x_next)

    def test_round_tripped_log_answers_queries(self, example, tmp_path):
        samples = self._samples(example)
        p = tmp_path / "log.txt"
        write_replay_log(samples, p)
        log = read_replay_log(p, example.n, example.m)
        s = samples[3]
        np.testing.assert_array_equal(log.step(s.k, s.x, s.u), s.x_next)

    def test_wrong_width_line_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("2 1 2 3 1 2 3 4\n2 1 2 3\n")
        with pytest.raises(ParseError, match="line 2: expected 8 fields, found 4"):
            read_replay_log(p, 2, 1)

    def test_non_numeric_field_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("2 1 2 3 1 2 3 x\n")
        with pytest.raises(ParseError, match="line 1"):
            read_replay_log(p, 2, 1)

    def test_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "gaps.txt"
        p.write_text("\n0 1 2 3 1 2 3 4\n\n")
        log = read_replay_log(p, 2, 1)
        assert len(log.samples) == 1
        assert log.samples[0].k == 0

    def test_write_refuses_unwritable_path(self, tmp_path):
        sample = TransitionSample(
            k=0,
            x=np.zeros(2),
            u=np.zeros(1),
            lam=np.zeros(2),
            x_next=np.zeros(2))
        with pytest.raises(IoError, match="cannot write"):
            write_replay_log([sample], tmp_path / "no" / "dir" / "log.txt")

    def test_replay_log_type_round_trips(self, tmp_path):
        samples = [
            TransitionSample(
                k=1,
                x=np.array([0.5, -1.5]),
                u=np.array([2.25]),
                lam=np.array([0.0, 1.0]),
                x_next=np.array([1.0 / 3.0, -7.0]))
        ]
        p = tmp_path / "one.txt"
        write_replay_log(samples, p)
        log = read_replay_log(p, 2, 1)
        assert isinstance(log, ReplayLog)
        np.testing.assert_array_equal(log.samples[0].x_next, samples[0].x_next)
