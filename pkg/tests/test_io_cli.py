import json

import numpy as np
import pytest

from lsscftp.cli import main
from lsscftp.io import (
    FORMAT_VERSION,
    format_replay_line,
    instance_from_dict,
    instance_to_dict,
    load_estimate,
    load_instance,
    load_replay,
    parse_replay_line,
    save_instance,
    save_replay,
)
from lsscftp.model import (
    InstanceError,
    LssOracle,
    LssSample,
    make_bimodal_path_instance,
    make_random_instance,
    validate_instance,
)
from lsscftp.verify import chi_square_gof


def test_instance_round_trip(tmp_path):
    target, comp = make_random_instance(5, 3, 2.0, seed=1)
    path = tmp_path / "i.json"
    save_instance(path, target, comp, 2.0)
    t2, c2, phi = load_instance(path)
    assert np.allclose(t2.probs, target.probs, rtol=0, atol=1e-15)
    assert c2.sets() == comp.sets()
    assert phi == 2.0
    assert json.loads(path.read_text())["format_version"] == FORMAT_VERSION


def test_instance_errors(tmp_path):
    good = instance_to_dict(*make_bimodal_path_instance(3))
    bad = dict(good, target=[1, 2])
    with pytest.raises(InstanceError):
        instance_from_dict(bad)
    with pytest.raises(InstanceError):
        instance_from_dict({"n": 3})
    p = tmp_path / "x.json"
    p.write_text("[1, 2]")
    with pytest.raises(InstanceError):
        load_instance(p)


def test_replay_lines(tmp_path):
    assert parse_replay_line("0,1,1") == LssSample((0, 1), 1)
    assert parse_replay_line("2;0;1,0") == LssSample((2, 0, 1), 0)
    assert parse_replay_line("# comment") is None
    assert parse_replay_line("") is None
    with pytest.raises(InstanceError):
        parse_replay_line("0,1,2")
    with pytest.raises(InstanceError):
        parse_replay_line("a,b,c")
    samples = [LssSample((0, 1), 0), LssSample((1, 2, 3), 3)]
    assert [format_replay_line(s) for s in samples] == ["0,1,0", "1;2;3,3"]
    path = tmp_path / "r.txt"
    save_replay(path, samples)
    assert load_replay(path) == samples


def run(args, tmp_path, name):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, out


def test_gen_bimodal(tmp_path):
    code, out = run(["gen", "--family", "bimodal_path", "--n", "7"], tmp_path, "g.json")
    assert code == 0
    d = json.loads(out.read_text())
    w = np.array([1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 8, 1 / 4, 1 / 2])
    assert np.allclose(d["target"], w / w.sum())
    assert d["config"]["seed"] is not None and d["valid"]


def test_gen_clique_and_random(tmp_path):
    code, out = run(["gen", "--family", "clique", "--n", "3"], tmp_path, "c.json")
    assert code == 0
    assert [s["prob"] for s in json.loads(out.read_text())["sets"]] == pytest.approx([1 / 3] * 3)
    code, out = run(["gen", "--family", "random", "--n", "5", "--phi", "2", "--seed", "1"], tmp_path, "r.json")
    target, comp, phi = load_instance(out)
    assert validate_instance(target, comp, phi).valid
    code2, out2 = run(["gen", "--family", "random", "--n", "5", "--phi", "2", "--seed", "1"], tmp_path, "r2.json")
    assert out.read_bytes() == out2.read_bytes()


def test_gen_bad_parameters(tmp_path):
    assert main(["gen", "--family", "bimodal_path", "--n", "4"]) == 2
    assert main(["gen", "--family", "nope", "--n", "4"]) == 2


def test_malformed_instance_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["sample", "--instance", str(bad)]) == 2
    assert "not valid JSON" in capsys.readouterr().err
    assert main(["sample", "--instance", str(tmp_path / "missing.json")]) == 2


def test_single_state_stream(tmp_path):
    inst = tmp_path / "one.json"
    inst.write_text(json.dumps({"n": 1, "target": [1], "sets": []}))
    code, out = run(["sample", "--instance", str(inst), "--num-samples", "4"], tmp_path, "s.txt")
    assert code == 0
    assert out.read_text() == "0\n0\n0\n0\n"


def test_sample_learn_pipeline(tmp_path):
    code, inst = run(["gen", "--family", "bimodal_path", "--n", "7"], tmp_path, "bimodal.json")
    code, est = run(["learn", "--instance", str(inst), "--seed", "3"], tmp_path, "est.json")
    assert code == 0
    doc = json.loads(est.read_text())
    assert doc["format_version"] == FORMAT_VERSION
    assert doc["config"]["seed"] == 3 and doc["config"]["epsilon"] is None
    assert load_estimate(est).n == 7
    code, out = run(["sample", "--instance", str(inst), "--estimate", str(est), "--num-samples", "3000",
                     "--seed", "4"], tmp_path, "s.txt")
    assert code == 0
    states = [int(x) for x in out.read_text().split()]
    target, _, _ = load_instance(inst)
    assert chi_square_gof(np.bincount(states, minlength=7), target.probs).passed
    summary = json.loads((tmp_path / "s.txt.summary.json").read_text())
    assert summary["engine"] == "param" and summary["produced"] == 3000
    assert summary["oracle_samples"] > 0 and summary["mean_loops"] >= 1


def test_learn_population_mode(tmp_path):
    code, inst = run(["gen", "--family", "path", "--n", "4"], tmp_path, "p.json")
    code, out = run(["learn", "--instance", str(inst), "--population-mode"], tmp_path, "e.json")
    doc = json.loads(out.read_text())
    assert max(doc["result"]["relative_error"]) < 1e-6
    assert np.allclose(doc["result"]["estimate"], 0.25)


def test_learn_from_replay(tmp_path):
    target, comp = make_bimodal_path_instance(5)
    inst = tmp_path / "i.json"
    save_instance(inst, target, comp, 2.0)
    replay = tmp_path / "r.txt"
    save_replay(replay, LssOracle.simulated(target, comp, 0).draw_samples(20_000))
    code, out = run(["learn", "--instance", str(inst), "--replay", str(replay)], tmp_path, "e.json")
    assert code == 0
    est = load_estimate(out)
    assert np.allclose(est.probs, target.probs, rtol=0.15)


def test_sample_budget_overrun_exit_3(tmp_path):
    code, inst = run(["gen", "--family", "bimodal_path", "--n", "9"], tmp_path, "b.json")
    code, out = run(["sample", "--instance", str(inst), "--engine", "naive", "--budget", "3",
                     "--num-samples", "2"], tmp_path, "s.txt")
    assert code == 3
    assert out.read_text() == "budget_exceeded\nbudget_exceeded\n"


def test_replay_exhaustion_keeps_partial_output(tmp_path):
    target, comp = make_bimodal_path_instance(3)
    inst = tmp_path / "i.json"
    save_instance(inst, target, comp)
    replay = tmp_path / "r.txt"
    replay.write_text("0,1,1\n1,2,1\n0,1,0\n")
    code, out = run(["sample", "--instance", str(inst), "--replay", str(replay), "--engine", "naive",
                     "--num-samples", "5"], tmp_path, "s.txt")
    assert code == 3
    assert out.read_text() == "1\n"
    summary = json.loads((tmp_path / "s.txt.summary.json").read_text())
    assert summary["oracle_exhausted"] and summary["produced"] == 1


def test_bench_outputs(tmp_path):
    code, out = run(["bench", "--sizes", "3,5", "--trials", "10", "--table"], tmp_path, "b.json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert set(doc["result"]["ratios"]) == {"3", "5"}
    assert (tmp_path / "b.json.tsv").read_text().startswith("n\tengine")
    assert main(["bench", "--sizes", "4", "--trials", "10"]) == 2
    assert main(["bench", "--trials", "3"]) == 2


def test_verify_subset_and_unknown(tmp_path):
    code, out = run(["verify", "--only", "stationary", "gap_ordering"], tmp_path, "v.json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert [r["name"] for r in doc["results"]] == ["stationary", "gap_ordering"]
    assert main(["verify", "--only", "nope"]) == 2


@pytest.mark.parametrize("args", [
    ["gen", "--family", "random", "--n", "6", "--k", "3"],
    ["bench", "--sizes", "3,5", "--trials", "10"],
])
def test_byte_identical_reruns(tmp_path, args):
    _, a = run(args, tmp_path, "a")
    _, b = run(args, tmp_path, "b")
    assert a.read_bytes() == b.read_bytes()
