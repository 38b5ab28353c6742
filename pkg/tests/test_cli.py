import json
import math

import numpy as np
import pytest

from conftest import data_path
from sacebounds import cli
from sacebounds.bayes import simulate_counts
from sacebounds.bounds import observable_from_truth, true_sace
from sacebounds.cli import InputError, dump_input, load_input, main, parse_input_file, parse_rho_grid
from sacebounds.model import CountData, GroundTruth, InconsistencyError, LargeSampleInput, ValidationError

VIOLATED = str(data_path("monotonicity_violated.json"))
BIASED = str(data_path("two_point_biased.json"))
ROUNDED = str(data_path("monotonicity_violated_rounded.json"))


def _write(tmp_path, obj, name="in.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rounded_example_parses_with_listed_risk():
    x = parse_input_file(ROUNDED)
    assert isinstance(x, LargeSampleInput)
    assert x.risks.treated[0] == pytest.approx(0.146 / 0.20)


def test_ground_truth_files_parse(truth_violated):
    assert isinstance(truth_violated, GroundTruth)
    assert truth_violated.coupling.param == 7.76
    assert true_sace(truth_violated) == pytest.approx(0.2228, abs=1e-4)


@pytest.mark.parametrize("maker", ["large_sample", "counts", "ground_truth"])
def test_round_trip(truth_violated, maker):
    if maker == "large_sample":
        x = observable_from_truth(truth_violated)
    elif maker == "counts":
        x = simulate_counts(truth_violated, 250, seed=1, missing_rate=0.2)
    else:
        x = truth_violated
    y = load_input(json.loads(json.dumps(dump_input(x))))
    assert type(y) is type(x)
    if isinstance(x, LargeSampleInput):
        np.testing.assert_allclose(y.marginals.treated, x.marginals.treated, atol=1e-15)
        np.testing.assert_allclose(y.risks.control, x.risks.control, atol=1e-15)
    elif isinstance(x, CountData):
        for d in (0, 1):
            for f in ("deaths", "n_bad", "n_good", "n_missing"):
                np.testing.assert_array_equal(getattr(y.arm(d), f), getattr(x.arm(d), f))
    else:
        np.testing.assert_allclose(y.joint, x.joint, atol=1e-15)
        np.testing.assert_array_equal(np.isnan(y.q_control), np.isnan(x.q_control))


def _counts_doc(bad=3):
    return {"mode": "counts", "schedule": {"times": [0, 1, 2], "measurement_index": 1},
            "counts": {"treated": {"deaths": [4], "survivors": [{"t": 1, "n_bad": bad, "n_good": 5},
                                                              {"t": 2, "n_bad": 1, "n_good": 9}]},
                       "control": {"deaths": [6], "survivors": [{"t": 1, "n_bad": 2, "n_good": 2, "n_missing": 1},
                                                              {"t": 2, "n_bad": 3, "n_good": 8}]}}}


def test_negative_count_is_validation_error(tmp_path, capsys):
    path = _write(tmp_path, _counts_doc(bad=-1))
    with pytest.raises(ValidationError, match="nonnegative"):
        parse_input_file(path)
    code, _, err = _run(capsys, "zr", "--input", path)
    assert code == 2 and "counts.treated.n_bad" in err


def test_schema_errors_name_the_field(tmp_path):
    doc = _counts_doc()
    doc["counts"]["treated"]["survivors"][0]["n_god"] = 1
    with pytest.raises(InputError, match="counts.treated.survivors.0"):
        parse_input_file(_write(tmp_path, doc))


def test_malformed_json_reports_line(tmp_path):
    with pytest.raises(InputError, match="line 3"):
        parse_input_file(_write(tmp_path, '{\n "mode": "counts",\n "schedule": ]\n}'))


def test_dual_specification_must_agree(tmp_path):
    doc = json.loads(data_path("monotonicity_violated_rounded.json").read_text())
    doc["risks"] = {"treated": [0.73, 0.652, 0.526666666666666667], "control": [0.52333333333333333, 0.4533333333333333, 0.336]}
    load_input(doc)
    doc["risks"]["treated"][0] = 0.7300001
    with pytest.raises(InconsistencyError, match="disagrees"):
        load_input(doc)


def test_copula_truth_requires_marginals(tmp_path):
    doc = json.loads(data_path("two_point_biased.json").read_text())
    del doc["marginals"]
    with pytest.raises(InputError, match="marginals"):
        load_input(doc)


def test_rho_grid_parsing():
    assert parse_rho_grid("0:0.9:0.1") == pytest.approx([i / 10 for i in range(10)])
    assert len(parse_rho_grid("0:0.9:0.1")) == 10
    assert parse_rho_grid("0.6, 0.2,0.2") == [0.2, 0.6]
    assert parse_rho_grid("0:0.9:0.1,0.99,0.999,0.9999")[-3:] == [0.99, 0.999, 0.9999]
    for bad in ("1.0", "-0.1", "0:1:0", "0:0.5", ""):
        with pytest.raises(ValueError):
            parse_rho_grid(bad)


def test_large_sample_output(capsys):
    code, out, _ = _run(capsys, "large-sample", "--input", VIOLATED, "--rho", "0:0.9:0.1")
    assert code == 0
    lines = out.split("\n")
    assert lines[0] == "rho,log_phi,lower,upper,rel_length"
    assert len(lines) == 1 + 10 + 1 + 1 and lines[-1] == ""
    first = lines[1].split(",")
    assert first[0] == "0.000000" and abs(float(first[2]) - 0.118) <= 0.001
    assert lines[11].startswith("ENVELOPE,,")
    assert all(len(c.split(".")[1]) == 6 for c in first)


def test_gaussian_column_label(capsys):
    code, out, _ = _run(capsys, "large-sample", "--input", VIOLATED, "--rho", "0.2", "--copula", "gaussian")
    assert code == 0 and out.startswith("rho,r,lower")


def test_zr_output(capsys):
    code, out, _ = _run(capsys, "zr", "--input", BIASED)
    assert code == 0
    lo, hi, _w = map(float, out.splitlines()[1].split(","))
    assert abs(lo + 0.485) <= 0.001 and abs(hi - 0.685) <= 0.001


def test_contrast_output(capsys):
    code, out, _ = _run(capsys, "contrast", "--input", BIASED)
    assert code == 0 and out.splitlines()[1] == "0.199744,true"


def test_truth_check_output(capsys):
    code, out, _ = _run(capsys, "truth-check", "--input", VIOLATED)
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert code == 0 and rows["contains_truth"] == "true"
    assert rows["true_sace"] == "0.222827"


def test_truth_check_needs_truth(capsys):
    code, _, err = _run(capsys, "truth-check", "--input", ROUNDED)
    assert code == 2 and "ground_truth" in err


def test_incompatible_exit_code(tmp_path, capsys):
    doc = {"mode": "large_sample", "schedule": {"times": [0, 1, 2], "measurement_index": 1},
           "marginals": {"treated": [.2, .4, .4], "control": [.2, .4, .4]},
           "risks": {"treated": [0, 1], "control": [0, 1]}}
    code, _, err = _run(capsys, "large-sample", "--input", _write(tmp_path, doc), "--rho", "0,0.5")
    assert code == 3 and "incompatible" in err


def test_budget_exit_code(tmp_path, capsys, truth_violated):
    from sacebounds.copula import CopulaSpec, joint_pmf
    T = truth_violated.schedule.T
    q1 = np.full((5, 5), np.nan)
    q0 = np.full((5, 5), np.nan)
    q1[T:, :] = np.array([0.05, 0.5, 0.95])[:, None]
    q0[:, T:] = np.array([0.05, 0.5, 0.95])[None, :]
    p = truth_violated.joint
    counts = simulate_counts(GroundTruth(truth_violated.schedule, p, q1, q0), 100_000, seed=2)
    path = _write(tmp_path, dump_input(counts))
    code, out, err = _run(capsys, "bayes", "--input", path, "--rho", "0.99", "--draws", "100",
                          "--budget", "300", "-q")
    assert code == 4 and "budget" in err
    assert out.splitlines()[1].split(",")[2] == "NA"


def test_bayes_requires_counts(capsys):
    code, _, _ = _run(capsys, "bayes", "--input", VIOLATED, "--draws", "100")
    assert code == 2


def test_bayes_is_byte_deterministic(tmp_path, capsys, truth_violated):
    path = _write(tmp_path, dump_input(simulate_counts(truth_violated, 300, seed=9)))
    args = ["bayes", "--input", path, "--rho", "0.6", "--draws", "100", "--seed", "3", "-q"]
    outs = []
    for k, extra in enumerate(([], ["--workers", "2"])):
        target = str(tmp_path / f"out{k}.csv")
        assert main(args + extra + ["--out", target]) == 0
        outs.append((tmp_path / f"out{k}.csv").read_bytes())
    assert outs[0] == outs[1] and b"\r" not in outs[0]
    header = outs[0].decode().splitlines()[0]
    assert header == "rho,log_phi,lower,upper,rel_length,ci_lower,ci_upper,ci_rel_length,acceptance_rate"
    assert outs[0].decode().splitlines()[-1].startswith("ZR,,")


def test_pretty_format(capsys):
    code, out, _ = _run(capsys, "large-sample", "--input", VIOLATED, "--rho", "0.6", "--format", "pretty")
    lines = out.splitlines()
    assert code == 0 and set(lines[1]) <= {"-", " "}
    assert len({len(l) for l in lines[:3]}) == 1


def test_missing_file(capsys):
    code, _, err = _run(capsys, "zr", "--input", "/nonexistent/file.json")
    assert code == 2 and "error" in err


def test_bad_grid_flag(capsys):
    code, _, err = _run(capsys, "large-sample", "--input", VIOLATED, "--rho", "0.5:0.1:-1")
    assert code == 2
