"""Project files, the entry grammar, and the command-line interface."""

import json

import numpy as np
import pytest

from simcompose.cli import (
    ProjectError,
    build_abstractions,
    build_input_signal,
    load_project,
    main,
    parse_entry,
    parse_matrix,
    parse_project,
    resolve_initial_states,
    resolve_injection,
    serialize_project,
)
from simcompose.demo import demo_project

PARAMS = {"d1": 0.5, "d2": 0.25}


def write_project(tmp_path, doc, name="project.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def solo_project(inputs=None):
    return {
        "subsystems": [
            {
                "name": "solo",
                "A": [[-1.0]],
                "B": [[1.0]],
                "C": [[1.0]],
                "abstraction": {"P": "identity"},
            }
        ],
        "simulation": {"t_final": 1.0, "dt": 1e-3, "inputs": inputs or {}},
    }


def test_parse_entry_numbers_and_parameters():
    assert parse_entry(2, PARAMS, "t") == 2.0
    assert parse_entry(-0.5, PARAMS, "t") == -0.5
    assert parse_entry("d1", PARAMS, "t") == 0.5
    assert parse_entry("-d2", PARAMS, "t") == -0.25
    assert parse_entry("2d2", PARAMS, "t") == 0.5
    assert parse_entry("2*d2", PARAMS, "t") == 0.5
    assert parse_entry("+.5d1", PARAMS, "t") == 0.25
    assert parse_entry(" d1 ", PARAMS, "t") == 0.5


def test_parse_entry_rejects_garbage():
    with pytest.raises(ProjectError, match="boolean"):
        parse_entry(True, PARAMS, "t")
    with pytest.raises(ProjectError, match="unknown parameter"):
        parse_entry("d9", PARAMS, "t")
    with pytest.raises(ProjectError, match="cannot parse"):
        parse_entry("d1+d2", PARAMS, "t")
    with pytest.raises(ProjectError, match="cannot parse"):
        parse_entry("1e-3d1", PARAMS, "t")
    with pytest.raises(ProjectError, match="unsupported type"):
        parse_entry(None, PARAMS, "t")


def test_parse_matrix():
    rows = parse_matrix([[1, "d1"], ["-2d2", 0]], PARAMS, "M")
    assert rows == [[1.0, 0.5], [-0.5, 0.0]]
    with pytest.raises(ProjectError, match="array of array rows"):
        parse_matrix([1, 2], PARAMS, "M")
    with pytest.raises(ProjectError, match=r"M\[0\]\[1\]"):
        parse_matrix([[1, "bogus entry"]], PARAMS, "M")


def test_parse_project_demo_document():
    project = parse_project(demo_project())
    ic = project.interconnection
    assert ic.names == ["s1", "s2", "s3", "s4"]
    assert ic["s1"].D[2, 0] == 0.5
    assert np.array_equal(ic["s2"].D, [[-0.5], [1.0]])
    assert ic["s2"].B.shape == (2, 0)
    assert project.directives["s2"].certificate[2] == 2.0
    assert project.simulation.t_final == 20.0
    assert project.simulation.x0 == "matched"


def test_parse_project_errors():
    with pytest.raises(ProjectError, match="JSON object"):
        parse_project([1, 2])
    with pytest.raises(ProjectError, match="must be a number"):
        parse_project({"parameters": {"d1": True}, "subsystems": [{}]})
    with pytest.raises(ProjectError, match="nonempty subsystems"):
        parse_project({"subsystems": []})
    with pytest.raises(ProjectError, match="needs a name"):
        parse_project({"subsystems": [{"A": [[1]]}]})

    doc = solo_project()
    doc["subsystems"][0]["abstraction"] = {"P": "smallest"}
    with pytest.raises(ProjectError, match="unknown P directive"):
        parse_project(doc)

    doc = solo_project()
    doc["subsystems"][0]["abstraction"] = {"certificate": {"M": [[1]]}}
    with pytest.raises(ProjectError, match="certificate needs"):
        parse_project(doc)

    doc = solo_project()
    doc["subsystems"][0]["abstraction"] = {
        "certificate": {"M": [[1]], "K1": [[0]], "lambda": True}
    }
    with pytest.raises(ProjectError, match="lambda must be a number"):
        parse_project(doc)

    doc = solo_project()
    doc["simulation"]["t_final"] = -1.0
    with pytest.raises(ProjectError, match="positive"):
        parse_project(doc)

    doc = solo_project()
    doc["simulation"]["x0"] = "somewhere"
    with pytest.raises(ProjectError, match="matched"):
        parse_project(doc)

    doc = solo_project(inputs={"solo": {"kind": "triangle"}})
    with pytest.raises(ProjectError, match="kind"):
        parse_project(doc)

    doc = solo_project()
    doc["subsystems"][0]["inputs"] = [{"from": "ghost"}]
    with pytest.raises(ProjectError, match="'from' and 'width'"):
        parse_project(doc)


def test_parse_project_shape_errors_name_the_subsystem():
    doc = solo_project()
    doc["subsystems"][0]["A"] = [[1.0, 0.0]]
    with pytest.raises(ProjectError, match="subsystem solo"):
        parse_project(doc)


def test_parse_project_wiring_errors_propagate():
    doc = solo_project()
    doc["subsystems"][0]["inputs"] = [{"from": "ghost", "width": 1}]
    doc["subsystems"][0]["D"] = [[1.0]]
    with pytest.raises(ValueError, match="unknown subsystem") as exc_info:
        parse_project(doc)
    assert not isinstance(exc_info.value, ProjectError)


def test_load_project(tmp_path):
    path = write_project(tmp_path, demo_project())
    project = load_project(path)
    assert project.interconnection.names == ["s1", "s2", "s3", "s4"]
    with pytest.raises(ProjectError, match="cannot read"):
        load_project(tmp_path / "missing.json")
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json }")
    with pytest.raises(ProjectError, match=r"broken\.json:1:"):
        load_project(bad)


def test_serialize_roundtrip_is_exact():
    first = parse_project(demo_project())
    second = parse_project(serialize_project(first))
    for name in first.interconnection.names:
        a, b = first.interconnection[name], second.interconnection[name]
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.B, b.B)
        assert np.array_equal(a.C_ext, b.C_ext)
        assert np.array_equal(a.D, b.D)
        assert sorted(a.C_int) == sorted(b.C_int)
        for peer in a.C_int:
            assert np.array_equal(a.C_int[peer], b.C_int[peer])
        assert a.channels_in == b.channels_in
        da, db = first.directives[name], second.directives[name]
        assert np.array_equal(da.p, db.p)
        assert np.array_equal(da.certificate[0], db.certificate[0])
        assert da.certificate[2] == db.certificate[2]
    assert second.simulation.t_final == first.simulation.t_final
    assert second.simulation.inputs == first.simulation.inputs


def test_resolve_injection_directives():
    project = parse_project(demo_project())
    ic = project.interconnection

    identity = resolve_injection(ic["s1"], type(project.directives["s1"])())
    assert np.array_equal(identity, np.eye(3))

    from simcompose.cli import Directive

    # the integrator chain is reachable from its inputs, so the minimal
    # invariant subspace is everything
    p = resolve_injection(ic["s1"], Directive(p="minimal-invariant"))
    assert p.shape == (3, 3)
    assert np.linalg.matrix_rank(p) == 3

    # the damped node is driven only along an eigenvector
    p = resolve_injection(ic["s2"], Directive(p="minimal-invariant"))
    assert p.shape == (2, 1)
    direction = p[:, 0] / p[0, 0]
    assert np.allclose(direction, [1.0, -2.0])


def test_build_input_signal_kinds():
    doc = solo_project(inputs={
        "solo": {
            "kind": "samples",
            "times": [0.0, 0.5],
            "values": [[0.2], [0.4]],
        }
    })
    project = parse_project(doc)
    results = build_abstractions(project)
    sig = build_input_signal(project, results, 1.0)
    assert np.allclose(sig.value(0.25), [0.2])
    assert np.allclose(sig.value(0.75), [0.4])

    doc = solo_project(inputs={"solo": {"kind": "constant", "value": [0.3]}})
    project = parse_project(doc)
    sig = build_input_signal(project, build_abstractions(project), 1.0)
    assert np.allclose(sig.value(10.0), [0.3])

    doc = solo_project(inputs={"solo": {"kind": "constant", "value": [0.3, 0.1]}})
    project = parse_project(doc)
    with pytest.raises(ProjectError, match="width"):
        build_input_signal(project, build_abstractions(project), 1.0)


def test_resolve_initial_states():
    project = parse_project(demo_project())
    results = build_abstractions(project)
    xhat0, x0 = resolve_initial_states(project, results)
    assert np.allclose(xhat0, [0.6, -0.4, 0.5, 0.3])
    expected = np.concatenate([
        [0.6, 0.0, 0.0], [-0.4, 0.8], [0.5, 0.0, 0.0], [0.3, -0.6],
    ])
    assert np.allclose(x0, expected)

    project.simulation.xhat0 = np.zeros(3)
    with pytest.raises(ProjectError, match="xhat0 has length"):
        resolve_initial_states(project, results)

    project.simulation.xhat0 = np.zeros(4)
    project.simulation.x0 = np.zeros(9)
    with pytest.raises(ProjectError, match="x0 has length"):
        resolve_initial_states(project, results)


def test_cli_check_demo(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    assert main(["check", path]) == 0
    out = capsys.readouterr().out
    assert "4 subsystems, wiring ok" in out
    assert "s1: stabilizable yes" in out
    assert "check: pass" in out


def test_cli_check_rejects_bad_injection(tmp_path, capsys):
    doc = demo_project()
    doc["subsystems"][1]["abstraction"]["P"] = [[0.0], [1.0]]
    path = write_project(tmp_path, doc)
    assert main(["check", path]) == 1
    out = capsys.readouterr().out
    assert "check: FAIL" in out


def test_cli_malformed_file(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{]")
    assert main(["check", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_compose_demo(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    assert main(["compose", path]) == 0
    out = capsys.readouterr().out
    assert "spectral radius of Gamma Lambda^-1: 0.475976" in out
    assert "eta (dominant vector):" in out
    assert "(strict)" in out
    assert "composed lambda:" in out


def test_cli_compose_published_overrides(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    assert main(["compose", path, "--eta", "0.4,0.6,0.5,0.6", "--eps", "4"]) == 0
    out = capsys.readouterr().out
    assert "eta (override): [0.4, 0.6, 0.5, 0.6]" in out
    assert "NOT strict" in out
    assert "composed lambda: 0.8" in out
    assert "rho/lambda: 5.89256" in out


def test_cli_compose_strong_coupling_fails(tmp_path, capsys):
    doc = demo_project()
    doc["parameters"] = {"d1": 1.1, "d2": 1.1, "d3": 1.1}
    path = write_project(tmp_path, doc)
    assert main(["compose", path]) == 1
    assert "small-gain test failed" in capsys.readouterr().err


def test_cli_compose_bad_eta_count(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    assert main(["compose", path, "--eta", "1,2"]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_abstract_exports(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    out_dir = tmp_path / "matrices"
    assert main(["abstract", path, "--out", str(out_dir)]) == 0
    for label in ("Ahat", "Bhat", "Chat", "Dhat", "P", "Phat",
                  "M", "K1", "K2", "K3", "K4", "gains"):
        for name in ("s1", "s2", "s3", "s4"):
            assert (out_dir / f"{name}_{label}.csv").exists()
    summary = (out_dir / "summary.txt").read_text()
    assert "s2: nhat 1, Ahat [-2]" in summary
    assert "rho 1.41421" in summary
    assert "K4 norm 1.47541" in summary
    ahat = np.loadtxt(out_dir / "s2_Ahat.csv", delimiter=",").reshape(-1)
    assert ahat[0] == pytest.approx(-2.0, abs=1e-12)


def test_cli_simulate_writes_outputs(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    out_csv = tmp_path / "run.csv"
    assert main(["simulate", path, "--out", str(out_csv), "--tfinal", "2.0"]) == 0
    out = capsys.readouterr().out
    assert out_csv.exists()
    assert (tmp_path / "run.gp").exists()
    assert "trajectory written to" in out
    assert "scalar bound" in out
    assert "conservative external gain" in out


def test_cli_bounds(tmp_path, capsys):
    path = write_project(tmp_path, demo_project())
    assert main(["bounds", path, "--tfinal", "2.0", "--v0", "0.85"]) == 0
    out = capsys.readouterr().out
    assert "scalar bound" in out
    assert "margin" in out


def test_cli_reproduce_example(capsys):
    assert main(["reproduce-example"]) == 0
    first = capsys.readouterr().out
    assert "PASS (flagged)" in first
    assert "0.19" in first
    assert "0.475976" in first
    assert "is not reproduced" in first
    assert "overrides" in first
    assert "FAIL" not in first.replace("PASS (flagged)", "")
    assert main(["reproduce-example"]) == 0
    second = capsys.readouterr().out
    assert first == second
