import numpy as np
import pytest

from poissonctl import ConfigError, load_atoms, load_field, load_mesh
from poissonctl.cli import PRESETS, _load_config, apply_overrides, main, parse_config

GOOD = """\
# demo config
domain.kind = disk
domain.radius = 1.0
domain.h = 0.2

cost.kind = linear
cost.coefficient = x2-y2

constraint.kind = box_mass
constraint.lower = 0
constraint.upper = 1
constraint.mass = 1.25
"""


def test_parse_round_trip():
    cfg = parse_config(GOOD)
    assert cfg.get("domain.kind") == "disk"
    assert cfg.get("domain.h") == 0.2
    assert cfg.get("constraint.mass") == 1.25
    # Defaults fill untouched keys.
    assert cfg.get("optimizer.step_rule") == "armijo"
    assert cfg.get("optimizer.max_iters") == 500


def test_parse_collects_all_problems():
    bad = "domain.kind = disk\nwhat.ever = 1\ndomain.h = banana\nnoequals\n"
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    text = "\n".join(err.value.problems)
    assert "line 2: unknown key 'what.ever'" in text
    assert "domain.h: expected float, got 'banana'" in text
    assert "line 4" in text
    assert len(err.value.problems) == 3


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("# leading\n\ndomain.h = 0.1  # trailing\n")
    assert cfg.get("domain.h") == 0.1


def test_overrides():
    cfg = parse_config(GOOD)
    apply_overrides(cfg, ["domain.h=0.1", "optimizer.tol = 1e-9"])
    assert cfg.get("domain.h") == 0.1
    assert cfg.get("optimizer.tol") == 1e-9
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["nonsense"])


def test_all_presets_parse():
    class Args:
        config = None
        override = []

    for name in PRESETS:
        Args.config = name
        cfg = _load_config(Args)
        assert cfg.get("domain.kind") is not None
        assert cfg.get("domain.h") is not None


def test_unknown_preset_exit_code(tmp_path, capsys):
    code = main(["optimize", "--config", "nosuchpreset", "--out", str(tmp_path)])
    assert code == 4
    assert "neither a file nor a preset" in capsys.readouterr().err


def test_missing_required_keys(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("domain.kind = disk\ndomain.radius = 1.0\n")
    code = main(["mesh", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 4
    assert "domain.h is required" in capsys.readouterr().err


def test_box_mass_bound_checked_analytically(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(
        GOOD.replace("constraint.mass = 1.25", "constraint.mass = 9.9")
    )
    code = main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 4
    err = capsys.readouterr().err
    assert "constraint.mass" in err and "9.9" in err


def test_mesh_artifact_reparses(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD)
    out = tmp_path / "out"
    code = main(["mesh", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert code == 0
    mesh = load_mesh(out / "mesh.txt")
    assert mesh.n_vertices > 0


def test_optimize_artifacts_and_determinism(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["optimize", "--config", str(cfg), "--out", str(out1), "--quiet"]) == 0
    assert main(["optimize", "--config", str(cfg), "--out", str(out2), "--quiet"]) == 0

    mesh = load_mesh(out1 / "mesh.txt")
    density = load_field(mesh, out1 / "control_density.txt")
    state = load_field(mesh, out1 / "state.txt")
    wfield = load_field(mesh, out1 / "adjoint.txt")
    assert np.all(np.isfinite(density.values))
    assert np.all(state.values[mesh.boundary] == 0.0)
    assert np.all(np.isfinite(wfield.values))

    hist = (out1 / "history.csv").read_text()
    assert hist.splitlines()[0] == "n,cost,fw_gap,lambda,step"
    level = (out1 / "levelset.csv").read_text()
    assert level.splitlines()[0] == "x1,y1,x2,y2"

    for name in ("history.csv", "kkt.txt", "control_density.txt", "levelset.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_optimize_max_iters_exit_code(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD + "optimizer.max_iters = 1\noptimizer.tol = 1e-30\n")
    code = main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 2


def test_solve_from_density_and_atoms(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD)
    out = tmp_path / "run"
    assert main(["optimize", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0

    solved = tmp_path / "solved"
    code = main(
        [
            "solve", "--config", str(cfg),
            "--mesh", str(out / "mesh.txt"),
            "--density", str(out / "control_density.txt"),
            "--out", str(solved), "--quiet",
        ]
    )
    assert code == 0
    mesh = load_mesh(out / "mesh.txt")
    state = load_field(mesh, solved / "state.txt")
    original = load_field(mesh, out / "state.txt")
    assert np.allclose(state.values, original.values, atol=1e-12)

    atoms = tmp_path / "atoms.txt"
    atoms.write_text("1\n2.0 0.1 0.2\n")
    solved2 = tmp_path / "solved2"
    code = main(
        [
            "solve", "--config", str(cfg),
            "--mesh", str(out / "mesh.txt"),
            "--atoms", str(atoms),
            "--out", str(solved2), "--quiet",
        ]
    )
    assert code == 0
    assert load_atoms(atoms) == [(2.0, (0.1, 0.2))]


def test_kkt_subcommand_report(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD)
    out = tmp_path / "run"
    assert main(["optimize", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    audit = tmp_path / "audit"
    code = main(
        [
            "kkt", "--config", str(cfg),
            "--mesh", str(out / "mesh.txt"),
            "--density", str(out / "control_density.txt"),
            "--out", str(audit), "--quiet",
        ]
    )
    assert code == 0
    text = (audit / "kkt.txt").read_text()
    entries = dict(
        ln.split("=", 1) for ln in text.strip().splitlines() if "=" in ln
    )
    assert float(entries["fw_gap"]) <= 1e-10
    assert float(entries["lambda"]) >= 0.0


def test_analyze_levels_and_format(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(
        "domain.kind = annulus\n"
        "domain.inner_radius = 1.0\n"
        "domain.outer_radius = 2.0\n"
        "domain.h = 0.25\n"
        "analysis.q = 1 2\n"
        "analysis.refinements = 1\n"
        "analysis.source = const:1\n"
    )
    out = tmp_path / "out"
    code = main(["analyze", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert code == 0
    lines = (out / "analysis.txt").read_text().strip().splitlines()
    # refinements = 1 means two levels, each with two q values.
    assert len(lines) == 4
    assert lines[0].startswith("level=0 h=0.25 q=1 ")
    assert all("excluded_area=" in ln for ln in lines)
    h_values = {ln.split()[1] for ln in lines}
    assert h_values == {"h=0.25", "h=0.125"}


def test_override_flag_reaches_run(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(GOOD)
    out = tmp_path / "o"
    code = main(
        [
            "optimize", "--config", str(cfg), "--out", str(out),
            "--override", "optimizer.max_iters=1",
            "--override", "optimizer.tol=1e-30",
            "--quiet",
        ]
    )
    assert code == 2
