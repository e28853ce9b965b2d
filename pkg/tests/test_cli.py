"""End-to-end command tests through the argparse entry point."""

import json

from nsverify.claims import check_theorem2_identities
from nsverify.cli import main
from nsverify.nsf1 import read_field


def write_conf(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


TG_CONF = """
scenario.name = taylor_green
grid.n = 32
fluid.viscosity = 0.1
time.dt = 1e-3
time.t_end = 0.05
time.sample_every = 10
output.prefix = tg
"""

TWO_MODE_CONF = """
scenario.name = two_mode
grid.n = 32
fluid.viscosity = 0.05
time.dt = 2e-3
time.t_end = 0.3
time.sample_every = 25
output.prefix = two_mode
"""


def read_csv_column(path, column):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        idx = header.index(column)
        return [line.strip().split(",")[idx] for line in fh]


def test_run_taylor_green_exit_zero_and_monotone_energy(tmp_path):
    conf = write_conf(tmp_path, "tg.conf", TG_CONF)
    out = str(tmp_path / "out")
    assert main(["run", "--config", conf, "--out", out]) == 0
    energies = [float(e) for e in read_csv_column(f"{out}/tg_diagnostics.csv", "energy")]
    assert all(b < a for a, b in zip(energies, energies[1:]))
    manifest = json.loads((tmp_path / "out" / "tg_manifest.json").read_text())
    assert manifest["command"] == "run"
    assert manifest["samples"] == len(energies)


def test_run_blowup_exits_two_and_records_abort_time(tmp_path):
    conf = write_conf(
        tmp_path,
        "boom.conf",
        """
scenario.name = two_mode
scenario.amplitude = 6.0
grid.n = 32
fluid.viscosity = 1e-4
time.dt = 0.04
time.t_end = 40.0
time.integrator = explicit_euler
output.prefix = boom
""",
    )
    out = str(tmp_path / "out")
    assert main(["run", "--config", conf, "--out", out]) == 2
    manifest = json.loads((tmp_path / "out" / "boom_manifest.json").read_text())
    assert manifest["aborted"]
    assert manifest["abort_time"] > 0.0


def test_bad_config_exits_one(tmp_path):
    conf = write_conf(tmp_path, "bad.conf", TG_CONF + "fluid.color = blue\n")
    assert main(["run", "--config", conf, "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.conf"),
                 "--out", str(tmp_path / "o")]) == 1


def test_verify_shear_torus_all_hold(tmp_path):
    conf = write_conf(
        tmp_path,
        "shear.conf",
        """
scenario.name = shear
grid.n = 32
fluid.viscosity = 0.1
time.dt = 1e-3
time.t_end = 0.05
time.sample_every = 5
output.prefix = shear
""",
    )
    out = str(tmp_path / "out")
    assert main(["verify", "--config", conf, "--out", out]) == 0
    doc = json.loads((tmp_path / "out" / "shear_identities.json").read_text())
    verdicts = {row["identity"]: row["verdict"] for row in doc["identities"]}
    assert verdicts["boundary_compatibility"] == "not_applicable"
    assert verdicts["boundary_tangency"] == "not_applicable"
    assert verdicts["eigenweighted_energy"] == "holds"
    assert verdicts["energy_balance"] == "holds"


def test_verify_injected_inflow_fails_exit_three(tmp_path):
    conf = write_conf(
        tmp_path,
        "inflow.conf",
        """
scenario.name = shear
grid.domain = box
grid.n = 32
fluid.viscosity = 0.1
time.dt = 2e-4
time.t_end = 0.01
boundary.normal_inflow = 0.25
output.prefix = inflow
""",
    )
    out = str(tmp_path / "out")
    assert main(["verify", "--config", conf, "--out", out]) == 3
    doc = json.loads((tmp_path / "out" / "inflow_identities.json").read_text())
    rows = [r for r in doc["identities"] if r["identity"] == "boundary_compatibility"]
    assert rows[0]["verdict"] == "fails"
    # the residual is the injected flux itself
    assert abs(rows[0]["residual"] - 0.25) < 1e-8


def test_verify_parallel_jobs(tmp_path):
    a = write_conf(tmp_path, "a.conf", TG_CONF + "output.dir = " + str(tmp_path / "oa") + "\n")
    b = write_conf(
        tmp_path, "b.conf",
        TG_CONF.replace("output.prefix = tg", "output.prefix = tg2")
        + "output.dir = " + str(tmp_path / "ob") + "\n",
    )
    assert main(["verify", "--config", a, "--config", b, "--jobs", "2"]) == 0
    assert (tmp_path / "oa" / "tg_identities.json").exists()
    assert (tmp_path / "ob" / "tg2_identities.json").exists()


def test_uniqueness_two_mode_outputs(tmp_path):
    conf = write_conf(tmp_path, "tm.conf", TWO_MODE_CONF)
    out = str(tmp_path / "out")
    assert main(["uniqueness", "--config", conf, "--out", out]) == 0
    doc = json.loads((tmp_path / "out" / "two_mode_uniqueness.json").read_text())
    assert doc["series"]["w_norm"][-1] > 0.0
    assert "preamble" in doc
    w_col = read_csv_column(f"{out}/two_mode_uniqueness.csv", "w_norm")
    assert len(w_col) == len(doc["series"]["t"])
    # diagnostics table carries the difference norm for uniqueness runs
    w2 = read_csv_column(f"{out}/two_mode_diagnostics.csv", "w_norm")
    assert len(w2) == len(w_col)


def test_identities_on_stored_pair_matches_in_run_values(tmp_path):
    conf = write_conf(tmp_path, "tm.conf", TWO_MODE_CONF)
    out = str(tmp_path / "out")
    assert main(["uniqueness", "--config", conf, "--out", out]) == 0
    doc = json.loads((tmp_path / "out" / "two_mode_uniqueness.json").read_text())
    k = len(doc["series"]["t"]) - 1
    v = read_field(f"{out}/two_mode_red_vel_{k:06d}.nsf")
    w = read_field(f"{out}/two_mode_w_{k:06d}.nsf")
    reports = check_theorem2_identities(v, w)
    for rep in reports:
        stored = doc["series"]["identity_residuals"][rep.identity_name][k]
        assert abs(rep.residual - stored) < 1e-12
    assert main(["identities", f"{out}/two_mode_red_vel_{k:06d}.nsf",
                 f"{out}/two_mode_w_{k:06d}.nsf"]) == 0


def test_identities_single_snapshot(tmp_path):
    conf = write_conf(tmp_path, "tg.conf", TG_CONF)
    out = str(tmp_path / "out")
    assert main(["run", "--config", conf, "--out", out]) == 0
    assert main(["identities", f"{out}/tg_vel_000000.nsf"]) == 0


def test_identities_corrupt_file_exits_one(tmp_path):
    bad = tmp_path / "bad.nsf"
    bad.write_bytes(b"JUNKJUNKJUNK")
    assert main(["identities", str(bad)]) == 1
    conf = write_conf(tmp_path, "tg.conf", TG_CONF)
    out = str(tmp_path / "out")
    main(["run", "--config", conf, "--out", out])
    truncated = (tmp_path / "out" / "tg_vel_000000.nsf").read_bytes()[:-16]
    bad2 = tmp_path / "bad2.nsf"
    bad2.write_bytes(truncated)
    assert main(["identities", str(bad2)]) == 1


def test_seeded_runs_are_byte_identical(tmp_path):
    conf_text = """
scenario.name = random_solenoidal
scenario.seed = 7
grid.n = 32
fluid.viscosity = 0.05
time.dt = 1e-3
time.t_end = 0.02
time.sample_every = 5
output.prefix = rnd
"""
    conf = write_conf(tmp_path, "rnd.conf", conf_text)
    out1 = str(tmp_path / "o1")
    out2 = str(tmp_path / "o2")
    assert main(["run", "--config", conf, "--out", out1]) == 0
    assert main(["run", "--config", conf, "--out", out2]) == 0
    for name in ("rnd_index.csv", "rnd_diagnostics.csv"):
        b1 = (tmp_path / "o1" / name).read_bytes()
        b2 = (tmp_path / "o2" / name).read_bytes()
        assert b1 == b2


def test_env_var_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("NSVERIFY_OUT", str(tmp_path / "envout"))
    conf = write_conf(tmp_path, "tg.conf", TG_CONF)
    assert main(["run", "--config", conf]) == 0
    assert (tmp_path / "envout" / "tg_manifest.json").exists()
