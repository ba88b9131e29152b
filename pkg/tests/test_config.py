import json

import pytest

from rotorwave.config import EXPERIMENT_DEFAULTS, ConfigError, config_from_dict, load_config

BLADE = {"kind": "blade", "V0": 100.0, "w": 0.3, "B": 6.0, "s": 0.05}


def blade_doc(**extra):
    doc = {"experiment": "blade", "grid": {"points_per_axis": 256, "box_length": 48.0},
           "physics": {"omega_per_time": 0.2}, "potential": dict(BLADE)}
    doc.update(extra)
    return doc


def test_minimal_config_fills_defaults_and_echoes_them():
    cfg = config_from_dict(blade_doc())
    assert cfg.params == EXPERIMENT_DEFAULTS["blade"]
    echo = cfg.echo()
    assert echo["params"]["time_step"] == 1e-3
    assert echo["physics"] == {"mass": 1.0, "omega_per_time": 0.2}
    assert echo["potential"]["kind"] == "blade"
    # the echo is itself a valid config that resolves to the same thing
    again = config_from_dict(json.loads(json.dumps(echo)))
    assert again.echo() == echo


def test_user_params_override_defaults():
    cfg = config_from_dict(blade_doc(params={"speed": 15.0}))
    assert cfg.params["speed"] == 15.0
    assert cfg.params["impact_parameter"] == 3.0


def test_grid_must_be_power_of_two():
    doc = blade_doc(grid={"points_per_axis": 100, "box_length": 48.0})
    with pytest.raises(ConfigError, match="power of two"):
        config_from_dict(doc)


def test_unknown_fields_are_named():
    with pytest.raises(ConfigError, match="colour"):
        config_from_dict(blade_doc(colour="red"))
    with pytest.raises(ConfigError, match="nonsense"):
        config_from_dict(blade_doc(params={"nonsense": 1}))


def test_sweep_plans_cartesian_product():
    cfg = config_from_dict(blade_doc(sweep={"omega_per_time": [0.1, -0.1, 0.2],
                                            "impact_parameter": [2.0, 3.0, 4.0]}))
    jobs = cfg.plan()
    assert len(jobs) == 9
    assert [j.index for j in jobs] == list(range(9))
    assert {(j.key["impact_parameter"], j.key["omega_per_time"]) for j in jobs} == {
        (b, w) for b in (2.0, 3.0, 4.0) for w in (0.1, -0.1, 0.2)}
    assert all(j.params["impact_parameter"] == j.key["impact_parameter"] for j in jobs)


def test_job_cap():
    sweep = {"impact_parameter": [1.0, 2.0, 3.0], "speed": [10.0, 20.0]}
    with pytest.raises(ConfigError, match="cap"):
        config_from_dict(blade_doc(sweep=sweep, max_jobs=5))
    assert len(config_from_dict(blade_doc(sweep=sweep, max_jobs=6)).plan()) == 6


def test_bad_sweeps():
    with pytest.raises(ConfigError, match="cannot sweep"):
        config_from_dict(blade_doc(sweep={"box_length": [1, 2]}))
    with pytest.raises(ConfigError, match="non-empty"):
        config_from_dict(blade_doc(sweep={"speed": []}))


def test_parse_error_reports_line_and_column(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "experiment": "blade",\n  "grid": {points_per_axis: 64}\n}\n')
    with pytest.raises(ConfigError, match=r"line 3, column 12"):
        load_config(p)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, "7"])
def test_seed_must_be_u64(seed):
    with pytest.raises(ConfigError, match="seed"):
        config_from_dict(blade_doc(seed=seed))


def test_rotation_per_step_limit():
    with pytest.raises(ConfigError, match="exceeds"):
        config_from_dict(blade_doc(physics={"omega_per_time": 10.0}, params={"time_step": 0.01}))


def test_experiment_specific_requirements():
    with pytest.raises(ConfigError, match="kind 'blade'"):
        config_from_dict(blade_doc(potential={"kind": "power_law"}))
    with pytest.raises(ConfigError, match="needs a potential"):
        config_from_dict({"experiment": "wave-operator", "grid": {"points_per_axis": 64, "box_length": 20.0}})
    with pytest.raises(ConfigError, match="needs a grid"):
        config_from_dict({"experiment": "domain-scaling"})
    with pytest.raises(ConfigError, match="one of"):
        config_from_dict({"experiment": "teleport"})
    assert config_from_dict({"experiment": "bench"}).grid is None


def test_bad_frame():
    with pytest.raises(ConfigError, match="frame"):
        config_from_dict(blade_doc(params={"frame": "lab"}))
