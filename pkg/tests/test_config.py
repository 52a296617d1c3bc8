import pytest

from nrpower.config import (
    ConfigError, ScenarioKind, config_from_dict, load_config, parse_config, preset, preset_names,
)
from nrpower.paging import EpiMode
from nrpower.scheduler import PolicyKind
from nrpower.uplink import UplinkModeKind

EXPECTED = {
    "fig7-instant", "fig7-fixed", "fig7-dynamic", "fig7-skipping", "fig8-rrc",
    "fig8-cg-dedicated", "fig8-cg-contended-5ue", "fig8-cg-contended-10ue", "fig8-rach-sdt",
    "fig9-drx-ssb", "fig9-epi-common", "fig9-epi-group", "fig9-epi-group-rs",
}


def test_preset_catalogue():
    assert set(preset_names()) == EXPECTED
    for name in EXPECTED:
        cfg = preset(name)
        cfg.validate()
        assert cfg.scenario == name


def test_preset_details():
    skip = preset("fig7-skipping")
    assert skip.policy.skip_slots == 5 and skip.policy.kind is PolicyKind.INSTANT
    c10 = preset("fig8-cg-contended-10ue")
    assert (c10.ues_per_cell, c10.uplink.preamble_pool) == (10, 4)
    assert c10.uplink.mode is UplinkModeKind.CG and not c10.uplink.dedicated
    rs = preset("fig9-epi-group-rs")
    assert rs.paging.epi_mode is EpiMode.GROUPED and rs.paging.num_groups == 8
    assert rs.paging.idle_rs and rs.kind is ScenarioKind.PAGING


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("fig10")


def test_minimal_file_resolves_preset(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('scenario = "fig7-instant"\n')
    assert load_config(path) == preset("fig7-instant")


def test_overrides_apply_on_top_of_preset():
    cfg = parse_config('scenario = "fig7-fixed"\ncells = 2\n[policy]\nk_min_symbols = 28\n')
    assert cfg.cells == 2 and cfg.policy.k_min_symbols == 28
    assert cfg.policy.kind is PolicyKind.FIXED


@pytest.mark.parametrize("text,msg", [
    ("bogus = 1", "unknown key 'bogus'"),
    ("[link]\nbogus = 1", "unknown key 'link.bogus'"),
    ("[nothing]\na = 1", "unknown key 'nothing'"),
    ("cells = 1\ncells = 2", "parse error"),
    ("[drx]\nkind = \"short\"\ncycle_ms = 1", "short cycle range"),
    ("[policy]\nkind = \"sideways\"", "not one of"),
    ("cells = \"many\"", "expected an integer"),
    ("cells = 0", "cells must be >= 1"),
    ("[rrc]\nresume_from_inactive_ms = 30.0", "resume_from_inactive_ms must be <"),
    ("link = 3", "expected a table"),
    ('scenario = "nope"', "unknown preset"),
])
def test_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_echo_round_trips(name):
    cfg = preset(name)
    again = parse_config(cfg.echo())
    assert again == cfg
    assert again.echo() == cfg.echo()
    assert again.digest() == cfg.digest()


def test_echo_lists_every_section():
    text = preset("fig7-instant").echo()
    for section in ("numerology", "traffic", "link", "policy", "scheduler", "drx", "rrc",
                    "paging", "uplink", "energy"):
        assert f"[{section}]" in text


def test_custom_scenario_needs_no_preset():
    cfg = config_from_dict({"kind": "uplink", "ues_per_cell": 3, "traffic": {"direction": "UL"}})
    assert cfg.scenario == "custom" and cfg.kind is ScenarioKind.UPLINK
