from dataclasses import replace

import pytest

from securessd.config import (
    ConfigError, RunConfig, config_text, parse_config,
)
from securessd.engine import run_single
from securessd.report import (
    CONSTANTS, SchemaMismatch, config_from_report, parse_report,
    render_report, summarize,
)

SMALL = RunConfig(dataset_mib=2, cipher_payload="modeled")


def test_defaults_match_reference_table():
    cfg = RunConfig()
    assert (cfg.channels, cfg.chips_per_channel, cfg.dies_per_chip) == (8, 4, 4)
    assert (cfg.planes_per_die, cfg.blocks_per_plane, cfg.pages_per_block) == \
        (2, 2048, 512)
    assert cfg.page_size == 4096
    assert (cfg.t_rd_ns, cfg.t_wr_ns) == (50_000, 300_000)
    assert cfg.channel_bw == 600 * 1024 * 1024
    assert cfg.dram_size == 4 * 1024**3
    assert cfg.counter_cache_bytes == 128 * 1024


def test_config_text_roundtrip():
    cfg = replace(RunConfig(), channels=4, workload="tpcb", stripe=(0, 1))
    assert parse_config(config_text(cfg)) == cfg


def test_parse_overrides_defaults():
    cfg = parse_config("[flash]\nchannels = 16\n\n[workload]\nworkload = tpcc\n")
    assert cfg.channels == 16
    assert cfg.workload == "tpcc"
    assert cfg.t_rd_ns == 50_000


def test_unknown_section_and_key_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[flash]\nbogus = 1\n")


def test_field_level_validation_messages():
    with pytest.raises(ConfigError, match="t_wr_ns"):
        parse_config("[flash]\nt_wr_ns = 10\n")
    with pytest.raises(ConfigError, match="mode"):
        parse_config("[workload]\nmode = NOPE\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config("[flash]\nchannels = eight\n")


def test_stripe_parsing():
    cfg = parse_config("[workload]\nstripe = 0,1,2\n")
    assert cfg.stripe == (0, 1, 2)
    with pytest.raises(ConfigError, match="stripe"):
        parse_config("[workload]\nstripe = 99\n")


def test_report_roundtrip_and_constants():
    result = run_single(SMALL)
    text = render_report(result)
    record = parse_report(text)
    assert record["workload"] == SMALL.workload
    assert int(record["total_ns"]) == result.total_ns
    for name, value in CONSTANTS.items():
        assert record[f"constants.{name}"] == value
    # Verbatim constants appear in the text itself.
    for token in ("95", "58", "3.8", "102.6", "151.2"):
        assert token in text


def test_config_echo_reproduces_run():
    result = run_single(SMALL)
    record = parse_report(render_report(result))
    cfg2 = config_from_report(record)
    assert cfg2 == SMALL.validate()
    again = run_single(cfg2)
    assert render_report(again) == render_report(result)


def test_parse_report_rejects_garbage():
    with pytest.raises(SchemaMismatch):
        parse_report("not a report\n")
    with pytest.raises(SchemaMismatch):
        parse_report("schema\t99\n")


def test_summarize_speedups_and_breakdown_columns():
    host = run_single(replace(SMALL, mode="HOST"))
    tee = run_single(replace(SMALL, mode="ISC_TEE"))
    records = [parse_report(render_report(host)),
               parse_report(render_report(tee))]
    table = summarize(records, baseline_mode="HOST")
    header = table.splitlines()[0].split("\t")
    for col in ("load_ns", "compute_ns", "encryption_ns", "verification_ns"):
        assert col in header
    tee_row = [ln for ln in table.splitlines()[1:] if "\tISC_TEE\t" in ln][0]
    speedup = int(tee_row.split("\t")[3])
    assert speedup == host.total_ns * 1000 // tee.total_ns


def test_summarize_requires_overlap():
    a = parse_report(render_report(run_single(replace(SMALL, mode="HOST"))))
    b = parse_report(render_report(run_single(
        replace(SMALL, mode="ISC_TEE", workload="aggregate"))))
    with pytest.raises(SchemaMismatch):
        summarize([a, b], baseline_mode="HOST")
    with pytest.raises(SchemaMismatch):
        summarize([], baseline_mode="HOST")


def test_summarize_normalization_baseline_selectable():
    isc = run_single(replace(SMALL, mode="ISC"))
    tee = run_single(replace(SMALL, mode="ISC_TEE"))
    records = [parse_report(render_report(isc)),
               parse_report(render_report(tee))]
    table = summarize(records, baseline_mode="ISC")
    tee_row = [ln for ln in table.splitlines()[1:] if "\tISC_TEE\t" in ln][0]
    assert int(tee_row.split("\t")[3]) == isc.total_ns * 1000 // tee.total_ns
