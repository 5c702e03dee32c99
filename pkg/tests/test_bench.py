import csv
import io
import json
import warnings

import pytest

from conftest import NV, SC
from qecbench.bench import (
    COLUMNS,
    ExperimentConfig,
    Sweep,
    SweepResult,
    bundled_config,
    emit,
    load_config,
    run_experiment,
    with_overrides,
)
from qecbench.calibration import uniform_noise_model
from qecbench.codes import CodeSpec, evaluate
from qecbench.errors import ConfigurationError, DeviceFileError
from qecbench.simulator import ExecutionOptions

SMALL = """
devices: [sc-tee-5, nv-center-5]
code: {kind: bit-flip, recovery: post-processing, input_state: "0", error: random}
sweep: {type: depol, values: [0.01, 0.02, 0.05]}
"""


def quiet_run(config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_experiment(config)


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture(scope="module")
def fig7():
    return quiet_run(load_config(bundled_config("fig7")))


# -- configuration --------------------------------------------------------


def test_small_config_parses():
    cfg = load_config(SMALL)
    assert cfg.devices == ("sc-tee-5", NV)
    assert cfg.sweeps == (Sweep("depol", (0.01, 0.02, 0.05)),)
    assert cfg.input_state == "0"


def test_bundled_configs_parse():
    for name in ("fig7", "fig9"):
        cfg = load_config(bundled_config(name))
        assert cfg.devices == (SC, NV)
        assert [s.type for s in cfg.sweeps] == ["t2", "depol"]
    assert load_config(bundled_config("fig9")).sweeps[0].alphas == (0.5, 1.0, 10.0)
    with pytest.raises(ConfigurationError):
        bundled_config("fig42")


@pytest.mark.parametrize("text,field", [
    ("colour: red\n", "colour"),
    ("sweep: {type: t2, values: [0.1, -1]}\n", "sweep.values[1]"),
    ("sweep: {type: t2, alphas: [0]}\n", "sweep.alphas[0]"),
    ("sweep: {type: depol, alphas: [1]}\n", "sweep.alphas"),
    ("sweep: {type: spiral}\n", "sweep.type"),
    ("code: {kind: shor}\n", "code.kind"),
    ("code: {error: Q9}\n", "code.error"),
    ("code: {input_state: up}\n", "code.input_state"),
    ("shots: -3\n", "shots"),
    ("format: xml\n", "format"),
    ("sweeps: [{type: depol, values: []}]\n", "sweeps[0].values"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(DeviceFileError, match=field.replace("[", r"\[").replace("]", r"\]")):
        load_config(text)


def test_config_reports_every_problem():
    with pytest.raises(DeviceFileError) as info:
        load_config("shots: -1\nseed: x\nformat: xml\n")
    text = str(info.value)
    assert "shots" in text and "seed" in text and "format" in text


def test_config_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("devices: [a\nshots: 1\n")
    with pytest.raises(DeviceFileError, match="bad.yaml.*line"):
        load_config(p)
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "missing.yaml")


def test_overrides_skip_none():
    cfg = with_overrides(ExperimentConfig(), shots=10, seed=None)
    assert cfg.shots == 10 and cfg.seed == 0


# -- output ---------------------------------------------------------------


def test_empty_sweep_is_header_only():
    assert emit(SweepResult()) == ",".join(COLUMNS) + "\n"
    assert json.loads(emit(SweepResult(), "json")) == {"columns": list(COLUMNS), "rows": []}


def test_two_platforms_three_values_six_rows(tmp_path):
    result = quiet_run(load_config(SMALL))
    text = emit(result, "csv", tmp_path / "out" / "small.csv")
    rows = rows_of(text)
    assert rows[0] == list(COLUMNS)
    assert len(rows) == 7
    assert (tmp_path / "out" / "small.csv").read_text() == text
    assert [r[3] for r in rows[1:]] == ["sc-tee-5", NV] * 3
    for r in result.rows:
        assert 0.0 <= r.logical_error_rate <= 1.0
        assert 0.0 <= r.p_av <= 1.0
    doc = json.loads(emit(result, "json"))
    assert len(doc["rows"]) == 6 and doc["rows"][0]["sweep_var"] == "p_depol"


def test_unknown_format_and_unwritable_path(tmp_path):
    with pytest.raises(ConfigurationError):
        emit(SweepResult(), "xml")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ConfigurationError, match="file"):
        emit(SweepResult(), "csv", blocker / "x.csv")


def test_reruns_are_byte_identical():
    cfg = with_overrides(load_config(SMALL), shots=500, seed=11)
    a = emit(quiet_run(cfg))
    b = emit(quiet_run(cfg))
    assert a == b
    parallel = emit(quiet_run(with_overrides(cfg, workers=3)))
    assert parallel == a
    other = emit(quiet_run(with_overrides(cfg, seed=12)))
    assert other != a


def test_zero_depolarizing_is_noiseless(backends, devices):
    # values must be positive in a config, so the zero point is checked on the model itself
    for name in (SC, NV):
        be = backends(name, "bit-flip", "post-processing")
        nm = uniform_noise_model(devices[name][0], p_depol=0.0)
        res = evaluate(CodeSpec("bit-flip", "post-processing", "0"), be, ExecutionOptions(noise=nm))
        assert res.logical_error_rate == pytest.approx(0.0, abs=1e-12)


# -- sweeps ---------------------------------------------------------------


def test_fig7_grid_shape(fig7):
    assert len(fig7.rows) == 2 * (6 + 6)
    assert {r.platform for r in fig7.rows} == {SC, NV}


def test_rates_fall_with_t2(fig7):
    for platform in (SC, NV):
        rates = [r.logical_error_rate for r in fig7.select(sweep_var="t2", platform=platform)]
        assert all(b <= a for a, b in zip(rates, rates[1:])), (platform, rates)


def test_rates_rise_with_depolarizing(fig7):
    for platform in (SC, NV):
        rates = [r.logical_error_rate for r in fig7.select(sweep_var="p_depol", platform=platform)]
        assert all(b >= a for a, b in zip(rates, rates[1:])), (platform, rates)


def test_bit_flip_depol_sweep_favours_sc(fig7):
    sc = fig7.select(sweep_var="p_depol", platform=SC)
    nv = fig7.select(sweep_var="p_depol", platform=NV)
    assert all(a.logical_error_rate < b.logical_error_rate for a, b in zip(sc, nv))


@pytest.mark.xfail(strict=True, reason="per-gate damping with equal gate times leaves SC 1-5% above NV; see ledger")
def test_bit_flip_t2_sweep_favours_sc(fig7):
    sc = fig7.select(sweep_var="t2", platform=SC)
    nv = fig7.select(sweep_var="t2", platform=NV)
    assert all(a.logical_error_rate < b.logical_error_rate for a, b in zip(sc, nv))


def test_transpiled_counts_are_fixed_per_platform(fig7):
    for platform in (SC, NV):
        rows = fig7.select(platform=platform)
        assert len({(r.cnot_count, r.total_ops) for r in rows}) == 1
