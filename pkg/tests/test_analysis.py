import json
import math

import numpy as np
import pytest
from conftest import layered_ansatz as layered

from circuitdream.analysis import (
    cohort_metrics,
    export_report,
    expressibility,
    haar_bin_probabilities,
    kl_from_fidelities,
    sample_fidelities,
    trace_metrics,
)
from circuitdream.circuit import Circuit, parse_circuit_string
from circuitdream.dreaming import DreamEpoch, DreamTrace


def make_trace(energies, accepted=None):
    accepted = accepted or [True] * len(energies)
    return DreamTrace([DreamEpoch(i, "", 0.0, 0.0, e, a) for i, (e, a) in enumerate(zip(energies, accepted))])


def test_trace_metrics_arithmetic():
    m = trace_metrics(make_trace([-2.0, -5.0, -4.0]))
    assert (m.initial_energy, m.final_energy, m.minimum_energy) == (-2.0, -4.0, -5.0)
    assert m.energy_displacement == -2.0


def test_rejected_proposal_counts_for_minimum_only():
    m = trace_metrics(make_trace([-2.0, -5.0, -3.0], [True, False, True]))
    assert m.final_energy == -3.0 and m.minimum_energy == -5.0
    m = trace_metrics(make_trace([-2.0, -5.0], [True, False]))
    assert m.final_energy == -2.0 and m.energy_displacement == 0.0


def test_cohort_percentages_are_strict():
    traces = [make_trace([-6.0, -7.0]), make_trace([-5.0, -6.0])]
    c = cohort_metrics(traces, mf_energy=-6.0)
    assert c.pct_final_below_mf == 50.0
    assert c.pct_min_below_mf == 50.0
    assert c.lowest_min_energy == -7.0
    assert c.mean_displacement == -1.0
    assert c.pct_final_not_above_initial == 100.0


def test_empty_inputs():
    with pytest.raises(ValueError):
        cohort_metrics([])
    with pytest.raises(ValueError):
        trace_metrics(DreamTrace())


def test_haar_bins_sum_to_one():
    for n in (1, 2, 4):
        assert haar_bin_probabilities(n, 75).sum() == pytest.approx(1.0)
    # one qubit: fidelity is uniform on [0, 1]
    assert np.allclose(haar_bin_probabilities(1, 10), 0.1)


def test_kl_of_matching_histogram_is_small():
    rng = np.random.default_rng(0)
    assert kl_from_fidelities(rng.uniform(size=20000), 1, 20) < 1e-2


def test_fixed_circuit_is_degenerate():
    score = expressibility(parse_circuit_string("H=0=nop=nop@CNOT=1=0=nop", 2), samples=200, bins=20)
    assert score.degenerate and score.n_params == 0
    # all mass in the top bin: KL close to log of its inverse Haar weight
    q = haar_bin_probabilities(2, 20)[-1]
    assert score.kl_divergence == pytest.approx(math.log(1 / q), rel=0.15)


def test_samples_below_bins():
    with pytest.raises(ValueError):
        expressibility(Circuit.identity(2), samples=10, bins=75)


def test_fidelities_seeded_and_bounded():
    c = parse_circuit_string("RY=0=nop=a@RX=1=nop=b@CNOT=1=0=nop", 2)
    f = sample_fidelities(c, 50, seed=3)
    assert np.array_equal(f, sample_fidelities(c, 50, seed=3))
    assert np.all((f >= -1e-12) & (f <= 1 + 1e-12))
    assert np.array_equal(f[:20], sample_fidelities(c, 20, seed=3))


def test_entangling_ansatz_beats_single_rotation():
    rich = expressibility(layered(2, 3), samples=2000, bins=40, seed=1)
    poor = expressibility(parse_circuit_string("RY=0=nop=a", 2), samples=2000, bins=40, seed=1)
    assert rich.kl_divergence < poor.kl_divergence
    assert rich.higher_is_better > poor.higher_is_better


def test_estimate_stable_across_seeds():
    scores = [expressibility(layered(2, 3), samples=4000, bins=40, seed=s).kl_divergence for s in range(3)]
    assert max(scores) - min(scores) < 0.05


def test_table_report(tmp_path):
    metrics = [trace_metrics(make_trace([-2.0, -7.0])), trace_metrics(make_trace([-3.0, -4.0]))]
    path = export_report(metrics, tmp_path / "r.txt", fmt="table", provenance={"seed": "0"}, mf_energy=-6.0)
    lines = path.read_text().splitlines()
    assert lines[0].split()[0] == "index"
    assert [l.split()[0] for l in lines[1:4]] == ["0", "1", "mean"]
    assert "# pct_final_below_mf: 50.0" in lines
    again = export_report(metrics, tmp_path / "s.txt", fmt="table", provenance={"seed": "0"}, mf_energy=-6.0)
    assert again.read_bytes() == path.read_bytes()


def test_lines_report(tmp_path):
    metrics = [trace_metrics(make_trace([-2.0, -7.0]))]
    rows = [json.loads(l) for l in export_report(metrics, tmp_path / "r.jsonl").read_text().splitlines()]
    assert rows[0]["final_energy"] == -7.0
    assert rows[1]["summary"]["size"] == 1


def test_empty_report_writes_nothing(tmp_path):
    with pytest.raises(ValueError):
        export_report([], tmp_path / "r.txt")
    assert not (tmp_path / "r.txt").exists()
    with pytest.raises(ValueError):
        export_report([trace_metrics(make_trace([0.0]))], tmp_path / "r.txt", fmt="csv")
