"""Dreaming metrics, cohort summaries, expressibility and report files."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels as K
from .circuit import Circuit
from .datagen import MEAN_FIELD_ENERGY
from .dreaming import DreamTrace
from .seeding import child_rng
from .simulator import compile_circuit


@dataclass(frozen=True)
class DreamMetrics:
    initial_energy: float
    final_energy: float
    minimum_energy: float
    energy_displacement: float


@dataclass(frozen=True)
class CohortMetrics:
    size: int
    pct_final_below_mf: float
    pct_min_below_mf: float
    lowest_min_energy: float
    mean_initial: float
    mean_final: float
    mean_minimum: float
    mean_displacement: float
    pct_final_not_above_initial: float
    mf_energy: float


def trace_metrics(trace: DreamTrace) -> DreamMetrics:
    """Final is the circuit the run ends on; the minimum covers rejected proposals too."""
    energies = trace.energies
    if not energies:
        raise ValueError("empty trace")
    final = trace.final.energy
    return DreamMetrics(energies[0], final, min(energies), final - energies[0])


def cohort_metrics(traces: Sequence[DreamTrace], mf_energy: float = MEAN_FIELD_ENERGY) -> CohortMetrics:
    """Aggregate a set of dreaming runs; "below" is strict."""
    if not traces:
        raise ValueError("empty cohort")
    ms = [trace_metrics(t) for t in traces]
    n = len(ms)

    def pct(flags) -> float:
        return 100.0 * sum(flags) / n

    return CohortMetrics(
        size=n,
        pct_final_below_mf=pct(m.final_energy < mf_energy for m in ms),
        pct_min_below_mf=pct(m.minimum_energy < mf_energy for m in ms),
        lowest_min_energy=min(m.minimum_energy for m in ms),
        mean_initial=float(np.mean([m.initial_energy for m in ms])),
        mean_final=float(np.mean([m.final_energy for m in ms])),
        mean_minimum=float(np.mean([m.minimum_energy for m in ms])),
        mean_displacement=float(np.mean([m.energy_displacement for m in ms])),
        pct_final_not_above_initial=pct(m.final_energy <= m.initial_energy for m in ms),
        mf_energy=mf_energy,
    )


# --- expressibility -------------------------------------------------------------


@dataclass(frozen=True)
class ExpressibilityScore:
    kl_divergence: float
    samples: int
    bins: int
    seed: int
    n_params: int
    degenerate: bool

    @property
    def higher_is_better(self) -> float:
        """The same score with the opposite orientation (``-KL``)."""
        return -self.kl_divergence

    def to_dict(self) -> dict:
        return dict(asdict(self), higher_is_better=self.higher_is_better)


def haar_bin_probabilities(n_qubits: int, bins: int) -> np.ndarray:
    """Haar fidelity density ``(N-1)(1-F)^(N-2)`` integrated over equal bins of [0, 1]."""
    dim = 2**n_qubits
    edges = np.linspace(0.0, 1.0, bins + 1)
    tail = (1.0 - edges) ** (dim - 1)  # P(F >= edge)
    return np.maximum(tail[:-1] - tail[1:], np.finfo(float).tiny)


def sample_fidelities(c: Circuit, samples: int, seed: int = 0) -> np.ndarray:
    """Fidelities of ``samples`` pairs of independent uniform [0, 2pi) bindings."""
    cc = compile_circuit(c)
    out = np.empty(samples)
    for i in range(samples):
        rng = child_rng(seed, i)
        a = rng.uniform(0.0, 2 * math.pi, cc.n_params)
        b = rng.uniform(0.0, 2 * math.pi, cc.n_params)
        psi = K.simulate(*cc.args(), a, -1, 0.0)
        phi = K.simulate(*cc.args(), b, -1, 0.0)
        out[i] = abs(np.vdot(psi, phi)) ** 2
    return out


def kl_from_fidelities(fidelities: np.ndarray, n_qubits: int, bins: int) -> float:
    """KL(sampled || Haar) with add-one smoothing on the sampled histogram."""
    counts, _ = np.histogram(np.clip(fidelities, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    p = (counts + 1.0) / (counts.sum() + bins)
    q = haar_bin_probabilities(n_qubits, bins)
    return float(np.sum(p * np.log(p / q)))


def expressibility(c: Circuit, samples: int = 5000, bins: int = 75, seed: int = 0) -> ExpressibilityScore:
    """KL divergence between the circuit's fidelity histogram and the Haar one (lower = more expressive)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if samples < bins:
        raise ValueError(f"samples ({samples}) must be at least bins ({bins})")
    fids = sample_fidelities(c, samples, seed)
    n_params = len(c.free_parameters())
    degenerate = bool(np.allclose(fids, fids[0], atol=1e-12))
    return ExpressibilityScore(kl_from_fidelities(fids, c.n_qubits, bins), samples, bins, seed, n_params, degenerate)


# --- reports --------------------------------------------------------------------

_TRACE_COLUMNS = ("initial_energy", "final_energy", "minimum_energy", "energy_displacement")


def export_report(
    metrics: Sequence[DreamMetrics],
    path,
    fmt: str = "lines",
    provenance: Optional[Mapping[str, str]] = None,
    mf_energy: float = MEAN_FIELD_ENERGY,
) -> Path:
    """Write per-trace metrics plus a cohort summary as JSON lines or an aligned table."""
    if not metrics:
        raise ValueError("empty cohort, nothing to report")
    if fmt not in ("lines", "table"):
        raise ValueError(f"unknown report format {fmt!r}")
    summary = _summary(metrics, mf_energy)
    provenance = dict(sorted((provenance or {}).items()))
    if fmt == "lines":
        rows = [json.dumps(dict(asdict(m), index=i), sort_keys=True) for i, m in enumerate(metrics)]
        rows.append(json.dumps({"summary": summary}, sort_keys=True))
        rows.append(json.dumps({"provenance": provenance}, sort_keys=True))
        text = "\n".join(rows) + "\n"
    else:
        header = ("index",) + _TRACE_COLUMNS
        body = [[str(i)] + [f"{getattr(m, k):.6f}" for k in _TRACE_COLUMNS] for i, m in enumerate(metrics)]
        body.append(
            ["mean"] + [f"{np.mean([getattr(m, k) for m in metrics]):.6f}" for k in _TRACE_COLUMNS]
        )
        widths = [max(len(r[j]) for r in [list(header)] + body) for j in range(len(header))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [list(header)] + body]
        lines += [f"# {k}: {v}" for k, v in summary.items()]
        lines += [f"# {k}: {v}" for k, v in provenance.items()]
        text = "\n".join(lines) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _summary(metrics: Sequence[DreamMetrics], mf_energy: float) -> dict:
    n = len(metrics)
    return {
        "size": n,
        "mf_energy": mf_energy,
        "pct_final_below_mf": 100.0 * sum(m.final_energy < mf_energy for m in metrics) / n,
        "pct_min_below_mf": 100.0 * sum(m.minimum_energy < mf_energy for m in metrics) / n,
        "lowest_min_energy": min(m.minimum_energy for m in metrics),
        "mean_initial": float(np.mean([m.initial_energy for m in metrics])),
        "mean_minimum": float(np.mean([m.minimum_energy for m in metrics])),
        "mean_displacement": float(np.mean([m.energy_displacement for m in metrics])),
    }
