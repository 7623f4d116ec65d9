"""Config-driven experiment runners and result persistence.

Each scenario produces a :class:`ScenarioResult`: a flat table of per-step
scalars (written as CSV), structured tables such as photon-number maps
(written as JSON next to the CSV, together with the config echo and hash),
and run metadata.  Outputs are deterministic for a fixed config; the wall
clock lives only in the JSON metadata so CSV bytes are reproducible.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from . import __version__
from .analytics import (
    HbtInitialMoments,
    g2_closed_form,
    g2_phase_scan,
    hbt_vacuum_g2_trajectory,
)
from .config import ExperimentConfig
from .errors import ConfigError
from .evolution import (
    build_two_cavity_kraus,
    channel_steps,
    measurement_effects,
    single_pass_loss_spectrum,
    two_cavity_kraus_element,
)
from .measures import UndefinedG2, correlation_report, entanglement_entropy
from .operators import (
    ElectronLadder,
    PhotonMode,
    coherent_state,
    comb_electron,
    default_k_half_range,
    default_n_max_coherent,
    delta_electron,
    electron_variance,
    fock_state,
    interior_margin,
    ladder_decompose,
    padded_photon_mode,
)
from .tensor_core import DensityMatrix, PureState, kron_states


@dataclass(frozen=True)
class ScenarioResult:
    """Everything one scenario run produced, ready for persistence."""

    config: ExperimentConfig
    columns: list
    rows: list = field(repr=False)
    tables: dict = field(default_factory=dict, repr=False)
    meta: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        return self.config.config_hash()


# ---------------------------------------------------------------------------
# sizing and state construction from config descriptors


def _support(desc: dict) -> int:
    """Largest Fock index with non-negligible weight in the initial state."""
    if desc["kind"] == "vacuum":
        return 0
    if desc["kind"] == "fock":
        return desc["n"]
    return default_n_max_coherent(desc["alpha"])


def _growth(g: float, m: int) -> int:
    """Extra photon-number headroom for m electron passes at coupling g.

    The mean occupation grows by m g^2 while diffusion widens the tail like
    sqrt(m) g; the constant keeps the cumulative trace deficit well under
    the 1e-6 trajectory bound for the scenario defaults.
    """
    if m <= 0:
        return 0
    return math.ceil(m * g * g + 5.0 * math.sqrt(m) * g) + 2


def _cavity_mode(config: ExperimentConfig, which: int, desc: dict) -> tuple:
    """(mode, interior_dim) for one cavity; honors the n_max override."""
    g = abs(config.g_q)
    label = f"ph{which}"
    override = config.n_max1 if which == 1 else config.n_max2
    n_state = _support(desc) + _growth(g, config.electrons)
    if override is not None:
        mode = PhotonMode(override, label=label)
        interior = max(1, mode.dim - interior_margin(g, override))
        return mode, interior
    mode = padded_photon_mode(n_state, g, label=label)
    return mode, n_state + 1


def _cavity_state(desc: dict, mode: PhotonMode):
    if desc["kind"] == "vacuum":
        return fock_state(mode, 0)
    if desc["kind"] == "fock":
        return fock_state(mode, desc["n"])
    alpha = desc["alpha"] * np.exp(1j * desc["phase"])
    return coherent_state(mode, alpha)


def _ladder(config: ExperimentConfig, n_max: int) -> ElectronLadder:
    half = config.k_half_range
    if half is None:
        half = default_k_half_range(config.g_q, n_max)
    if config.electron["kind"] == "comb":
        half += config.electron["peaks"] // 2 + 1
    return ElectronLadder(-half, half)


def _electron_state(config: ExperimentConfig, ladder: ElectronLadder):
    desc = config.electron
    if desc["kind"] == "delta":
        return delta_electron(ladder)
    return comb_electron(ladder, desc["peaks"], desc["phases"])


def _loss_effects(kraus) -> dict:
    """Measurement effects A_k^+ A_k, precomputed so per-step P(k) is cheap."""
    return measurement_effects(kraus)


def _loss_table(rho: DensityMatrix, effects: dict, floor: float = 1e-12) -> dict:
    out = {}
    for k in sorted(effects):
        e = effects[k]
        if sparse.issparse(e):
            # tr(E rho) through the sparse pattern of E only
            p = float(np.real(e.multiply(rho.mat.T).sum()))
        else:
            p = float(np.einsum("ij,ji->", e, rho.mat).real)
        if p > floor:
            out[str(k)] = p
    return out


TRAJECTORY_COLUMNS = [
    "m", "mean_n1", "mean_n2", "g2", "mutual_information",
    "ppt_min_eig", "realignment_sum", "trace_deficit",
]


def _step_row(m: int, rho: DensityMatrix, deficit: float) -> dict:
    tr = rho.trace()
    rho_n = DensityMatrix(rho.layout, rho.mat / tr, normalized=False)
    rep = correlation_report(rho_n)
    return {
        "m": m,
        "mean_n1": rep.mean_n1,
        "mean_n2": rep.mean_n2,
        "g2": rep.g2,
        "mutual_information": rep.mutual_information,
        "ppt_min_eig": rep.ppt_min_eig,
        "realignment_sum": rep.realignment_sum,
        "trace_deficit": deficit,
    }


def _run_trajectory_for(config: ExperimentConfig, cavity1_desc: dict):
    """Channel trajectory plus per-step observables for one preparation."""
    mode1, int1 = _cavity_mode(config, 1, cavity1_desc)
    mode2, int2 = _cavity_mode(config, 2, config.cavity2)
    ladder = _ladder(config, max(mode1.n_max, mode2.n_max))
    dec1 = ladder_decompose(ladder, mode1, config.g_q, method="series")
    dec2 = ladder_decompose(ladder, mode2, config.g_q, method="series")
    electron = _electron_state(config, ladder)
    kraus = build_two_cavity_kraus(
        dec1, dec2, electron, ladder, phi=config.phi, interior=(int1, int2))
    state1 = _cavity_state(cavity1_desc, mode1)
    state2 = _cavity_state(config.cavity2, mode2)
    rho0 = kron_states(state1, state2).density_matrix()
    effects = _loss_effects(kraus)
    rows, losses = [], []
    final = rho0
    # stream the trajectory: only the current state is held in memory
    for m, rho, deficit in channel_steps(rho0, kraus, config.electrons):
        rows.append(_step_row(m, rho, deficit))
        losses.append({"m": m, "p": _loss_table(rho, effects)})
        final = rho
    spectrum = single_pass_loss_spectrum(dec1, state1)
    info = {
        "rows": rows,
        "loss_tables": losses,
        "kraus": kraus,
        "dec1": dec1,
        "state1": state1,
        "final": final,
        "mode1": mode1,
        "mode2": mode2,
        "ladder": ladder,
        "electron_first_pass_spectrum": {str(k): v for k, v in
                                         sorted(spectrum.items()) if v > 1e-14},
        "electron_first_pass_variance": electron_variance(
            np.array([spectrum.get(int(k), 0.0) for k in ladder.ks()]), ladder),
    }
    return info


def _base_meta(config: ExperimentConfig) -> dict:
    return {
        "scenario": config.scenario,
        "g_q_abs": abs(config.g_q),
        "phi": config.phi,
        "electrons": config.electrons,
    }


def run_trajectory(config: ExperimentConfig) -> ScenarioResult:
    """Generic per-electron evolution with per-step observables."""
    info = _run_trajectory_for(config, config.cavity1)
    meta = _base_meta(config)
    meta.update({
        "n_max1": info["mode1"].n_max,
        "n_max2": info["mode2"].n_max,
        "k_half_range": info["ladder"].k_max,
        "kraus_count": len(info["kraus"].ops),
        "kraus_leakage": info["kraus"].leakage,
        "electron_first_pass_variance": info["electron_first_pass_variance"],
    })
    tables = {
        "loss_probabilities": info["loss_tables"],
        "electron_first_pass_spectrum": info["electron_first_pass_spectrum"],
        "final_joint_distribution": _joint_table(info["final"]),
    }
    return ScenarioResult(config, TRAJECTORY_COLUMNS, info["rows"], tables, meta)


def _joint_table(rho: DensityMatrix) -> dict:
    d1, d2 = rho.layout.dims
    p = np.clip(np.real(np.diag(rho.mat)).reshape(d1, d2), 0.0, None)
    return {"n1_dim": d1, "n2_dim": d2, "p": p.tolist()}


def run_transfer_comparison(config: ExperimentConfig) -> ScenarioResult:
    """Cavity-2 statistics for two cavity-1 preparations sharing one channel.

    The primary preparation is the config's cavity1; the reference is the
    one-photon Fock state.  A difference in the cavity-2 observables between
    the two runs demonstrates electron-mediated information transfer, which
    requires a nonzero FSP phase.
    """
    preparations = [("primary", config.cavity1),
                    ("reference", {"kind": "fock", "n": 1})]
    columns = ["preparation"] + TRAJECTORY_COLUMNS
    rows, tables, meta = [], {}, _base_meta(config)
    finals = {}
    for name, desc in preparations:
        info = _run_trajectory_for(config, desc)
        for row in info["rows"]:
            rows.append({"preparation": name, **row})
        tables[f"{name}_electron_first_pass_spectrum"] = \
            info["electron_first_pass_spectrum"]
        tables[f"{name}_final_joint_distribution"] = _joint_table(info["final"])
        meta[f"{name}_electron_first_pass_variance"] = \
            info["electron_first_pass_variance"]
        d2 = info["mode2"].dim
        p2 = np.clip(np.real(np.diag(info["final"].mat)), 0.0, None)
        p2 = p2.reshape(info["mode1"].dim, d2).sum(axis=0)
        finals[name] = p2
        meta[f"{name}_final_mean_n2"] = float(p2 @ np.arange(d2))
    d = min(len(finals["primary"]), len(finals["reference"]))
    meta["max_p_n2_difference"] = float(
        np.abs(finals["primary"][:d] - finals["reference"][:d]).max())
    meta["mean_n2_difference"] = abs(meta["primary_final_mean_n2"]
                                     - meta["reference_final_mean_n2"])
    return ScenarioResult(config, columns, rows, tables, meta)


def run_postselect_map(
    config: ExperimentConfig,
    g_values=None,
    n_values=None,
) -> ScenarioResult:
    """Heralding probability and entanglement entropy over (g_Q, n) cells.

    Both cavities are prepared in the same Fock state |n>; the electron is
    unshaped and post-selected on one quantum of energy loss.
    """
    if g_values is None:
        g_values = [round(0.05 * i, 10) for i in range(1, 21)]
    if n_values is None:
        n_values = list(range(0, 6))
    columns = ["g_q", "n", "p_loss1", "entanglement_entropy"]
    rows = []
    p_map = np.zeros((len(g_values), len(n_values)))
    s_map = np.zeros_like(p_map)
    for i, g in enumerate(g_values):
        for j, n in enumerate(n_values):
            mode1 = padded_photon_mode(n, g, label="ph1", extra=2)
            mode2 = padded_photon_mode(n, g, label="ph2", extra=2)
            half = default_k_half_range(g, mode1.n_max)
            ladder = ElectronLadder(-half, half)
            dec1 = ladder_decompose(ladder, mode1, g, method="series")
            dec2 = ladder_decompose(ladder, mode2, g, method="series")
            a1 = two_cavity_kraus_element(
                dec1, dec2, delta_electron(ladder), ladder, config.phi, 1)
            psi0 = kron_states(fock_state(mode1, n), fock_state(mode2, n))
            v = a1 @ psi0.vec
            p = float(np.vdot(v, v).real)
            if p > 1e-14:
                psi = PureState(psi0.layout, v / math.sqrt(p))
                s = entanglement_entropy(psi)
            else:
                s = 0.0
            p_map[i, j], s_map[i, j] = p, s
            rows.append({"g_q": g, "n": n, "p_loss1": p,
                         "entanglement_entropy": s})
    tables = {
        "g_grid": list(g_values),
        "n_grid": list(n_values),
        "p_loss1": p_map.tolist(),
        "entanglement_entropy": s_map.tolist(),
    }
    meta = _base_meta(config)
    meta["cells"] = len(rows)
    return ScenarioResult(config, columns, rows, tables, meta)


def run_hbt(config: ExperimentConfig) -> ScenarioResult:
    """Cross-correlation build-up between the two cavities, one row per pass.

    For empty cavities with an unshaped electron the exact symmetric-mode
    reduction is used, which reaches photon numbers the dense two-mode
    representation cannot; any other preparation falls back to the generic
    trajectory.
    """
    vacuum = (config.cavity1["kind"] == "vacuum"
              and config.cavity2["kind"] == "vacuum"
              and config.electron["kind"] == "delta")
    if not vacuum:
        return run_trajectory(config)
    g = abs(config.g_q)
    m = config.electrons
    g2_sim = hbt_vacuum_g2_trajectory(config.g_q, m)
    empty = HbtInitialMoments(0.0, 0.0, 0.0)
    columns = ["m", "mean_n_per_cavity", "g2", "g2_closed_form"]
    rows = []
    for n in range(1, m + 1):
        rows.append({
            "m": n,
            "mean_n_per_cavity": n * g * g,
            "g2": float(g2_sim[n - 1]),
            "g2_closed_form": g2_closed_form(empty, n, config.g_q),
        })
    phases, scan, phi_min, g2_min = g2_phase_scan(1.0, 1.0, 1, config.g_q)
    tables = {
        "phase_scan": {
            "alpha1": 1.0, "alpha2": 1.0, "electrons": 1,
            "phases": phases.tolist(), "g2": scan.tolist(),
        },
    }
    meta = _base_meta(config)
    meta.update({
        "g2_limit_closed_form": g2_closed_form(empty, 5000, config.g_q),
        "phase_scan_min_g2": g2_min,
        "phase_scan_argmin": phi_min,
        "max_closed_form_error": max(
            abs(r["g2"] - r["g2_closed_form"]) for r in rows) if rows else 0.0,
    })
    return ScenarioResult(config, columns, rows, tables, meta)


_RUNNERS = {
    "custom": run_trajectory,
    "fig2_mutual_info": run_trajectory,
    "fig3_transfer": run_transfer_comparison,
    "fig4_postselect_map": run_postselect_map,
    "fig5_hbt": run_hbt,
}


def run_scenario(config: ExperimentConfig) -> ScenarioResult:
    return _RUNNERS[config.scenario](config)


# ---------------------------------------------------------------------------
# persistence


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".16e")


def write_csv(path: str, columns, rows) -> None:
    """Header plus one row per record; floats carry 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in columns])


def result_payload(result: ScenarioResult, wall_clock_s: float | None = None) -> dict:
    meta = dict(result.meta)
    meta["tool_version"] = __version__
    if wall_clock_s is not None:
        meta["wall_clock_s"] = wall_clock_s
    return {
        "config": result.config.to_dict(),
        "config_hash": result.config_hash(),
        "meta": meta,
        "tables": result.tables,
    }


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_and_write(config: ExperimentConfig, out_dir: str | None = None,
                  render: bool = True) -> dict:
    """Run one scenario and persist CSV + JSON (+ figures) into `out_dir`.

    Returns a mapping with the result object and every file written.
    """
    out_dir = out_dir or config.out
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    result = run_scenario(config)
    wall = time.perf_counter() - t0
    base = os.path.join(out_dir, f"{config.scenario}_{result.config_hash()}")
    csv_path = base + ".csv"
    json_path = base + ".json"
    write_csv(csv_path, result.columns, result.rows)
    write_json(json_path, result_payload(result, wall))
    figures = []
    if render:
        from .plots import render_result
        figures = render_result(result, base)
    return {"result": result, "csv": csv_path, "json": json_path,
            "figures": figures}


# ---------------------------------------------------------------------------
# sweeps


_AXIS_TARGETS = {
    "g_q", "phi", "electrons",
    "cavity1.alpha", "cavity1.phase", "cavity2.alpha", "cavity2.phase",
}


def parse_axis(spec: str) -> tuple:
    """Parse 'name=start:stop:step' into (name, list of values)."""
    if "=" not in spec:
        raise ConfigError(f"axis spec {spec!r} must look like name=start:stop:step")
    name, _, rng = spec.partition("=")
    name = name.strip()
    if name not in _AXIS_TARGETS:
        raise ConfigError(
            f"unknown sweep axis {name!r}; choose from {sorted(_AXIS_TARGETS)}")
    parts = rng.split(":")
    if len(parts) != 3:
        raise ConfigError(f"axis range {rng!r} must be start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"non-numeric axis range {rng!r}") from exc
    if step <= 0:
        raise ConfigError("axis step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise ConfigError(f"axis range {rng!r} is empty")
    values = [start + i * step for i in range(count)]
    if name == "electrons":
        values = [int(round(v)) for v in values]
    return name, values


def _apply_axis(config: ExperimentConfig, name: str, value):
    if "." in name:
        block, _, leaf = name.partition(".")
        desc = dict(getattr(config, block))
        if desc.get("kind") != "coherent":
            raise ConfigError(
                f"axis {name} requires {block} to be a coherent state")
        desc[leaf] = value
        return config.replace(**{block: desc})
    return config.replace(**{name: value})


def sweep(config: ExperimentConfig, axis_specs, out_dir: str | None = None,
          workers: int = 1, render: bool = False,
          max_cells: int = 10_000) -> dict:
    """Run the scenario over a ≤ 2-axis grid; one output pair per cell.

    Cells are independent and run concurrently up to `workers`.  A manifest
    maps each cell's axis values to its files.
    """
    if not axis_specs:
        raise ConfigError("sweep needs at least one --axis")
    if len(axis_specs) > 2:
        raise ConfigError("sweep supports at most two axes")
    axes = [parse_axis(s) for s in axis_specs]
    names = [a[0] for a in axes]
    if len(set(names)) != len(names):
        raise ConfigError("sweep axes must be distinct")
    grids = [a[1] for a in axes]
    cells = list(itertools.product(*grids))
    if len(cells) > max_cells:
        raise ConfigError(f"sweep grid has {len(cells)} cells > {max_cells}")
    out_dir = out_dir or config.out
    os.makedirs(out_dir, exist_ok=True)

    def one(index_cell):
        idx, values = index_cell
        cfg = config
        for name, value in zip(names, values):
            cfg = _apply_axis(cfg, name, value)
        cell_dir = os.path.join(out_dir, "cell_" + "_".join(str(i) for i in idx))
        written = run_and_write(cfg, cell_dir, render=render)
        return {
            "cell": list(idx),
            "values": {n: v for n, v in zip(names, values)},
            "csv": written["csv"],
            "json": written["json"],
        }

    indexed = list(zip(itertools.product(*(range(len(g)) for g in grids)), cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, indexed))
    else:
        entries = [one(c) for c in indexed]
    manifest = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "axes": {n: g for n, g in zip(names, grids)},
        "cells": entries,
        "tool_version": __version__,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    write_json(manifest_path, manifest)
    return {"manifest": manifest_path, "entries": entries}
