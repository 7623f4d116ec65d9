"""Figure rendering for scenario results.

Every runner's delimited output gets a PNG rendition written next to it.
The plots are diagnostic views of the same data that lands in the CSV/JSON
files; nothing here feeds back into the computation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _column(rows, name, where=None):
    out = []
    for row in rows:
        if where is not None and not where(row):
            continue
        v = row.get(name)
        out.append(np.nan if v is None else v)
    return np.asarray(out, dtype=float)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trajectory(result, base: str) -> list:
    rows = result.rows
    m = _column(rows, "m")
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    axes[0].plot(m, _column(rows, "mean_n1"), label=r"$\langle n_1\rangle$")
    axes[0].plot(m, _column(rows, "mean_n2"), label=r"$\langle n_2\rangle$")
    axes[0].set_xlabel("electron passes m")
    axes[0].set_ylabel("mean photon number")
    axes[0].legend()
    axes[1].plot(m, _column(rows, "mutual_information"), color="tab:purple")
    axes[1].set_xlabel("electron passes m")
    axes[1].set_ylabel("mutual information (bits)")
    axes[2].plot(m, _column(rows, "g2"), color="tab:red")
    axes[2].axhline(1.0, ls=":", color="gray")
    axes[2].set_xlabel("electron passes m")
    axes[2].set_ylabel(r"$g^{(2)}$ cross-correlation")
    return [_save(fig, base + ".png")]


def plot_transfer(result, base: str) -> list:
    rows = result.rows
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    for name, color in (("primary", "tab:blue"), ("reference", "tab:orange")):
        sel = lambda r, n=name: r["preparation"] == n  # noqa: E731
        axes[0].plot(_column(rows, "m", sel), _column(rows, "mean_n2", sel),
                     label=name, color=color)
        table = result.tables.get(f"{name}_final_joint_distribution")
        if table:
            p = np.asarray(table["p"])
            p2 = p.sum(axis=0)
            axes[1].plot(np.arange(p2.size), p2, marker="o", ms=3,
                         label=name, color=color)
    axes[0].set_xlabel("electron passes m")
    axes[0].set_ylabel(r"$\langle n_2\rangle$")
    axes[0].legend()
    axes[1].set_xlabel(r"$n_2$")
    axes[1].set_ylabel(r"final $P(n_2)$")
    axes[1].set_yscale("log")
    axes[1].set_ylim(bottom=1e-8)
    axes[1].legend()
    return [_save(fig, base + ".png")]


def plot_postselect_map(result, base: str) -> list:
    t = result.tables
    g = np.asarray(t["g_grid"])
    n = np.asarray(t["n_grid"])
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, key, title in ((axes[0], "p_loss1", "P(one quantum lost)"),
                           (axes[1], "entanglement_entropy",
                            "entanglement entropy (bits)")):
        z = np.asarray(t[key])
        im = ax.imshow(z.T, origin="lower", aspect="auto",
                       extent=(g[0], g[-1], n[0] - 0.5, n[-1] + 0.5))
        ax.set_xlabel(r"$|g_Q|$")
        ax.set_ylabel("initial Fock number n")
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
    return [_save(fig, base + ".png")]


def plot_hbt(result, base: str) -> list:
    rows = result.rows
    paths = []
    if rows and "g2_closed_form" in result.columns:
        m = _column(rows, "m")
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.plot(m, _column(rows, "g2"), "o", ms=3, label="simulation")
        ax.plot(m, _column(rows, "g2_closed_form"), "-",
                label="closed form (2N-1)/N")
        ax.axhline(2.0, ls=":", color="gray")
        ax.set_xlabel("electron passes N")
        ax.set_ylabel(r"$g^{(2)}$")
        ax.legend()
        paths.append(_save(fig, base + ".png"))
    scan = result.tables.get("phase_scan")
    if scan:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.plot(scan["phases"], scan["g2"])
        ax.axhline(1.0, ls=":", color="gray")
        ax.set_xlabel(r"relative light phase $\phi$")
        ax.set_ylabel(r"$g^{(2)}$ after one pass")
        paths.append(_save(fig, base + "_phase_scan.png"))
    return paths


_PLOTTERS = {
    "custom": plot_trajectory,
    "fig2_mutual_info": plot_trajectory,
    "fig3_transfer": plot_transfer,
    "fig4_postselect_map": plot_postselect_map,
    "fig5_hbt": plot_hbt,
}


def render_result(result, base: str) -> list:
    """Write the PNG(s) for one scenario result; returns the paths."""
    plotter = _PLOTTERS[result.config.scenario]
    if result.config.scenario == "fig5_hbt" and "g2_closed_form" not in result.columns:
        plotter = plot_trajectory
    return plotter(result, base)
