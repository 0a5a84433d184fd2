"""Writing experiment results to disk: a JSON results document, CSV traces and figures."""

import csv
import json
import os
from datetime import datetime, timezone

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# keys that legitimately change between identical runs
VOLATILE_KEYS = ("wall_time_s", "timestamp", "runtime_s")

STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "figure.dpi": 150,
    "svg.hashsalt": "flyqc",
}

FLOAT_FMT = "%.17g"


def to_builtin(obj):
    """Recursively convert numpy scalars/arrays and complex numbers to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def strip_volatile(doc):
    """Copy of a results document without timestamp and wall-time entries."""
    if isinstance(doc, dict):
        return {k: strip_volatile(v) for k, v in doc.items() if k not in VOLATILE_KEYS}
    if isinstance(doc, list):
        return [strip_volatile(v) for v in doc]
    return doc


def write_trace(path, trace):
    keys, cols = [], []
    for k in ["t_ns"] + [k for k in trace if k != "t_ns"]:
        col = np.asarray(trace[k])
        if np.iscomplexobj(col):
            keys += [f"{k}_re", f"{k}_im"]
            cols += [col.real, col.imag]
        else:
            keys.append(k)
            cols.append(col.astype(float))
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError(f"trace columns in {path} have unequal lengths")
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(keys),
               comments="", fmt=FLOAT_FMT)


def write_table(path, rows):
    keys = list(rows[0])
    for row in rows[1:]:
        keys += [k for k in row if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow({k: (FLOAT_FMT % v if isinstance(v, (float, np.floating)) else v)
                        for k, v in row.items()})


def write_results(out_dir, name, cfg, output, runtime=None, figures=True):
    """Write everything for one run; returns the results document."""
    os.makedirs(out_dir, exist_ok=True)
    files = {"traces": {}, "tables": {}, "figures": []}
    for key, trace in output.traces.items():
        fname = f"{key}_trace.csv"
        write_trace(os.path.join(out_dir, fname), trace)
        files["traces"][key] = fname
    for key, rows in output.tables.items():
        fname = f"{key}.csv"
        write_table(os.path.join(out_dir, fname), rows)
        files["tables"][key] = fname
    if figures:
        files["figures"] = render_figures(out_dir, name, output)
    doc = {
        "experiment": name,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "runtime_s": runtime,
        "config": cfg,
        "metrics": output.metrics,
        "checks": output.checks,
        "files": files,
    }
    doc = to_builtin(doc)
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")
    return doc


# ---------------------------------------------------------------- figures

def _save(fig, out_dir, stem):
    names = []
    for ext in ("png", "svg"):
        fname = f"{stem}.{ext}"
        fig.savefig(os.path.join(out_dir, fname), metadata={"Date": None} if ext == "svg" else None)
        names.append(fname)
    plt.close(fig)
    return names


def _plot_prepare(trace):
    t = trace["t_ns"]
    labels = ("gaussian", "drag", "opt_me", "opt_qsde")
    fig, axes = plt.subplots(2, 2, figsize=(7.0, 4.6), sharex=True)
    for lab in labels:
        axes[0, 0].plot(t, trace[f"{lab}_ux"], label=lab)
        axes[0, 1].plot(t, trace[f"{lab}_uy"], label=lab)
        axes[1, 0].plot(t, trace[f"{lab}_photon_leakage"], label=lab)
        axes[1, 1].semilogy(t, np.maximum(trace[f"{lab}_level_leakage"], 1e-12), label=lab)
    axes[0, 0].set_ylabel(r"$u_x$ (rad/ns)")
    axes[0, 1].set_ylabel(r"$u_y$ (rad/ns)")
    axes[1, 0].set_ylabel("photon leakage")
    axes[1, 1].set_ylabel("level leakage")
    for ax in axes[1]:
        ax.set_xlabel("t (ns)")
    axes[0, 0].legend(frameon=False)
    fig.tight_layout()
    return fig


def _plot_shapes(trace):
    t = trace["t_ns"]
    fig, (ax_s, ax_u) = plt.subplots(2, 1, figsize=(6.0, 4.6), sharex=True)
    ax_s.plot(t, np.abs(trace["xi1_target"]), "k--", label="target")
    for key in trace:
        if key.endswith("xi1_re") or key.endswith("xi1_from1_re"):
            stem = key[:-3]
            amp = np.hypot(trace[key], trace[stem + "_im"])
            ax_s.plot(t, amp, label=stem.replace("_", " ").strip())
    ax_s.set_ylabel(r"$|\xi_1(t)|$ (ns$^{-1/2}$)")
    ax_s.legend(frameon=False)
    for key in trace:
        if key.endswith("ux") or key.endswith("uy"):
            ax_u.plot(t, trace[key], label=key)
    ax_u.set_xlabel("t (ns)")
    ax_u.set_ylabel("drive (rad/ns)")
    gam = [k for k in trace if k.endswith("gamma") or k == "gamma_ideal"]
    if gam:
        ax_g = ax_u.twinx()
        for key in gam:
            ax_g.plot(t, trace[key], ":", label=key)
        ax_g.set_ylabel(r"$\gamma$ (rad/ns)")
        ax_g.legend(frameon=False, loc="upper right")
    ax_u.legend(frameon=False, loc="upper left", ncol=2)
    fig.tight_layout()
    return fig


def _plot_sweep(rows):
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    for kind in dict.fromkeys(r["shape"] for r in rows):
        sel = [r for r in rows if r["shape"] == kind]
        ax.semilogy([r["alpha_over_gamma_c"] for r in sel], [r["J2"] for r in sel], "o-", label=kind)
    ax.set_xlabel(r"$\alpha/\gamma_c$")
    ax.set_ylabel(r"$J_2$")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def _plot_budget(rows):
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    x = np.arange(len(rows))
    ax.bar(x - 0.2, [r["E_vac"] for r in rows], 0.4, label=r"$E_{vac}$")
    ax.bar(x + 0.2, [r["E_photon"] for r in rows], 0.4, label=r"$E_{photon}$")
    ax.set_xticks(x, [r["scheme"] for r in rows])
    ax.set_ylabel("error")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def render_figures(out_dir, name, output):
    files = []
    with plt.rc_context(STYLE):
        for key, trace in output.traces.items():
            fig = _plot_prepare(trace) if key == "prepare" else _plot_shapes(trace)
            files += _save(fig, out_dir, f"{key}_figure")
        if "sweep_alpha" in output.tables:
            files += _save(_plot_sweep(output.tables["sweep_alpha"]), out_dir, "sweep_alpha_figure")
        if "error_budget" in output.tables:
            files += _save(_plot_budget(output.tables["error_budget"]), out_dir, "error_budget_figure")
    return files
