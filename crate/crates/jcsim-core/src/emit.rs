//! Output files: result CSVs, spectrum CSV, run header and plot script.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SimConfig;
use crate::error::Result;
use crate::spectrum::{Axis, SpectrumSnapshot};
use crate::sweep::RunHeader;
use crate::table::{format_sig9, ResultTable};

pub const SPECTRUM_HEADER: [&str; 4] = ["estimator", "axis", "x", "level_db"];

pub fn write_spectrum_csv<W: Write>(snap: &SpectrumSnapshot, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SPECTRUM_HEADER)?;
    for cut in &snap.cuts {
        let axis = match cut.axis {
            Axis::Range => "range",
            Axis::Velocity => "velocity",
        };
        for (x, l) in cut.x.iter().zip(&cut.level_db) {
            out.write_record([cut.estimator.as_str(), axis, &format_sig9(*x), &format_sig9(*l)])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    header: &'a RunHeader,
    config: &'a SimConfig,
}

/// Writes `run.json` with the header and the effective configuration.
pub fn write_run_record(dir: &Path, command: &str, header: &RunHeader, config: &SimConfig) -> Result<PathBuf> {
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&RunRecord {
        command,
        header,
        config,
    })?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Writes `<stem>.csv` and returns its path.
pub fn write_table(dir: &Path, stem: &str, table: &ResultTable) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.csv"));
    table.save(&path)?;
    Ok(path)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots every CSV written by jcsim in this directory.

usage: python3 plot.py [dir]
"""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

UNITS = {
    "aoa_mse": "MSE (deg$^2$)",
    "range_mse": "MSE (m$^2$)",
    "velocity_mse": "MSE ((m/s)$^2$)",
    "location_mse": "MSE (m$^2$)",
    "ber": "BER",
    "pslr": "PSLR (dB)",
}


def plot_results(path):
    series = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            s = series[row["metric"]][row["series"]]
            s.append((float(row["sinr_db"]), float(row["value"]), float(row["ci"])))
    for metric, by_series in series.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, pts in by_series.items():
            pts.sort()
            x = [p[0] for p in pts]
            y = [p[1] for p in pts]
            e = [p[2] for p in pts]
            style = "--" if name.startswith(("crb", "theory")) else "-o"
            ax.errorbar(x, y, yerr=e, fmt=style, capsize=2, label=name, markersize=3)
        if metric != "pslr":
            ax.set_yscale("log")
        ax.set_xlabel("C-SINR (dB)" if metric == "ber" else "S-SINR (dB)")
        ax.set_ylabel(UNITS.get(metric, metric))
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = path.with_name(f"{path.stem}_{metric}.png")
        fig.savefig(out, dpi=150)
        plt.close(fig)
        print(out)


def plot_spectrum(path):
    cuts = defaultdict(lambda: ([], []))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            x, y = cuts[(row["axis"], row["estimator"])]
            x.append(float(row["x"]))
            y.append(float(row["level_db"]))
    for axis, label in (("range", "distance (m)"), ("velocity", "radial velocity (m/s)")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for (a, est), (x, y) in sorted(cuts.items()):
            if a == axis:
                order = sorted(range(len(x)), key=x.__getitem__)
                ax.plot([x[i] for i in order], [y[i] for i in order], label=est)
        ax.set_xlabel(label)
        ax.set_ylabel("normalized spectrum (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = path.with_name(f"spectrum_{axis}.png")
        fig.savefig(out, dpi=150)
        plt.close(fig)
        print(out)


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
    for path in sorted(root.glob("*.csv")):
        with open(path, newline="") as f:
            header = next(csv.reader(f), [])
        if header[:2] == ["estimator", "axis"]:
            plot_spectrum(path)
        elif header[:2] == ["sinr_db", "metric"]:
            plot_results(path)


if __name__ == "__main__":
    main()
"#;

/// Writes `plot.py`, which renders every CSV in its directory.
pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let path = dir.join("plot.py");
    std::fs::write(&path, PLOT_SCRIPT)?;
    Ok(path)
}
