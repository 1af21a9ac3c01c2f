//! Generates the standalone plotting script that renders a run's CSVs.

use crate::table::Table;

const HEADER: &str = r#"#!/usr/bin/env python3
# Renders the charts of this run from its CSV files.
# Requires matplotlib; run from any directory.
import csv
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        return list(csv.DictReader(fh))


def finite(v):
    return math.isfinite(v) and v > 0


def render(chart):
    rows = read(chart["file"])
    groups = {}
    for row in rows:
        key = row[chart["group"]] if chart["group"] else ""
        x, y = float(row[chart["x"]]), float(row[chart["y"]])
        if (not chart["log_x"] or finite(x)) and (not chart["log_y"] or finite(y)):
            groups.setdefault(key, []).append((x, y))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(groups.items()):
        pts.sort()
        label = "%s = %s" % (chart["group"], key) if chart["group"] else None
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    if chart["log_x"]:
        ax.set_xscale("log", base=2)
    if chart["log_y"]:
        ax.set_yscale("log")
    ax.set_xlabel(chart["x"])
    ax.set_ylabel(chart["y"])
    ax.set_title(chart["title"])
    if chart["group"]:
        ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    out = os.path.join(HERE, os.path.splitext(chart["file"])[0] + ".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    print(out)


"#;

fn py_str(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if c.is_ascii() && !c.is_ascii_control() => out.push(c),
            c if (c as u32) <= 0xffff => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push_str(&format!("\\U{:08x}", c as u32)),
        }
    }
    out.push('"');
    out
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// The script text for `tables`; tables without a chart are skipped.
pub fn plot_script(tables: &[Table]) -> String {
    let mut s = String::from(HEADER);
    s.push_str("CHARTS = [\n");
    for t in tables {
        let Some(c) = &t.chart else { continue };
        let group = c.group.map(py_str).unwrap_or_else(|| "None".into());
        s.push_str(&format!(
            "    {{\"file\": {}, \"x\": {}, \"y\": {}, \"group\": {}, \"log_x\": {}, \"log_y\": {}, \"title\": {}}},\n",
            py_str(&t.file),
            py_str(c.x),
            py_str(c.y),
            group,
            py_bool(c.log_x),
            py_bool(c.log_y),
            py_str(&c.title),
        ));
    }
    s.push_str("]\n\nif __name__ == \"__main__\":\n    for c in CHARTS:\n        render(c)\n    sys.exit(0)\n");
    s
}
