"""Report bundle assembly and rendering (JSON, markdown, CSV, SVG).

``build_bundle`` is the only place numbers are produced; the renderers
format what the bundle holds and never recompute statistics.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from servorig import anova

# --------------------------------------------------------------------------
# bundle


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def ols_fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0:
        return {"slope": 0.0, "intercept": float(y.mean()) if len(y) else 0.0}
    slope, intercept = np.polyfit(x, y, 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def log_descriptives(log):
    """N/min/max/mean/sd for encoder readings and commanded positions."""
    out = []
    for name, arr in (("Encoder Recordings", log.encoder_counts),
                      ("Commanded Servo Positions", log.commanded_deg)):
        arr = np.asarray(arr, dtype=float)
        out.append({"Variable": name, "N": int(arr.size),
                    "Min": float(arr.min()) if arr.size else None,
                    "Max": float(arr.max()) if arr.size else None,
                    "Mean": float(arr.mean()) if arr.size else None,
                    "Std. Dev.": float(arr.std(ddof=1)) if arr.size > 1 else None})
    return out


def build_bundle(suite, log=None, fdr_stats=None, config=None):
    """Structured report: one object per table, keyed by table title."""
    m = suite.matrix
    w = suite.within
    tables = {}

    if fdr_stats is not None:
        tables["Negative Positions Statistical Description"] = fdr_stats.get("negative")
        tables["Positive Positions Statistical Description"] = fdr_stats.get("positive")
    if log is not None:
        tables["Descriptive Statistics of Study Variables Dataset"] = log_descriptives(log)
    tables["Descriptive Statistics of Period Samples"] = [
        {"Period": c.label, "Mean": c.mean, "Std. Deviation": c.sd, "N": c.n}
        for c in suite.summary]
    s = suite.sphericity
    tables["Mauchly's Test of Sphericity"] = {
        "Mauchly's W": s.W, "Approx. Chi-Square": s.chi2, "df": s.df, "Sig.": s.p,
        "Greenhouse-Geisser": s.eps_gg, "Huynh-Feldt": s.eps_hf, "Lower-bound": s.eps_lb,
        "degenerate": s.degenerate}
    effect_rows, error_rows = [], []
    for r in w.rows:
        effect_rows.append({"Source": "Cycle", "Correction": r.correction,
                            "Type III Sum of Squares": w.ss_effect, "df": r.df_effect,
                            "Mean Square": r.ms_effect, "F": r.F, "Sig.": r.p,
                            "Partial Eta Squared": w.partial_eta2})
        error_rows.append({"Source": "Error(Cycle)", "Correction": r.correction,
                           "Type III Sum of Squares": w.ss_error, "df": r.df_error,
                           "Mean Square": r.ms_error})
    tables["Tests of Within-Subjects Effects"] = {
        "effect": effect_rows, "error": error_rows, "degenerate": w.degenerate}
    tables["Tests of Within-Subjects Contrasts"] = [
        {"Source": "Cycle", "Cycle": c.label, "Type III Sum of Squares": c.ss_hypothesis,
         "df": c.df_hypothesis, "Mean Square": c.ms_hypothesis, "F": c.F, "Sig.": c.p,
         "Partial Eta Squared": c.partial_eta2,
         "Error Type III Sum of Squares": c.ss_error, "Error df": c.df_error,
         "Error Mean Square": c.ms_error, "degenerate": c.degenerate}
        for c in suite.contrasts]
    b = suite.intercept
    tables["Tests of Between-Subjects Effects"] = [
        {"Source": "Intercept", "Type III Sum of Squares": b.ss, "df": b.df,
         "Mean Square": b.ms, "F": b.F, "Sig.": b.p, "Partial Eta Squared": b.partial_eta2},
        {"Source": "Error", "Type III Sum of Squares": b.ss_error, "df": b.df_error,
         "Mean Square": b.ms_error}]
    tables["Parameter Estimates"] = [
        {"Dependent Variable": e.level, "Parameter": "Intercept", "B": e.mean,
         "Std. Error": e.se, "t": e.t, "Sig.": e.p, "Lower Bound": e.ci_low,
         "Upper Bound": e.ci_high, "Partial Eta Squared": e.partial_eta2}
        for e in suite.estimates]
    tables["Pairwise Comparisons"] = [
        {"(I) Cycle": p.i, "(J) Cycle": p.j, "Mean Difference (I-J)": p.mean_diff,
         "Std. Error": p.se, "Sig.": p.p_bonferroni, "Lower Bound": p.ci_low,
         "Upper Bound": p.ci_high} for p in suite.pairwise]
    mv = suite.multivariate
    if mv is not None:
        tables["Multivariate Tests"] = [
            {"Effect": name, "Value": val, "F": mv.F, "Hypothesis df": mv.df_hypothesis,
             "Error df": mv.df_error, "Sig.": mv.p, "Partial Eta Squared": mv.partial_eta2}
            for name, val in (("Pillai's trace", mv.pillai), ("Wilks' lambda", mv.wilks),
                              ("Hotelling's trace", mv.hotelling),
                              ("Roy's largest root", mv.roy))]
    else:
        tables["Multivariate Tests"] = []

    labels = [str(c) for c in m.column_labels]
    rows = np.asarray(m.row_labels, dtype=float)
    neg = rows < 0
    pos = rows > 0
    sign_means = []
    for j, lab in enumerate(labels):
        col = m.values[:, j]
        sign_means.append({
            "period": lab,
            "negative": float(col[neg].mean()) if neg.any() else None,
            "positive": float(col[pos].mean()) if pos.any() else None})
    charts = {
        "period_means": {"periods": labels, "means": [c.mean for c in suite.summary]},
        "sign_clustered": {"groups": ["negative", "positive"], "bars": sign_means},
        "scatter": {
            "positions": [float(r) for r in rows],
            "series": [{"period": lab, "values": m.values[:, j].tolist(),
                        "fit": ols_fit(rows, m.values[:, j])}
                       for j, lab in enumerate(labels)]},
    }
    bundle = {
        "design": {"subjects": m.n, "levels": m.k, "row_labels": list(m.row_labels),
                   "column_labels": labels, "dropped_positions": list(m.dropped)},
        "subject_matrix": m.values.tolist(),
        "tables": tables,
        "charts": charts,
        "notes": list(suite.notes),
    }
    if config is not None:
        bundle["config"] = config
    return _clean(bundle)


def dumps(bundle):
    return json.dumps(bundle, indent=2, sort_keys=False) + "\n"


# --------------------------------------------------------------------------
# markdown


def fmt(v, p_value=False):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, int):
        return str(v)
    if p_value and v < 5e-4:
        return "0.000"
    return f"{v:.3f}"


def _md_table(rows, columns):
    out = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for r in rows:
        out.append("| " + " | ".join(fmt(r.get(c), c in ("Sig.",)) for c in columns) + " |")
    return "\n".join(out)


def to_markdown(bundle):
    t = bundle["tables"]
    parts = [f"# Repeated-measures analysis ({bundle['design']['subjects']} subjects x "
             f"{bundle['design']['levels']} periods)"]

    for title in ("Negative Positions Statistical Description",
                  "Positive Positions Statistical Description"):
        if t.get(title):
            rows = [{"Statistic": k, "Value": v} for k, v in t[title].items()]
            parts += [f"## {title}", _md_table(rows, ["Statistic", "Value"])]
    if "Descriptive Statistics of Study Variables Dataset" in t:
        parts += ["## Descriptive Statistics of Study Variables Dataset",
                  _md_table(t["Descriptive Statistics of Study Variables Dataset"],
                            ["Variable", "N", "Min", "Max", "Mean", "Std. Dev."])]
    parts += ["## Descriptive Statistics of Period Samples",
              _md_table(t["Descriptive Statistics of Period Samples"],
                        ["Period", "Mean", "Std. Deviation", "N"])]
    parts += ["## Mauchly's Test of Sphericity",
              _md_table([t["Mauchly's Test of Sphericity"]],
                        ["Mauchly's W", "Approx. Chi-Square", "df", "Sig.",
                         "Greenhouse-Geisser", "Huynh-Feldt", "Lower-bound"])]
    w = t["Tests of Within-Subjects Effects"]
    cols = ["Source", "Correction", "Type III Sum of Squares", "df", "Mean Square", "F",
            "Sig.", "Partial Eta Squared"]
    parts += ["## Tests of Within-Subjects Effects", _md_table(w["effect"] + w["error"], cols)]
    parts += ["## Tests of Within-Subjects Contrasts",
              _md_table(t["Tests of Within-Subjects Contrasts"],
                        ["Source", "Cycle", "Type III Sum of Squares", "df", "Mean Square",
                         "F", "Sig.", "Partial Eta Squared", "Error Type III Sum of Squares",
                         "Error df", "Error Mean Square"])]
    parts += ["## Tests of Between-Subjects Effects",
              _md_table(t["Tests of Between-Subjects Effects"],
                        ["Source", "Type III Sum of Squares", "df", "Mean Square", "F",
                         "Sig.", "Partial Eta Squared"])]
    parts += ["## Parameter Estimates",
              _md_table(t["Parameter Estimates"],
                        ["Dependent Variable", "Parameter", "B", "Std. Error", "t", "Sig.",
                         "Lower Bound", "Upper Bound", "Partial Eta Squared"])]
    parts += ["## Pairwise Comparisons",
              _md_table(t["Pairwise Comparisons"],
                        ["(I) Cycle", "(J) Cycle", "Mean Difference (I-J)", "Std. Error",
                         "Sig.", "Lower Bound", "Upper Bound"]),
              "Adjustment for multiple comparisons: Bonferroni."]
    parts += ["## Multivariate Tests",
              _md_table(t["Multivariate Tests"],
                        ["Effect", "Value", "F", "Hypothesis df", "Error df", "Sig.",
                         "Partial Eta Squared"]) if t["Multivariate Tests"]
              else "Not computed (singular difference covariance)."]
    if bundle.get("notes"):
        parts += ["## Notes"] + [f"- {n}" for n in bundle["notes"]]
    return "\n\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# csv


def _flat_tables(bundle):
    for title, table in bundle["tables"].items():
        if table is None:
            continue
        if isinstance(table, dict) and "effect" in table:
            yield title, table["effect"] + table["error"]
        elif isinstance(table, dict):
            yield title, [table]
        else:
            yield title, table


def slug(title):
    return "".join(ch.lower() if ch.isalnum() else "_" for ch in title).strip("_").replace("__", "_")


def to_csv_files(bundle):
    """``{filename: csv text}``, one file per table."""
    out = {}
    for title, rows in _flat_tables(bundle):
        if not rows:
            continue
        cols = []
        for r in rows:
            for c in r:
                if c not in cols:
                    cols.append(c)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in cols})
        out[slug(title) + ".csv"] = buf.getvalue()
    return out


# --------------------------------------------------------------------------
# svg

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _num(v):
    return f"{v:.2f}"


def _svg(title, body, y_label, x_label):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">\n'
            f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
            f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>\n'
            f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>\n'
            f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>\n'
            f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle" font-size="12">{x_label}</text>\n'
            f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {_H / 2})">{y_label}</text>\n'
            + body + "</svg>\n")


def _y_axis(lo, hi):
    span = (hi - lo) or 1.0

    def sy(v):
        return _H - _MB - (v - lo) / span * (_H - _MT - _MB)

    ticks = []
    for i in range(6):
        v = lo + span * i / 5
        ticks.append(f'<text x="{_ML - 6}" y="{_num(sy(v) + 4)}" text-anchor="end" '
                     f'font-size="10">{v:.1f}</text>\n')
    return sy, "".join(ticks)


def _bar_range(values):
    vals = [v for v in values if v is not None]
    lo = min(0.0, min(vals, default=0.0))
    hi = max(0.0, max(vals, default=1.0))
    return lo, hi if hi > lo else lo + 1.0


def svg_period_means(bundle):
    c = bundle["charts"]["period_means"]
    lo, hi = _bar_range(c["means"])
    sy, ticks = _y_axis(lo, hi)
    n = len(c["means"])
    slot = (_W - _ML - _MR) / max(n, 1)
    body = [ticks]
    for i, (lab, v) in enumerate(zip(c["periods"], c["means"])):
        x = _ML + slot * i + slot * 0.2
        y0, y1 = sy(0.0), sy(v)
        body.append(f'<rect class="bar" x="{_num(x)}" y="{_num(min(y0, y1))}" '
                    f'width="{_num(slot * 0.6)}" height="{_num(abs(y0 - y1))}" '
                    f'fill="{_COLORS[0]}"/>\n')
        body.append(f'<text x="{_num(x + slot * 0.3)}" y="{_H - _MB + 15}" '
                    f'text-anchor="middle" font-size="11">{lab}</text>\n')
    return _svg("Mean encoder reading per period", "".join(body), "Mean encoder counts", "Period")


def svg_sign_clustered(bundle):
    c = bundle["charts"]["sign_clustered"]
    vals = [b[g] for b in c["bars"] for g in c["groups"]]
    lo, hi = _bar_range(vals)
    sy, ticks = _y_axis(lo, hi)
    n = len(c["bars"])
    slot = (_W - _ML - _MR) / max(n, 1)
    width = slot * 0.7 / len(c["groups"])
    body = [ticks]
    for i, bar in enumerate(c["bars"]):
        for g, group in enumerate(c["groups"]):
            v = bar[group]
            if v is None:
                continue
            x = _ML + slot * i + slot * 0.15 + g * width
            y0, y1 = sy(0.0), sy(v)
            body.append(f'<rect class="bar" data-group="{group}" x="{_num(x)}" '
                        f'y="{_num(min(y0, y1))}" width="{_num(width)}" '
                        f'height="{_num(abs(y0 - y1))}" fill="{_COLORS[g]}"/>\n')
        body.append(f'<text x="{_num(_ML + slot * (i + 0.5))}" y="{_H - _MB + 15}" '
                    f'text-anchor="middle" font-size="11">{bar["period"]}</text>\n')
    for g, group in enumerate(c["groups"]):
        body.append(f'<rect x="{_W - _MR - 110}" y="{_MT + 16 * g}" width="10" height="10" '
                    f'fill="{_COLORS[g]}"/><text x="{_W - _MR - 95}" y="{_MT + 9 + 16 * g}" '
                    f'font-size="11">{group}</text>\n')
    return _svg("Mean encoder reading by servo direction", "".join(body),
                "Mean encoder counts", "Period")


def svg_scatter(bundle):
    c = bundle["charts"]["scatter"]
    xs = c["positions"]
    ys = [v for s in c["series"] for v in s["values"]]
    if not xs:
        return _svg("Encoder reading vs commanded position", "", "Encoder counts",
                    "Commanded position (deg)")
    x_lo, x_hi = min(xs), max(xs)
    x_span = (x_hi - x_lo) or 1.0
    y_lo, y_hi = min(ys), max(ys)
    sy, ticks = _y_axis(y_lo, y_hi if y_hi > y_lo else y_lo + 1.0)

    def sx(v):
        return _ML + (v - x_lo) / x_span * (_W - _ML - _MR)

    body = [ticks]
    for i in range(6):
        v = x_lo + x_span * i / 5
        body.append(f'<text x="{_num(sx(v))}" y="{_H - _MB + 15}" text-anchor="middle" '
                    f'font-size="10">{v:.0f}</text>\n')
    for k, s in enumerate(c["series"]):
        col = _COLORS[k % len(_COLORS)]
        for x, y in zip(xs, s["values"]):
            body.append(f'<circle class="point" cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="2.5" '
                        f'fill="{col}"/>\n')
        f = s["fit"]
        body.append(f'<line class="fit" data-period="{s["period"]}" x1="{_num(sx(x_lo))}" '
                    f'y1="{_num(sy(f["intercept"] + f["slope"] * x_lo))}" '
                    f'x2="{_num(sx(x_hi))}" y2="{_num(sy(f["intercept"] + f["slope"] * x_hi))}" '
                    f'stroke="{col}" stroke-width="1.5"/>\n')
        body.append(f'<rect x="{_ML + 10}" y="{_MT + 16 * k}" width="10" height="10" '
                    f'fill="{col}"/><text x="{_ML + 25}" y="{_MT + 9 + 16 * k}" '
                    f'font-size="11">{s["period"]}</text>\n')
    return _svg("Encoder reading vs commanded position", "".join(body), "Encoder counts",
                "Commanded position (deg)")


def to_svg_files(bundle):
    return {"period_means.svg": svg_period_means(bundle),
            "sign_clustered.svg": svg_sign_clustered(bundle),
            "scatter_fit.svg": svg_scatter(bundle)}


FORMATS = ("markdown", "csv", "svg")


def render(bundle, fmt_name):
    """``{filename: text}`` for one output format."""
    if fmt_name == "markdown":
        return {"report.md": to_markdown(bundle)}
    if fmt_name == "csv":
        return to_csv_files(bundle)
    if fmt_name == "svg":
        return to_svg_files(bundle)
    raise ValueError(f"unknown report format {fmt_name!r}; choose from {', '.join(FORMATS)}")


def write_files(files, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        p = out / name
        p.write_text(text, newline="\n")
        written.append(p)
    return written


def suite_to_bundle(matrix, log=None, fdr_stats=None, config=None, alpha=0.05):
    return build_bundle(anova.analyze(matrix, alpha), log, fdr_stats, config)
