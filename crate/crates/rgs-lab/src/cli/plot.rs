//! The `plot` subcommand: renders one quantity from a trace CSV as a
//! self-contained SVG. Output is a pure function of the input rows and
//! options — no timestamps, no external references — so repeated runs are
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::cli::artifacts::TraceCsvRow;
use crate::cli::{runtime, usage, CliError};

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// Quantity to plot; required when the CSV holds more than one.
    pub quantity: Option<String>,
    /// Direction index to plot; required when the quantity was traced for
    /// more than one.
    pub ell: Option<usize>,
    pub log_y: bool,
    /// Collapse trials into a per-`k` mean instead of one line per trial.
    pub mean: bool,
}

#[derive(Debug)]
pub struct PlotRender {
    pub svg: String,
    /// Points discarded by the log-scale transform (non-positive values).
    pub dropped: usize,
    pub series_count: usize,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 770.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 460.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn render(rows: &[TraceCsvRow], opts: &PlotOptions) -> Result<PlotRender, CliError> {
    let ok_rows: Vec<&TraceCsvRow> = rows
        .iter()
        .filter(|r| r.status == "ok" && r.value.is_some())
        .collect();
    if ok_rows.is_empty() {
        return Err(runtime("no plottable rows (status ok with a value)"));
    }

    let quantities: BTreeSet<&str> = ok_rows.iter().map(|r| r.quantity.as_str()).collect();
    let quantity: &str = match &opts.quantity {
        Some(q) => {
            if !quantities.contains(q.as_str()) {
                return Err(usage(format!(
                    "quantity {q:?} not in this trace; available: {}",
                    join(&quantities)
                )));
            }
            q
        }
        None if quantities.len() == 1 => quantities.iter().next().unwrap(),
        None => {
            return Err(usage(format!(
                "trace holds several quantities ({}); pick one with --quantity",
                join(&quantities)
            )))
        }
    };
    let q_rows: Vec<&TraceCsvRow> = ok_rows
        .iter()
        .filter(|r| r.quantity == quantity)
        .copied()
        .collect();

    let ells: BTreeSet<Option<usize>> = q_rows.iter().map(|r| r.ell).collect();
    let ell: Option<usize> = match opts.ell {
        Some(l) => {
            if !ells.contains(&Some(l)) {
                return Err(usage(format!(
                    "ell {l} not traced for {quantity}; available: {}",
                    join_ells(&ells)
                )));
            }
            Some(l)
        }
        None if ells.len() == 1 => *ells.iter().next().unwrap(),
        None => {
            return Err(usage(format!(
                "{quantity} was traced for several directions ({}); pick one with --ell",
                join_ells(&ells)
            )))
        }
    };
    let rows: Vec<&TraceCsvRow> = q_rows.into_iter().filter(|r| r.ell == ell).collect();

    // One series per trial, sorted by k; or one mean series across trials.
    let mut dropped = 0usize;
    let mut series: Vec<Vec<(f64, f64)>> = Vec::new();
    let transform = |v: f64| -> Option<f64> {
        if opts.log_y {
            if v > 0.0 {
                Some(v.log10())
            } else {
                None
            }
        } else {
            Some(v)
        }
    };
    if opts.mean {
        let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            by_k.entry(r.k).or_default().push(r.value.unwrap());
        }
        let mut line = Vec::new();
        for (k, vals) in by_k {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            match transform(mean) {
                Some(y) => line.push((k as f64, y)),
                None => dropped += 1,
            }
        }
        series.push(line);
    } else {
        let mut by_trial: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
        for r in &rows {
            by_trial
                .entry(r.trial)
                .or_default()
                .push((r.k, r.value.unwrap()));
        }
        for (_, mut pts) in by_trial {
            pts.sort_by_key(|(k, _)| *k);
            let mut line = Vec::new();
            for (k, v) in pts {
                match transform(v) {
                    Some(y) => line.push((k as f64, y)),
                    None => dropped += 1,
                }
            }
            series.push(line);
        }
    }
    series.retain(|s| !s.is_empty());
    if series.is_empty() {
        return Err(runtime(
            "nothing to plot after filtering (log scale dropped every point?)",
        ));
    }

    let experiment_id = rows
        .first()
        .map(|r| r.experiment_id.as_str())
        .unwrap_or("trace");
    let title = match ell {
        Some(l) => format!("{experiment_id}: {quantity} (ell={l})"),
        None => format!("{experiment_id}: {quantity}"),
    };
    let y_label = if opts.log_y {
        format!("{quantity} (log10)")
    } else {
        quantity.to_string()
    };
    let svg = draw(&series, &title, &y_label, opts.log_y);
    Ok(PlotRender {
        svg,
        dropped,
        series_count: series.len(),
    })
}

fn draw(series: &[Vec<(f64, f64)>], title: &str, y_label: &str, log_y: bool) -> String {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for line in series {
        for &(x, y) in line {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max - x_min < 1e-12 {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if y_max - y_min < 1e-12 {
        let pad = y_max.abs().max(1.0) * 0.5;
        y_min -= pad;
        y_max += pad;
    }
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let sy = |y: f64| BOTTOM - (y - y_min) / (y_max - y_min) * (BOTTOM - TOP);

    let mut s = String::with_capacity(4096);
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .expect("string writes cannot fail");
    s.push_str("<rect x=\"0\" y=\"0\" width=\"800\" height=\"520\" fill=\"white\"/>\n");
    writeln!(
        s,
        "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">{}</text>",
        xml_escape(title)
    )
    .expect("string writes cannot fail");

    // Axes, ticks, and faint grid lines.
    write!(
        s,
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n"
    )
    .expect("string writes cannot fail");
    for i in 0..5 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let xp = sx(xv);
        write!(
            s,
            "<line x1=\"{xp:.2}\" y1=\"{TOP}\" x2=\"{xp:.2}\" y2=\"{BOTTOM}\" stroke=\"#dddddd\"/>\n<line x1=\"{xp:.2}\" y1=\"{BOTTOM}\" x2=\"{xp:.2}\" y2=\"466\" stroke=\"black\"/>\n<text x=\"{xp:.2}\" y=\"482\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">{}</text>\n",
            xv.round() as i64
        )
        .expect("string writes cannot fail");

        let yv = y_min + f * (y_max - y_min);
        let yp = sy(yv);
        let label = if log_y {
            format!("{:.3e}", 10f64.powf(yv))
        } else {
            format!("{yv:.3e}")
        };
        write!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{yp:.2}\" x2=\"{RIGHT}\" y2=\"{yp:.2}\" stroke=\"#dddddd\"/>\n<line x1=\"64\" y1=\"{yp:.2}\" x2=\"{LEFT}\" y2=\"{yp:.2}\" stroke=\"black\"/>\n<text x=\"60\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\">{label}</text>\n",
            yp + 4.0
        )
        .expect("string writes cannot fail");
    }
    write!(
        s,
        "<text x=\"400\" y=\"508\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">k</text>\n<text x=\"16\" y=\"250\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 16 250)\">{}</text>\n",
        xml_escape(y_label)
    )
    .expect("string writes cannot fail");

    for (idx, line) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if line.len() == 1 {
            let (x, y) = line[0];
            writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\"/>",
                sx(x),
                sy(y)
            )
            .expect("string writes cannot fail");
            continue;
        }
        let mut points = String::with_capacity(line.len() * 14);
        for (i, &(x, y)) in line.iter().enumerate() {
            if i > 0 {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", sx(x), sy(y)).expect("string writes cannot fail");
        }
        writeln!(
            s,
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        )
        .expect("string writes cannot fail");
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn join(items: &BTreeSet<&str>) -> String {
    items.iter().copied().collect::<Vec<_>>().join(", ")
}

fn join_ells(items: &BTreeSet<Option<usize>>) -> String {
    items
        .iter()
        .map(|e| match e {
            Some(l) => l.to_string(),
            None => "none".to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        trial: u64,
        k: usize,
        quantity: &str,
        ell: Option<usize>,
        value: Option<f64>,
        status: &str,
    ) -> TraceCsvRow {
        TraceCsvRow {
            experiment_id: "demo".into(),
            method: "rgs".into(),
            trial,
            k,
            quantity: quantity.into(),
            ell,
            value,
            status: status.into(),
        }
    }

    #[test]
    fn renders_one_polyline_per_trial() {
        let rows = vec![
            row(0, 0, "sq_error", None, Some(4.0), "ok"),
            row(0, 10, "sq_error", None, Some(2.0), "ok"),
            row(1, 0, "sq_error", None, Some(4.5), "ok"),
            row(1, 10, "sq_error", None, Some(1.5), "ok"),
        ];
        let out = render(&rows, &PlotOptions::default()).unwrap();
        assert_eq!(out.series_count, 2);
        assert_eq!(out.dropped, 0);
        assert_eq!(out.svg.matches("<polyline").count(), 2);
        assert!(out.svg.starts_with("<?xml version=\"1.0\""));
        assert!(out.svg.contains("demo: sq_error"));
        assert!(out.svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn log_scale_drops_nonpositive_points() {
        let rows = vec![
            row(0, 0, "projection_signed", Some(1), Some(1.0), "ok"),
            row(0, 10, "projection_signed", Some(1), Some(-0.5), "ok"),
            row(0, 20, "projection_signed", Some(1), Some(0.25), "ok"),
        ];
        let opts = PlotOptions {
            log_y: true,
            ..PlotOptions::default()
        };
        let out = render(&rows, &opts).unwrap();
        assert_eq!(out.dropped, 1);
        assert!(out.svg.contains("(log10)"));
    }

    #[test]
    fn several_quantities_need_an_explicit_choice() {
        let rows = vec![
            row(0, 0, "sq_error", None, Some(1.0), "ok"),
            row(0, 0, "rayleigh_ratio", None, Some(0.5), "ok"),
        ];
        let err = render(&rows, &PlotOptions::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        let msg = format!("{err}");
        assert!(msg.contains("rayleigh_ratio") && msg.contains("sq_error"));

        let opts = PlotOptions {
            quantity: Some("sq_error".into()),
            ..PlotOptions::default()
        };
        assert!(render(&rows, &opts).is_ok());
    }

    #[test]
    fn several_directions_need_an_explicit_choice() {
        let rows = vec![
            row(0, 0, "projection_signed", Some(1), Some(1.0), "ok"),
            row(0, 0, "projection_signed", Some(3), Some(0.5), "ok"),
        ];
        let err = render(&rows, &PlotOptions::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        let opts = PlotOptions {
            ell: Some(3),
            ..PlotOptions::default()
        };
        let out = render(&rows, &opts).unwrap();
        assert!(out.svg.contains("ell=3"));
        // A single point renders as a marker, not a polyline.
        assert_eq!(out.svg.matches("<circle").count(), 1);
    }

    #[test]
    fn mean_mode_collapses_trials_into_one_series() {
        let rows = vec![
            row(0, 0, "sq_error", None, Some(4.0), "ok"),
            row(1, 0, "sq_error", None, Some(2.0), "ok"),
            row(0, 10, "sq_error", None, Some(2.0), "ok"),
            row(1, 10, "sq_error", None, Some(1.0), "ok"),
        ];
        let opts = PlotOptions {
            mean: true,
            ..PlotOptions::default()
        };
        let out = render(&rows, &opts).unwrap();
        assert_eq!(out.series_count, 1);
        assert_eq!(out.svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn undefined_and_failed_rows_are_ignored() {
        let rows = vec![
            row(0, 0, "direction_projection", Some(1), Some(0.5), "ok"),
            row(0, 10, "direction_projection", Some(1), None, "undefined"),
            row(1, 0, "direction_projection", Some(1), None, "error"),
        ];
        let out = render(&rows, &PlotOptions::default()).unwrap();
        assert_eq!(out.series_count, 1);
        let err = render(&rows[1..], &PlotOptions::default()).unwrap_err();
        assert!(matches!(err, CliError::Runtime(_)));
    }

    #[test]
    fn two_renders_are_byte_identical() {
        let rows: Vec<TraceCsvRow> = (0..3)
            .flat_map(|t| {
                (0..5).map(move |i| {
                    row(
                        t,
                        i * 7,
                        "sq_error",
                        None,
                        Some(1.0 / (1.0 + i as f64 + t as f64)),
                        "ok",
                    )
                })
            })
            .collect();
        let a = render(&rows, &PlotOptions::default()).unwrap();
        let b = render(&rows, &PlotOptions::default()).unwrap();
        assert_eq!(a.svg, b.svg);
    }
}
