//! CSV tables and SVG line charts for reports.

use super::metrics::ComparisonTable;
use super::sensitivity::SensitivityRow;
use super::shapley::AttributionTable;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("model,mse,margin_vs_best_pct\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{}\n", r.model_id, r.mse, r.margin_vs_best_pct));
    }
    out
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from(
        "granularity_hours,model,mse,nrmse,mse_zero,mse_nonzero,zero_count,nonzero_count\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.granularity_hours,
            r.report.model_id,
            r.report.mse,
            r.report.nrmse,
            opt(r.report.split.mse_zero),
            opt(r.report.split.mse_nonzero),
            r.report.split.zero_count,
            r.report.split.nonzero_count,
        ));
    }
    out
}

pub fn attribution_csv(table: &AttributionTable) -> String {
    let mut out = String::from("feature,mean_phi,mean_abs_phi\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{}\n", r.feature, r.mean_phi, r.mean_abs_phi));
    }
    out
}

/// Minimal standalone SVG line chart; one polyline per named series.
pub fn svg_line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, points) in series {
        for &(x, y) in points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || x_max <= x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() || y_max <= y_min {
        y_min = 0.0;
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_min) / (y_max - y_min) * (H - 2.0 * MARGIN);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n",
        W / 2.0
    );
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{m}\" y=\"{bl}\" font-family=\"sans-serif\" font-size=\"11\">{x_min:.3}</text>\n\
         <text x=\"{r}\" y=\"{bl}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{x_max:.3}</text>\n\
         <text x=\"6\" y=\"{b}\" font-family=\"sans-serif\" font-size=\"11\">{y_min:.3}</text>\n\
         <text x=\"6\" y=\"{tt}\" font-family=\"sans-serif\" font-size=\"11\">{y_max:.3}</text>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        bl = H - MARGIN + 16.0,
        tt = MARGIN + 4.0,
    ));
    for (k, (name, points)) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            W - MARGIN + 4.0,
            MARGIN + 16.0 * k as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
