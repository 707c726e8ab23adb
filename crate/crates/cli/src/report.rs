//! Convergence diagnostics and cross-method comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sweep::ResultRow;

/// Fit abscissa for a parameter: `1/chi` for bond dimensions and `delta`
/// itself for thresholds, so the exact limit sits at `x = 0` either way.
pub fn fit_abscissa(param_name: &str, value: f64) -> f64 {
    match param_name {
        "chi" => 1.0 / value,
        _ => value,
    }
}

/// Sorts rows from least to most accurate parameter.
pub fn order_by_accuracy(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        let (xa, xb) = (
            fit_abscissa(&a.param_name, a.param_value),
            fit_abscissa(&b.param_name, b.param_value),
        );
        xb.total_cmp(&xa)
    });
}

/// Self-convergence diagnostics of one (method, theta) series.
///
/// With `v1, v2, v3` the three most accurate values at abscissae
/// `x1, x2, x3` (see [`fit_abscissa`]):
///
/// * `sigma = sqrt(((v1 - m)^2 + (v2 - m)^2 + (v3 - m)^2) / 3)`, `m = (v1 + v2 + v3) / 3`;
/// * least squares `v = intercept + slope * x` with
///   `slope = sum((x - xm) * (v - m)) / sum((x - xm)^2)`, `intercept = m - slope * xm`;
/// * `delta = |v3 - intercept|`;
/// * `average = (v3 + v3 / norm) / 2`, `delta_bar = |v3 - average|`, with
///   `norm` the combined norm of the most accurate row.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub method: String,
    pub theta_h: f64,
    pub points: usize,
    pub top_param: f64,
    pub top_value: f64,
    pub fit: Option<Fit>,
    pub average: Option<Average>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub sigma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Average {
    pub norm: f64,
    pub value: f64,
    pub delta_bar: f64,
}

impl Diagnostics {
    pub fn available(&self) -> bool {
        self.fit.is_some()
    }
}

/// Diagnostics for one series. Rows may come in any order; they must share
/// method and theta. Fewer than three points leave the fit unavailable, and
/// a missing or non-positive norm leaves the average unavailable.
pub fn convergence_report(series: &[ResultRow]) -> Result<Diagnostics> {
    let first = series
        .first()
        .ok_or_else(|| Error::Config("empty series".into()))?;
    if series.iter().any(|r| r.method != first.method || r.theta_h != first.theta_h) {
        return Err(Error::Config("series mixes methods or theta values".into()));
    }
    let mut rows = series.to_vec();
    order_by_accuracy(&mut rows);
    let top = rows.last().expect("non-empty");
    let v = top.expectation;

    let fit = (rows.len() >= 3).then(|| {
        let last = &rows[rows.len() - 3..];
        let xs: Vec<f64> = last.iter().map(|r| fit_abscissa(&r.param_name, r.param_value)).collect();
        let ys: Vec<f64> = last.iter().map(|r| r.expectation).collect();
        let m = (ys[0] + ys[1] + ys[2]) / 3.0;
        let xm = (xs[0] + xs[1] + xs[2]) / 3.0;
        let sigma = (((ys[0] - m).powi(2) + (ys[1] - m).powi(2) + (ys[2] - m).powi(2)) / 3.0).sqrt();
        let sxy = (xs[0] - xm) * (ys[0] - m) + (xs[1] - xm) * (ys[1] - m) + (xs[2] - xm) * (ys[2] - m);
        let sxx = (xs[0] - xm).powi(2) + (xs[1] - xm).powi(2) + (xs[2] - xm).powi(2);
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = m - slope * xm;
        Fit {
            sigma,
            slope,
            intercept,
            delta: (v - intercept).abs(),
        }
    });

    let n = top.norm_mix;
    let average = (n.is_finite() && n > 0.0).then(|| {
        let value = (v + v / n) / 2.0;
        Average {
            norm: n,
            value,
            delta_bar: (v - value).abs(),
        }
    });

    Ok(Diagnostics {
        method: first.method.clone(),
        theta_h: first.theta_h,
        points: rows.len(),
        top_param: top.param_value,
        top_value: v,
        fit,
        average,
    })
}

/// Theta key tolerant to last-digit differences between tables.
fn theta_key(t: f64) -> i64 {
    (t * 1e12).round() as i64
}

/// Groups rows into series by method and theta, in first-seen method order.
pub fn series(rows: &[ResultRow]) -> Vec<Vec<ResultRow>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, i64), Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        let mi = match order.iter().position(|m| *m == r.method) {
            Some(i) => i,
            None => {
                order.push(r.method.clone());
                order.len() - 1
            }
        };
        groups.entry((mi, theta_key(r.theta_h))).or_default().push(r.clone());
    }
    groups.into_values().collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into())
}

pub fn render_report(diags: &[Diagnostics]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:>9} {:>3} {:>10} {:>14} {:>13} {:>14} {:>13} {:>14} {:>13}",
        "method", "theta_h", "n", "top_param", "value", "sigma", "extrapolated", "delta", "average", "delta_bar"
    );
    for d in diags {
        let _ = writeln!(
            s,
            "{:<6} {:>9.6} {:>3} {:>10} {:>14.6e} {:>13} {:>14} {:>13} {:>14} {:>13}",
            d.method,
            d.theta_h,
            d.points,
            d.top_param,
            d.top_value,
            fmt_opt(d.fit.map(|f| f.sigma)),
            fmt_opt(d.fit.map(|f| f.intercept)),
            fmt_opt(d.fit.map(|f| f.delta)),
            fmt_opt(d.average.map(|a| a.value)),
            fmt_opt(d.average.map(|a| a.delta_bar)),
        );
    }
    s
}

/// Cross-method comparison at each theta, using every method's most
/// accurate row.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub methods: Vec<String>,
    pub reference: String,
    pub points: Vec<ComparisonPoint>,
    /// Largest `|method - reference|` over theta, per method.
    pub max_error: BTreeMap<String, f64>,
    pub max_spread: f64,
    pub flagged: usize,
}

#[derive(Clone, Debug)]
pub struct ComparisonPoint {
    pub theta_h: f64,
    /// Values in `methods` order.
    pub values: Vec<f64>,
    pub spread: f64,
    /// `(i, j, values[i] - values[j])` for `i < j`.
    pub pairwise: Vec<(usize, usize, f64)>,
}

pub fn compare(rows: &[ResultRow], reference: &str) -> Result<Comparison> {
    let mut methods: Vec<String> = Vec::new();
    let mut best: BTreeMap<(String, i64), ResultRow> = BTreeMap::new();
    let mut thetas: BTreeMap<i64, f64> = BTreeMap::new();
    for group in series(rows) {
        let mut g = group;
        order_by_accuracy(&mut g);
        let top = g.pop().expect("non-empty group");
        if !methods.contains(&top.method) {
            methods.push(top.method.clone());
        }
        thetas.insert(theta_key(top.theta_h), top.theta_h);
        best.insert((top.method.clone(), theta_key(top.theta_h)), top);
    }
    if !methods.iter().any(|m| m == reference) {
        return Err(Error::MissingReference(reference.to_string()));
    }
    let mut missing = Vec::new();
    for m in &methods {
        for (k, t) in &thetas {
            if !best.contains_key(&(m.clone(), *k)) {
                missing.push(format!("{m}@theta_h={t}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::GridMismatch { missing });
    }
    let ri = methods.iter().position(|m| m == reference).expect("checked");
    let mut points = Vec::new();
    let mut max_error: BTreeMap<String, f64> = methods.iter().map(|m| (m.clone(), 0.0)).collect();
    let mut max_spread = 0.0f64;
    let mut flagged = 0;
    for (k, t) in &thetas {
        let chosen: Vec<&ResultRow> = methods.iter().map(|m| &best[&(m.clone(), *k)]).collect();
        flagged += chosen.iter().filter(|r| r.is_flagged()).count();
        let values: Vec<f64> = chosen.iter().map(|r| r.expectation).collect();
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = hi - lo;
        max_spread = max_spread.max(spread);
        let mut pairwise = Vec::new();
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                pairwise.push((i, j, values[i] - values[j]));
            }
        }
        for (m, v) in methods.iter().zip(&values) {
            let e = max_error.get_mut(m).expect("present");
            *e = e.max((v - values[ri]).abs());
        }
        points.push(ComparisonPoint {
            theta_h: *t,
            values,
            spread,
            pairwise,
        });
    }
    Ok(Comparison {
        methods,
        reference: reference.to_string(),
        points,
        max_error,
        max_spread,
        flagged,
    })
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>9}", "theta_h");
    for m in &c.methods {
        let _ = write!(s, " {m:>14}");
    }
    let _ = writeln!(s, " {:>12}", "spread");
    for p in &c.points {
        let _ = write!(s, "{:>9.6}", p.theta_h);
        for v in &p.values {
            let _ = write!(s, " {v:>14.6e}");
        }
        let _ = writeln!(s, " {:>12.3e}", p.spread);
    }
    let _ = writeln!(s, "pairwise max |difference|:");
    for i in 0..c.methods.len() {
        for j in i + 1..c.methods.len() {
            let worst = c
                .points
                .iter()
                .flat_map(|p| p.pairwise.iter().filter(|(a, b, _)| *a == i && *b == j).map(|(_, _, d)| d.abs()))
                .fold(0.0, f64::max);
            let _ = writeln!(s, "  {} - {}: {worst:.3e}", c.methods[i], c.methods[j]);
        }
    }
    let _ = writeln!(s, "max |error| vs {}:", c.reference);
    for (m, e) in &c.max_error {
        let _ = writeln!(s, "  {m}: {e:.3e}");
    }
    let _ = writeln!(s, "max spread: {:.3e}", c.max_spread);
    s
}
