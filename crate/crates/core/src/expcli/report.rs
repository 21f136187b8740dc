//! Long-format CSV rows and the text summary derived from them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Numerical failure in this replicate; `metric_value` is NaN.
    Failed,
    /// A `bounds_check` inequality did not hold; `metric_value` is its slack.
    Violated,
}

/// One metric of one `(sweep value, replicate)` point. Metrics prefixed
/// `theory_` are closed-form predictions evaluated at that point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub s: Option<usize>,
    pub r: Option<f64>,
    pub eps: Option<f64>,
    pub metric_name: String,
    pub metric_value: f64,
    pub status: Status,
}

/// RFC-4180 with a header row. Floats use the shortest round-trip form, so
/// equal rows always produce equal bytes.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Config(format!("CSV write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Row>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<Vec<Row>, _>>()
        .map_err(|e| Error::Config(format!("CSV read failed: {e}")))
}

/// Mean and standard error of one metric at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryLine {
    pub sweep_value: f64,
    pub r: Option<f64>,
    pub metric_name: String,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation over `√count`; 0 for a single replicate.
    pub std_error: f64,
}

/// Groups by `(sweep_value, r, metric_name)` in first-appearance order;
/// failed rows are excluded and counted.
pub fn summarize(rows: &[Row]) -> Result<(Vec<SummaryLine>, usize)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("experiment rows"));
    }
    let mut keys: Vec<(u64, Option<u64>, &str)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    for row in rows {
        if row.status == Status::Failed {
            failed += 1;
            continue;
        }
        let key = (row.sweep_value.to_bits(), row.r.map(f64::to_bits), row.metric_name.as_str());
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(row.metric_value),
            None => {
                keys.push(key);
                values.push(vec![row.metric_value]);
            }
        }
    }
    let lines = keys
        .iter()
        .zip(&values)
        .map(|(&(sv, r, name), vals)| {
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let std_error = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            } else {
                0.0
            };
            SummaryLine {
                sweep_value: f64::from_bits(sv),
                r: r.map(f64::from_bits),
                metric_name: name.to_string(),
                count: vals.len(),
                mean,
                std_error,
            }
        })
        .collect();
    Ok((lines, failed))
}

fn experiment_note(experiment: &str) -> Option<&'static str> {
    match experiment {
        "lasso_curse" | "ols_vs_opt" => Some(
            "e_opt is the exact optimal adversarial risk, minimized by the oracle along the prox path \
             (no external solver); ratio = estimator risk / e_opt.",
        ),
        "at_pareto" => Some(
            "theory_lowsnr_ebar is the low-SNR limit gamma*(m + t*m') taken as an excess-risk prediction; \
             its noise normalization is ambiguous and it is reported for reference only.",
        ),
        "polydecay" => Some("theory_* values are asymptotic orders (no constants); compare slopes, not levels."),
        _ => None,
    }
}

/// Fixed-decimal report: one line per `(sweep value, r, metric)`.
pub fn emit_summary(rows: &[Row]) -> Result<String> {
    let (lines, failed) = summarize(rows)?;
    let first = &rows[0];
    let mut out = String::new();
    out.push_str(&format!("experiment: {}\n", first.experiment));
    if let Some(note) = experiment_note(&first.experiment) {
        out.push_str(&format!("note: {note}\n"));
    }
    let violated = rows.iter().filter(|r| r.status == Status::Violated).count();
    out.push_str(&format!("rows: {}  failed: {failed}  violated: {violated}\n", rows.len()));
    out.push_str(&format!(
        "{:>14} {:>10} {:<28} {:>5} {:>18} {:>14}\n",
        first.sweep_var, "r", "metric", "n", "mean", "stderr"
    ));
    for l in &lines {
        let r = l.r.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:>14.6} {:>10} {:<28} {:>5} {:>18.8} {:>14.8}\n",
            l.sweep_value, r, l.metric_name, l.count, l.mean, l.std_error
        ));
    }
    Ok(out)
}
