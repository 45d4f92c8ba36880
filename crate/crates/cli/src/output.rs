//! CSV / JSON writers. Every float is written in its shortest round-tripping
//! decimal form, so files reload to the exact same `f64` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use houp_core::market::format_f64;
use houp_core::{HoupResult, Market, SamplerSpec, SimplexPoint, WealthPath};
use serde::Serialize;
use serde_json::json;

use crate::args::Format;

/// Everything a `run` produces.
pub struct Experiment {
    pub market: Market,
    pub spec: SamplerSpec,
    pub houp: HoupResult,
    pub best_crp: (SimplexPoint, WealthPath),
    pub split: WealthPath,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub kind: &'static str,
    pub final_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Experiment {
    /// Column name and values at times `0..=T` for every wealth series.
    pub fn series(&self) -> Vec<(String, Vec<f64>)> {
        let mut out: Vec<(String, Vec<f64>)> = self
            .market
            .labels()
            .iter()
            .enumerate()
            .map(|(k, l)| (l.clone(), self.market.cumulative_wealth(k)))
            .collect();
        for (i, level) in self.houp.levels.iter().enumerate() {
            out.push((format!("UP{}", i + 1), level.wealth.values().to_vec()));
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for (k, label) in self.market.labels().iter().enumerate() {
            rows.push(SummaryRow {
                name: label.clone(),
                kind: "asset",
                final_value: *self.market.cumulative_wealth(k).last().unwrap(),
                std_error: None,
                weights: None,
            });
        }
        for (i, level) in self.houp.levels.iter().enumerate() {
            rows.push(SummaryRow {
                name: format!("UP{}", i + 1),
                kind: "up",
                final_value: level.wealth.final_value(),
                std_error: Some(level.std_error),
                weights: None,
            });
        }
        rows.push(SummaryRow {
            name: "best-crp".into(),
            kind: "baseline",
            final_value: self.best_crp.1.final_value(),
            std_error: None,
            weights: Some(self.best_crp.0.weights().to_vec()),
        });
        rows.push(SummaryRow {
            name: "split-and-forget".into(),
            kind: "baseline",
            final_value: self.split.final_value(),
            std_error: None,
            weights: None,
        });
        rows
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn write_paths(exp: &Experiment, path: &Path, format: Format) -> Result<()> {
    let series = exp.series();
    let mut file = create(path)?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(file);
            let mut header = vec!["time".to_string()];
            header.extend(series.iter().map(|(n, _)| n.clone()));
            w.write_record(&header)?;
            for t in 0..=exp.market.steps() {
                let mut rec = vec![t.to_string()];
                rec.extend(series.iter().map(|(_, v)| format_f64(v[t])));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "time": (0..=exp.market.steps()).collect::<Vec<_>>(),
                "series": series
                    .iter()
                    .map(|(name, values)| json!({ "name": name, "values": values }))
                    .collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut file, &doc)?;
            writeln!(file)?;
        }
    }
    Ok(())
}

pub fn write_summary(exp: &Experiment, path: &Path, format: Format) -> Result<()> {
    let rows = exp.summary();
    let mut file = create(path)?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["name", "kind", "final_value", "std_error", "weights"])?;
            for r in &rows {
                w.write_record([
                    r.name.clone(),
                    r.kind.to_string(),
                    format_f64(r.final_value),
                    r.std_error.map(format_f64).unwrap_or_default(),
                    r.weights
                        .as_ref()
                        .map(|w| w.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(";"))
                        .unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "market": {
                    "labels": exp.market.labels(),
                    "steps": exp.market.steps(),
                },
                "sampler": exp.spec,
                "orders": exp.houp.order,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut file, &doc)?;
            writeln!(file)?;
        }
    }
    Ok(())
}

pub fn write_experiment(exp: &Experiment, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let ext = format.extension();
    write_paths(exp, &dir.join(format!("paths.{ext}")), format)?;
    write_summary(exp, &dir.join(format!("summary.{ext}")), format)
}

pub fn print_summary<W: Write>(mut out: W, exp: &Experiment) -> std::io::Result<()> {
    writeln!(
        out,
        "market: {} assets x {} steps",
        exp.market.assets(),
        exp.market.steps()
    )?;
    for r in exp.summary() {
        let mut line = format!("{:<20} {:<9} {:>16.6}", r.name, r.kind, r.final_value);
        if let Some(se) = r.std_error.filter(|s| *s > 0.0) {
            line.push_str(&format!("  +/- {se:.6}"));
        }
        if let Some(w) = &r.weights {
            let w: Vec<String> = w.iter().map(|x| format!("{x:.6}")).collect();
            line.push_str(&format!("  w = ({})", w.join(", ")));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
