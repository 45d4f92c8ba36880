use std::fs;
use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use houp_core::market::{load_csv, toy_market, CsvOptions};
use houp_core::oracle::{exact_houp, MomentRule, RationalMarket, ENUMERATION_LIMIT};
use houp_core::{
    best_crp_hindsight, houp, split_and_forget, Market, Permutation, Rational, SamplerSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{Format, Generator, PermuteArgs, RunArgs};
use crate::output::{print_summary, write_experiment, Experiment};

/// Relative tolerance of the order-1 permutation invariance report.
const INVARIANCE_TOLERANCE: f64 = 1e-10;

pub fn load_market(args: &RunArgs) -> Result<Market> {
    let market = match (&args.data, args.generator) {
        (Some(path), _) => {
            let opts = CsvOptions::default();
            load_csv(path, &opts)?
        }
        (None, Some(Generator::Toy)) => toy_market(args.steps)?,
        (None, Some(Generator::Table1)) => {
            Market::unlabeled(vec![vec![1.0, 2.0], vec![2.0, 1.0]])?
        }
        (None, Some(Generator::Table2)) => {
            Market::unlabeled(vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 1.0]])?
        }
        (None, None) => anyhow::bail!("either --data or --generator is required"),
    };
    Ok(match &args.assets {
        Some(labels) => market.select(labels)?,
        None => market,
    })
}

pub fn sampler(args: &RunArgs, dim: usize) -> SamplerSpec {
    SamplerSpec {
        nodes: args.quad_nodes as usize,
        samples: args.samples as usize,
        seed: args.seed,
        ..SamplerSpec::default()
    }
    .for_dimension(dim)
}

pub fn run_experiment(market: Market, args: &RunArgs) -> Result<Experiment> {
    let spec = sampler(args, market.assets());
    let houp = houp(&market, args.orders as usize, &spec)?;
    let best_crp = best_crp_hindsight(&market, args.resolution as usize)?;
    let split = split_and_forget(&market);
    Ok(Experiment {
        market,
        spec,
        houp,
        best_crp,
        split,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let market = load_market(args)?;
    let exp = run_experiment(market, args)?;
    let stdout = std::io::stdout();
    print_summary(stdout.lock(), &exp)?;
    if let Some(dir) = &args.out {
        write_experiment(&exp, dir, args.format)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct LevelComparison {
    level: usize,
    original: f64,
    permuted: f64,
    delta: f64,
    relative_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_original: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_permuted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_delta: Option<String>,
}

/// Exact final values of every level, when the enumeration is small enough.
fn exact_levels(market: &Market, order: usize) -> Option<Vec<Rational>> {
    let k = market.assets() + order - 1;
    let count = (k as u128).checked_pow(market.steps() as u32)?;
    if count > ENUMERATION_LIMIT {
        return None;
    }
    let exact = RationalMarket::from_market(market);
    let h = exact_houp(&exact, order, market.steps(), MomentRule::Dirichlet).ok()?;
    Some(h.values.iter().map(|v| v.last().unwrap().clone()).collect())
}

pub fn cmd_permute(args: &PermuteArgs) -> Result<ExitCode> {
    let market = load_market(&args.run)?;
    let sigma = Permutation::parse(&args.perm, market.steps())
        .with_context(|| format!("bad --perm `{}`", args.perm))?;
    let permuted = market.permute(&sigma)?;
    let order = args.run.orders as usize;

    let exact_a = exact_levels(&market, order);
    let exact_b = exact_levels(&permuted, order);
    let original = run_experiment(market, &args.run)?;
    let shuffled = run_experiment(permuted, &args.run)?;

    let rows: Vec<LevelComparison> = original
        .houp
        .final_values()
        .into_iter()
        .zip(shuffled.houp.final_values())
        .enumerate()
        .map(|(i, (a, b))| {
            let ea = exact_a.as_ref().map(|v| v[i].clone());
            let eb = exact_b.as_ref().map(|v| v[i].clone());
            let exact_delta = match (&ea, &eb) {
                (Some(x), Some(y)) => Some((x - y).to_string()),
                _ => None,
            };
            LevelComparison {
                level: i + 1,
                original: a,
                permuted: b,
                delta: b - a,
                relative_delta: (b - a).abs() / a,
                exact_original: ea.map(|r| r.to_string()),
                exact_permuted: eb.map(|r| r.to_string()),
                exact_delta,
            }
        })
        .collect();
    let level_one = rows[0].relative_delta;
    let invariant = level_one <= INVARIANCE_TOLERANCE;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "permutation: {}", args.perm)?;
    for r in &rows {
        write!(
            out,
            "UP{:<3} original {:>16.9}  permuted {:>16.9}  delta {:+.3e}",
            r.level, r.original, r.permuted, r.delta
        )?;
        if let (Some(a), Some(b)) = (&r.exact_original, &r.exact_permuted) {
            write!(out, "  exact {a} vs {b}")?;
        }
        writeln!(out)?;
    }
    writeln!(
        out,
        "level-1 invariance: relative delta {level_one:.3e} ({})",
        if invariant { "holds" } else { "violated" }
    )?;

    if let Some(dir) = &args.run.out {
        write_experiment(&original, &dir.join("original"), args.run.format)?;
        write_experiment(&shuffled, &dir.join("permuted"), args.run.format)?;
        let path = dir.join(format!("comparison.{}", args.run.format.extension()));
        write_comparison(&path, args, &sigma, &rows, invariant)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_comparison(
    path: &std::path::Path,
    args: &PermuteArgs,
    sigma: &Permutation,
    rows: &[LevelComparison],
    invariant: bool,
) -> Result<()> {
    use houp_core::market::format_f64;
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    match args.run.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(file);
            w.write_record([
                "level",
                "original",
                "permuted",
                "delta",
                "relative_delta",
                "exact_original",
                "exact_permuted",
                "exact_delta",
            ])?;
            for r in rows {
                w.write_record([
                    r.level.to_string(),
                    format_f64(r.original),
                    format_f64(r.permuted),
                    format_f64(r.delta),
                    format_f64(r.relative_delta),
                    r.exact_original.clone().unwrap_or_default(),
                    r.exact_permuted.clone().unwrap_or_default(),
                    r.exact_delta.clone().unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "permutation": args.perm,
                "mapping": sigma.mapping().iter().map(|m| m + 1).collect::<Vec<_>>(),
                "level_one_invariant": invariant,
                "levels": rows,
            });
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, &doc)?;
            writeln!(file)?;
        }
    }
    Ok(())
}
