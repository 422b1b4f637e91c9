//! Reads score tables for the `stats` subcommand.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use herdselect::stats::{average_ranks, friedman_statistic, posthoc_vs_control, posthoc_z, FriedmanResult};

use crate::StatsArgs;

#[derive(Debug, Serialize)]
pub struct Pair {
    pub first: String,
    pub second: String,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub algorithms: Vec<String>,
    pub n_datasets: usize,
    pub avg_ranks: Vec<f64>,
    pub friedman: FriedmanResult,
    pub pairwise: Vec<Pair>,
}

struct Table {
    algorithms: Vec<String>,
    rows: Vec<Vec<f64>>,
}

// Lines and columns in messages are 1-based, as an editor shows them.
fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| anyhow!("{}: file is empty", path.display()))?
        .context("reading header")?;
    let skip = usize::from(header.get(0).is_some_and(|h| h.eq_ignore_ascii_case("dataset")));
    let algorithms: Vec<String> = header.iter().skip(skip).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("line {line}"))?;
        if rec.len() != header.len() {
            bail!("line {line}: expected {} columns, found {}", header.len(), rec.len());
        }
        let row = rec
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| anyhow!("line {line}, column {}: cannot parse {cell:?} as a number", c + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table { algorithms, rows })
}

pub fn run(a: &StatsArgs) -> Result<StatsReport> {
    let table = read_table(&a.input)?;
    let (avg_ranks, n) = if a.pre_ranked {
        if table.rows.len() != 1 {
            bail!("pre-ranked input must have exactly one row of ranks, found {}", table.rows.len());
        }
        (table.rows[0].clone(), a.datasets.expect("clap requires --datasets"))
    } else {
        let n = table.rows.len();
        (average_ranks(&table.rows, !a.lower_is_better)?, n)
    };
    let friedman = friedman_statistic(&avg_ranks, n)?;
    let comparisons = match &a.control {
        Some(name) => {
            let c = table
                .algorithms
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| anyhow!("control {name:?} is not a column of the input"))?;
            posthoc_vs_control(&avg_ranks, n, c)?
        }
        None => posthoc_z(&avg_ranks, n)?,
    };
    let pairwise = comparisons
        .into_iter()
        .map(|p| Pair {
            first: table.algorithms[p.first].clone(),
            second: table.algorithms[p.second].clone(),
            z: p.z,
            p_value: p.p_value,
            reject: p.reject,
        })
        .collect();
    Ok(StatsReport {
        algorithms: table.algorithms,
        n_datasets: n,
        avg_ranks,
        friedman,
        pairwise,
    })
}
