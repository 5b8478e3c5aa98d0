//! Analyses of a trajectory CSV written by `run`.

use std::fs;
use std::path::Path;

use regretlab::equilibrium::nash_support_enumeration;
use regretlab::export::{read_csv, rows_to_periods, rows_to_snapshots};
use regretlab::game::DEFAULT_MEMBERSHIP_TOL;
use regretlab::perturbation::{limit_set_from_snapshots, perturbation_from_records, LimitSetOptions};
use regretlab::{Error, JointDistribution, Result};
use serde_json::{json, Value};

use crate::config::{resolve_game, Analysis};

/// Game reference stored in the `run.json` next to `csv`.
fn sibling_game(csv: &Path) -> Result<String> {
    let meta = csv.with_file_name("run.json");
    let text = fs::read_to_string(&meta).map_err(|_| {
        Error::InvalidParameter(format!("no game given and no {} to read it from", meta.display()))
    })?;
    let v: Value = serde_json::from_str(&text)?;
    v.get("game")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Parse(format!("{} has no game field", meta.display())))
}

pub fn analyze(csv: &Path, analysis: Analysis, game: Option<&str>, tail: f64) -> Result<Value> {
    let reference = match game {
        Some(g) => g.to_string(),
        None => sibling_game(csv)?,
    };
    let game = resolve_game(&reference)?;
    let rows = read_csv(&game, fs::File::open(csv)?)?;
    let last = rows.last().ok_or_else(|| Error::Parse(format!("{} has no rows", csv.display())))?;
    let report = match analysis {
        Analysis::Hannan => {
            let z = JointDistribution::new(game.rows(), game.cols(), last.z.clone())?;
            serde_json::to_value(game.hannan_status(&z, DEFAULT_MEMBERSHIP_TOL)?)?
        }
        Analysis::Equilibria => {
            let z = JointDistribution::new(game.rows(), game.cols(), last.z.clone())?;
            let beliefs = z.marginals();
            let eqs = nash_support_enumeration(&game, 1e-9)?;
            Value::Array(
                eqs.iter()
                    .map(|e| json!({ "equilibrium": e.flat(), "distance": beliefs.sup_distance(e) }))
                    .collect(),
            )
        }
        Analysis::LimitSet => {
            let snaps = rows_to_snapshots(&game, &rows)?;
            let eqs = nash_support_enumeration(&game, 1e-9)?;
            serde_json::to_value(limit_set_from_snapshots(&game, &snaps, tail, &eqs, &LimitSetOptions::default())?)?
        }
        Analysis::Perturbation => {
            let periods = rows_to_periods(&rows).ok_or(Error::MissingRecords)?;
            let s = perturbation_from_records(&game, &periods)?;
            json!({
                "periods": s.t.len(),
                "max_epsilon": s.epsilon.iter().copied().fold(0.0, f64::max),
                "max_delta": s.delta.iter().copied().fold(0.0, f64::max),
                "regret_bound_excess": s.regret_bound_excess(),
            })
        }
    };
    Ok(json!({ "game": reference, "analysis": analysis.name(), "rows": rows.len(), "report": report }))
}
