//! Plot-ready CSV output for trajectories and reading it back.
//!
//! Every trajectory kind uses the same columns: `t`, the realized actions
//! `a1` and `a2` (empty when there are none), `r1_max`, `r2_max`, the beliefs
//! `x1_<label>` and `x2_<label>`, and the joint distribution `z_<l1>_<l2>`.

use std::io::{Read, Write};

use crate::continuous::{ContinuousTrajectory, FlowTrajectory};
use crate::discrete::{PeriodRecord, Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::game::{Game, JointDistribution, MixedProfile, Player};

const FIXED: usize = 5;

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub actions: Option<(usize, usize)>,
    pub r_max: [f64; 2],
    pub beliefs: [Vec<f64>; 2],
    pub z: Vec<f64>,
}

fn header(game: &Game) -> Vec<String> {
    let mut h: Vec<String> = ["t", "a1", "a2", "r1_max", "r2_max"].iter().map(|s| s.to_string()).collect();
    for k in 0..game.rows() {
        h.push(format!("x1_{}", game.label(Player::One, k)));
    }
    for k in 0..game.cols() {
        h.push(format!("x2_{}", game.label(Player::Two, k)));
    }
    for a1 in 0..game.rows() {
        for a2 in 0..game.cols() {
            h.push(format!("z_{}_{}", game.label(Player::One, a1), game.label(Player::Two, a2)));
        }
    }
    h
}

fn marginal_pair(game: &Game, z: &[f64]) -> [Vec<f64>; 2] {
    let n = game.cols();
    let mut x = [vec![0.0; game.rows()], vec![0.0; n]];
    for (idx, w) in z.iter().enumerate() {
        x[0][idx / n] += w;
        x[1][idx % n] += w;
    }
    x
}

fn write_rows<W: Write>(game: &Game, out: W, rows: impl Iterator<Item = (String, CsvRow)>) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(game))?;
    let mut count = 0;
    for (t, row) in rows {
        let mut rec = vec![t];
        match row.actions {
            Some((a1, a2)) => {
                rec.push(game.label(Player::One, a1));
                rec.push(game.label(Player::Two, a2));
            }
            None => rec.extend([String::new(), String::new()]),
        }
        rec.push(row.r_max[0].to_string());
        rec.push(row.r_max[1].to_string());
        rec.extend(row.beliefs.iter().flatten().map(|v| v.to_string()));
        rec.extend(row.z.iter().map(|v| v.to_string()));
        w.write_record(rec)?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

/// Writes one row per snapshot and returns the row count.
pub fn write_trajectory_csv<W: Write>(game: &Game, traj: &Trajectory, out: W) -> Result<usize> {
    write_rows(
        game,
        out,
        traj.snapshots.iter().map(|s| {
            let row = CsvRow {
                t: s.t as f64,
                actions: s.last_realized,
                r_max: s.r_max,
                beliefs: [s.beliefs.get(Player::One).weights().to_vec(), s.beliefs.get(Player::Two).weights().to_vec()],
                z: s.z.weights().to_vec(),
            };
            (s.t.to_string(), row)
        }),
    )
}

/// Writes one row per breakpoint of a fictitious-play path.
pub fn write_cfp_csv<W: Write>(game: &Game, traj: &ContinuousTrajectory, out: W) -> Result<usize> {
    write_rows(
        game,
        out,
        traj.breakpoints.iter().map(|b| {
            let row = CsvRow { t: b.t, actions: None, r_max: b.r_max, beliefs: b.x.clone(), z: b.z.clone() };
            (b.t.to_string(), row)
        }),
    )
}

/// Writes one row per accepted integration step of a no-regret flow.
pub fn write_flow_csv<W: Write>(game: &Game, traj: &FlowTrajectory, out: W) -> Result<usize> {
    write_rows(
        game,
        out,
        traj.records.iter().map(|r| {
            let row = CsvRow { t: r.t, actions: None, r_max: r.r_max, beliefs: marginal_pair(game, &r.z), z: r.z.clone() };
            (r.t.to_string(), row)
        }),
    )
}

fn parse_action(game: &Game, player: Player, s: &str) -> Result<usize> {
    (0..game.actions(player))
        .find(|&k| game.label(player, k) == s)
        .or_else(|| s.parse().ok().filter(|&k: &usize| k < game.actions(player)))
        .ok_or_else(|| Error::Parse(format!("unknown action '{s}' for {player}")))
}

/// Reads rows written by this module for `game`.
pub fn read_csv<R: Read>(game: &Game, input: R) -> Result<Vec<CsvRow>> {
    let (m, n) = (game.rows(), game.cols());
    let width = FIXED + m + n + m * n;
    let mut r = csv::Reader::from_reader(input);
    let h = r.headers()?.clone();
    if h.len() != width {
        return Err(Error::DimensionMismatch(format!("expected {width} columns for a {m}x{n} game, found {}", h.len())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let actions = match (&rec[1], &rec[2]) {
            ("", "") => None,
            (a1, a2) => Some((parse_action(game, Player::One, a1)?, parse_action(game, Player::Two, a2)?)),
        };
        let vals = (FIXED..width).map(|j| num(&rec[j])).collect::<Result<Vec<_>>>()?;
        rows.push(CsvRow {
            t: num(&rec[0])?,
            actions,
            r_max: [num(&rec[3])?, num(&rec[4])?],
            beliefs: [vals[..m].to_vec(), vals[m..m + n].to_vec()],
            z: vals[m + n..].to_vec(),
        });
    }
    Ok(rows)
}

/// Rebuilds snapshots from rows with integer times, recomputing regrets
/// from the joint distribution.
pub fn rows_to_snapshots(game: &Game, rows: &[CsvRow]) -> Result<Vec<Snapshot>> {
    rows.iter()
        .map(|r| {
            if r.t.fract() != 0.0 || r.t < 1.0 {
                return Err(Error::Parse(format!("period {} is not a positive integer", r.t)));
            }
            let z = JointDistribution::new(game.rows(), game.cols(), r.z.clone())?;
            let regrets = [game.regret_vector(Player::One, &z)?.values, game.regret_vector(Player::Two, &z)?.values];
            let beliefs = z.marginals();
            let last_mixed = match r.actions {
                Some((a1, a2)) => MixedProfile::pure(game, a1, a2),
                None => beliefs.clone(),
            };
            Ok(Snapshot {
                t: r.t as u64,
                r_max: r.r_max,
                regrets,
                z,
                beliefs,
                last_realized: r.actions,
                last_mixed,
            })
        })
        .collect()
}

/// Period records, if the rows cover consecutive periods with realized play.
pub fn rows_to_periods(rows: &[CsvRow]) -> Option<Vec<PeriodRecord>> {
    let first = rows.first()?.t;
    rows.iter()
        .enumerate()
        .map(|(j, r)| {
            (r.t == first + j as f64 && r.actions.is_some()).then(|| PeriodRecord {
                t: r.t as u64,
                actions: r.actions,
                r_max: r.r_max,
                mixed: None,
            })
        })
        .collect()
}
