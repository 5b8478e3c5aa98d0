//! `game info`: payoffs and static solution concepts of a game.

use std::fmt::Write;

use regretlab::catalog::ENTRIES;
use regretlab::equilibrium::{curb_enumerate, nash_support_enumeration, strict_dominance_eliminate, ScanOrder};
use regretlab::{Error, Player, Result};
use serde::Serialize;

use crate::config::resolve_game;

#[derive(Debug, Clone, Serialize)]
pub struct GameInfo {
    pub reference: String,
    pub rows: usize,
    pub cols: usize,
    pub labels: [Vec<String>; 2],
    pub payoffs: [Vec<Vec<f64>>; 2],
    pub payoff_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<&'static str>,
    pub nash: Vec<[Vec<f64>; 2]>,
    /// Actions surviving iterated strict dominance by mixed actions.
    pub undominated: [Vec<String>; 2],
    /// Curb sets, omitted for games too large to enumerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curb_sets: Option<Vec<String>>,
}

pub fn game_info(reference: &str) -> Result<GameInfo> {
    let game = resolve_game(reference)?;
    let labels = [0, 1].map(|i| {
        let p = Player::BOTH[i];
        (0..game.actions(p)).map(|k| game.label(p, k)).collect::<Vec<_>>()
    });
    let payoffs = [Player::One, Player::Two]
        .map(|p| (0..game.rows()).map(|a1| (0..game.cols()).map(|a2| game.payoff(p, a1, a2)).collect()).collect());
    let base = reference.split(':').next().unwrap_or(reference);
    let provenance = ENTRIES.iter().find(|e| e.name == base).map(|e| e.provenance);
    let nash = nash_support_enumeration(&game, 1e-9)?
        .iter()
        .map(|p| [p.get(Player::One).weights().to_vec(), p.get(Player::Two).weights().to_vec()])
        .collect();
    let elim = strict_dominance_eliminate(&game, true, ScanOrder::PlayerOneFirst)?;
    let undominated = [0, 1].map(|i| elim.surviving[i].iter().map(|&k| labels[i][k].clone()).collect());
    let curb_sets = match curb_enumerate(&game) {
        Ok(sets) => Some(sets.iter().map(|c| c.describe(&game)).collect()),
        Err(Error::OversizedGame { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GameInfo {
        reference: reference.to_string(),
        rows: game.rows(),
        cols: game.cols(),
        labels,
        payoffs,
        payoff_bound: game.payoff_bound(),
        provenance,
        nash,
        undominated,
        curb_sets,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Human-readable rendering.
pub fn render(info: &GameInfo) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "game {} ({}x{})", info.reference, info.rows, info.cols);
    if let Some(p) = info.provenance {
        let _ = writeln!(s, "  {p}");
    }
    let _ = writeln!(s, "payoffs (player 1, player 2):");
    let _ = writeln!(s, "{:>8} {}", "", info.labels[1].iter().map(|l| format!("{l:>14}")).collect::<String>());
    for (a1, l) in info.labels[0].iter().enumerate() {
        let cells: String = (0..info.cols)
            .map(|a2| format!("{:>14}", format!("{:.3},{:.3}", info.payoffs[0][a1][a2], info.payoffs[1][a1][a2])))
            .collect();
        let _ = writeln!(s, "{l:>8} {cells}");
    }
    let _ = writeln!(s, "payoff bound: {}", info.payoff_bound);
    let _ = writeln!(s, "Nash equilibria:");
    for [x, y] in &info.nash {
        let _ = writeln!(s, "  {} {}", fmt_vec(x), fmt_vec(y));
    }
    let _ = writeln!(s, "undominated: {{{}}} x {{{}}}", info.undominated[0].join(","), info.undominated[1].join(","));
    match &info.curb_sets {
        Some(c) => {
            let _ = writeln!(s, "curb sets: {}", c.join(" "));
        }
        None => {
            let _ = writeln!(s, "curb sets: too many actions to enumerate");
        }
    }
    s
}
