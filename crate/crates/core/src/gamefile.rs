//! Plain-text game files.
//!
//! ```text
//! R C
//! <R*C payoffs of player 1, row-major>
//! <R*C payoffs of player 2, row-major>
//! ```
//!
//! Entries are whitespace separated. Each entry is a decimal number or a
//! small arithmetic expression without spaces, e.g. `sqrt(2)`,
//! `-sqrt(2)/2` or `1/3`, evaluated at parse time in double precision.
//! Lines starting with `#` are ignored.

use crate::error::{Error, Result};
use crate::game::Game;

pub fn parse_game(text: &str) -> Result<Game> {
    let mut tokens = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.starts_with('#'))
        .flat_map(str::split_whitespace);
    let mut dim = |what: &str| -> Result<usize> {
        let tok = tokens.next().ok_or_else(|| Error::Parse(format!("missing {what}")))?;
        tok.parse::<usize>()
            .map_err(|_| Error::Parse(format!("{what} must be a positive integer, got '{tok}'")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = tokens.map(eval_expr).collect::<Result<Vec<f64>>>()?;
    let n = rows * cols;
    if values.len() != 2 * n {
        return Err(Error::Parse(format!(
            "expected {} payoff entries for a {rows}x{cols} game, found {}",
            2 * n,
            values.len()
        )));
    }
    let (u1, u2) = values.split_at(n);
    Game::new(rows, cols, u1.to_vec(), u2.to_vec())
}

pub fn read_game(path: &std::path::Path) -> Result<Game> {
    parse_game(&std::fs::read_to_string(path)?)
}

/// Serializes a game in the same format, with full round-trip precision.
pub fn write_game(game: &Game) -> String {
    let mut out = format!("{} {}\n", game.rows(), game.cols());
    for table in [game.table(crate::Player::One), game.table(crate::Player::Two)] {
        for row in table.chunks(game.cols()) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Evaluates one payoff entry.
pub fn eval_expr(src: &str) -> Result<f64> {
    let mut p = ExprParser { src: src.as_bytes(), pos: 0 };
    let v = p.sum()?;
    if p.pos != p.src.len() {
        return Err(Error::Parse(format!("trailing input in '{src}'")));
    }
    if !v.is_finite() {
        return Err(Error::Parse(format!("'{src}' does not evaluate to a finite number")));
    }
    Ok(v)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!(
            "{msg} at offset {} in '{}'",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            v = if op == b'+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            v = if op == b'*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                self.expect(b')')?;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                if name == "pi" {
                    return Ok(std::f64::consts::PI);
                }
                self.expect(b'(')?;
                let arg = self.sum()?;
                self.expect(b')')?;
                match name {
                    "sqrt" => Ok(arg.sqrt()),
                    "exp" => Ok(arg.exp()),
                    "ln" => Ok(arg.ln()),
                    _ => Err(self.err(&format!("unknown function '{name}'"))),
                }
            }
            _ => Err(self.err("expected a number")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        s.parse::<f64>().map_err(|_| self.err(&format!("bad number '{s}'")))
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }
}
