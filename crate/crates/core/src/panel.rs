//! Day-by-interval experimental panels and their columnar text format.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `n` i.i.d. days of `(state, action, reward)` over `T` intervals.
///
/// `states[t]` is the `n × d` matrix of `S_{t+1}` in 1-based notation. The
/// state one step past the horizon is not stored: value functions vanish
/// there and transitions are only ever fitted between observed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub states: Vec<DMatrix<f64>>,
    pub actions: DMatrix<u8>,
    pub rewards: DMatrix<f64>,
}

impl Panel {
    pub fn new(
        states: Vec<DMatrix<f64>>,
        actions: DMatrix<u8>,
        rewards: DMatrix<f64>,
    ) -> Result<Self> {
        let panel = Panel {
            states,
            actions,
            rewards,
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn n(&self) -> usize {
        self.actions.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.actions.ncols()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t_len) = self.actions.shape();
        if n == 0 || t_len == 0 {
            return Err(Error::Dimension("panel must have at least one day and one interval".into()));
        }
        if self.rewards.shape() != (n, t_len) {
            return Err(Error::Dimension("rewards must be n × T".into()));
        }
        if self.states.len() != t_len {
            return Err(Error::Dimension("one state matrix per interval expected".into()));
        }
        let d = self.dim();
        if self.states.iter().any(|s| s.shape() != (n, d)) {
            return Err(Error::Dimension("state matrices must all be n × d".into()));
        }
        if self.actions.iter().any(|&a| a > 1) {
            return Err(Error::Dimension("actions must be binary".into()));
        }
        Ok(())
    }

    /// State of day `i` at interval `t` (0-based).
    pub fn state(&self, i: usize, t: usize) -> DVector<f64> {
        self.states[t].row(i).transpose()
    }

    pub fn action(&self, i: usize, t: usize) -> u8 {
        self.actions[(i, t)]
    }

    pub fn reward(&self, i: usize, t: usize) -> f64 {
        self.rewards[(i, t)]
    }

    /// Panel restricted to the listed days, in the listed order.
    pub fn select_days(&self, days: &[usize]) -> Panel {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(days.len(), m.ncols(), |r, c| m[(days[r], c)]);
        Panel {
            states: self.states.iter().map(pick).collect(),
            actions: DMatrix::from_fn(days.len(), self.horizon(), |r, c| self.actions[(days[r], c)]),
            rewards: pick(&self.rewards),
        }
    }

    /// Writes the `day,t,s_1..s_d,a,r` format; `day` and `t` are 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header = vec!["day".to_string(), "t".to_string()];
        header.extend((1..=d).map(|j| format!("s_{j}")));
        header.push("a".into());
        header.push("r".into());
        wtr.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n() {
            for t in 0..self.horizon() {
                let mut row = vec![(i + 1).to_string(), (t + 1).to_string()];
                row.extend((0..d).map(|j| format_float(self.states[t][(i, j)])));
                row.push(self.actions[(i, t)].to_string());
                row.push(format_float(self.rewards[(i, t)]));
                wtr.write_record(&row).map_err(csv_err)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Panel::write_csv`]. Rows may come in any
    /// order but every `(day, t)` cell must appear exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Panel> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let cols: Vec<&str> = header.iter().map(str::trim).collect();
        let width = cols.len();
        if width < 5 || cols[0] != "day" || cols[1] != "t" || cols[width - 2] != "a" || cols[width - 1] != "r" {
            return Err(Error::Parse("expected header day,t,s_1..s_d,a,r".into()));
        }
        let d = width - 4;
        for (j, c) in cols[2..2 + d].iter().enumerate() {
            if *c != format!("s_{}", j + 1) {
                return Err(Error::Parse(format!("unexpected state column {c:?}")));
            }
        }

        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
            let parse_idx = |k: usize| -> Result<usize> {
                field(k)
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| Error::Parse(format!("row {}: bad index {:?}", line + 2, field(k))))
            };
            let parse_f = |k: usize| -> Result<f64> {
                field(k)
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 2, field(k))))
            };
            let day = parse_idx(0)? - 1;
            let t = parse_idx(1)? - 1;
            let s: Vec<f64> = (0..d).map(|j| parse_f(2 + j)).collect::<Result<_>>()?;
            let a = match field(2 + d) {
                "0" => 0u8,
                "1" => 1u8,
                other => return Err(Error::Parse(format!("row {}: action must be 0 or 1, got {other:?}", line + 2))),
            };
            let r = parse_f(3 + d)?;
            rows.push((day, t, s, a, r));
        }
        if rows.is_empty() {
            return Err(Error::Parse("panel file has no rows".into()));
        }
        let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let t_len = rows.iter().map(|r| r.1).max().unwrap() + 1;
        if rows.len() != n * t_len {
            return Err(Error::Parse(format!("expected {} rows for {n} days × {t_len} intervals, found {}", n * t_len, rows.len())));
        }
        let mut seen = vec![false; n * t_len];
        let mut states = vec![DMatrix::zeros(n, d); t_len];
        let mut actions = DMatrix::zeros(n, t_len);
        let mut rewards = DMatrix::zeros(n, t_len);
        for (day, t, s, a, r) in rows {
            let slot = &mut seen[day * t_len + t];
            if *slot {
                return Err(Error::Parse(format!("duplicate row for day {}, t {}", day + 1, t + 1)));
            }
            *slot = true;
            for (j, v) in s.into_iter().enumerate() {
                states[t][(day, j)] = v;
            }
            actions[(day, t)] = a;
            rewards[(day, t)] = r;
        }
        Panel::new(states, actions, rewards)
    }
}

/// Shortest representation that round-trips exactly.
fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
