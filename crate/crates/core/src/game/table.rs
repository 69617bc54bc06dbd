//! Flat CSV parameter tables.
//!
//! Two tables describe a game. The component table has one row per
//! `(player, component)`:
//!
//! * EV:   `player,component,q,d,b`
//! * edge: `player,component,a,kappa,b,dcong,r`
//!
//! The player table has one row per player with the box, the per-player
//! edge constants and that player's coupling row:
//!
//! * EV:   `player,lower,upper,c0,...,c{n-1}`
//! * edge: `player,lower,upper,capacity,slope,c0,...,c{n-1}`
//!
//! Floats are written in shortest round-trip form, so reading the tables
//! back reproduces the game bit for bit.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{
    ActionBox, Components, EdgeComponentParams, EvComponentParams, GameError, GameKind, GameSpec,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameTables {
    pub kind: GameKind,
    pub components: String,
    pub players: String,
}

impl GameSpec {
    pub fn tables(&self) -> GameTables {
        let n = self.n;
        let m = self.m;
        let mut comp = String::new();
        let mut players = String::new();
        let coupling_header: String = (0..n).map(|j| format!(",c{j}")).collect();
        match &self.components {
            Components::Ev(params) => {
                comp.push_str("player,component,q,d,b\n");
                for (k, p) in params.iter().enumerate() {
                    let _ = writeln!(comp, "{},{},{},{},{}", k / m, k % m, p.q, p.d, p.b);
                }
                let _ = writeln!(players, "player,lower,upper{coupling_header}");
            }
            Components::Edge { params, .. } => {
                comp.push_str("player,component,a,kappa,b,dcong,r\n");
                for (k, p) in params.iter().enumerate() {
                    let _ = writeln!(
                        comp,
                        "{},{},{},{},{},{},{}",
                        k / m,
                        k % m,
                        p.a,
                        p.kappa,
                        p.b,
                        p.dcong,
                        p.r
                    );
                }
                let _ = writeln!(players, "player,lower,upper,capacity,slope{coupling_header}");
            }
        }
        for i in 0..n {
            let _ = write!(players, "{i},{},{}", self.bounds.lower[i], self.bounds.upper[i]);
            if let Components::Edge {
                capacity, slope, ..
            } = &self.components
            {
                let _ = write!(players, ",{},{}", capacity[i], slope[i]);
            }
            for j in 0..n {
                let _ = write!(players, ",{}", self.coupling[(i, j)]);
            }
            players.push('\n');
        }
        GameTables {
            kind: self.kind(),
            components: comp,
            players,
        }
    }
}

fn parse_rows(text: &str, expected_header: &[&str], min_extra: usize) -> Result<Vec<Vec<f64>>, GameError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| GameError::Table("empty table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < expected_header.len() + min_extra || cols[..expected_header.len()] != *expected_header {
        return Err(GameError::Table(format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(row, line)| {
            let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| GameError::Table(format!("row {}: {e}", row + 1)))?;
            if vals.len() != cols.len() {
                return Err(GameError::Table(format!(
                    "row {}: expected {} fields, got {}",
                    row + 1,
                    cols.len(),
                    vals.len()
                )));
            }
            Ok(vals)
        })
        .collect()
}

/// Rebuilds a game from its tables.
pub fn read_tables(tables: &GameTables) -> Result<GameSpec, GameError> {
    let player_header: &[&str] = match tables.kind {
        GameKind::Ev => &["player", "lower", "upper"],
        GameKind::Edge => &["player", "lower", "upper", "capacity", "slope"],
    };
    let prows = parse_rows(&tables.players, player_header, 1)?;
    let n = prows.len();
    if n == 0 {
        return Err(GameError::Table("player table has no rows".into()));
    }
    let off = player_header.len();
    if prows[0].len() != off + n {
        return Err(GameError::Table(format!(
            "player table needs {n} coupling columns, got {}",
            prows[0].len() - off
        )));
    }
    let mut coupling = DMatrix::zeros(n, n);
    for (i, row) in prows.iter().enumerate() {
        if row[0] != i as f64 {
            return Err(GameError::Table(format!("player rows out of order at {i}")));
        }
        for j in 0..n {
            coupling[(i, j)] = row[off + j];
        }
    }
    let bounds = ActionBox::new(prows.iter().map(|r| r[1]).collect(), prows.iter().map(|r| r[2]).collect())?;
    let comp_header: &[&str] = match tables.kind {
        GameKind::Ev => &["player", "component", "q", "d", "b"],
        GameKind::Edge => &["player", "component", "a", "kappa", "b", "dcong", "r"],
    };
    let crows = parse_rows(&tables.components, comp_header, 0)?;
    if crows.is_empty() || crows.len() % n != 0 {
        return Err(GameError::Table(format!(
            "component table has {} rows, not a positive multiple of {n}",
            crows.len()
        )));
    }
    let m = crows.len() / n;
    for (k, row) in crows.iter().enumerate() {
        if row[0] != (k / m) as f64 || row[1] != (k % m) as f64 {
            return Err(GameError::Table(format!("component rows out of order at row {}", k + 1)));
        }
    }
    let components = match tables.kind {
        GameKind::Ev => Components::Ev(
            crows
                .iter()
                .map(|r| EvComponentParams { q: r[2], d: r[3], b: r[4] })
                .collect(),
        ),
        GameKind::Edge => Components::Edge {
            params: crows
                .iter()
                .map(|r| EdgeComponentParams {
                    a: r[2],
                    kappa: r[3],
                    b: r[4],
                    dcong: r[5],
                    r: r[6],
                })
                .collect(),
            capacity: prows.iter().map(|r| r[3]).collect(),
            slope: prows.iter().map(|r| r[4]).collect(),
        },
    };
    GameSpec::new(bounds, m, coupling, components)
}

/// SHA-256 of the kind and both tables, hex encoded.
pub fn game_hash(game: &GameSpec) -> String {
    let t = game.tables();
    let mut h = Sha256::new();
    h.update(t.kind.as_str().as_bytes());
    h.update(t.components.as_bytes());
    h.update(t.players.as_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_edge_game, make_ev_game, EdgeRanges, EvRanges};
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = make_ev_game(3, 2, 1, &EvRanges::default()).unwrap();
        let t = g.tables();
        assert!(t.components.starts_with("player,component,q,d,b\n"));
        assert!(t.players.starts_with("player,lower,upper,c0,c1,c2\n"));
        assert_eq!(t.components.lines().count(), 1 + 6);
    }

    #[test]
    fn malformed_tables_rejected() {
        let g = make_ev_game(3, 2, 1, &EvRanges::default()).unwrap();
        let mut t = g.tables();
        t.components = t.components.replace("q,d,b", "q,d,x");
        assert!(read_tables(&t).is_err());
        let mut t = g.tables();
        t.kind = GameKind::Edge;
        assert!(read_tables(&t).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tables_round_trip(seed in 0u64..1000, n in 2usize..6, m in 1usize..5, edge in any::<bool>()) {
            let g = if edge {
                make_edge_game(n, m, seed, &EdgeRanges::default()).unwrap()
            } else {
                make_ev_game(n, m, seed, &EvRanges::default()).unwrap()
            };
            let back = read_tables(&g.tables()).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(game_hash(&back), game_hash(&g));
        }
    }
}
