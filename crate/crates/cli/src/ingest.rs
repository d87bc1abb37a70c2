//! The JSON game format.
//!
//! Numbers are decimal strings (`"0.25"`), rationals (`"1/3"`) or plain
//! JSON numbers.

use std::path::Path;

use mzgames::game::GameSpec;
use mzgames::markov::{Belief, StochasticMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A number as written in a game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Text(String),
    Float(f64),
}

/// The raw document, before numeric parsing and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub states_k: Vec<String>,
    pub states_l: Vec<String>,
    pub actions_i: Vec<String>,
    pub actions_j: Vec<String>,
    pub payoff: Vec<Vec<Vec<Vec<Number>>>>,
    pub transition_k: Vec<Vec<Number>>,
    pub transition_l: Vec<Vec<Number>>,
    pub p0: Vec<Number>,
    pub q0: Vec<Number>,
}

fn parse_decimal(field: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let ok = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    if !ok {
        return Err(Error::parse(field, format!("`{s}` is not a decimal number")));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(field, format!("`{s}` is not a decimal number")))?;
    if !v.is_finite() {
        return Err(Error::parse(field, format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Parses `"0.25"`, `"-1"`, `"2.5e-1"` or `"1/3"`.
pub fn parse_number(field: &str, s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((num, den)) => {
            let (n, d) = (parse_decimal(field, num)?, parse_decimal(field, den)?);
            if d == 0.0 {
                return Err(Error::parse(field, "zero denominator"));
            }
            let v = n / d;
            if !v.is_finite() {
                return Err(Error::parse(field, format!("`{s}` is not finite")));
            }
            Ok(v)
        }
        None => parse_decimal(field, s),
    }
}

impl Number {
    pub fn value(&self, field: &str) -> Result<f64> {
        match self {
            Self::Text(s) => parse_number(field, s),
            Self::Float(v) if v.is_finite() => Ok(*v),
            Self::Float(v) => Err(Error::parse(field, format!("{v} is not finite"))),
        }
    }
}

pub fn parse_game(text: &str) -> Result<GameFile> {
    serde_json::from_str(text).map_err(|e| Error::parse("game", e.to_string()))
}

fn vector(field: &str, xs: &[Number], len: usize) -> Result<Vec<f64>> {
    if xs.len() != len {
        return Err(Error::parse(field, format!("has {} entries, expected {len}", xs.len())));
    }
    xs.iter()
        .enumerate()
        .map(|(i, x)| x.value(&format!("{field}[{i}]")))
        .collect()
}

fn matrix(field: &str, rows: &[Vec<Number>], n: usize) -> Result<StochasticMatrix> {
    if rows.len() != n {
        return Err(Error::parse(field, format!("has {} rows, expected {n}", rows.len())));
    }
    let rows = rows
        .iter()
        .enumerate()
        .map(|(r, row)| vector(&format!("{field}[{r}]"), row, n))
        .collect::<Result<Vec<_>>>()?;
    StochasticMatrix::new(rows).map_err(|source| Error::Invalid {
        field: field.into(),
        source,
    })
}

fn belief(field: &str, xs: &[Number], n: usize) -> Result<Belief> {
    Belief::new(vector(field, xs, n)?).map_err(|source| Error::Invalid {
        field: field.into(),
        source,
    })
}

/// Validates the document into a game. Chains must be recurrent; periodic
/// chains are accepted here and rejected by [`ingest`].
pub fn build_spec(file: &GameFile) -> Result<GameSpec> {
    let (nk, nl) = (file.states_k.len(), file.states_l.len());
    let (ni, nj) = (file.actions_i.len(), file.actions_j.len());
    for (field, labels) in [
        ("states_k", &file.states_k),
        ("states_l", &file.states_l),
        ("actions_i", &file.actions_i),
        ("actions_j", &file.actions_j),
    ] {
        if labels.is_empty() {
            return Err(Error::parse(field, "must be nonempty"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::parse(field, "labels must be distinct"));
        }
    }
    if file.payoff.len() != nk {
        return Err(Error::parse("payoff", format!("has {} blocks, expected {nk}", file.payoff.len())));
    }
    let mut payoff = Vec::with_capacity(nk * nl * ni * nj);
    for (k, gk) in file.payoff.iter().enumerate() {
        if gk.len() != nl {
            return Err(Error::parse(format!("payoff[{k}]"), format!("has {} blocks, expected {nl}", gk.len())));
        }
        for (l, gkl) in gk.iter().enumerate() {
            if gkl.len() != ni {
                return Err(Error::parse(format!("payoff[{k}][{l}]"), format!("has {} rows, expected {ni}", gkl.len())));
            }
            for (i, row) in gkl.iter().enumerate() {
                payoff.extend(vector(&format!("payoff[{k}][{l}][{i}]"), row, nj)?);
            }
        }
    }
    let transition_k = matrix("transition_k", &file.transition_k, nk)?;
    let transition_l = matrix("transition_l", &file.transition_l, nl)?;
    let p0 = belief("p0", &file.p0, nk)?;
    let q0 = belief("q0", &file.q0, nl)?;
    Ok(GameSpec::new(
        file.states_k.clone(),
        file.states_l.clone(),
        file.actions_i.clone(),
        file.actions_j.clone(),
        payoff,
        transition_k,
        transition_l,
        p0,
        q0,
    )?)
}

/// [`build_spec`] followed by the aperiodicity requirement on both chains.
pub fn load_game_str(text: &str) -> Result<GameSpec> {
    let spec = build_spec(&parse_game(text)?)?;
    for (field, chain) in [("transition_k", &spec.chain_k), ("transition_l", &spec.chain_l)] {
        chain.require_aperiodic().map_err(|source| Error::Invalid {
            field: field.into(),
            source,
        })?;
    }
    Ok(spec)
}

pub fn read_game_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads, validates and checks a game file for use by the solvers.
pub fn ingest(path: &Path) -> Result<GameSpec> {
    load_game_str(&read_game_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_A: &str = r#"{
        "states_k": ["a", "b", "c"], "states_l": ["x"],
        "actions_i": ["T", "B"], "actions_j": ["L", "R"],
        "payoff": [[[["1", "0"], ["0", "0"]]], [[["0", "0"], ["0", "1"]]], [[["-1/2", "0"], ["0", "0.5"]]]],
        "transition_k": [["2/3", "1/3", "0"], ["1/3", "2/3", "0"], ["0", "0", "1"]],
        "transition_l": [["1"]],
        "p0": ["1/3", "1/3", "1/3"], "q0": [1]
    }"#;

    fn with(field: &str, value: serde_json::Value) -> String {
        let mut doc: serde_json::Value = serde_json::from_str(EXAMPLE_A).unwrap();
        doc[field] = value;
        doc.to_string()
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::Parse { field, .. } | Error::Invalid { field, .. } => field,
            Error::Core(mzgames::Error::Validation { field, .. }) => field,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("x", "0.25").unwrap(), 0.25);
        assert_eq!(parse_number("x", " -1 ").unwrap(), -1.0);
        assert_eq!(parse_number("x", "1/4").unwrap(), 0.25);
        assert_eq!(parse_number("x", "2.5e-1").unwrap(), 0.25);
        for bad in ["", "abc", "1/0", "inf", "NaN", "1//2", "0x10", "1e400"] {
            assert!(parse_number("x", bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn example_a_loads() {
        let spec = load_game_str(EXAMPLE_A).unwrap();
        assert_eq!(spec.chain_k.num_classes(), 2);
        assert_eq!(spec.chain_l.num_classes(), 1);
        assert_eq!(spec.g(2, 0, 0, 0), -0.5);
        assert!((spec.p0[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn payoff_out_of_range_names_the_index() {
        let text = with(
            "payoff",
            serde_json::json!([[[["1", "0"], ["0", "0"]]], [[["0", "1.5"], ["0", "1"]]], [[["0", "0"], ["0", "0"]]]]),
        );
        assert_eq!(field_of(load_game_str(&text).unwrap_err()), "payoff[1][0][0][1]");
    }

    #[test]
    fn bad_row_sum_is_not_stochastic() {
        let text = with(
            "transition_k",
            serde_json::json!([["0.6", "0.3", "0"], ["1/3", "2/3", "0"], ["0", "0", "1"]]),
        );
        match load_game_str(&text).unwrap_err() {
            Error::Invalid {
                field,
                source: mzgames::Error::NotStochastic { row: 0, .. },
            } => assert_eq!(field, "transition_k"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_entries_name_the_field() {
        let text = with("p0", serde_json::json!(["1/3", "one third", "1/3"]));
        assert_eq!(field_of(load_game_str(&text).unwrap_err()), "p0[1]");
        let text = with("q0", serde_json::json!(["0.5", "0.5"]));
        assert_eq!(field_of(load_game_str(&text).unwrap_err()), "q0");
        let text = with("p0", serde_json::json!(["0.5", "0.6", "0"]));
        assert_eq!(field_of(load_game_str(&text).unwrap_err()), "p0");
        let text = with("actions_i", serde_json::json!(["T", "T"]));
        assert_eq!(field_of(load_game_str(&text).unwrap_err()), "actions_i");
        assert!(matches!(parse_game("{}").unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn transient_and_periodic_chains_are_rejected() {
        let text = with(
            "transition_k",
            serde_json::json!([["1/2", "1/2", "0"], ["0", "1", "0"], ["0", "0", "1"]]),
        );
        assert!(matches!(
            load_game_str(&text).unwrap_err(),
            Error::Core(mzgames::Error::TransientState { .. })
        ));
        let text = with(
            "transition_k",
            serde_json::json!([["0", "1", "0"], ["1", "0", "0"], ["0", "0", "1"]]),
        );
        assert!(matches!(
            load_game_str(&text).unwrap_err(),
            Error::Invalid {
                source: mzgames::Error::PeriodicChain { period: 2 },
                ..
            }
        ));
        let spec = build_spec(&parse_game(&text).unwrap()).unwrap();
        assert_eq!(spec.chain_k.period, 2);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decimal_strings_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
                prop_assert_eq!(parse_number("x", &format!("{x}")).unwrap(), x);
                prop_assert_eq!(parse_number("x", &format!("{x:e}")).unwrap(), x);
            }

            #[test]
            fn rationals_divide(p in -1000i64..1000, q in 1i64..1000) {
                prop_assert_eq!(parse_number("x", &format!("{p}/{q}")).unwrap(), p as f64 / q as f64);
            }

            #[test]
            fn arbitrary_text_never_panics(s in ".{0,200}") {
                let _ = load_game_str(&s);
                let _ = parse_number("x", &s);
            }
        }
    }
}
