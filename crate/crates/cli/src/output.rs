//! CSV tables and number formatting.

use mzgames::table::ValueTable;

use crate::error::Result;

/// A numeric table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_float).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
    }
}

/// Shortest representation that parses back to the same value; scientific
/// notation for very small or very large magnitudes.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-4 || x.abs() >= 1e16 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// `p/q` when `x` is within `1e-10` of a fraction with denominator at most
/// 1000, otherwise a decimal.
pub fn fmt_exact(x: f64) -> String {
    for q in 1..=1000u64 {
        let p = (x * q as f64).round();
        if (p / q as f64 - x).abs() <= 1e-10 {
            let p = p as i64;
            return if q == 1 { format!("{p}") } else { format!("{p}/{q}") };
        }
    }
    format!("{x:.10}")
}

pub fn fmt_vector(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| fmt_exact(x)).collect();
    format!("({})", parts.join(", "))
}

/// Header `p_<k>…, q_<l>…, <extra>…`.
pub fn belief_header(prefix_p: &str, labels_p: &[String], prefix_q: &str, labels_q: &[String], extra: &[&str]) -> Vec<String> {
    labels_p
        .iter()
        .map(|k| format!("{prefix_p}_{k}"))
        .chain(labels_q.iter().map(|l| format!("{prefix_q}_{l}")))
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

/// One row per grid pair: coordinates, then each column's value at that
/// pair. Tables must share grids.
pub fn table_rows(csv: &mut Csv, tables: &[&ValueTable], extra: impl Fn(usize, usize) -> Vec<f64>) {
    let first = tables[0];
    let (gp, gq) = (first.grid_p(), first.grid_q());
    for i in 0..gp.len() {
        for j in 0..gq.len() {
            let row = gp
                .point(i)
                .iter()
                .chain(gq.point(j))
                .copied()
                .chain(tables.iter().map(|t| t.at(i, j)))
                .chain(extra(i, j));
            csv.push_numbers(row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_formatting() {
        assert_eq!(fmt_exact(0.5), "1/2");
        assert_eq!(fmt_exact(0.8), "4/5");
        assert_eq!(fmt_exact(0.0), "0");
        assert_eq!(fmt_exact(1.0), "1");
        assert_eq!(fmt_exact(2.0 / 3.0), "2/3");
        assert_eq!(fmt_exact(-0.25), "-1/4");
        assert_eq!(fmt_exact(std::f64::consts::PI), "3.1415926536");
        assert_eq!(fmt_vector(&[0.5, 0.5, 0.0]), "(1/2, 1/2, 0)");
    }

    #[test]
    fn csv_round_trips_floats() {
        let mut c = Csv::new(["a", "b,c"]);
        c.push_numbers([0.1 + 0.2, -0.0]);
        c.push_numbers([1.25e-17, -3e20]);
        let text = String::from_utf8(c.to_bytes().unwrap()).unwrap();
        assert_eq!(text, "a,\"b,c\"\n0.30000000000000004,0\n1.25e-17,-3e20\n");
    }
}
