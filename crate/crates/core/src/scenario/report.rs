use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Real formatted with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

/// One row of `result.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub quantity: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub status: Status,
}

/// Rows of `result.csv` in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checks {
    rows: Vec<Check>,
}

impl Checks {
    pub fn info(&mut self, quantity: impl Into<String>, value: f64) {
        self.rows.push(Check {
            quantity: quantity.into(),
            value,
            tolerance: None,
            status: Status::Info,
        });
    }

    /// Passes when `value <= tolerance` (NaN fails).
    pub fn at_most(&mut self, quantity: impl Into<String>, value: f64, tolerance: f64) {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        self.rows.push(Check {
            quantity: quantity.into(),
            value,
            tolerance: Some(tolerance),
            status,
        });
    }

    /// Passes when `value >= bound` (NaN fails).
    pub fn at_least(&mut self, quantity: impl Into<String>, value: f64, bound: f64) {
        let status = if value >= bound {
            Status::Pass
        } else {
            Status::Fail
        };
        self.rows.push(Check {
            quantity: quantity.into(),
            value,
            tolerance: Some(bound),
            status,
        });
    }

    pub fn rows(&self) -> &[Check] {
        &self.rows
    }

    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == Status::Fail)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value,tolerance,status\n");
        for r in &self.rows {
            let tol = r.tolerance.map(real).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.quantity,
                real(r.value),
                tol,
                r.status.as_str()
            );
        }
        out
    }
}

/// Minimal CSV table: header plus preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.0), "-2.0000000000000000e0");
        assert_eq!(real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn checks_render() {
        let mut c = Checks::default();
        c.info("Y0", 0.5);
        c.at_most("gap", 2e-5, 1e-4);
        c.at_least("margin", f64::NAN, 0.0);
        assert_eq!(c.failures(), 1);
        let csv = c.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "quantity,value,tolerance,status");
        assert_eq!(lines[1], "Y0,5.0000000000000000e-1,,INFO");
        assert!(lines[2].ends_with(",PASS"));
        assert!(lines[3].ends_with(",FAIL"));
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }
}
