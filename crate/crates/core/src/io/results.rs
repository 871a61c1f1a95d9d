//! Results CSV files.
//!
//! Simulation output: `t,msd_emp_db,msd_theory_paper_db,msd_theory_exact_db`.
//! Theory-only output: `t,msd_theory_paper_db,msd_theory_exact_db`.
//! Values use Rust's shortest round-trip float formatting; a theory point
//! with no dB value (negative literal curve) is written as `NaN`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::msd_db;
use crate::theory::theory_db;

pub const RESULTS_HEADER: [&str; 4] = [
    "t",
    "msd_emp_db",
    "msd_theory_paper_db",
    "msd_theory_exact_db",
];

pub const THEORY_HEADER: [&str; 3] = ["t", "msd_theory_paper_db", "msd_theory_exact_db"];

fn db_all(values: &[f64]) -> Result<Vec<f64>> {
    values.iter().map(|&v| msd_db(v)).collect()
}

fn theory_db_all(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| theory_db(v)).collect()
}

/// Writes one row per iteration from linear-unit curves.
pub fn write_results<W: Write>(out: W, emp: &[f64], paper: &[f64], exact: &[f64]) -> Result<()> {
    let (emp, paper, exact) = (db_all(emp)?, theory_db_all(paper), theory_db_all(exact));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for i in 0..emp.len() {
        w.write_record([
            (i + 1).to_string(),
            emp[i].to_string(),
            paper[i].to_string(),
            exact[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_theory<W: Write>(out: W, paper: &[f64], exact: &[f64]) -> Result<()> {
    let (paper, exact) = (theory_db_all(paper), theory_db_all(exact));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(THEORY_HEADER)?;
    for i in 0..paper.len() {
        w.write_record([(i + 1).to_string(), paper[i].to_string(), exact[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// dB columns of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub t: Vec<usize>,
    pub emp_db: Vec<f64>,
    pub paper_db: Vec<f64>,
    pub exact_db: Vec<f64>,
}

pub fn read_results(path: &Path) -> Result<ResultsTable> {
    let text = std::fs::read_to_string(path)?;
    parse_results(&text, &path.display().to_string())
}

pub fn parse_results(text: &str, origin: &str) -> Result<ResultsTable> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != RESULTS_HEADER {
        return Err(err(
            1,
            format!("expected header `{}`", RESULTS_HEADER.join(",")),
        ));
    }
    let mut table = ResultsTable {
        t: Vec::new(),
        emp_db: Vec::new(),
        paper_db: Vec::new(),
        exact_db: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            err(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let t: usize = record[0]
            .parse()
            .map_err(|_| err(line, format!("bad iteration `{}`", &record[0])))?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| err(line, format!("bad value `{}`", &record[i])))
        };
        table.t.push(t);
        table.emp_db.push(num(1)?);
        table.paper_db.push(num(2)?);
        table.exact_db.push(num(3)?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_pinned() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[1.0, 10.0, 100.0], &[1.0, 1.0, 1.0], &[10.0, 10.0, 10.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let golden = "t,msd_emp_db,msd_theory_paper_db,msd_theory_exact_db\n\
                      1,0,0,10\n\
                      2,10,0,10\n\
                      3,20,0,10\n";
        assert_eq!(text, golden);
        let back = parse_results(&text, "mem").unwrap();
        assert_eq!(back.t, vec![1, 2, 3]);
        assert_eq!(back.emp_db, vec![0.0, 10.0, 20.0]);
    }

    #[test]
    fn theory_header_is_pinned() {
        let mut buf = Vec::new();
        write_theory(&mut buf, &[1.0], &[100.0]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,msd_theory_paper_db,msd_theory_exact_db\n1,0,20\n"
        );
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(parse_results("t,a,b,c\n1,0,0,0\n", "x").is_err());
    }
}
