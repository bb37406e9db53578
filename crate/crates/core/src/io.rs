//! CSV readers and writers for cohorts and survival curves.
//!
//! Cohort schema: `id,l1,a1,w1,delta1,l2,a2,w2,delta2`, where the last four
//! cells are empty unless `delta1 = 1`. Floats use the shortest
//! representation that round-trips exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    validate, CohortDataset, CohortMeta, FirstEvent, SecondCourse, SubjectRecord,
    SurvivalCurveEstimate,
};

pub const COHORT_HEADER: [&str; 9] = ["id", "l1", "a1", "w1", "delta1", "l2", "a2", "w2", "delta2"];

pub fn read_csv(path: impl AsRef<Path>) -> Result<CohortDataset> {
    read_csv_from(File::open(path)?)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<CohortDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != COHORT_HEADER {
        return Err(Error::Parse {
            row: 0,
            column: "header".into(),
            message: format!(
                "expected `{}`, found `{}`",
                COHORT_HEADER.join(","),
                header.join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = result?;
        if rec.len() != COHORT_HEADER.len() {
            return Err(Error::Parse {
                row,
                column: "*".into(),
                message: format!(
                    "expected {} cells, found {}",
                    COHORT_HEADER.len(),
                    rec.len()
                ),
            });
        }
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let id = parse_int(row, "id", cell(0))?;
        let l1 = parse_bin(row, "l1", cell(1))?;
        let a1 = parse_bin(row, "a1", cell(2))?;
        let w1 = parse_float(row, "w1", cell(3))?;
        let code = parse_int(row, "delta1", cell(4))?;
        let delta1 = FirstEvent::from_code(code).ok_or_else(|| Error::Parse {
            row,
            column: "delta1".into(),
            message: format!("event code must be 1, 0 or -1, found {code}"),
        })?;

        let tail: Vec<&str> = (5..9).map(cell).collect();
        let course2 = if tail.iter().all(|c| c.is_empty()) {
            None
        } else {
            let delta2 = parse_int(row, "delta2", tail[3])?;
            let died = match delta2 {
                1 => true,
                0 => false,
                other => {
                    return Err(Error::Parse {
                        row,
                        column: "delta2".into(),
                        message: format!("event code must be 1 or 0, found {other}"),
                    })
                }
            };
            Some(SecondCourse {
                l2: parse_bin(row, "l2", tail[0])?,
                a2: parse_bin(row, "a2", tail[1])?,
                w2: parse_float(row, "w2", tail[2])?,
                died,
            })
        };
        records.push(SubjectRecord {
            id,
            l1,
            a1,
            w1,
            delta1,
            course2,
        });
    }

    let ds = CohortDataset::new(records, CohortMeta::default());
    let violations = validate(&ds);
    if violations.is_empty() {
        Ok(ds)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn write_csv(dataset: &CohortDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_csv_to(dataset, file)
}

pub fn write_csv_to<W: Write>(dataset: &CohortDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COHORT_HEADER)?;
    for r in &dataset.records {
        let mut cells = vec![
            r.id.to_string(),
            bin_str(r.l1).into(),
            bin_str(r.a1).into(),
            r.w1.to_string(),
            r.delta1.code().to_string(),
        ];
        match &r.course2 {
            Some(c2) => cells.extend([
                bin_str(c2.l2).to_string(),
                bin_str(c2.a2).to_string(),
                c2.w2.to_string(),
                bin_str(c2.died).to_string(),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one or more curves as `tau,estimate,lo,hi,method`.
pub fn write_curves_to<W: Write>(curves: &[&SurvivalCurveEstimate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "estimate", "lo", "hi", "method"])?;
    for c in curves {
        for (k, (tau, est)) in c.taus.iter().zip(&c.estimates).enumerate() {
            let band =
                |b: &Option<Vec<f64>>| b.as_ref().map(|v| v[k].to_string()).unwrap_or_default();
            w.write_record([
                tau.to_string(),
                est.to_string(),
                band(&c.lo),
                band(&c.hi),
                c.method.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bin_str(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn parse_int(row: usize, column: &str, s: &str) -> Result<i64> {
    s.parse::<i64>().map_err(|e| Error::Parse {
        row,
        column: column.into(),
        message: format!("`{s}` is not an integer ({e})"),
    })
}

fn parse_bin(row: usize, column: &str, s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse {
            row,
            column: column.into(),
            message: format!("expected 0 or 1, found `{s}`"),
        }),
    }
}

fn parse_float(row: usize, column: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse {
        row,
        column: column.into(),
        message: format!("`{s}` is not a number ({e})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,l1,a1,w1,delta1,l2,a2,w2,delta2\n";

    fn parse(body: &str) -> Result<CohortDataset> {
        read_csv_from(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn subject_treated_twice_then_died() {
        let ds = parse("7,1,1,3.70,1,0,1,3.50,1\n").unwrap();
        let r = ds.records[0];
        assert_eq!(r.id, 7);
        assert!(r.l1 && r.a1);
        assert_eq!(r.w1, 3.7);
        assert_eq!(r.delta1, FirstEvent::NextTreatment);
        assert_eq!(
            r.course2,
            Some(SecondCourse {
                l2: false,
                a2: true,
                w2: 3.5,
                died: true
            })
        );
        assert!((r.survival_time().unwrap() - 7.2).abs() < 1e-12);
    }

    #[test]
    fn subject_treated_twice_then_censored() {
        let ds = parse("2,0,1,2.30,1,1,0,2.20,0\n").unwrap();
        let r = ds.records[0];
        assert!(r.is_censored());
        assert_eq!(r.survival_time(), None);
        assert!((r.follow_up() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn empty_course2_cells_for_death() {
        let ds = parse("3,0,0,5.5,0,,,,\n").unwrap();
        assert_eq!(ds.records[0].course2, None);
        assert_eq!(ds.records[0].delta1, FirstEvent::Death);
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let err = parse("1,0,1,2.0,0,,,,\n2,0,1,abc,0,,,,\n").unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "w1");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("1,0,1,2.0,5,,,,\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse("1,2,1,2.0,0,,,,\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn invariant_breach_is_validation_error() {
        assert!(matches!(
            parse("1,0,1,2.0,1,,,,\n"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse("1,0,1,2.0,0,1,1,2.0,1\n"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        let err = read_csv_from("id,x\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 0, .. }));
    }

    #[test]
    fn writes_empty_cells_for_missing_course2() {
        let ds = parse("3,0,0,5.5,0,,,,\n7,1,1,3.7,1,0,1,3.5,1\n").unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            format!("{HEADER}3,0,0,5.5,0,,,,\n7,1,1,3.7,1,0,1,3.5,1\n")
        );
    }

    #[test]
    fn curve_csv_layout() {
        let mut c = SurvivalCurveEstimate::new("ipw", vec![0.0, 1.0], vec![1.0, 0.9]);
        c.lo = Some(vec![1.0, 0.8]);
        c.hi = Some(vec![1.0, 0.95]);
        let mut buf = Vec::new();
        write_curves_to(&[&c], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tau,estimate,lo,hi,method\n0,1,1,1,ipw\n1,0.9,0.8,0.95,ipw\n"
        );
    }
}
