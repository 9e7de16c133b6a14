//! Longitudinal panels of `(Z, A, Y)` observations and their CSV form.
//!
//! The CSV layout is a header `unit,time,z,a,y` followed by one row per
//! `(unit, period)`. An empty or `NA` `z` field marks an unobserved running
//! variable; such periods must be untreated. Rows may come in any order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(unit, period)` cell. `z == None` is the unobserved sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub z: Option<f64>,
    pub a: bool,
    pub y: f64,
}

impl Observation {
    pub fn new(z: Option<f64>, a: bool, y: f64) -> Self {
        Self { z, a, y }
    }

    pub fn a_f64(&self) -> f64 {
        if self.a {
            1.0
        } else {
            0.0
        }
    }
}

/// Rectangular panel: `n` units, each observed at periods `0..=horizon`.
///
/// Immutable after construction. Observations are stored unit-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPanel {
    n: usize,
    horizon: usize,
    data: Vec<Observation>,
    cutoff: Option<f64>,
}

impl TrajectoryPanel {
    /// Validates shape, finiteness and the treatment rule, then builds the panel.
    ///
    /// When `cutoff` is given every observed period must satisfy `a == (z >= cutoff)`.
    pub fn new(
        n: usize,
        horizon: usize,
        data: Vec<Observation>,
        cutoff: Option<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::RaggedPanel("panel has no units".into()));
        }
        let periods = horizon + 1;
        if data.len() != n * periods {
            return Err(Error::RaggedPanel(format!(
                "expected {} observations for {n} units x {periods} periods, got {}",
                n * periods,
                data.len()
            )));
        }
        if let Some(c) = cutoff {
            if !c.is_finite() {
                return Err(Error::InvalidSpec("cutoff must be finite".into()));
            }
        }
        for (k, obs) in data.iter().enumerate() {
            let (unit, period) = (k / periods, k % periods);
            check_observation(obs, cutoff).map_err(|reason| Error::PolicyViolation {
                unit,
                period,
                reason,
            })?;
        }
        Ok(Self {
            n,
            horizon,
            data,
            cutoff,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `T`: the last period index.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn periods(&self) -> usize {
        self.horizon + 1
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn get(&self, unit: usize, period: usize) -> &Observation {
        &self.data[unit * self.periods() + period]
    }

    /// The full trajectory of one unit.
    pub fn unit(&self, unit: usize) -> &[Observation] {
        let p = self.periods();
        &self.data[unit * p..(unit + 1) * p]
    }

    pub fn units(&self) -> impl Iterator<Item = &[Observation]> {
        self.data.chunks(self.periods())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.data
    }

    /// Same observations with the outcome replaced by `f(y)`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Self {
        let data = self
            .data
            .iter()
            .map(|o| Observation { y: f(o.y), ..*o })
            .collect();
        Self {
            data,
            ..self.clone()
        }
    }

    /// Checks `a == 1{z >= cutoff}` on every observed period.
    pub fn check_policy(&self, cutoff: f64) -> Result<()> {
        for (k, obs) in self.data.iter().enumerate() {
            check_observation(obs, Some(cutoff)).map_err(|reason| Error::PolicyViolation {
                unit: k / self.periods(),
                period: k % self.periods(),
                reason,
            })?;
        }
        Ok(())
    }
}

fn check_observation(obs: &Observation, cutoff: Option<f64>) -> std::result::Result<(), String> {
    if !obs.y.is_finite() {
        return Err(format!("non-finite outcome {}", obs.y));
    }
    match obs.z {
        None if obs.a => Err("treated while the running variable is unobserved".into()),
        None => Ok(()),
        Some(z) if !z.is_finite() => Err(format!("non-finite running variable {z}")),
        Some(z) => match cutoff {
            Some(c) if obs.a != (z >= c) => Err(format!(
                "a = {} but z = {z} against cutoff {c}",
                u8::from(obs.a)
            )),
            _ => Ok(()),
        },
    }
}

/// Column names for the five required fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub unit: String,
    pub time: String,
    pub z: String,
    pub a: String,
    pub y: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            time: "time".into(),
            z: "z".into(),
            a: "a".into(),
            y: "y".into(),
        }
    }
}

pub fn load_panel(
    path: impl AsRef<Path>,
    schema: &ColumnMap,
    cutoff: Option<f64>,
) -> Result<TrajectoryPanel> {
    let file = File::open(path)?;
    read_panel(BufReader::new(file), schema, cutoff)
}

/// Parses a panel from any CSV source. Units and periods are re-indexed from 0
/// in ascending order of their original ids.
pub fn read_panel<R: Read>(
    reader: R,
    schema: &ColumnMap,
    cutoff: Option<f64>,
) -> Result<TrajectoryPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedRow {
                line: 1,
                reason: format!("missing column `{name}`"),
            })
    };
    let idx = [
        col(&schema.unit)?,
        col(&schema.time)?,
        col(&schema.z)?,
        col(&schema.a)?,
        col(&schema.y)?,
    ];

    let mut cells: BTreeMap<i64, BTreeMap<i64, Observation>> = BTreeMap::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(line, e))?;
        let field = |j: usize| record.get(idx[j]).unwrap_or("");
        let unit = parse_int(field(0), "unit", line)?;
        let time = parse_int(field(1), "time", line)?;
        let z = match field(2) {
            "" | "NA" => None,
            s => Some(parse_real(s, "z", line)?),
        };
        let a = match field(3) {
            "0" => false,
            "1" => true,
            s => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("field `a` must be 0 or 1, got `{s}`"),
                })
            }
        };
        let y = parse_real(field(4), "y", line)?;
        if cells
            .entry(unit)
            .or_default()
            .insert(time, Observation { z, a, y })
            .is_some()
        {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate row for unit {unit}, time {time}"),
            });
        }
    }

    if cells.is_empty() {
        return Err(Error::RaggedPanel("no data rows".into()));
    }
    let t_min = cells
        .values()
        .filter_map(|m| m.keys().next())
        .min()
        .copied()
        .unwrap();
    let t_max = cells
        .values()
        .filter_map(|m| m.keys().last())
        .max()
        .copied()
        .unwrap();
    let periods = (t_max - t_min + 1) as usize;
    let mut data = Vec::with_capacity(cells.len() * periods);
    for (unit, rows) in &cells {
        if rows.len() != periods {
            let missing: Vec<i64> = (t_min..=t_max).filter(|t| !rows.contains_key(t)).collect();
            return Err(Error::RaggedPanel(format!(
                "unit {unit} has {} of {periods} periods (missing {missing:?})",
                rows.len()
            )));
        }
        data.extend(rows.values().copied());
    }
    TrajectoryPanel::new(cells.len(), periods - 1, data, cutoff)
}

pub fn write_panel(panel: &TrajectoryPanel, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_panel_to(panel, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes the CSV form. Reals use the shortest representation that parses
/// back to the same bits.
pub fn write_panel_to<W: Write>(panel: &TrajectoryPanel, w: &mut W) -> Result<()> {
    writeln!(w, "unit,time,z,a,y")?;
    for (i, unit) in panel.units().enumerate() {
        for (t, obs) in unit.iter().enumerate() {
            match obs.z {
                Some(z) => write!(w, "{i},{t},{z},")?,
                None => write!(w, "{i},{t},NA,")?,
            }
            writeln!(w, "{},{}", u8::from(obs.a), obs.y)?;
        }
    }
    Ok(())
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::IoFailure(io),
            _ => unreachable!(),
        },
        _ => Error::MalformedRow {
            line,
            reason: e.to_string(),
        },
    }
}

fn parse_int(s: &str, name: &str, line: usize) -> Result<i64> {
    s.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("field `{name}` is not an integer: `{s}`"),
    })
}

fn parse_real(s: &str, name: &str, line: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRow {
            line,
            reason: format!("field `{name}` is not a finite number: `{s}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, cutoff: Option<f64>) -> Result<TrajectoryPanel> {
        read_panel(text.as_bytes(), &ColumnMap::default(), cutoff)
    }

    #[test]
    fn two_units_three_periods() {
        let csv = "unit,time,z,a,y\n\
                   1,2,0.5,1,3\n0,0,-1,0,1\n0,1,0.2,1,2\n0,2,0.1,1,3\n1,0,-0.3,0,1\n1,1,NA,0,0\n";
        let p = parse(csv, Some(0.0)).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.horizon(), 2);
        assert_eq!(p.get(1, 1).z, None);
        assert_eq!(p.get(1, 2).y, 3.0);
        assert_eq!(p.get(0, 0).z, Some(-1.0));
    }

    #[test]
    fn missing_z_treated_is_policy_violation() {
        let csv = "unit,time,z,a,y\n0,0,NA,1,1\n";
        assert!(matches!(
            parse(csv, None),
            Err(Error::PolicyViolation { .. })
        ));
        let csv = "unit,time,z,a,y\n0,0,,1,1\n";
        assert!(matches!(
            parse(csv, None),
            Err(Error::PolicyViolation { .. })
        ));
    }

    #[test]
    fn ragged_unit_is_rejected() {
        let csv = "unit,time,z,a,y\n0,0,1,1,1\n0,1,1,1,1\n0,2,1,1,1\n1,0,1,1,1\n1,1,1,1,1\n";
        assert!(matches!(parse(csv, None), Err(Error::RaggedPanel(_))));
    }

    #[test]
    fn policy_checked_against_cutoff() {
        let csv = "unit,time,z,a,y\n0,0,0.5,0,1\n";
        assert!(parse(csv, None).is_ok());
        assert!(matches!(
            parse(csv, Some(0.0)),
            Err(Error::PolicyViolation {
                unit: 0,
                period: 0,
                ..
            })
        ));
        // tie counts as treated
        let csv = "unit,time,z,a,y\n0,0,0,1,1\n";
        assert!(parse(csv, Some(0.0)).is_ok());
    }

    #[test]
    fn non_numeric_field_is_malformed() {
        let csv = "unit,time,z,a,y\n0,0,abc,0,1\n";
        assert!(matches!(
            parse(csv, None),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let csv = "unit,time,z,a,y\n0,0,1,2,1\n";
        assert!(matches!(parse(csv, None), Err(Error::MalformedRow { .. })));
        let csv = "unit,time,z,a\n0,0,1,0\n";
        assert!(matches!(
            parse(csv, None),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_cell_is_malformed() {
        let csv = "unit,time,z,a,y\n0,0,1,1,1\n0,0,1,1,2\n";
        assert!(matches!(
            parse(csv, None),
            Err(Error::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn custom_column_names() {
        let csv = "id,period,score,treated,outcome\n7,0,1.5,1,2\n";
        let map = ColumnMap {
            unit: "id".into(),
            time: "period".into(),
            z: "score".into(),
            a: "treated".into(),
            y: "outcome".into(),
        };
        let p = read_panel(csv.as_bytes(), &map, Some(1.0)).unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.get(0, 0).y, 2.0);
    }

    #[test]
    fn missing_z_written_as_na() {
        let p = TrajectoryPanel::new(
            1,
            1,
            vec![
                Observation::new(None, false, 1.5),
                Observation::new(Some(0.1), true, -2.0),
            ],
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_panel_to(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "unit,time,z,a,y\n0,0,NA,0,1.5\n0,1,0.1,1,-2\n");
    }

    #[test]
    fn write_creates_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let p = TrajectoryPanel::new(
            1,
            0,
            vec![Observation::new(Some(1.0), true, 0.25)],
            Some(0.0),
        )
        .unwrap();
        write_panel(&p, &path).unwrap();
        let back = load_panel(&path, &ColumnMap::default(), Some(0.0)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(TrajectoryPanel::new(0, 0, vec![], None).is_err());
        assert!(
            TrajectoryPanel::new(1, 1, vec![Observation::new(None, false, 0.0)], None).is_err()
        );
        let nan = Observation::new(Some(f64::NAN), false, 0.0);
        assert!(TrajectoryPanel::new(1, 0, vec![nan], None).is_err());
    }
}
