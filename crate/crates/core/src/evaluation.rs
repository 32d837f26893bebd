//! Clarke error grid classification and accuracy reports.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end of the grid in mg/dL.
pub const GRID_MAX: f64 = 600.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("glucose pair ({reference}, {predicted}) outside (0, 600] mg/dL")]
    Domain { reference: f64, predicted: f64 },
}

/// Zones ordered from clinically harmless to dangerous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
    D,
    E,
}

impl Zone {
    pub const ALL: [Zone; 5] = [Zone::A, Zone::B, Zone::C, Zone::D, Zone::E];

    /// Rank used to resolve points on a zone border: the milder zone wins.
    fn severity(self) -> u8 {
        match self {
            Zone::A => 0,
            Zone::B => 1,
            Zone::D => 2,
            Zone::C => 3,
            Zone::E => 4,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Region test without border handling. Zone A and E take precedence over
/// the C and D conditions, which overlap B's outer regions.
fn raw_zone(r: f64, p: f64) -> Zone {
    if (r <= 70.0 && p <= 70.0) || 5.0 * (p - r).abs() <= r {
        Zone::A
    } else if (r >= 180.0 && p <= 70.0) || (r <= 70.0 && p >= 180.0) {
        Zone::E
    } else if ((70.0..=290.0).contains(&r) && p >= r + 110.0) || ((130.0..=180.0).contains(&r) && p <= 1.4 * r - 182.0) {
        Zone::C
    } else if (r >= 240.0 && (70.0..=180.0).contains(&p))
        || (r <= 175.0 / 3.0 && (70.0..=180.0).contains(&p))
        || ((175.0 / 3.0..=70.0).contains(&r) && p >= 1.2 * r)
    {
        Zone::D
    } else {
        Zone::B
    }
}

/// Clarke zone of a (reference, predicted) pair in mg/dL. Points on a
/// border between zones belong to the milder one.
pub fn clarke_zone(reference: f64, predicted: f64) -> Result<Zone, EvaluationError> {
    let valid = |v: f64| v > 0.0 && v <= GRID_MAX;
    if !valid(reference) || !valid(predicted) {
        return Err(EvaluationError::Domain { reference, predicted });
    }
    let mut zone = raw_zone(reference, predicted);
    if zone == Zone::A {
        return Ok(zone);
    }
    let eps = 1e-9 * reference.max(predicted).max(1.0);
    for (dr, dp) in [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ] {
        let z = raw_zone(reference + dr * eps, predicted + dp * eps);
        if z.severity() < zone.severity() {
            zone = z;
        }
    }
    Ok(zone)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZoneReport {
    pub counts: [usize; 5],
    pub total: usize,
}

impl ZoneReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, EvaluationError> {
        let mut report = ZoneReport::default();
        for (r, p) in pairs {
            report.add(clarke_zone(r, p)?);
        }
        Ok(report)
    }

    pub fn add(&mut self, zone: Zone) {
        self.counts[zone as usize] += 1;
        self.total += 1;
    }

    pub fn count(&self, zone: Zone) -> usize {
        self.counts[zone as usize]
    }

    pub fn fraction(&self, zone: Zone) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(zone) as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: &ZoneReport) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.total += other.total;
    }
}

/// Zone-A percentages of several models across groups.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub columns: Vec<String>,
    pub rows: Vec<AccuracyRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model: String,
    pub reports: Vec<ZoneReport>,
}

impl AccuracyTable {
    pub fn new(columns: Vec<String>) -> Self {
        AccuracyTable { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, model: impl Into<String>, reports: Vec<ZoneReport>) {
        assert_eq!(reports.len(), self.columns.len(), "one report per column");
        self.rows.push(AccuracyRow {
            model: model.into(),
            reports,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Plain-text table of zone-A percentages.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10}", "model");
        for c in &self.columns {
            out.push_str(&format!(" {c:>26}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<10}", row.model));
            for r in &row.reports {
                out.push_str(&format!(" {:>25.1}%", 100.0 * r.fraction(Zone::A)));
            }
            out.push('\n');
        }
        out
    }
}

/// Zone of every integer pair in `[1, max]^2` as CSV rows.
pub fn grid_csv(max: u32) -> String {
    let mut out = String::from("reference,predicted,zone\n");
    for r in 1..=max {
        for p in 1..=max {
            let z = clarke_zone(r as f64, p as f64).expect("grid is in domain");
            out.push_str(&format!("{r},{p},{z}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_points() {
        assert_eq!(clarke_zone(134.0, 110.0).unwrap(), Zone::A);
        assert_eq!(clarke_zone(100.0, 100.0).unwrap(), Zone::A);
        assert_eq!(clarke_zone(50.0, 60.0).unwrap(), Zone::A);
        assert_eq!(clarke_zone(100.0, 150.0).unwrap(), Zone::B);
        assert_eq!(clarke_zone(100.0, 250.0).unwrap(), Zone::C);
        assert_eq!(clarke_zone(300.0, 100.0).unwrap(), Zone::D);
        assert_eq!(clarke_zone(50.0, 100.0).unwrap(), Zone::D);
        assert_eq!(clarke_zone(250.0, 50.0).unwrap(), Zone::E);
        assert_eq!(clarke_zone(50.0, 250.0).unwrap(), Zone::E);
    }

    #[test]
    fn borders_go_to_milder_zone() {
        // 5 |p - r| = r exactly
        assert_eq!(clarke_zone(100.0, 120.0).unwrap(), Zone::A);
        // p = r + 110 on the C border
        assert_eq!(clarke_zone(100.0, 210.0).unwrap(), Zone::B);
        // reference 180, predicted 70: E corner touches B
        assert_ne!(clarke_zone(180.0, 70.0).unwrap(), Zone::E);
    }

    #[test]
    fn diagonal_is_zone_a() {
        for x in 1..=600 {
            assert_eq!(clarke_zone(x as f64, x as f64).unwrap(), Zone::A);
        }
    }

    #[test]
    fn out_of_domain() {
        assert!(clarke_zone(0.0, 10.0).is_err());
        assert!(clarke_zone(10.0, 601.0).is_err());
        assert!(clarke_zone(f64::NAN, 10.0).is_err());
    }

    #[test]
    fn report_fractions() {
        let r = ZoneReport::from_pairs([(100.0, 100.0), (100.0, 150.0), (250.0, 50.0), (134.0, 110.0)]).unwrap();
        assert_eq!(r.total, 4);
        assert_eq!(r.fraction(Zone::A), 0.5);
        assert_eq!(r.count(Zone::E), 1);
    }

    #[test]
    fn table_renders_rows() {
        let mut t = AccuracyTable::new(vec!["g1".into()]);
        t.push("ANN", vec![ZoneReport::from_pairs([(100.0, 100.0)]).unwrap()]);
        assert!(t.render().contains("100.0%"));
        assert!(t.to_json().contains("\"ANN\""));
    }
}
