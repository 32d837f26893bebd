//! Daily self-monitoring records, patient profiles and the closed-form domain
//! formulas shared by every other module.
//!
//! Units are fixed throughout the crate: weight in lbs, glucose in mg/dL,
//! ketone in mmol/L, macronutrients in grams and energy in kcal.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed value {value:?} in column `{column}`")]
    Malformed {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("duplicate record for {0}")]
    DuplicateDate(NaiveDate),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("records are not sorted by date at {0}")]
    Unsorted(NaiveDate),
    #[error("field `{0}` has no observed value to impute from")]
    Unimputable(Field),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The measured or logged quantities of a [`DailyRecord`], in canonical column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    NetCarb,
    Fat,
    Fiber,
    Protein,
    IntakeCalories,
    ActivityCalories,
    Steps,
    Glucose,
    Ketone,
    Weight,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::NetCarb,
        Field::Fat,
        Field::Fiber,
        Field::Protein,
        Field::IntakeCalories,
        Field::ActivityCalories,
        Field::Steps,
        Field::Glucose,
        Field::Ketone,
        Field::Weight,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Field::NetCarb => "net_carb",
            Field::Fat => "fat",
            Field::Fiber => "fiber",
            Field::Protein => "protein",
            Field::IntakeCalories => "intake_calories",
            Field::ActivityCalories => "activity_calories",
            Field::Steps => "steps",
            Field::Glucose => "glucose",
            Field::Ketone => "ketone",
            Field::Weight => "weight",
        }
    }

    /// Physiological measurements must be strictly positive; intake and
    /// activity only non-negative.
    pub fn strictly_positive(self) -> bool {
        matches!(self, Field::Glucose | Field::Ketone | Field::Weight)
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Field {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.column() == s)
            .ok_or_else(|| DataError::Domain(format!("unknown field `{s}`")))
    }
}

/// Set of fields, used to flag imputed values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldMask(u16);

impl FieldMask {
    pub const EMPTY: FieldMask = FieldMask(0);

    pub fn contains(self, field: Field) -> bool {
        self.0 & field.bit() != 0
    }

    pub fn insert(&mut self, field: Field) {
        self.0 |= field.bit();
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Field> {
        Field::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl FromIterator<Field> for FieldMask {
    fn from_iter<T: IntoIterator<Item = Field>>(iter: T) -> Self {
        let mut mask = FieldMask::EMPTY;
        for f in iter {
            mask.insert(f);
        }
        mask
    }
}

/// One calendar day of self-monitoring. `None` marks a missing value; values
/// filled in by [`impute`] are listed in `imputed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub net_carb: Option<f64>,
    pub fat: Option<f64>,
    pub fiber: Option<f64>,
    pub protein: Option<f64>,
    pub intake_calories: Option<f64>,
    pub activity_calories: Option<f64>,
    pub steps: Option<f64>,
    pub glucose: Option<f64>,
    pub ketone: Option<f64>,
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "FieldMask::is_empty")]
    pub imputed: FieldMask,
}

impl DailyRecord {
    /// A day with every field missing.
    pub fn empty(date: NaiveDate) -> Self {
        DailyRecord {
            date,
            net_carb: None,
            fat: None,
            fiber: None,
            protein: None,
            intake_calories: None,
            activity_calories: None,
            steps: None,
            glucose: None,
            ketone: None,
            weight: None,
            imputed: FieldMask::EMPTY,
        }
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::NetCarb => self.net_carb,
            Field::Fat => self.fat,
            Field::Fiber => self.fiber,
            Field::Protein => self.protein,
            Field::IntakeCalories => self.intake_calories,
            Field::ActivityCalories => self.activity_calories,
            Field::Steps => self.steps,
            Field::Glucose => self.glucose,
            Field::Ketone => self.ketone,
            Field::Weight => self.weight,
        }
    }

    pub fn set(&mut self, field: Field, value: Option<f64>) {
        let slot = match field {
            Field::NetCarb => &mut self.net_carb,
            Field::Fat => &mut self.fat,
            Field::Fiber => &mut self.fiber,
            Field::Protein => &mut self.protein,
            Field::IntakeCalories => &mut self.intake_calories,
            Field::ActivityCalories => &mut self.activity_calories,
            Field::Steps => &mut self.steps,
            Field::Glucose => &mut self.glucose,
            Field::Ketone => &mut self.ketone,
            Field::Weight => &mut self.weight,
        };
        *slot = value;
    }

    /// True when the value is present and was not imputed.
    pub fn is_observed(&self, field: Field) -> bool {
        self.get(field).is_some() && !self.imputed.contains(field)
    }

    pub fn is_complete(&self) -> bool {
        Field::ALL.iter().all(|f| self.get(*f).is_some())
    }

    /// Keto ratio of the day's logged macros, if all three are present.
    pub fn keto_ratio(&self) -> Option<f64> {
        keto_ratio(self.net_carb?, self.fat?, self.protein?).ok()
    }

    /// Checks the value-range invariants on every present field.
    pub fn validate(&self) -> Result<(), String> {
        for field in Field::ALL {
            if let Some(v) = self.get(field) {
                if !v.is_finite() {
                    return Err(format!("{field} is not finite"));
                }
                if field.strictly_positive() && v <= 0.0 {
                    return Err(format!("{field} must be > 0, got {v}"));
                }
                if v < 0.0 {
                    return Err(format!("{field} must be >= 0, got {v}"));
                }
            }
        }
        Ok(())
    }
}

const DATE_COLUMN: &str = "date";
const IMPUTED_COLUMN: &str = "imputed";

/// Reads daily records from CSV. The header must name `date` and every
/// [`Field`] column (any order); an optional `imputed` column carries
/// `;`-separated field names. Empty cells are missing values.
pub fn parse_records<R: Read>(reader: R) -> Result<Vec<DailyRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let date_idx = index_of(DATE_COLUMN).ok_or_else(|| DataError::MissingColumn(DATE_COLUMN.into()))?;
    let mut field_idx = Vec::with_capacity(Field::ALL.len());
    for field in Field::ALL {
        let idx = index_of(field.column()).ok_or_else(|| DataError::MissingColumn(field.column().into()))?;
        field_idx.push((field, idx));
    }
    let imputed_idx = index_of(IMPUTED_COLUMN);

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize| row.get(idx).unwrap_or("");

        let date_text = cell(date_idx);
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|_| DataError::Malformed {
            line,
            column: DATE_COLUMN.into(),
            value: date_text.into(),
        })?;
        let mut record = DailyRecord::empty(date);
        for &(field, idx) in &field_idx {
            let text = cell(idx);
            if text.is_empty() {
                continue;
            }
            let value: f64 = text.parse().map_err(|_| DataError::Malformed {
                line,
                column: field.column().into(),
                value: text.into(),
            })?;
            record.set(field, Some(value));
        }
        if let Some(idx) = imputed_idx {
            for name in cell(idx).split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let field: Field = name.parse().map_err(|_| DataError::Malformed {
                    line,
                    column: IMPUTED_COLUMN.into(),
                    value: name.into(),
                })?;
                record.imputed.insert(field);
            }
        }
        record
            .validate()
            .map_err(|message| DataError::Invalid { line, message })?;
        records.push(record);
    }

    records.sort_by_key(|r| r.date);
    if let Some(w) = records.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(DataError::DuplicateDate(w[0].date));
    }
    Ok(records)
}

/// Writes records in canonical column order. The `imputed` column is only
/// emitted when at least one record carries imputed values.
pub fn write_records<W: Write>(records: &[DailyRecord], writer: W) -> Result<(), DataError> {
    let with_flags = records.iter().any(|r| !r.imputed.is_empty());
    let mut wtr = csv::Writer::from_writer(writer);

    let mut header: Vec<&str> = vec![DATE_COLUMN];
    header.extend(Field::ALL.iter().map(|f| f.column()));
    if with_flags {
        header.push(IMPUTED_COLUMN);
    }
    wtr.write_record(&header)?;

    for r in records {
        let mut row = vec![r.date.format("%Y-%m-%d").to_string()];
        row.extend(Field::ALL.iter().map(|f| r.get(*f).map(|v| v.to_string()).unwrap_or_default()));
        if with_flags {
            row.push(r.imputed.iter().map(Field::column).collect::<Vec<_>>().join(";"));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMethod {
    /// Linear interpolation in calendar days between the nearest observed
    /// neighbours; ends are filled from the nearest observation.
    #[default]
    Linear,
    /// Last observation carried forward; leading gaps are back-filled.
    CarryForward,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputePolicy {
    pub method: ImputeMethod,
    /// Fields allowed to stay missing when a series never observes them.
    #[serde(default)]
    pub optional: FieldMask,
}

/// Fills every missing value and flags it as imputed. Present values are
/// never changed, so the function is idempotent.
pub fn impute(records: &[DailyRecord], policy: &ImputePolicy) -> Result<Vec<DailyRecord>, DataError> {
    if let Some(w) = records.windows(2).find(|w| w[0].date >= w[1].date) {
        return Err(if w[0].date == w[1].date {
            DataError::DuplicateDate(w[0].date)
        } else {
            DataError::Unsorted(w[1].date)
        });
    }
    let mut out = records.to_vec();
    if records.is_empty() {
        return Ok(out);
    }
    let origin = records[0].date;
    let day = |d: NaiveDate| (d - origin).num_days() as f64;

    for field in Field::ALL {
        let known: Vec<(usize, f64)> = records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.get(field).map(|v| (i, v)))
            .collect();
        if known.is_empty() {
            if policy.optional.contains(field) {
                continue;
            }
            return Err(DataError::Unimputable(field));
        }
        if known.len() == records.len() {
            continue;
        }

        // `cursor` is the index into `known` of the first known entry at or after i.
        let mut cursor = 0;
        for i in 0..records.len() {
            while cursor < known.len() && known[cursor].0 < i {
                cursor += 1;
            }
            if cursor < known.len() && known[cursor].0 == i {
                continue;
            }
            let before = cursor.checked_sub(1).map(|k| known[k]);
            let after = known.get(cursor).copied();
            let value = match (policy.method, before, after) {
                (_, None, Some((_, v))) | (_, Some((_, v)), None) => v,
                (ImputeMethod::CarryForward, Some((_, v)), Some(_)) => v,
                (ImputeMethod::Linear, Some((ia, va)), Some((ib, vb))) => {
                    let (xa, xb, x) = (day(records[ia].date), day(records[ib].date), day(records[i].date));
                    va + (vb - va) * (x - xa) / (xb - xa)
                }
                (_, None, None) => unreachable!("known is non-empty"),
            };
            out[i].set(field, Some(value));
            out[i].imputed.insert(field);
        }
    }
    Ok(out)
}

/// Keto ratio `fat / (net_carb + protein)`, where net carb is total carb
/// minus fiber. The ketogenic target is a ratio of at least 1.5.
pub fn keto_ratio(net_carb: f64, fat: f64, protein: f64) -> Result<f64, DataError> {
    let denominator = net_carb + protein;
    if !(denominator > 0.0) || !fat.is_finite() || !denominator.is_finite() {
        return Err(DataError::Domain(format!(
            "keto ratio needs net_carb + protein > 0, got {denominator}"
        )));
    }
    Ok(fat / denominator)
}

/// Weight goal: a 20% loss from the starting weight.
pub fn weight_goal(baseline_weight: f64) -> Result<f64, DataError> {
    if !(baseline_weight > 0.0) || !baseline_weight.is_finite() {
        return Err(DataError::Domain(format!(
            "baseline weight must be positive, got {baseline_weight}"
        )));
    }
    Ok(0.8 * baseline_weight)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DietGroup {
    Keto,
    LowFat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionGroup {
    #[serde(rename = "obese_t2d")]
    ObeseT2D,
    #[serde(rename = "obese_kidney_t2d")]
    ObeseKidneyT2D,
}

/// One of the four diet-condition fine-tuning groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    pub diet: DietGroup,
    pub condition: ConditionGroup,
}

impl Group {
    pub const ALL: [Group; 4] = [
        Group::new(DietGroup::Keto, ConditionGroup::ObeseT2D),
        Group::new(DietGroup::Keto, ConditionGroup::ObeseKidneyT2D),
        Group::new(DietGroup::LowFat, ConditionGroup::ObeseT2D),
        Group::new(DietGroup::LowFat, ConditionGroup::ObeseKidneyT2D),
    ];

    pub const fn new(diet: DietGroup, condition: ConditionGroup) -> Self {
        Group { diet, condition }
    }

    /// Stable slug used in URLs and file names, e.g. `keto-obese-t2d`.
    pub fn slug(self) -> &'static str {
        match (self.diet, self.condition) {
            (DietGroup::Keto, ConditionGroup::ObeseT2D) => "keto-obese-t2d",
            (DietGroup::Keto, ConditionGroup::ObeseKidneyT2D) => "keto-obese-kidney-t2d",
            (DietGroup::LowFat, ConditionGroup::ObeseT2D) => "lowfat-obese-t2d",
            (DietGroup::LowFat, ConditionGroup::ObeseKidneyT2D) => "lowfat-obese-kidney-t2d",
        }
    }

    pub fn label(self) -> &'static str {
        match (self.diet, self.condition) {
            (DietGroup::Keto, ConditionGroup::ObeseT2D) => "Keto / Obese + Diabetes",
            (DietGroup::Keto, ConditionGroup::ObeseKidneyT2D) => "Keto / Obese + Kidney + Diabetes",
            (DietGroup::LowFat, ConditionGroup::ObeseT2D) => "Low-Fat / Obese + Diabetes",
            (DietGroup::LowFat, ConditionGroup::ObeseKidneyT2D) => "Low-Fat / Obese + Kidney + Diabetes",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Group {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.slug() == s)
            .ok_or_else(|| DataError::Domain(format!("unknown group `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Ai,
    NonAi,
}

/// Controller decision variables. Intake calories are derived from macros.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionVar {
    NetCarb,
    Fat,
    Fiber,
    Protein,
    ActivityCalories,
    Steps,
}

impl DecisionVar {
    pub const ALL: [DecisionVar; 6] = [
        DecisionVar::NetCarb,
        DecisionVar::Fat,
        DecisionVar::Fiber,
        DecisionVar::Protein,
        DecisionVar::ActivityCalories,
        DecisionVar::Steps,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub id: String,
    pub diet_group: DietGroup,
    pub condition_group: ConditionGroup,
    pub arm: Arm,
    /// Weight at the start of the study (lbs).
    pub baseline_weight: f64,
    pub weight_goal: f64,
    pub calorie_goal: f64,
    #[serde(default)]
    pub min_protein: Option<f64>,
    #[serde(default)]
    pub min_fat: Option<f64>,
    /// Only meaningful for the low-fat diet.
    #[serde(default)]
    pub max_fat: Option<f64>,
    #[serde(default)]
    pub constraint_overrides: BTreeMap<DecisionVar, Bounds>,
}

impl PatientProfile {
    /// Builds a profile with the default weight goal derived from `baseline_weight`.
    pub fn new(
        id: impl Into<String>,
        group: Group,
        arm: Arm,
        baseline_weight: f64,
        calorie_goal: f64,
    ) -> Result<Self, DataError> {
        if !(calorie_goal > 0.0) {
            return Err(DataError::Domain(format!("calorie goal must be positive, got {calorie_goal}")));
        }
        Ok(PatientProfile {
            id: id.into(),
            diet_group: group.diet,
            condition_group: group.condition,
            arm,
            baseline_weight,
            weight_goal: weight_goal(baseline_weight)?,
            calorie_goal,
            min_protein: None,
            min_fat: None,
            max_fat: None,
            constraint_overrides: BTreeMap::new(),
        })
    }

    pub fn group(&self) -> Group {
        Group::new(self.diet_group, self.condition_group)
    }

    pub fn with_weight_goal(mut self, goal: f64) -> Self {
        self.weight_goal = goal;
        self
    }
}
