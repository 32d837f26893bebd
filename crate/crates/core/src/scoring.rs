//! Nurse ratings, hard-boundary tables and automated penalty lookup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Penalties, Suggestion, PENALTY_RANGE};
use crate::data::DietGroup;
use crate::twin::PredictedOutcome;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("profile has no {0}")]
    MissingGoal(&'static str),
    #[error("invalid penalty table: {0}")]
    Table(String),
}

/// The nurse's four-level judgement of a suggestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rating {
    Bad,
    Okay,
    Good,
    VeryGood,
}

impl Rating {
    pub const ALL: [Rating; 4] = [Rating::Bad, Rating::Okay, Rating::Good, Rating::VeryGood];

    pub fn penalty(self) -> f64 {
        match self {
            Rating::Bad => 1000.0,
            Rating::Okay => 500.0,
            Rating::Good => 100.0,
            Rating::VeryGood => 1.0,
        }
    }

    /// Rating whose penalty is closest to `penalty`; ties go to the harsher one.
    pub fn nearest(penalty: f64) -> Rating {
        let mut best = Rating::Bad;
        for r in Rating::ALL {
            if (r.penalty() - penalty).abs() < (best.penalty() - penalty).abs() {
                best = r;
            }
        }
        best
    }
}

/// The three penalised objective terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Glucose,
    Weight,
    Ketone,
}

impl Term {
    pub const ALL: [Term; 3] = [Term::Glucose, Term::Weight, Term::Ketone];
}

/// Returns `base` with every term in `terms` replaced by the rating's penalty.
pub fn apply_rating(base: Penalties, rating: Rating, terms: &[Term]) -> Penalties {
    let mut p = base;
    for t in terms {
        match t {
            Term::Glucose => p.glucose = rating.penalty(),
            Term::Weight => p.weight = rating.penalty(),
            Term::Ketone => p.ketone = rating.penalty(),
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Importance {
    Very,
    Moderate,
    Less,
}

/// Quantity a boundary rule is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    NetCarb,
    KetoRatio,
    Weight,
    Glucose,
    Protein,
    Fat,
    IntakeCalories,
    Ketone,
    ActivityCalories,
    Steps,
    /// Share of intake calories that comes from carbohydrate.
    CarbCalorieShare,
}

/// Admissible region of a rule. Profile-dependent limits are resolved when
/// the rule is checked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    Range { lo: f64, hi: f64 },
    AtLeast { value: f64 },
    Below { value: f64 },
    /// Within `tolerance` of the reference weight.
    NearReference { tolerance: f64 },
    AtLeastMinProtein,
    AtLeastMinFat,
    BelowMaxFat,
    BelowCalorieGoal,
    /// Below the day's intake calories plus `margin`.
    BelowIntakePlus { margin: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRule {
    pub metric: Metric,
    pub limit: Limit,
    pub importance: Importance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTable {
    pub diet_group: DietGroup,
    pub rules: Vec<BoundaryRule>,
}

impl BoundaryTable {
    pub fn for_diet(diet: DietGroup) -> Self {
        match diet {
            DietGroup::Keto => keto_table(),
            DietGroup::LowFat => low_fat_table(),
        }
    }
}

fn rule(metric: Metric, limit: Limit, importance: Importance) -> BoundaryRule {
    BoundaryRule {
        metric,
        limit,
        importance,
    }
}

pub fn keto_table() -> BoundaryTable {
    use Importance::*;
    BoundaryTable {
        diet_group: DietGroup::Keto,
        rules: vec![
            rule(Metric::NetCarb, Limit::Range { lo: 20.0, hi: 50.0 }, Very),
            rule(Metric::KetoRatio, Limit::AtLeast { value: 1.5 }, Very),
            rule(Metric::Weight, Limit::NearReference { tolerance: 5.0 }, Very),
            rule(Metric::Glucose, Limit::Range { lo: 70.0, hi: 130.0 }, Very),
            rule(Metric::Protein, Limit::AtLeastMinProtein, Moderate),
            rule(Metric::Fat, Limit::AtLeastMinFat, Moderate),
            rule(Metric::IntakeCalories, Limit::BelowCalorieGoal, Moderate),
            rule(Metric::Ketone, Limit::AtLeast { value: 0.5 }, Moderate),
            rule(Metric::ActivityCalories, Limit::BelowIntakePlus { margin: 500.0 }, Less),
            rule(Metric::Steps, Limit::AtLeast { value: 6000.0 }, Less),
        ],
    }
}

pub fn low_fat_table() -> BoundaryTable {
    use Importance::*;
    BoundaryTable {
        diet_group: DietGroup::LowFat,
        rules: vec![
            rule(Metric::CarbCalorieShare, Limit::Below { value: 0.65 }, Moderate),
            rule(Metric::Protein, Limit::AtLeastMinProtein, Moderate),
            rule(Metric::Fat, Limit::BelowMaxFat, Very),
            rule(Metric::IntakeCalories, Limit::BelowCalorieGoal, Very),
            rule(Metric::ActivityCalories, Limit::BelowIntakePlus { margin: 500.0 }, Less),
            rule(Metric::Steps, Limit::AtLeast { value: 6000.0 }, Less),
            rule(Metric::Weight, Limit::NearReference { tolerance: 5.0 }, Very),
            rule(Metric::Glucose, Limit::Range { lo: 70.0, hi: 130.0 }, Very),
        ],
    }
}

/// Personal goals some rules refer to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Goals {
    pub calorie_goal: Option<f64>,
    pub min_protein: Option<f64>,
    pub min_fat: Option<f64>,
    pub max_fat: Option<f64>,
}

impl From<&crate::data::PatientProfile> for Goals {
    fn from(p: &crate::data::PatientProfile) -> Self {
        Goals {
            calorie_goal: Some(p.calorie_goal),
            min_protein: p.min_protein,
            min_fat: p.min_fat,
            max_fat: p.max_fat,
        }
    }
}

/// Values a suggestion and its forecast are checked on. Missing values skip
/// their rules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryInput {
    pub net_carb: Option<f64>,
    pub fat: Option<f64>,
    pub protein: Option<f64>,
    pub intake_calories: Option<f64>,
    pub activity_calories: Option<f64>,
    pub steps: Option<f64>,
    pub glucose: Option<f64>,
    pub weight: Option<f64>,
    pub ketone: Option<f64>,
    /// Weight the +/- tolerance is measured from, usually the last observation.
    pub reference_weight: Option<f64>,
}

impl BoundaryInput {
    pub fn from_plan(s: &Suggestion, predicted: &PredictedOutcome, reference_weight: f64) -> Self {
        BoundaryInput {
            net_carb: Some(s.net_carb),
            fat: Some(s.fat),
            protein: Some(s.protein),
            intake_calories: Some(s.intake_calories),
            activity_calories: Some(s.activity_calories),
            steps: Some(s.steps),
            glucose: Some(predicted.glucose),
            weight: Some(predicted.weight),
            ketone: Some(predicted.ketone),
            reference_weight: Some(reference_weight),
        }
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::NetCarb => self.net_carb,
            Metric::KetoRatio => {
                let (c, f, p) = (self.net_carb?, self.fat?, self.protein?);
                crate::data::keto_ratio(c, f, p).ok()
            }
            Metric::Weight => self.weight,
            Metric::Glucose => self.glucose,
            Metric::Protein => self.protein,
            Metric::Fat => self.fat,
            Metric::IntakeCalories => self.intake_calories,
            Metric::Ketone => self.ketone,
            Metric::ActivityCalories => self.activity_calories,
            Metric::Steps => self.steps,
            Metric::CarbCalorieShare => {
                let (c, kcal) = (self.net_carb?, self.intake_calories?);
                (kcal > 0.0).then(|| 4.0 * c / kcal)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Satisfied,
    Violated,
    /// The value, or the reference it is compared with, was not provided.
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: BoundaryRule,
    pub value: Option<f64>,
    pub status: Status,
}

/// Checks every rule of `table`. A rule that needs a profile goal the
/// patient lacks is a configuration error.
pub fn check_boundaries(
    table: &BoundaryTable,
    input: &BoundaryInput,
    goals: &Goals,
) -> Result<Vec<RuleCheck>, ScoringError> {
    table
        .rules
        .iter()
        .map(|r| {
            let value = input.value(r.metric);
            let goal = |g: Option<f64>, name: &'static str| g.ok_or(ScoringError::MissingGoal(name));
            let ok = match (r.limit, value) {
                (Limit::AtLeastMinProtein, _) => {
                    let g = goal(goals.min_protein, "minimum protein")?;
                    value.map(|v| v >= g)
                }
                (Limit::AtLeastMinFat, _) => {
                    let g = goal(goals.min_fat, "minimum fat")?;
                    value.map(|v| v >= g)
                }
                (Limit::BelowMaxFat, _) => {
                    let g = goal(goals.max_fat, "maximum fat")?;
                    value.map(|v| v < g)
                }
                (Limit::BelowCalorieGoal, _) => {
                    let g = goal(goals.calorie_goal, "calorie goal")?;
                    value.map(|v| v < g)
                }
                (_, None) => None,
                (Limit::Range { lo, hi }, Some(v)) => Some(v >= lo && v <= hi),
                (Limit::AtLeast { value: lo }, Some(v)) => Some(v >= lo),
                (Limit::Below { value: hi }, Some(v)) => Some(v < hi),
                (Limit::NearReference { tolerance }, Some(v)) => {
                    input.reference_weight.map(|w| (v - w).abs() <= tolerance)
                }
                (Limit::BelowIntakePlus { margin }, Some(v)) => input.intake_calories.map(|i| v < i + margin),
            };
            Ok(RuleCheck {
                rule: r.clone(),
                value,
                status: match ok {
                    Some(true) => Status::Satisfied,
                    Some(false) => Status::Violated,
                    None => Status::Unchecked,
                },
            })
        })
        .collect()
}

/// Violated rules, most important first, table order within a level.
pub fn violations(checks: &[RuleCheck]) -> Vec<&RuleCheck> {
    let mut v: Vec<&RuleCheck> = checks.iter().filter(|c| c.status == Status::Violated).collect();
    v.sort_by_key(|c| c.rule.importance);
    v
}

/// Half-open or closed interval of a penalty band; `None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: Option<f64>,
    #[serde(default = "yes")]
    pub lo_inclusive: bool,
    pub hi: Option<f64>,
    #[serde(default = "yes")]
    pub hi_inclusive: bool,
    pub penalty: f64,
}

fn yes() -> bool {
    true
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lo {
            None => true,
            Some(lo) if self.lo_inclusive => x >= lo,
            Some(lo) => x > lo,
        };
        let below = match self.hi {
            None => true,
            Some(hi) if self.hi_inclusive => x <= hi,
            Some(hi) => x < hi,
        };
        above && below
    }

    fn new(lo: Option<f64>, lo_inclusive: bool, hi: Option<f64>, hi_inclusive: bool, penalty: f64) -> Self {
        Band {
            lo,
            lo_inclusive,
            hi,
            hi_inclusive,
            penalty,
        }
    }
}

/// Penalty bands for the three terms. Glucose is banded on the forecast,
/// weight on its absolute distance from the reference weight, and the
/// ketone term on the keto ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyLookup {
    pub glucose: Vec<Band>,
    pub weight: Vec<Band>,
    pub keto_ratio: Vec<Band>,
}

impl Default for PenaltyLookup {
    fn default() -> Self {
        PenaltyLookup {
            glucose: vec![
                Band::new(None, true, Some(70.0), false, 1000.0),
                Band::new(Some(70.0), true, Some(130.0), true, 1.0),
                Band::new(Some(130.0), false, Some(140.0), true, 10.0),
                Band::new(Some(140.0), false, Some(160.0), true, 100.0),
                Band::new(Some(160.0), false, Some(200.0), true, 500.0),
                Band::new(Some(200.0), false, None, true, 1000.0),
            ],
            weight: vec![
                Band::new(Some(0.0), true, Some(5.0), true, 1.0),
                Band::new(Some(5.0), false, Some(10.0), true, 10.0),
                Band::new(Some(10.0), false, Some(15.0), true, 100.0),
                Band::new(Some(15.0), false, None, true, 1000.0),
            ],
            keto_ratio: vec![
                Band::new(None, true, Some(1.0), false, 500.0),
                Band::new(Some(1.0), true, Some(1.5), false, 100.0),
                Band::new(Some(1.5), true, None, true, 1.0),
            ],
        }
    }
}

impl PenaltyLookup {
    pub fn validate(&self) -> Result<(), ScoringError> {
        for (name, bands) in self.tables() {
            if bands.is_empty() {
                return Err(ScoringError::Table(format!("{name}: no bands")));
            }
            for b in bands {
                if !PENALTY_RANGE.contains(b.penalty) {
                    return Err(ScoringError::Table(format!("{name}: penalty {} outside [1, 1000]", b.penalty)));
                }
                if let (Some(lo), Some(hi)) = (b.lo, b.hi) {
                    if lo > hi {
                        return Err(ScoringError::Table(format!("{name}: band [{lo}, {hi}] is inverted")));
                    }
                }
            }
        }
        Ok(())
    }

    fn tables(&self) -> [(&'static str, &[Band]); 3] {
        [("glucose", &self.glucose), ("weight", &self.weight), ("keto_ratio", &self.keto_ratio)]
    }

    pub fn bands(&self, term: Term) -> &[Band] {
        match term {
            Term::Glucose => &self.glucose,
            Term::Weight => &self.weight,
            Term::Ketone => &self.keto_ratio,
        }
    }

    /// Penalty of the first band containing `value`, or `None` when no band
    /// covers it.
    pub fn lookup(&self, term: Term, value: f64) -> Option<f64> {
        self.bands(term).iter().find(|b| b.contains(value)).map(|b| b.penalty)
    }
}

/// Multipliers for tomorrow's run, derived from today's forecast without a
/// nurse. Values outside every band fall back to the linear fit.
pub fn auto_penalties(
    lookup: &PenaltyLookup,
    predicted: &PredictedOutcome,
    keto_ratio: f64,
    reference_weight: f64,
    diet: DietGroup,
) -> Result<Penalties, ScoringError> {
    let resolve = |term: Term, v: f64| -> Result<f64, ScoringError> {
        match lookup.lookup(term, v) {
            Some(p) => Ok(p),
            None => Ok(fit_linear_penalty(lookup.bands(term))?.eval(v)),
        }
    };
    let glucose = resolve(Term::Glucose, predicted.glucose)?;
    let weight = resolve(Term::Weight, (predicted.weight - reference_weight).abs())?;
    let ketone = match diet {
        DietGroup::Keto => resolve(Term::Ketone, keto_ratio)?,
        DietGroup::LowFat => 1.0,
    };
    Ok(Penalties {
        glucose,
        weight,
        ketone,
    })
}

/// Precedence when several sources give a multiplier for the same term.
pub fn resolve_penalty(manual: Option<Rating>, lookup: Option<f64>, linear: f64) -> f64 {
    manual.map(Rating::penalty).or(lookup).unwrap_or(linear)
}

/// Straight line `penalty = intercept + slope * value`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Piecewise-linear penalty: flat at 1 on the satisfied region, a fitted
/// line on each side, clamped to [1, 1000].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPenalty {
    pub satisfied_lo: Option<f64>,
    pub satisfied_hi: Option<f64>,
    pub below: Option<Line>,
    pub above: Option<Line>,
    /// Root mean square deviation from the band penalties at the fit points.
    pub residual: f64,
}

impl LinearPenalty {
    pub fn eval(&self, x: f64) -> f64 {
        let raw = match (self.satisfied_lo, self.satisfied_hi) {
            (Some(lo), _) if x < lo => self.below.map_or(1.0, |l| l.at(x)),
            (_, Some(hi)) if x > hi => self.above.map_or(1.0, |l| l.at(x)),
            _ => 1.0,
        };
        PENALTY_RANGE.clamp(raw)
    }
}

/// Fits a line to each side of the satisfied band (the one with the lowest
/// penalty). Each band contributes its midpoint; an unbounded band is
/// represented half a neighbour's width beyond its edge. The satisfied edge
/// anchors each line at penalty 1.
pub fn fit_linear_penalty(bands: &[Band]) -> Result<LinearPenalty, ScoringError> {
    if bands.len() < 2 {
        return Err(ScoringError::Table("a linear fit needs at least two bands".into()));
    }
    let mut sorted: Vec<Band> = bands.to_vec();
    sorted.sort_by(|a, b| {
        let key = |x: &Band| x.lo.or(x.hi.map(|h| h - 1.0)).unwrap_or(f64::NEG_INFINITY);
        key(a).total_cmp(&key(b))
    });
    let sat = (0..sorted.len())
        .min_by(|&a, &b| sorted[a].penalty.total_cmp(&sorted[b].penalty))
        .unwrap();
    let points = |range: &[Band]| -> Vec<(f64, f64)> {
        range
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                let x = match (b.lo, b.hi) {
                    (Some(lo), Some(hi)) => (lo + hi) / 2.0,
                    (None, Some(hi)) => {
                        let w = range.get(i + 1).and_then(width).unwrap_or(1.0);
                        hi - w / 2.0
                    }
                    (Some(lo), None) => {
                        let w = i.checked_sub(1).and_then(|j| range.get(j)).and_then(width).unwrap_or(1.0);
                        lo + w / 2.0
                    }
                    (None, None) => return None,
                };
                Some((x, b.penalty))
            })
            .collect()
    };
    let edge_lo = sorted[sat].lo;
    let edge_hi = sorted[sat].hi;
    let mut residual_sq = 0.0;
    let mut count = 0usize;
    let mut side = |pts: Vec<(f64, f64)>, anchor: Option<f64>| -> Option<Line> {
        let anchor = anchor?;
        if pts.is_empty() {
            return None;
        }
        let mut all = pts;
        all.push((anchor, 1.0));
        let line = least_squares(&all);
        for (x, y) in &all {
            residual_sq += (line.at(*x) - y).powi(2);
            count += 1;
        }
        Some(line)
    };
    let below = side(points(&sorted[..=sat])[..sat].to_vec(), edge_lo);
    let above_pts = points(&sorted[sat..]);
    let above = side(above_pts[1..].to_vec(), edge_hi);
    Ok(LinearPenalty {
        satisfied_lo: edge_lo,
        satisfied_hi: edge_hi,
        below,
        above,
        residual: if count > 0 { (residual_sq / count as f64).sqrt() } else { 0.0 },
    })
}

fn width(b: &Band) -> Option<f64> {
    Some(b.hi? - b.lo?)
}

fn least_squares(points: &[(f64, f64)]) -> Line {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Line {
            intercept: my,
            slope: 0.0,
        };
    }
    let slope = sxy / sxx;
    Line {
        intercept: my - slope * mx,
        slope,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_map() {
        assert_eq!(Rating::Bad.penalty(), 1000.0);
        assert_eq!(Rating::Okay.penalty(), 500.0);
        assert_eq!(Rating::Good.penalty(), 100.0);
        assert_eq!(Rating::VeryGood.penalty(), 1.0);
    }

    #[test]
    fn nearest_rating() {
        assert_eq!(Rating::nearest(10.0), Rating::VeryGood);
        assert_eq!(Rating::nearest(90.0), Rating::Good);
        assert_eq!(Rating::nearest(700.0), Rating::Okay);
        assert_eq!(Rating::nearest(750.0), Rating::Bad);
        for r in Rating::ALL {
            assert_eq!(Rating::nearest(r.penalty()), r);
        }
    }

    #[test]
    fn rating_applies_only_to_flagged_terms() {
        let p = apply_rating(Penalties::NEUTRAL, Rating::Okay, &[Term::Glucose]);
        assert_eq!(p, Penalties::new(500.0, 1.0, 1.0).unwrap());
    }

    #[test]
    fn lookup_glucose_135() {
        let l = PenaltyLookup::default();
        assert_eq!(l.lookup(Term::Glucose, 135.0), Some(10.0));
        assert_eq!(l.lookup(Term::Glucose, 130.0), Some(1.0));
        assert_eq!(l.lookup(Term::Glucose, 69.0), Some(1000.0));
        assert_eq!(l.lookup(Term::Glucose, 250.0), Some(1000.0));
    }

    #[test]
    fn default_lookup_is_valid() {
        PenaltyLookup::default().validate().unwrap();
        let mut bad = PenaltyLookup::default();
        bad.weight[0].penalty = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn auto_penalties_low_fat_ignores_ketone() {
        let o = PredictedOutcome {
            glucose: 135.0,
            weight: 201.0,
            ketone: 0.1,
        };
        let p = auto_penalties(&PenaltyLookup::default(), &o, 0.2, 199.2, DietGroup::LowFat).unwrap();
        assert_eq!(p, Penalties::new(10.0, 1.0, 1.0).unwrap());
        let k = auto_penalties(&PenaltyLookup::default(), &o, 1.2, 199.2, DietGroup::Keto).unwrap();
        assert_eq!(k.ketone, 100.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(resolve_penalty(Some(Rating::Good), Some(10.0), 3.0), 100.0);
        assert_eq!(resolve_penalty(None, Some(10.0), 3.0), 10.0);
        assert_eq!(resolve_penalty(None, None, 3.0), 3.0);
    }

    #[test]
    fn linear_fit_is_flat_inside_and_clamped() {
        let fit = fit_linear_penalty(&PenaltyLookup::default().glucose).unwrap();
        assert_eq!(fit.eval(100.0), 1.0);
        assert!(fit.eval(150.0) > 1.0);
        assert_eq!(fit.eval(10_000.0), 1000.0);
        assert!(fit.eval(-100.0) <= 1000.0 && fit.eval(-100.0) >= 1.0);
        assert!(fit.residual.is_finite());
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        // penalty = 1 + 10 (x - 10) at band midpoints
        let bands = vec![
            Band::new(Some(0.0), true, Some(10.0), true, 1.0),
            Band::new(Some(10.0), false, Some(20.0), true, 51.0),
            Band::new(Some(20.0), false, Some(30.0), true, 151.0),
        ];
        let fit = fit_linear_penalty(&bands).unwrap();
        let line = fit.above.unwrap();
        assert!((line.slope - 10.0).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
        assert!(fit.below.is_none());
    }

    #[test]
    fn single_band_table_is_rejected() {
        let bands = vec![Band::new(None, true, None, true, 1.0)];
        assert!(fit_linear_penalty(&bands).is_err());
    }

    #[test]
    fn keto_table_rows() {
        let t = keto_table();
        assert_eq!(t.rules.len(), 10);
        assert_eq!(t.rules.iter().filter(|r| r.importance == Importance::Very).count(), 4);
        assert_eq!(low_fat_table().rules.len(), 8);
    }

    #[test]
    fn table_example_passes_keto_rules() {
        let s = Suggestion::from_decision(&[30.0, 135.0, 20.0, 60.0, 1008.0, 6000.0]);
        let o = PredictedOutcome {
            glucose: 110.0,
            weight: 197.6,
            ketone: 2.4,
        };
        let goals = Goals {
            calorie_goal: Some(1800.0),
            min_protein: Some(50.0),
            min_fat: Some(100.0),
            max_fat: None,
        };
        let checks = check_boundaries(&keto_table(), &BoundaryInput::from_plan(&s, &o, 199.2), &goals).unwrap();
        assert!(checks.iter().all(|c| c.status == Status::Satisfied), "{checks:#?}");
    }

    #[test]
    fn missing_goal_is_config_error() {
        let input = BoundaryInput::default();
        let r = check_boundaries(&low_fat_table(), &input, &Goals::default());
        assert_eq!(r.unwrap_err(), ScoringError::MissingGoal("minimum protein"));
    }

    #[test]
    fn missing_values_are_unchecked() {
        let goals = Goals {
            calorie_goal: Some(1800.0),
            min_protein: Some(50.0),
            min_fat: Some(100.0),
            max_fat: Some(50.0),
        };
        let checks = check_boundaries(&keto_table(), &BoundaryInput::default(), &goals).unwrap();
        assert!(checks.iter().all(|c| c.status == Status::Unchecked));
    }

    #[test]
    fn violations_sorted_by_importance() {
        let goals = Goals {
            calorie_goal: Some(1000.0),
            min_protein: Some(50.0),
            min_fat: Some(100.0),
            max_fat: Some(50.0),
        };
        let input = BoundaryInput {
            steps: Some(10.0),
            intake_calories: Some(2000.0),
            glucose: Some(200.0),
            ..Default::default()
        };
        let checks = check_boundaries(&keto_table(), &input, &goals).unwrap();
        let v: Vec<Metric> = violations(&checks).iter().map(|c| c.rule.metric).collect();
        assert_eq!(v, vec![Metric::Glucose, Metric::IntakeCalories, Metric::Steps]);
    }
}
