use onlc_core::controller::Penalties;
use onlc_core::data::DietGroup;
use onlc_core::scoring::{apply_rating, auto_penalties, fit_linear_penalty, PenaltyLookup, Rating, Term};
use onlc_core::twin::PredictedOutcome;
use proptest::prelude::*;

fn auto(glucose: f64, weight: f64, k: f64, diet: DietGroup) -> Penalties {
    let predicted = PredictedOutcome {
        glucose,
        weight,
        ketone: 1.0,
    };
    auto_penalties(&PenaltyLookup::default(), &predicted, k, 200.0, diet).unwrap()
}

#[test]
fn worked_example_glucose_135() {
    assert_eq!(auto(135.0, 200.0, 2.0, DietGroup::Keto).glucose, 10.0);
}

#[test]
fn every_rating_round_trips_through_its_penalty() {
    for r in Rating::ALL {
        assert_eq!(Rating::nearest(r.penalty()), r);
    }
}

#[test]
fn linear_fit_agrees_with_lookup_direction() {
    let lookup = PenaltyLookup::default();
    for term in Term::ALL {
        let fit = fit_linear_penalty(lookup.bands(term)).unwrap();
        assert!(fit.residual.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn glucose_penalty_grows_away_from_range(a in 1.0f64..600.0, b in 1.0f64..600.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (pl, ph) = (auto(lo, 200.0, 2.0, DietGroup::Keto).glucose, auto(hi, 200.0, 2.0, DietGroup::Keto).glucose);
        if lo >= 130.0 {
            prop_assert!(pl <= ph, "{lo}->{pl} {hi}->{ph}");
        }
        if hi <= 70.0 {
            prop_assert!(pl >= ph, "{lo}->{pl} {hi}->{ph}");
        }
        if (70.0..=130.0).contains(&lo) && (70.0..=130.0).contains(&hi) {
            prop_assert_eq!(pl, ph);
        }
    }

    #[test]
    fn weight_penalty_grows_with_distance(a in 0.0f64..60.0, b in 0.0f64..60.0, up in any::<bool>()) {
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let sign = if up { 1.0 } else { -1.0 };
        let pn = auto(120.0, 200.0 + sign * near, 2.0, DietGroup::LowFat).weight;
        let pf = auto(120.0, 200.0 + sign * far, 2.0, DietGroup::LowFat).weight;
        prop_assert!(pn <= pf);
    }

    #[test]
    fn ketone_penalty_falls_with_ratio(a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(auto(120.0, 200.0, lo, DietGroup::Keto).ketone >= auto(120.0, 200.0, hi, DietGroup::Keto).ketone);
        prop_assert_eq!(auto(120.0, 200.0, lo, DietGroup::LowFat).ketone, 1.0);
    }

    #[test]
    fn penalties_stay_in_range(g in -100.0f64..2000.0, w in 0.0f64..500.0, k in -1.0f64..10.0) {
        let p = auto(g, w, k, DietGroup::Keto);
        prop_assert!(p.validate().is_ok(), "{p:?}");
    }

    #[test]
    fn harsher_ratings_never_lower_a_penalty(x in 1.0f64..1000.0, y in 1.0f64..1000.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(Rating::nearest(lo).penalty() <= Rating::nearest(hi).penalty());
        let base = Penalties::NEUTRAL;
        for term in Term::ALL {
            let a = apply_rating(base, Rating::nearest(lo), &[term]);
            let b = apply_rating(base, Rating::nearest(hi), &[term]);
            prop_assert!(a.glucose <= b.glucose && a.weight <= b.weight && a.ketone <= b.ketone);
        }
    }
}
