use onlc_core::evaluation::{clarke_zone, grid_csv, Zone, ZoneReport};
use proptest::prelude::*;

#[test]
fn integer_grid_is_partitioned() {
    let mut report = ZoneReport::default();
    for r in 1..=400 {
        for p in 1..=400 {
            report.add(clarke_zone(f64::from(r), f64::from(p)).unwrap());
        }
    }
    assert_eq!(report.total, 400 * 400);
    assert_eq!(Zone::ALL.iter().map(|&z| report.count(z)).sum::<usize>(), report.total);
    for z in Zone::ALL {
        assert!(report.count(z) > 0, "{z:?} never assigned");
    }
}

#[test]
fn reference_points() {
    assert_eq!(clarke_zone(134.0, 110.0).unwrap(), Zone::A);
    assert_eq!(clarke_zone(50.0, 60.0).unwrap(), Zone::A);
    assert_eq!(clarke_zone(300.0, 40.0).unwrap(), Zone::E);
    assert_eq!(clarke_zone(50.0, 300.0).unwrap(), Zone::E);
}

#[test]
fn csv_has_one_row_per_point() {
    let csv = grid_csv(20);
    assert_eq!(csv.lines().count(), 1 + 20 * 20);
}

proptest! {
    #[test]
    fn diagonal_is_accurate(x in 1.0f64..=600.0) {
        prop_assert_eq!(clarke_zone(x, x).unwrap(), Zone::A);
    }

    #[test]
    fn within_twenty_percent_is_accurate(r in 70.0f64..=500.0, f in -0.199f64..0.199) {
        prop_assert_eq!(clarke_zone(r, r * (1.0 + f)).unwrap(), Zone::A);
    }

    #[test]
    fn every_point_gets_a_zone(r in 0.001f64..=600.0, p in 0.001f64..=600.0) {
        prop_assert!(clarke_zone(r, p).is_ok());
    }
}
