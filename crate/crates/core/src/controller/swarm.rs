//! Global-best particle swarm with inertia, velocity clamping and
//! synchronous best updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ControllerConfig;
use crate::data::Bounds;

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Global best cost after initialisation and after each iteration.
    pub history: Vec<f64>,
}

/// Minimises `cost` over the box `bounds`. Every candidate is passed through
/// `project` before it is evaluated, so coupled constraints stay satisfied.
pub fn minimize<E>(
    bounds: &[Bounds],
    project: impl Fn(&mut [f64]),
    mut cost: impl FnMut(&[f64]) -> Result<f64, E>,
    config: &ControllerConfig,
) -> Result<SwarmResult, E> {
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vmax: Vec<f64> = bounds.iter().map(|b| b.width() * config.velocity_clamp).collect();

    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(config.swarm_size);
    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(config.swarm_size);
    for _ in 0..config.swarm_size {
        let mut x: Vec<f64> = bounds.iter().map(|b| sample(&mut rng, *b)).collect();
        project(&mut x);
        positions.push(x);
        velocities.push(vmax.iter().map(|&v| if v > 0.0 { rng.gen_range(-v..=v) } else { 0.0 }).collect());
    }

    let mut personal = positions.clone();
    let mut personal_cost = Vec::with_capacity(config.swarm_size);
    for x in &positions {
        personal_cost.push(cost(x)?);
    }
    let mut best_index = argmin(&personal_cost);
    let mut best = personal[best_index].clone();
    let mut best_cost = personal_cost[best_index];
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(best_cost);

    for _ in 0..config.iterations {
        for i in 0..config.swarm_size {
            let (x, v) = (&mut positions[i], &mut velocities[i]);
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let mut vd = config.inertia * v[d]
                    + config.cognitive * r1 * (personal[i][d] - x[d])
                    + config.social * r2 * (best[d] - x[d]);
                vd = vd.clamp(-vmax[d], vmax[d]);
                v[d] = vd;
                x[d] = bounds[d].clamp(x[d] + vd);
            }
            project(x);
        }
        for i in 0..config.swarm_size {
            let c = cost(&positions[i])?;
            if c < personal_cost[i] {
                personal_cost[i] = c;
                personal[i].clone_from(&positions[i]);
            }
        }
        best_index = argmin(&personal_cost);
        if personal_cost[best_index] < best_cost {
            best_cost = personal_cost[best_index];
            best.clone_from(&personal[best_index]);
        }
        history.push(best_cost);
    }
    Ok(SwarmResult {
        best,
        best_cost,
        history,
    })
}

fn sample(rng: &mut ChaCha8Rng, b: Bounds) -> f64 {
    if b.width() > 0.0 {
        rng.gen_range(b.lo..=b.hi)
    } else {
        b.lo
    }
}

/// Index of the smallest value; NaN never wins.
fn argmin(values: &[f64]) -> usize {
    let mut at = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[at] || values[at].is_nan() {
            at = i;
        }
    }
    at
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn sphere(center: &[f64]) -> impl Fn(&[f64]) -> Result<f64, Infallible> + '_ {
        move |x| Ok(x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum())
    }

    #[test]
    fn converges_on_sphere() {
        let bounds = vec![Bounds::new(-10.0, 10.0); 6];
        let center = [1.0, -2.0, 3.0, 0.5, -4.0, 2.5];
        let r = minimize(&bounds, |_| {}, sphere(&center), &ControllerConfig::default()).unwrap();
        for (b, c) in r.best.iter().zip(&center) {
            assert!((b - c).abs() < 1e-3, "{b} vs {c}");
        }
    }

    #[test]
    fn history_is_non_increasing() {
        let bounds = vec![Bounds::new(0.0, 5.0); 3];
        let r = minimize(&bounds, |_| {}, sphere(&[4.0, 1.0, 2.0]), &ControllerConfig::default()).unwrap();
        assert_eq!(r.history.len(), 201);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*r.history.last().unwrap(), r.best_cost);
    }

    #[test]
    fn same_seed_same_result() {
        let bounds = vec![Bounds::new(-3.0, 3.0); 4];
        let c = ControllerConfig {
            iterations: 30,
            seed: 9,
            ..Default::default()
        };
        let a = minimize(&bounds, |_| {}, sphere(&[0.1, 0.2, 0.3, 0.4]), &c).unwrap();
        let b = minimize(&bounds, |_| {}, sphere(&[0.1, 0.2, 0.3, 0.4]), &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_errors_propagate() {
        let bounds = vec![Bounds::new(0.0, 1.0)];
        let r: Result<_, &str> = minimize(&bounds, |_| {}, |_| Err("boom"), &ControllerConfig::default());
        assert_eq!(r.unwrap_err(), "boom");
    }

    #[test]
    fn degenerate_dimension_stays_fixed() {
        let bounds = vec![Bounds::new(2.0, 2.0), Bounds::new(-1.0, 1.0)];
        let r = minimize(&bounds, |_| {}, sphere(&[0.0, 0.5]), &ControllerConfig::default()).unwrap();
        assert_eq!(r.best[0], 2.0);
    }
}
