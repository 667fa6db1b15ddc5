//! Reproduces the stalled instances from the 1000-triple sweep and times
//! the oracle on them.

use std::time::Instant;

use qsc_core::linalg::{inner, random_unit_vector, Tolerances};
use qsc_core::oracle::{search_contradicting_odop, OracleConfig};
use qsc_core::pp3::{check_three_pure, exclusion_margin, InnerProductTriple};
use qsc_core::states::{DensityOperator, StateEnsemble};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut instances = Vec::new();
    while instances.len() < 1000 {
        let v0 = random_unit_vector(3, &mut rng);
        let v1 = random_unit_vector(3, &mut rng);
        let v2 = random_unit_vector(3, &mut rng);
        let Ok(triple) = InnerProductTriple::new(
            inner(&v0, &v1).norm_sqr(),
            inner(&v1, &v2).norm_sqr(),
            inner(&v2, &v0).norm_sqr(),
        ) else {
            continue;
        };
        if exclusion_margin(&triple).abs() < 1e-6 {
            continue;
        }
        let Ok(verdict) = check_three_pure(&triple) else {
            continue;
        };
        instances.push((v0, v1, v2, triple, verdict));
    }

    for &i in &[230usize, 357, 825] {
        let (v0, v1, v2, triple, verdict) = &instances[i];
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("1", v0, &tol).unwrap(),
            DensityOperator::pure("2", v1, &tol).unwrap(),
            DensityOperator::pure("3", v2, &tol).unwrap(),
        ])
        .unwrap();
        let cfg = OracleConfig {
            trials: 10_000,
            refine_steps: 200,
            seed: i as u64,
            ..OracleConfig::default()
        };
        let start = Instant::now();
        let result = search_contradicting_odop(&ensemble, &cfg);
        println!(
            "instance {i}: margin {:+.3e} compatible={} | found={} best={:.3e} trials={} in {:.1}s",
            exclusion_margin(triple),
            verdict.compatible,
            result.found,
            result.best_score,
            result.trials_used,
            start.elapsed().as_secs_f64(),
        );
    }
}
