use loopdecay::estimators::{quenched_two_point, FieldDistribution, ModelParams};
use loopdecay::oracle::{build_hamiltonian_general, exact_two_point};
use loopdecay::{Field, Lattice, Spin};

/// E_h ⟨S¹₀S¹₁⟩ on three sites with Bernoulli fields, by enumerating all 2³
/// field configurations and diagonalizing each.
fn exact_bernoulli_average(l: &Lattice, u: f64, beta: f64, eps: f64, alpha: f64, x: usize) -> f64 {
    let n = l.len();
    (0..1u32 << n)
        .map(|mask| {
            let values: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { alpha } else { 0.0 }).collect();
            let on = mask.count_ones() as i32;
            let prob = (1.0 - eps).powi(on) * eps.powi(n as i32 - on);
            let h = build_hamiltonian_general(l, Spin::HALF, u, &Field::new(values).unwrap()).unwrap();
            prob * exact_two_point(&h, beta, l.origin(), x).unwrap()
        })
        .sum()
}

#[test]
fn bernoulli_quenched_average_matches_enumeration() {
    let l = Lattice::segment(3).unwrap();
    let (u, beta, eps, alpha) = (0.5, 1.0, 0.3, 1.5);
    let params = ModelParams::new(l.clone(), beta, u, Spin::HALF, Field::uniform(3, 0.0)).unwrap();
    let dist = FieldDistribution::Bernoulli { eps, alpha };
    for x in [1, 2] {
        let exact = exact_bernoulli_average(&l, u, beta, eps, alpha, x);
        let est = quenched_two_point(&params, &dist, &[x as i32], 400, 4000, 31).unwrap();
        assert!(est.within(exact, 3.0), "x={x}: {} ± {} vs {exact}", est.mean, est.stderr);
    }
}

#[test]
fn uniform_law_stays_between_its_endpoint_fields() {
    // The two-point function decreases in a uniform field, so the quenched
    // average over U(a, b) lies between the values at b and at a.
    let l = Lattice::segment(2).unwrap();
    let params = ModelParams::new(l.clone(), 1.0, 1.0, Spin::HALF, Field::uniform(2, 0.0)).unwrap();
    let at = |h: f64| {
        let ham = build_hamiltonian_general(&l, Spin::HALF, 1.0, &Field::uniform(2, h)).unwrap();
        exact_two_point(&ham, 1.0, 0, 1).unwrap()
    };
    let (lo, hi) = (at(2.0), at(0.5));
    let est = quenched_two_point(&params, &FieldDistribution::Uniform { low: 0.5, high: 2.0 }, &[1], 200, 4000, 8).unwrap();
    assert!(est.mean > lo - 3.0 * est.stderr && est.mean < hi + 3.0 * est.stderr, "{lo} < {} < {hi}", est.mean);
}
