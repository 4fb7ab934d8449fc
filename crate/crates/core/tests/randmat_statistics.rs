use std::f64::consts::PI;

use deepthermal::randmat::{haar_state, haar_unitary, RngStream};
use deepthermal::stats::{ks_critical_1pct, ks_statistic, Moments};

#[test]
fn first_moment_of_unitary_entries() {
    let mut rng = RngStream::new(2024, 0);
    let n = 100_000;
    let m: Moments = (0..n).map(|_| haar_unitary(4, &mut rng).unwrap().matrix()[(0, 0)].norm_sqr()).collect();
    // |U_00|^2 ~ Beta(1, 3): mean 1/4, variance 3/80
    let se = (3.0f64 / 80.0 / n as f64).sqrt();
    assert!((m.mean() - 0.25).abs() < 5.0 * se, "mean {} (se {se})", m.mean());
    assert!((m.variance() - 3.0 / 80.0).abs() < 2e-3, "variance {}", m.variance());
}

#[test]
fn state_overlap_mean() {
    let mut rng = RngStream::new(7, 1);
    let n = 100_000;
    let m: Moments = (0..n).map(|_| haar_state(8, &mut rng).unwrap()[0].norm_sqr()).collect();
    let se = (7.0f64 / 576.0 / n as f64).sqrt();
    assert!((m.mean() - 0.125).abs() < 5.0 * se, "mean {}", m.mean());
}

#[test]
fn qubit_entry_is_uniform() {
    let mut rng = RngStream::new(3, 0);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| haar_unitary(2, &mut rng).unwrap().matrix()[(0, 0)].norm_sqr()).collect();
    let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
    assert!(d < ks_critical_1pct(n), "KS {d}");
}

#[test]
fn entry_phases_are_uniform() {
    // A missing phase fix biases arg(U_jj) towards 0.
    let mut rng = RngStream::new(4, 0);
    let n = 20_000;
    for dim in [2, 3, 5] {
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n);
        for _ in 0..n {
            let u = haar_unitary(dim, &mut rng).unwrap();
            diag.push(u.matrix()[(dim - 1, dim - 1)].arg());
            off.push(u.matrix()[(0, dim - 1)].arg());
        }
        let cdf = |x: f64| ((x + PI) / (2.0 * PI)).clamp(0.0, 1.0);
        // six comparisons, each at the 0.1% level
        let crit = 1.949 / (n as f64).sqrt();
        for (name, xs) in [("diagonal", &diag), ("off-diagonal", &off)] {
            let d = ks_statistic(xs, cdf);
            assert!(d < crit, "dim {dim} {name} phase KS {d}");
        }
    }
}

#[test]
fn streams_are_independent() {
    let mut a = RngStream::new(1, 0);
    let mut b = RngStream::new(1, 1);
    let ua = haar_unitary(3, &mut a).unwrap();
    let ub = haar_unitary(3, &mut b).unwrap();
    assert!(ua.matrix().max_abs_diff(ub.matrix()).unwrap() > 1e-3);
}
