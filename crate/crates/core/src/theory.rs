//! Closed-form predictions for the bottleneck circuit, used as reference
//! columns in aggregated output and as oracles in the verification suites.

use crate::error::{Error, Result};

const ENTROPY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub d_a: usize,
    pub d_b1: usize,
    pub q: usize,
    /// Design threshold, in `(0, 1)`.
    pub eps: f64,
}

impl TheoryParams {
    pub fn new(d_a: usize, d_b1: usize, q: usize, eps: f64) -> Result<Self> {
        if d_a == 0 || d_b1 == 0 {
            return Err(Error::InvalidArgument("d_a and d_b1 must be at least 1".into()));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
        }
        Ok(Self { d_a, d_b1, q, eps })
    }

    /// `N_A = log2 d_a`, in bits.
    pub fn n_a(&self) -> f64 {
        (self.d_a as f64).log2()
    }

    pub fn v_e(&self) -> f64 {
        entanglement_velocity(self.d_b1)
    }
}

/// `binom(n, k)` as a float; switches to log-gamma sums once the value
/// leaves the range where the product is exact.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: f64 = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > 1e15 {
            return log_binomial(n, k).exp();
        }
    }
    acc.round()
}

fn log_binomial(n: u64, k: u64) -> f64 {
    // sum of logs is exact enough for the ratios used here
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Predicted ratio `Delta^(k) / Delta^(1)` near infinite temperature:
/// `sqrt((1 + d_a) / (1 + d_a / k))`.
pub fn f_ratio(k: usize, d_a: usize) -> f64 {
    let (k, d) = (k as f64, d_a as f64);
    ((1.0 + d) / (1.0 + d / k)).sqrt()
}

/// Gate-averaged purity of `A` after `t` steps, infinite bath:
/// `1/d_a + (1 - 1/d_a) [(d_a^2 - 1) / (d_a^2 d_b1^2 - 1)]^t`.
pub fn purity_theory(t: usize, d_a: usize, d_b1: usize) -> f64 {
    let da = d_a as f64;
    if d_a == 1 {
        return 1.0;
    }
    let db = d_b1 as f64;
    let rate = (da * da - 1.0) / (da * da * db * db - 1.0);
    1.0 / da + (1.0 - 1.0 / da) * rate.powi(t as i32)
}

/// One step of the infinite-bath purity recursion.
pub fn purity_recursion_step(prev: f64, d_a: usize, d_b1: usize) -> f64 {
    let (da, db) = (d_a as f64, d_b1 as f64);
    ((da * da - 1.0) * prev + da * (db * db - 1.0)) / (da * da * db * db - 1.0)
}

/// Gate-averaged purity of `A` after `t` steps for a finite bath of
/// dimension `q`, by exact two-replica transfer over configurations of the
/// permutations `{e, swap}` on `A`, `B1`, `B2`.
///
/// Converges to [`purity_theory`] as `q -> inf` and to the Haar-state value
/// `(d_a + d_b1 q) / (d_a d_b1 q + 1)` as `t -> inf`.
pub fn purity_finite_bath(t: usize, d_a: usize, d_b1: usize, q: usize) -> f64 {
    // index bits: 1 = swap on (A, B1, B2)
    let mut coef = [0.0f64; 8];
    coef[0b100] = 1.0;
    let dims = [d_a as f64, d_b1 as f64, q as f64];
    coef = transfer(&coef, [1, 2], dims);
    for _ in 0..t {
        coef = transfer(&coef, [0, 1], dims);
        coef = transfer(&coef, [1, 2], dims);
    }
    // every permutation evaluates to 1 on the pure product initial state
    coef.iter().sum()
}

/// Haar-averages a gate acting on the two subsystems `on`, in the
/// Heisenberg picture, for two replicas.
fn transfer(coef: &[f64; 8], on: [usize; 2], dims: [f64; 3]) -> [f64; 8] {
    let bit = |s: usize| 1usize << (2 - s);
    let cycles = |swap: bool| if swap { 1 } else { 2 };
    let d = dims[on[0]] * dims[on[1]];
    let mut out = [0.0; 8];
    for (cfg, &c) in coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let s0 = cfg & bit(on[0]) != 0;
        let s1 = cfg & bit(on[1]) != 0;
        // Tr(O e) and Tr(O swap) over the gate's support
        let tr_e = dims[on[0]].powi(cycles(s0)) * dims[on[1]].powi(cycles(s1));
        let tr_s = dims[on[0]].powi(cycles(!s0)) * dims[on[1]].powi(cycles(!s1));
        let det = d.powi(4) - d * d;
        let a_e = (tr_e * d * d - tr_s * d) / det;
        let a_s = (tr_s * d * d - tr_e * d) / det;
        let rest = cfg & !(bit(on[0]) | bit(on[1]));
        out[rest] += c * a_e;
        out[rest | bit(on[0]) | bit(on[1])] += c * a_s;
    }
    out
}

/// `v_E = 2 log2 d_b1` bits per step (zero when `d_b1 = 1`).
pub fn entanglement_velocity(d_b1: usize) -> f64 {
    if d_b1 <= 1 {
        return 0.0;
    }
    2.0 * (d_b1 as f64).log2()
}

/// First-moment design time `t_1 = (N_A + 2 log2(1/eps)) / v_E`.
pub fn thermalization_time(params: &TheoryParams) -> Result<f64> {
    let v = params.v_e();
    if v == 0.0 {
        return Err(Error::NoThermalization);
    }
    Ok((params.n_a() + 2.0 * (1.0 / params.eps).log2()) / v)
}

/// `t_k = t_1 + log2((1 + d_a) / (1 + d_a / k)) / v_E`, continuous in steps.
pub fn design_time(k: usize, params: &TheoryParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("design order k must be at least 1".into()));
    }
    let t1 = thermalization_time(params)?;
    let d = params.d_a as f64;
    Ok(t1 + ((1.0 + d) / (1.0 + d / k as f64)).log2() / params.v_e())
}

/// `lim_{k -> inf} t_k = t_1 + log2(d_a + 1) / v_E`.
pub fn design_time_limit(params: &TheoryParams) -> Result<f64> {
    let t1 = thermalization_time(params)?;
    Ok(t1 + (params.d_a as f64 + 1.0).log2() / params.v_e())
}

/// `Delta^(1) = sqrt(2^(N_A - S2) - 1)`.
pub fn delta1_from_entropy(s2: f64, n_a: f64) -> Result<f64> {
    if s2 > n_a + ENTROPY_TOL {
        return Err(Error::InvalidArgument(format!("S2 = {s2} exceeds N_A = {n_a}")));
    }
    if s2 >= n_a - ENTROPY_TOL {
        return Ok(0.0);
    }
    Ok(((n_a - s2).exp2() - 1.0).max(0.0).sqrt())
}

/// r.m.s. `Delta^(k)` of the projected ensemble of a Haar-random state on
/// `A B` with `dim B = d_b`:
/// `sqrt((d_a + 1) / (d_a d_b + 1) * (binom(k + d_a - 1, k) - 1))`.
pub fn haar_baseline_delta(k: usize, d_a: usize, d_b: usize) -> f64 {
    let (da, db) = (d_a as f64, d_b as f64);
    let dsym = binomial((k + d_a - 1) as u64, k as u64);
    ((da + 1.0) / (da * db + 1.0) * (dsym - 1.0)).sqrt()
}
