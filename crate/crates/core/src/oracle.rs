//! Independent references that do not go through the circuit: brute-force
//! permutation sums for Haar moments, and importance-weighted sampling of
//! the rho-distorted Haar ensemble (Scrooge / GAP).

use nalgebra::DMatrix;

use crate::circuit::DensityMatrix;
use crate::ensemble::{checked_pow, delta_k, ln_factorial, moment_operator, ProjectedEnsemble};
use crate::error::{Error, Result};
use crate::randmat::{haar_state, ComplexMatrix, RngStream, C64};

/// Largest replica-space dimension `d^k` the brute-force paths will build.
pub const FULL_SPACE_LIMIT: usize = 4096;
const PSD_TOL: f64 = 1e-8;
const RATIO_BATCHES: usize = 20;

/// A permutation of `k` replicas of `C^d`. `perm[i]` is the replica that
/// tensor factor `i` is sent to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationOperator {
    d: usize,
    perm: Vec<usize>,
}

impl PermutationOperator {
    pub fn new(d: usize, perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
            }
        }
        if d == 0 || perm.is_empty() {
            return Err(Error::InvalidDimension("permutation operator needs d, k >= 1".into()));
        }
        Ok(Self { d, perm })
    }

    pub fn k(&self) -> usize {
        self.perm.len()
    }

    /// Image of a basis string under the permutation.
    pub fn apply_index(&self, idx: usize) -> usize {
        let k = self.k();
        let mut digits = vec![0usize; k];
        let mut rest = idx;
        for i in (0..k).rev() {
            digits[i] = rest % self.d;
            rest /= self.d;
        }
        let mut out = vec![0usize; k];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = digits[i];
        }
        out.iter().fold(0, |acc, &x| acc * self.d + x)
    }

    /// The `d^k x d^k` 0/1 matrix.
    pub fn matrix(&self) -> Result<ComplexMatrix> {
        let n = guarded_full_dim(self.d, self.k())?;
        let mut m = ComplexMatrix::zeros(n, n)?;
        for i in 0..n {
            m[(self.apply_index(i), i)] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }
}

fn guarded_full_dim(d: usize, k: usize) -> Result<usize> {
    let n = checked_pow(d, k)?;
    if n > FULL_SPACE_LIMIT {
        return Err(Error::Resource(format!("{d}^{k} = {n} exceeds the brute-force limit {FULL_SPACE_LIMIT}")));
    }
    Ok(n)
}

/// All permutations of `0..k`, lexicographic.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// `(d-1)! / (k+d-1)! * sum_{sigma in S_k} sigma` on the full replica space.
pub fn permutation_sum_haar_moment(k: usize, d: usize) -> Result<ComplexMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = guarded_full_dim(d, k)?;
    let prefactor = (ln_factorial(d as u64 - 1) - ln_factorial((k + d - 1) as u64)).exp();
    let mut m = ComplexMatrix::zeros(n, n)?;
    for perm in permutations(k) {
        let op = PermutationOperator::new(d, perm)?;
        for i in 0..n {
            m[(op.apply_index(i), i)] += C64::new(prefactor, 0.0);
        }
    }
    Ok(m)
}

/// Hermitian eigendecomposition `(eigenvalues, eigenvectors as columns)`.
fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.rows();
    let dm = DMatrix::from_fn(n, n, |r, c| m[(r, c)]);
    let eig = dm.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// The positive Hermitian square root of a density matrix.
pub fn psd_sqrt(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let m = rho.matrix();
    let n = m.rows();
    let (vals, vecs) = hermitian_eigen(m);
    if let Some(&bad) = vals.iter().find(|&&l| l < -PSD_TOL) {
        return Err(Error::InvalidArgument(format!("eigenvalue {bad:.3e} is negative")));
    }
    let mut out = ComplexMatrix::zeros(n, n)?;
    for (j, &l) in vals.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += vecs[(r, j)] * vecs[(c, j)].conj() * s;
            }
        }
    }
    Ok(out)
}

/// Importance-weighted samples of a pure-state ensemble on `C^d`.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    d: usize,
    weights: Vec<f64>,
    /// `len() x d`, unit rows.
    states: Vec<C64>,
}

impl WeightedEnsemble {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self, i: usize) -> &[C64] {
        &self.states[i * self.d..(i + 1) * self.d]
    }

    /// Samples `range` only, as an ensemble with normalized weights.
    pub fn to_ensemble_range(&self, range: std::ops::Range<usize>) -> Result<ProjectedEnsemble> {
        ProjectedEnsemble::from_weighted(
            self.d,
            &self.weights[range.clone()],
            &self.states[range.start * self.d..range.end * self.d],
        )
    }

    pub fn to_ensemble(&self) -> Result<ProjectedEnsemble> {
        self.to_ensemble_range(0..self.len())
    }
}

/// Draws `phi` Haar on `C^d`, weight `d <phi|rho|phi>`, state
/// `sqrt(rho) phi / |sqrt(rho) phi|`.
pub fn gap_sample(rho: &DensityMatrix, n: usize, rng: &mut RngStream) -> Result<WeightedEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("gap_sample needs n >= 1".into()));
    }
    let d = rho.dim();
    let root = psd_sqrt(rho)?;
    let mut weights = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n * d);
    while weights.len() < n {
        let phi = haar_state(d, rng)?;
        let psi = root.matvec(&phi)?;
        // <phi|rho|phi> = |sqrt(rho) phi|^2
        let w2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(w2 > 0.0) {
            continue;
        }
        let s = w2.sqrt();
        weights.push(d as f64 * w2);
        states.extend(psi.iter().map(|z| z / s));
    }
    Ok(WeightedEnsemble { d, weights, states })
}

/// Estimated design distances of the GAP ensemble from a weighted sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GapMoments {
    /// `deltas[k - 1] = Delta^(k)` for `k = 1..=k_max`.
    pub deltas: Vec<f64>,
    /// Batch estimate of the standard error of `Delta^(1)`.
    pub delta1_stderr: f64,
}

pub fn gap_moments(rho: &DensityMatrix, k_max: usize, n: usize, rng: &mut RngStream) -> Result<GapMoments> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let sample = gap_sample(rho, n, rng)?;
    weighted_moments(&sample, k_max)
}

/// Design distances of a weighted sample; the standard error of
/// `Delta^(1)` comes from the spread over equal batches.
pub fn weighted_moments(sample: &WeightedEnsemble, k_max: usize) -> Result<GapMoments> {
    let ens = sample.to_ensemble()?;
    let deltas = (1..=k_max)
        .map(|k| delta_k(&moment_operator(&ens, k)?))
        .collect::<Result<Vec<_>>>()?;
    let n = sample.len();
    let batches = RATIO_BATCHES.min(n);
    let size = n / batches;
    let mut batch_deltas = Vec::with_capacity(batches);
    for b in 0..batches {
        let part = sample.to_ensemble_range(b * size..(b + 1) * size)?;
        batch_deltas.push(delta_k(&moment_operator(&part, 1)?)?);
    }
    let m: crate::stats::Moments = batch_deltas.into_iter().collect();
    let delta1_stderr = if batches >= 2 { m.stderr() } else { f64::INFINITY };
    Ok(GapMoments { deltas, delta1_stderr })
}

/// `Delta^(k) / Delta^(1)` of the GAP ensemble for `k = 1..=k_max`.
pub fn gap_moment_ratio(rho: &DensityMatrix, k_max: usize, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let m = gap_moments(rho, k_max, n, rng)?;
    moment_ratios(&m)
}

pub fn moment_ratios(m: &GapMoments) -> Result<Vec<f64>> {
    let d1 = m.deltas[0];
    if !(d1 >= 10.0 * m.delta1_stderr) {
        return Err(Error::IllConditionedRatio { delta1: d1, stderr: m.delta1_stderr });
    }
    Ok(m.deltas.iter().map(|d| d / d1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::haar_moment;

    #[test]
    fn permutation_validation() {
        assert!(PermutationOperator::new(2, vec![0, 0]).is_err());
        assert!(PermutationOperator::new(2, vec![1, 2]).is_err());
        let swap = PermutationOperator::new(2, vec![1, 0]).unwrap();
        let m = swap.matrix().unwrap();
        // |01> <-> |10>
        assert_eq!(m[(2, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        for r in 0..4 {
            let row_sum: f64 = (0..4).map(|c| m[(r, c)].re).sum();
            assert_eq!(row_sum, 1.0);
        }
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn first_and_second_permutation_sums() {
        for d in 1..4 {
            let m = permutation_sum_haar_moment(1, d).unwrap();
            let mut want = ComplexMatrix::identity(d).unwrap();
            want.scale(1.0 / d as f64);
            assert!(m.max_abs_diff(&want).unwrap() < 1e-15);

            let m = permutation_sum_haar_moment(2, d).unwrap();
            let mut want = ComplexMatrix::identity(d * d).unwrap();
            let swap = PermutationOperator::new(d, vec![1, 0]).unwrap().matrix().unwrap();
            for i in 0..d * d {
                for j in 0..d * d {
                    want[(i, j)] += swap[(i, j)];
                }
            }
            want.scale(1.0 / (d * (d + 1)) as f64);
            assert!(m.max_abs_diff(&want).unwrap() < 1e-15);
        }
    }

    #[test]
    fn size_guard() {
        assert!(matches!(permutation_sum_haar_moment(13, 2), Err(Error::Resource(_))));
    }

    #[test]
    fn symmetric_basis_embedding_matches_permutation_sum() {
        for k in 1..=4 {
            for d in 1..=3 {
                let full = permutation_sum_haar_moment(k, d).unwrap();
                let emb = haar_moment(k, d).unwrap().embed_full().unwrap();
                assert!(full.max_abs_diff(&emb).unwrap() <= 1e-10, "k = {k}, d = {d}");
            }
        }
    }

    #[test]
    fn sqrt_of_diagonal_and_identity() {
        let rho = DensityMatrix::diagonal(&[0.64, 0.36]).unwrap();
        let s = psd_sqrt(&rho).unwrap();
        let want = ComplexMatrix::from_real_diagonal(&[0.8, 0.6]).unwrap();
        assert!(s.max_abs_diff(&want).unwrap() < 1e-14);
        let id = DensityMatrix::maximally_mixed(3).unwrap();
        let s = psd_sqrt(&id).unwrap();
        let mut want = ComplexMatrix::identity(3).unwrap();
        want.scale((1.0f64 / 3.0).sqrt());
        assert!(s.max_abs_diff(&want).unwrap() < 1e-14);
    }

    #[test]
    fn sqrt_of_random_density_matrix() {
        let mut rng = RngStream::new(3, 3);
        for d in [2, 3, 5] {
            let v = haar_state(d * 4, &mut rng).unwrap();
            let s = crate::circuit::PureState::from_amplitudes(d, 4, 1, v).unwrap();
            let rho = crate::circuit::reduced_density_matrix_a(&s);
            let root = psd_sqrt(&rho).unwrap();
            assert!(root.hermiticity_residual() < 1e-12);
            assert!(min_eigenvalue(&root) > -1e-12);
            let sq = root.matmul(&root).unwrap();
            assert!(sq.max_abs_diff(rho.matrix()).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn non_psd_rejected() {
        let bad = DensityMatrix::diagonal(&[1.5, -0.5]).unwrap();
        assert!(matches!(psd_sqrt(&bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn maximally_mixed_gives_unit_weights() {
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        let s = gap_sample(&rho, 200, &mut RngStream::new(1, 1)).unwrap();
        assert!(s.weights().iter().all(|&w| (w - 1.0).abs() < 1e-12));
        assert!(gap_sample(&rho, 0, &mut RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn ill_conditioned_ratio_is_reported() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let r = gap_moment_ratio(&rho, 3, 20_000, &mut RngStream::new(2, 0));
        assert!(matches!(r, Err(Error::IllConditionedRatio { .. })));
    }
}
