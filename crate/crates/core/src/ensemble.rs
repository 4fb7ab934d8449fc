//! Projected ensembles, their k-th moment operators on the symmetric
//! subspace, frame potentials and design distances.

use crate::circuit::PureState;
use crate::error::{Error, Result};
use crate::randmat::{ComplexMatrix, C64};
use crate::theory::binomial;

/// Outcomes with `p(z)` below this are dropped from the ensemble.
pub const OUTCOME_THRESHOLD: f64 = 1e-14;
const RADICAND_TOL: f64 = 1e-12;

/// `{(p(z), |psi_z>)}` on subsystem `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedEnsemble {
    d_a: usize,
    probs: Vec<f64>,
    /// `len() x d_a`, row per outcome.
    states: Vec<C64>,
    discarded_mass: f64,
}

impl ProjectedEnsemble {
    /// Builds an ensemble from unnormalized weights and (not necessarily
    /// normalized) states, laid out as consecutive blocks of `d_a`.
    pub fn from_weighted(d_a: usize, weights: &[f64], states: &[C64]) -> Result<Self> {
        if d_a == 0 || states.len() != weights.len() * d_a {
            return Err(Error::InvalidDimension(format!(
                "{} weights with {} state entries at d_a = {d_a}",
                weights.len(),
                states.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateState);
        }
        let mut probs = Vec::with_capacity(weights.len());
        let mut kept = Vec::with_capacity(states.len());
        let mut discarded = 0.0;
        for (w, psi) in weights.iter().zip(states.chunks_exact(d_a)) {
            let p = w / total;
            let n = crate::randmat::norm(psi);
            if p < OUTCOME_THRESHOLD || n == 0.0 {
                discarded += p;
                continue;
            }
            probs.push(p);
            kept.extend(psi.iter().map(|z| z / n));
        }
        Self::finish(d_a, probs, kept, discarded)
    }

    fn finish(d_a: usize, mut probs: Vec<f64>, states: Vec<C64>, discarded: f64) -> Result<Self> {
        let kept: f64 = probs.iter().sum();
        if probs.is_empty() || !(kept > 0.0) {
            return Err(Error::DegenerateState);
        }
        probs.iter_mut().for_each(|p| *p /= kept);
        Ok(Self { d_a, probs, states, discarded_mass: discarded })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability mass of dropped outcomes, before renormalization.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[C64])> + '_ {
        self.probs.iter().copied().zip(self.states.chunks_exact(self.d_a))
    }

    /// `sum_z p(z) |psi_z><psi_z|`.
    pub fn density_matrix(&self) -> ComplexMatrix {
        moment_operator(self, 1).expect("k = 1").matrix
    }
}

/// Measures `B = B1 B2` of `state` in the computational basis.
pub fn project(state: &PureState) -> Result<ProjectedEnsemble> {
    let d_a = state.d_a();
    let db = state.bath_dim();
    let amps = state.amplitudes();
    let mut probs = Vec::with_capacity(db);
    let mut states = Vec::with_capacity(db * d_a);
    let mut discarded = 0.0;
    let mut col = vec![C64::default(); d_a];
    for z in 0..db {
        let mut p = 0.0;
        for (a, c) in col.iter_mut().enumerate() {
            *c = amps[a * db + z];
            p += c.norm_sqr();
        }
        if p < OUTCOME_THRESHOLD {
            discarded += p;
            continue;
        }
        let s = p.sqrt();
        probs.push(p);
        states.extend(col.iter().map(|c| c / s));
    }
    ProjectedEnsemble::finish(d_a, probs, states, discarded)
}

/// Orthonormal basis of the symmetric subspace of `k` copies of `C^d`,
/// labelled by occupation vectors `(n_0, ..., n_{d-1})`, `sum n_i = k`,
/// ordered lexicographically descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricBasis {
    d: usize,
    k: usize,
    occupations: Vec<Vec<u32>>,
    /// `sqrt(k! / prod n_i!)`
    weights: Vec<f64>,
}

impl SymmetricBasis {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("symmetric basis with d = 0".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("moment order k must be at least 1".into()));
        }
        let mut occupations = Vec::new();
        let mut cur = vec![0u32; d];
        fill_occupations(k as u32, 0, &mut cur, &mut occupations);
        let lf: Vec<f64> = (0..=k).map(|n| ln_factorial(n as u64)).collect();
        let weights = occupations
            .iter()
            .map(|occ| (0.5 * (lf[k] - occ.iter().map(|&n| lf[n as usize]).sum::<f64>())).exp())
            .collect();
        Ok(Self { d, k, occupations, weights })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn occupations(&self) -> &[Vec<u32>] {
        &self.occupations
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.occupations.iter().position(|o| o == occ)
    }

    /// Coordinates of `|psi>^{(x) k}` in this basis:
    /// `sqrt(k!/prod n_i!) prod_i psi_i^{n_i}`.
    pub fn product_coordinates(&self, psi: &[C64], out: &mut [C64]) {
        let pows = powers(psi, self.k);
        self.coords_from_powers(&pows, out);
    }

    fn coords_from_powers(&self, pows: &[C64], out: &mut [C64]) {
        let stride = self.k + 1;
        for ((o, occ), &w) in out.iter_mut().zip(&self.occupations).zip(&self.weights) {
            let mut z = C64::new(w, 0.0);
            for (i, &n) in occ.iter().enumerate() {
                if n > 0 {
                    z *= pows[i * stride + n as usize];
                }
            }
            *o = z;
        }
    }

    /// The isometry from this basis into the full `d^k` replica space;
    /// column `m` is the normalized symmetrization of any string with
    /// occupation `m`. Replica 0 is the most significant digit.
    pub fn isometry(&self) -> Result<ComplexMatrix> {
        let full = checked_pow(self.d, self.k)?;
        let mut iso = ComplexMatrix::zeros(full, self.dim())?;
        let mut occ = vec![0u32; self.d];
        for idx in 0..full {
            occ.iter_mut().for_each(|n| *n = 0);
            let mut rest = idx;
            for _ in 0..self.k {
                occ[rest % self.d] += 1;
                rest /= self.d;
            }
            let col = self.index_of(&occ).expect("every string has an occupation");
            iso[(idx, col)] = C64::new(1.0 / self.weights[col], 0.0);
        }
        Ok(iso)
    }
}

fn fill_occupations(remaining: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if i + 1 == cur.len() {
        cur[i] = remaining;
        out.push(cur.clone());
        return;
    }
    for n in (0..=remaining).rev() {
        cur[i] = n;
        fill_occupations(remaining - n, i + 1, cur, out);
    }
}

fn powers(psi: &[C64], k: usize) -> Vec<C64> {
    let stride = k + 1;
    let mut pows = vec![C64::new(1.0, 0.0); psi.len() * stride];
    for (i, &c) in psi.iter().enumerate() {
        for e in 1..=k {
            pows[i * stride + e] = pows[i * stride + e - 1] * c;
        }
    }
    pows
}

pub(crate) fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub(crate) fn checked_pow(d: usize, k: usize) -> Result<usize> {
    (0..k)
        .try_fold(1usize, |acc, _| acc.checked_mul(d))
        .ok_or_else(|| Error::Resource(format!("{d}^{k} overflows")))
}

/// `rho^(k)` restricted to the symmetric subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentOperator {
    basis: SymmetricBasis,
    matrix: ComplexMatrix,
}

impl MomentOperator {
    pub fn k(&self) -> usize {
        self.basis.k
    }

    pub fn d_a(&self) -> usize {
        self.basis.d
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &SymmetricBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `V rho V^dagger` on the full `d^k` replica space.
    pub fn embed_full(&self) -> Result<ComplexMatrix> {
        let iso = self.basis.isometry()?;
        iso.matmul(&self.matrix)?.matmul(&iso.adjoint())
    }
}

/// `sum_z p(z) (|psi_z><psi_z|)^{(x) k}` in the symmetric basis. Cost
/// `O(|outcomes| D^2)` with `D = binom(k + d_a - 1, k)`.
pub fn moment_operator(ens: &ProjectedEnsemble, k: usize) -> Result<MomentOperator> {
    let basis = SymmetricBasis::new(ens.d_a, k)?;
    let dim = basis.dim();
    // upper triangle, packed row by row
    let mut acc = vec![C64::default(); dim * (dim + 1) / 2];
    let mut v = vec![C64::default(); dim];
    for (p, psi) in ens.iter() {
        basis.product_coordinates(psi, &mut v);
        let mut off = 0;
        for m in 0..dim {
            let vm = v[m] * p;
            for (a, vn) in acc[off..off + dim - m].iter_mut().zip(&v[m..]) {
                *a += vm * vn.conj();
            }
            off += dim - m;
        }
    }
    let mut matrix = ComplexMatrix::zeros(dim, dim)?;
    let mut off = 0;
    for m in 0..dim {
        for (j, &z) in acc[off..off + dim - m].iter().enumerate() {
            let n = m + j;
            matrix[(m, n)] = z;
            matrix[(n, m)] = z.conj();
        }
        matrix[(m, m)] = C64::new(matrix[(m, m)].re, 0.0);
        off += dim - m;
    }
    Ok(MomentOperator { basis, matrix })
}

/// The Haar moment: identity over `D` on the symmetric subspace.
pub fn haar_moment(k: usize, d_a: usize) -> Result<MomentOperator> {
    let basis = SymmetricBasis::new(d_a, k)?;
    let dim = basis.dim();
    let mut matrix = ComplexMatrix::identity(dim)?;
    matrix.scale(1.0 / dim as f64);
    Ok(MomentOperator { basis, matrix })
}

/// `F^(k) = Tr[(rho^(k))^2]`.
pub fn frame_potential(mop: &MomentOperator) -> f64 {
    mop.matrix.frobenius_norm_sqr()
}

/// Frame potential of the Haar ensemble, `1 / binom(k + d - 1, k)`.
pub fn haar_frame_potential(k: usize, d_a: usize) -> f64 {
    1.0 / binomial((k + d_a - 1) as u64, k as u64)
}

/// `Delta^(k) = ||rho^(k) - rho_H^(k)||_F / ||rho_H^(k)||_F`.
///
/// Equal to `sqrt(F^(k) / F_H^(k) - 1)` for a unit-trace moment, but taken
/// entrywise so that ensembles at the Haar value give zero rather than the
/// square root of a rounding residue.
pub fn delta_k(mop: &MomentOperator) -> Result<f64> {
    let dim = mop.dim();
    let h = 1.0 / dim as f64;
    let m = &mop.matrix;
    let mut dist = 0.0;
    for r in 0..dim {
        for (c, z) in m.row(r).iter().enumerate() {
            dist += if r == c { (z - h).norm_sqr() } else { z.norm_sqr() };
        }
    }
    let delta = (dist * dim as f64).sqrt();
    if !delta.is_finite() {
        return Err(Error::NumericalInconsistency(format!("non-finite Delta^({}) ", mop.k())));
    }
    Ok(delta)
}

pub fn delta_from_frame_potential(f: f64, k: usize, d_a: usize) -> Result<f64> {
    let radicand = f / haar_frame_potential(k, d_a) - 1.0;
    if radicand < -RADICAND_TOL {
        return Err(Error::NumericalInconsistency(format!(
            "F/F_H - 1 = {radicand:.3e} is negative (k = {k}, d_a = {d_a})"
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::reduced_density_matrix_a;
    use crate::randmat::{haar_state, RngStream};

    fn epr(d: usize) -> PureState {
        let mut amps = vec![C64::default(); d * d];
        for i in 0..d {
            amps[i * d + i] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        }
        PureState::from_amplitudes(d, d, 1, amps).unwrap()
    }

    #[test]
    fn basis_ordering_and_size() {
        let b = SymmetricBasis::new(2, 2).unwrap();
        assert_eq!(b.occupations(), &[vec![2, 0], vec![1, 1], vec![0, 2]]);
        let b = SymmetricBasis::new(3, 2).unwrap();
        assert_eq!(
            b.occupations(),
            &[vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 2, 0], vec![0, 1, 1], vec![0, 0, 2]]
        );
        for d in 1..5 {
            for k in 1..7 {
                let b = SymmetricBasis::new(d, k).unwrap();
                assert_eq!(b.dim() as f64, binomial((k + d - 1) as u64, k as u64));
            }
        }
    }

    #[test]
    fn isometry_has_orthonormal_columns() {
        let b = SymmetricBasis::new(3, 3).unwrap();
        let v = b.isometry().unwrap();
        let g = v.adjoint().matmul(&v).unwrap();
        assert!(g.max_abs_diff(&ComplexMatrix::identity(b.dim()).unwrap()).unwrap() < 1e-14);
    }

    #[test]
    fn epr_projection() {
        let ens = project(&epr(2)).unwrap();
        assert_eq!(ens.len(), 2);
        let want = [[1.0, 0.0], [0.0, 1.0]];
        for ((p, psi), w) in ens.iter().zip(want) {
            assert!((p - 0.5).abs() < 1e-15);
            assert!((psi[0].re - w[0]).abs() < 1e-15 && (psi[1].re - w[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn product_state_gives_identical_conditional_states() {
        let mut rng = RngStream::new(1, 0);
        let phi = haar_state(3, &mut rng).unwrap();
        let chi = haar_state(8, &mut rng).unwrap();
        let amps: Vec<C64> = phi.iter().flat_map(|a| chi.iter().map(move |b| a * b)).collect();
        let s = PureState::from_amplitudes(3, 2, 4, amps).unwrap();
        let ens = project(&s).unwrap();
        for (_, psi) in ens.iter() {
            let overlap: C64 = psi.iter().zip(&phi).map(|(x, y)| x.conj() * y).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
        }
        assert!((ens.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(frame_potential(&moment_operator(&ens, 4).unwrap()) > 1.0 - 1e-12);
    }

    #[test]
    fn zero_outcomes_are_discarded() {
        // |0>_A |0>_B: only one of the d_B outcomes carries weight
        let s = PureState::zero(2, 2, 3).unwrap();
        let ens = project(&s).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens.discarded_mass(), 0.0);
    }

    #[test]
    fn k_zero_rejected() {
        let ens = project(&epr(2)).unwrap();
        assert!(matches!(moment_operator(&ens, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn epr_second_moment_is_diagonal() {
        let ens = project(&epr(2)).unwrap();
        let m = moment_operator(&ens, 2).unwrap();
        let want = ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 0.5]).unwrap();
        assert!(m.matrix().max_abs_diff(&want).unwrap() < 1e-15);
        assert!((delta_k(&m).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn epr_frame_potential_independent_of_k() {
        for d in 2..5 {
            let ens = project(&epr(d)).unwrap();
            for k in 1..6 {
                let f = frame_potential(&moment_operator(&ens, k).unwrap());
                assert!((f - 1.0 / d as f64).abs() < 1e-12);
            }
            let d2 = delta_k(&moment_operator(&ens, 2).unwrap()).unwrap();
            assert!((d2 - ((d as f64 - 1.0) / 2.0).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_moment_values() {
        let h = haar_moment(1, 3).unwrap();
        let mut want = ComplexMatrix::identity(3).unwrap();
        want.scale(1.0 / 3.0);
        assert_eq!(h.matrix(), &want);
        let h = haar_moment(2, 2).unwrap();
        assert_eq!(h.dim(), 3);
        for k in 1..8 {
            for d in 1..5 {
                let h = haar_moment(k, d).unwrap();
                assert!((frame_potential(&h) - haar_frame_potential(k, d)).abs() < 1e-15);
                assert_eq!(delta_k(&h).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn first_moment_is_rho_a() {
        let mut rng = RngStream::new(2, 0);
        let v = haar_state(3 * 2 * 5, &mut rng).unwrap();
        let s = PureState::from_amplitudes(3, 2, 5, v).unwrap();
        let ens = project(&s).unwrap();
        let rho = reduced_density_matrix_a(&s);
        assert!(ens.density_matrix().max_abs_diff(rho.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn negative_radicand_is_an_error() {
        assert!(matches!(
            delta_from_frame_potential(0.1, 2, 2),
            Err(Error::NumericalInconsistency(_))
        ));
        // within tolerance clamps to zero
        let f = haar_frame_potential(2, 2) * (1.0 - 1e-13);
        assert_eq!(delta_from_frame_potential(f, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn weighted_constructor_normalizes() {
        let states = [C64::new(2.0, 0.0), C64::default(), C64::default(), C64::new(0.0, 3.0)];
        let ens = ProjectedEnsemble::from_weighted(2, &[1.0, 3.0], &states).unwrap();
        assert_eq!(ens.probabilities(), &[0.25, 0.75]);
        let (_, psi) = ens.iter().nth(1).unwrap();
        assert!((psi[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(ProjectedEnsemble::from_weighted(2, &[0.0], &states[..2]).is_err());
    }
}
