//! The tripartite state `A B1 B2` and the alternating gate schedule.
//!
//! Amplitudes are stored a-major over `(a, b1, b2)`: the flat index is
//! `(a * d_b1 + b1) * q + b2`. Viewed as a `(d_a d_b1) x q` matrix the system
//! gate is a left multiplication; viewed as a `d_a x (d_b1 q)` matrix the bath
//! gate acts on the rows. Both are contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randmat::{self, haar_frame, haar_unitary, inner, ComplexMatrix, RngStream, UnitaryMatrix, C64};

pub const STATE_NORM_TOL: f64 = 1e-10;
/// Residual-norm threshold below which a row direction is treated as
/// linearly dependent in the subspace bath update.
pub const RANK_TOL: f64 = 1e-12;
/// Largest bath dimension `d_b1 * q` accepted by the dense bath gate.
pub const DENSE_BATH_LIMIT: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub d_a: usize,
    pub d_b1: usize,
    pub q: usize,
    pub t_max: usize,
    pub k_max: usize,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl CircuitConfig {
    /// Configuration with `q = 2^(l - 2)`, i.e. `l` qubits when `d_a = d_b1 = 2`.
    pub fn qubits(l: u32, t_max: usize, k_max: usize, n_realizations: usize, master_seed: u64) -> Result<Self> {
        if !(2..=62).contains(&l) {
            return Err(Error::InvalidArgument(format!("L = {l} must lie in 2..=62")));
        }
        let cfg = Self { d_a: 2, d_b1: 2, q: 1usize << (l - 2), t_max, k_max, n_realizations, master_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d_a", self.d_a), ("d_b1", self.d_b1), ("q", self.q), ("k_max", self.k_max)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidArgument("n_realizations must be at least 1".into()));
        }
        self.total_dim()?;
        Ok(())
    }

    /// `d_b1 * q`.
    pub fn bath_dim(&self) -> Result<usize> {
        self.d_b1
            .checked_mul(self.q)
            .ok_or_else(|| Error::Resource(format!("d_b1 * q = {} * {} overflows", self.d_b1, self.q)))
    }

    /// `d_a * d_b1 * q`, checked against the address space.
    pub fn total_dim(&self) -> Result<usize> {
        let n = self
            .bath_dim()?
            .checked_mul(self.d_a)
            .ok_or_else(|| Error::Resource("state dimension overflows".into()))?;
        n.checked_mul(std::mem::size_of::<C64>())
            .filter(|&bytes| bytes <= isize::MAX as usize)
            .ok_or_else(|| Error::Resource(format!("state of {n} amplitudes exceeds addressable memory")))?;
        Ok(n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    d_a: usize,
    d_b1: usize,
    q: usize,
    amps: Vec<C64>,
}

impl PureState {
    /// `|0>_A |0>_B1 |0>_B2`.
    pub fn zero(d_a: usize, d_b1: usize, q: usize) -> Result<Self> {
        let cfg = CircuitConfig { d_a, d_b1, q, t_max: 0, k_max: 1, n_realizations: 1, master_seed: 0 };
        init_state(&cfg)
    }

    pub fn from_amplitudes(d_a: usize, d_b1: usize, q: usize, amps: Vec<C64>) -> Result<Self> {
        let n = d_a.checked_mul(d_b1).and_then(|x| x.checked_mul(q));
        if d_a == 0 || d_b1 == 0 || q == 0 || n != Some(amps.len()) {
            return Err(Error::InvalidDimension(format!(
                "{} amplitudes for dims ({d_a}, {d_b1}, {q})",
                amps.len()
            )));
        }
        let norm = randmat::norm(&amps);
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self { d_a, d_b1, q, amps })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b1(&self) -> usize {
        self.d_b1
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Dimension of the measured side `B = B1 B2`.
    pub fn bath_dim(&self) -> usize {
        self.d_b1 * self.q
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        randmat::norm(&self.amps)
    }

    /// Row `a` of the `d_a x d_B` coefficient matrix.
    pub fn a_row(&self, a: usize) -> &[C64] {
        let db = self.bath_dim();
        &self.amps[a * db..(a + 1) * db]
    }
}

pub fn init_state(cfg: &CircuitConfig) -> Result<PureState> {
    let n = cfg.total_dim()?;
    let mut amps = Vec::new();
    amps.try_reserve_exact(n)
        .map_err(|_| Error::Resource(format!("cannot allocate {n} amplitudes")))?;
    amps.resize(n, C64::default());
    amps[0] = C64::new(1.0, 0.0);
    Ok(PureState { d_a: cfg.d_a, d_b1: cfg.d_b1, q: cfg.q, amps })
}

/// `(U_{AB1} (x) I_{B2}) |psi>`.
pub fn apply_system_gate(state: &mut PureState, u: &UnitaryMatrix) -> Result<()> {
    let n = state.d_a * state.d_b1;
    if u.dim() != n {
        return Err(Error::InvalidArgument(format!("system gate has dim {}, expected {n}", u.dim())));
    }
    let q = state.q;
    let m = u.matrix();
    let mut out = vec![C64::default(); state.amps.len()];
    for r in 0..n {
        let dst = &mut out[r * q..(r + 1) * q];
        for (c, &coef) in m.row(r).iter().enumerate() {
            let src = &state.amps[c * q..(c + 1) * q];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += coef * s;
            }
        }
    }
    state.amps = out;
    Ok(())
}

/// `(I_A (x) V_{B1B2}) |psi>` by dense multiplication; only for small baths.
pub fn apply_bath_gate_dense(state: &mut PureState, v: &UnitaryMatrix) -> Result<()> {
    let db = state.bath_dim();
    if v.dim() != db {
        return Err(Error::InvalidArgument(format!("bath gate has dim {}, expected {db}", v.dim())));
    }
    if db > DENSE_BATH_LIMIT {
        return Err(Error::Resource(format!("dense bath gate with d_B = {db} > {DENSE_BATH_LIMIT}")));
    }
    for a in 0..state.d_a {
        let row = &mut state.amps[a * db..(a + 1) * db];
        let new = v.matrix().matvec(row)?;
        row.copy_from_slice(&new);
    }
    Ok(())
}

/// Applies a Haar-random bath gate without forming it.
///
/// The `d_a` rows of the coefficient matrix span at most a `d_a`-dimensional
/// subspace of `B`. Writing `M = C W` with orthonormal rows `W`, a Haar `V`
/// maps `W` to a Haar-random orthonormal frame, so the update is `M <- C W'`
/// with `W'` freshly drawn. Cost `O(d_a^2 d_B)`.
pub fn apply_bath_gate_haar(state: &mut PureState, rng: &mut RngStream) -> Result<()> {
    let db = state.bath_dim();
    let d_a = state.d_a;
    let (coeffs, rank) = row_factorization(state);
    if rank == 0 {
        return Err(Error::NumericalDegeneracy("state has numerically zero norm".into()));
    }
    let frame = haar_frame(rank, db, rng)?;
    for a in 0..d_a {
        let row = &mut state.amps[a * db..(a + 1) * db];
        row.iter_mut().for_each(|z| *z = C64::default());
        for (j, w) in frame.iter().enumerate() {
            let c = coeffs[a * d_a + j];
            if c == C64::default() {
                continue;
            }
            for (z, &wz) in row.iter_mut().zip(w) {
                *z += c * wz;
            }
        }
    }
    Ok(())
}

/// Thin factorization `M = C W` of the `d_a x d_B` coefficient matrix by
/// column-pivoted Gram-Schmidt on its rows (two orthogonalization passes).
/// Returns `C` as a row-major `d_a x d_a` array using its first `rank`
/// columns, and the numerical rank.
fn row_factorization(state: &PureState) -> (Vec<C64>, usize) {
    let d_a = state.d_a;
    let mut resid: Vec<Vec<C64>> = (0..d_a).map(|a| state.a_row(a).to_vec()).collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(d_a);
    let mut coeffs = vec![C64::default(); d_a * d_a];
    let mut active: Vec<bool> = vec![true; d_a];

    for j in 0..d_a {
        let (pivot, pnorm) = (0..d_a)
            .filter(|&a| active[a])
            .map(|a| (a, randmat::norm(&resid[a])))
            .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot == usize::MAX || pnorm <= RANK_TOL {
            break;
        }
        active[pivot] = false;
        let mut w = std::mem::take(&mut resid[pivot]);
        // second pass against earlier basis vectors
        for (i, b) in basis.iter().enumerate() {
            let c = inner(b, &w);
            coeffs[pivot * d_a + i] += c;
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let wn = randmat::norm(&w);
        w.iter_mut().for_each(|z| *z /= wn);
        coeffs[pivot * d_a + j] += C64::new(wn, 0.0);
        for a in (0..d_a).filter(|&a| active[a]) {
            let c = inner(&w, &resid[a]);
            coeffs[a * d_a + j] += c;
            resid[a].iter_mut().zip(&w).for_each(|(x, y)| *x -= c * y);
        }
        basis.push(w);
    }
    let rank = basis.len();
    (coeffs, rank)
}

/// How the bath gates are realized during evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BathMethod {
    /// Frame-resampling update, `O(d_a^2 d_b1 q)` per gate.
    Subspace,
    /// Explicit Haar `V` on `B1B2`; small baths only.
    Dense,
}

/// Evolves `|0>` under `V_0, U_0, V_1, ..., U_{T_max-1}, V_{T_max}`, calling
/// `observer(T, state)` right after each `V_T`.
pub fn evolve_and_snapshot<F>(cfg: &CircuitConfig, rng: &mut RngStream, observer: F) -> Result<()>
where
    F: FnMut(usize, &PureState) -> Result<()>,
{
    evolve_with(cfg, BathMethod::Subspace, rng, observer)
}

pub fn evolve_with<F>(cfg: &CircuitConfig, method: BathMethod, rng: &mut RngStream, mut observer: F) -> Result<()>
where
    F: FnMut(usize, &PureState) -> Result<()>,
{
    cfg.validate()?;
    let mut state = init_state(cfg)?;
    let sys_dim = cfg.d_a * cfg.d_b1;
    let bath_dim = cfg.bath_dim()?;
    for t in 0..=cfg.t_max {
        match method {
            BathMethod::Subspace => apply_bath_gate_haar(&mut state, rng)?,
            BathMethod::Dense => {
                let v = haar_unitary(bath_dim, rng)?;
                apply_bath_gate_dense(&mut state, &v)?;
            }
        }
        observer(t, &state)?;
        if t < cfg.t_max {
            let u = haar_unitary(sys_dim, rng)?;
            apply_system_gate(&mut state, &u)?;
        }
    }
    Ok(())
}

/// Reduced density matrix on `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

pub const DENSITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    /// Checks Hermiticity and unit trace; positivity is the caller's
    /// contract (checked where an eigendecomposition is already needed).
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDimension("density matrix must be square".into()));
        }
        let h = m.hermiticity_residual();
        if h > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("not Hermitian (residual {h:.3e})")));
        }
        let tr = m.trace();
        if (tr - 1.0).norm() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("trace {tr} is not 1")));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diagonal(&vec![1.0 / d as f64; d])?)
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diagonal(p)?)
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }
}

/// `rho_A = Tr_B |psi><psi|`.
pub fn reduced_density_matrix_a(state: &PureState) -> DensityMatrix {
    let d_a = state.d_a;
    let mut m = ComplexMatrix::zeros(d_a, d_a).expect("d_a >= 1");
    for i in 0..d_a {
        for j in i..d_a {
            let z = inner(state.a_row(j), state.a_row(i));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    // exact Hermitian by construction; tiny norm drift is normalized away
    let tr = m.trace().re;
    m.scale(1.0 / tr);
    DensityMatrix { m }
}

/// `(Tr rho^2, -log2 Tr rho^2)`.
pub fn purity_and_renyi2(rho: &DensityMatrix) -> Result<(f64, f64)> {
    let p = rho.m.frobenius_norm_sqr();
    if p <= 0.0 || !p.is_finite() {
        return Err(Error::NumericalDegeneracy(format!("purity {p} is not positive")));
    }
    let p = p.min(1.0);
    Ok((p, -p.log2()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d_a: usize, d_b1: usize, q: usize, t_max: usize) -> CircuitConfig {
        CircuitConfig { d_a, d_b1, q, t_max, k_max: 1, n_realizations: 1, master_seed: 0 }
    }

    fn random_state(d_a: usize, d_b1: usize, q: usize, rng: &mut RngStream) -> PureState {
        let v = randmat::haar_state(d_a * d_b1 * q, rng).unwrap();
        PureState::from_amplitudes(d_a, d_b1, q, v).unwrap()
    }

    #[test]
    fn init_state_layout() {
        let s = init_state(&cfg(2, 2, 4, 0)).unwrap();
        assert_eq!(s.amplitudes().len(), 16);
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert_eq!(s.norm(), 1.0);
        let rho = reduced_density_matrix_a(&s);
        let want = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(rho.matrix(), &want);
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(cfg(0, 2, 2, 1).validate().is_err());
        assert!(cfg(2, 2, 2, 1).validate().is_ok());
        let huge = cfg(1 << 20, 1 << 20, 1 << 30, 1);
        assert!(matches!(init_state(&huge), Err(Error::Resource(_))));
    }

    #[test]
    fn identity_gates_leave_state_unchanged() {
        let mut rng = RngStream::new(1, 1);
        let s0 = random_state(2, 3, 4, &mut rng);
        let mut s = s0.clone();
        apply_system_gate(&mut s, &UnitaryMatrix::identity(6).unwrap()).unwrap();
        apply_bath_gate_dense(&mut s, &UnitaryMatrix::identity(12).unwrap()).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn gate_dimension_mismatch() {
        let mut s = PureState::zero(2, 2, 2).unwrap();
        let u = UnitaryMatrix::identity(3).unwrap();
        assert!(matches!(apply_system_gate(&mut s, &u), Err(Error::InvalidArgument(_))));
        assert!(matches!(apply_bath_gate_dense(&mut s, &u), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn system_gate_matches_full_matrix_when_q_is_one() {
        let mut rng = RngStream::new(2, 0);
        let s0 = random_state(3, 2, 1, &mut rng);
        let u = haar_unitary(6, &mut rng).unwrap();
        let mut s = s0.clone();
        apply_system_gate(&mut s, &u).unwrap();
        let want = u.matrix().matvec(s0.amplitudes()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_bath_gate_with_trivial_a_is_plain_multiplication() {
        let mut rng = RngStream::new(3, 0);
        let s0 = random_state(1, 2, 3, &mut rng);
        let v = haar_unitary(6, &mut rng).unwrap();
        let mut s = s0.clone();
        apply_bath_gate_dense(&mut s, &v).unwrap();
        let want = v.matrix().matvec(s0.amplitudes()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_bath_gate_size_guard() {
        let mut s = PureState::zero(1, 1, DENSE_BATH_LIMIT + 1).unwrap();
        let v = UnitaryMatrix::identity(DENSE_BATH_LIMIT + 1).unwrap();
        assert!(matches!(apply_bath_gate_dense(&mut s, &v), Err(Error::Resource(_))));
    }

    #[test]
    fn haar_bath_gate_preserves_rho_a_and_norm() {
        let mut rng = RngStream::new(4, 4);
        for (d_a, d_b1, q) in [(2, 2, 4), (3, 2, 5), (4, 1, 16), (2, 2, 1)] {
            let mut s = random_state(d_a, d_b1, q, &mut rng);
            let before = reduced_density_matrix_a(&s);
            apply_bath_gate_haar(&mut s, &mut rng).unwrap();
            let after = reduced_density_matrix_a(&s);
            assert!(before.matrix().max_abs_diff(after.matrix()).unwrap() <= 1e-10);
            assert!((s.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn haar_bath_gate_on_product_state_uses_rank_one() {
        let s = PureState::zero(3, 2, 4).unwrap();
        let (_, rank) = row_factorization(&s);
        assert_eq!(rank, 1);
        let mut s = s;
        apply_bath_gate_haar(&mut s, &mut RngStream::new(0, 0)).unwrap();
        let rho = reduced_density_matrix_a(&s);
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        // A stays unentangled
        let (p, _) = purity_and_renyi2(&rho).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshots_follow_schedule() {
        let mut rng = RngStream::new(5, 0);
        let mut seen = vec![];
        evolve_and_snapshot(&cfg(2, 2, 4, 0), &mut rng, |t, s| {
            seen.push((t, s.norm()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].0, 0);

        let mut seen = vec![];
        evolve_and_snapshot(&cfg(2, 2, 8, 12), &mut rng, |t, s| {
            seen.push(t);
            assert!((s.norm() - 1.0).abs() <= 1e-10);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (0..=12).collect::<Vec<_>>());
    }

    #[test]
    fn norm_drift_over_forty_gates() {
        let mut rng = RngStream::new(6, 0);
        let c = cfg(3, 2, 32, 20);
        let mut last = 0.0;
        evolve_and_snapshot(&c, &mut rng, |_, s| {
            last = s.norm();
            Ok(())
        })
        .unwrap();
        assert!((last - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn epr_pair_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // d_a = 2, d_b1 = 2, q = 1: (|00> + |11>)/sqrt2
        let amps = vec![C64::new(h, 0.0), C64::default(), C64::default(), C64::new(h, 0.0)];
        let s = PureState::from_amplitudes(2, 2, 1, amps).unwrap();
        let rho = reduced_density_matrix_a(&s);
        let want = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]).unwrap();
        assert!(rho.matrix().max_abs_diff(&want).unwrap() < 1e-15);
        let (p, s2) = purity_and_renyi2(&rho).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (s2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn purity_of_maximally_mixed() {
        for d in [1, 2, 3, 8] {
            let (p, s2) = purity_and_renyi2(&DensityMatrix::maximally_mixed(d).unwrap()).unwrap();
            assert!((p - 1.0 / d as f64).abs() < 1e-15);
            assert!((s2 - (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn rdm_trace_is_one() {
        let mut rng = RngStream::new(8, 0);
        for _ in 0..20 {
            let s = random_state(3, 2, 7, &mut rng);
            let rho = reduced_density_matrix_a(&s);
            assert!((rho.matrix().trace() - 1.0).norm() <= 1e-12);
        }
    }
}
