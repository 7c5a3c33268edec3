//! Density operators, purification, random sampling and state-class tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, column, commutator, eig_unchecked, frob, hermitian_basis, hermitize, identity, kron, partial_trace,
    r, CMatrix, C64,
};

/// Default tolerance for class-membership tests.
pub const CLASS_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Normalized,
    Subnormalized,
}

/// Positive semidefinite operator with a tensor-factor layout.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub mat: CMatrix,
    pub dims: Vec<usize>,
    pub trace_mode: TraceMode,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn validate(mat: &CMatrix, dims: &[usize]) -> Result<CMatrix> {
    let n: usize = dims.iter().product();
    if dims.is_empty() || mat.nrows() != n || mat.ncols() != n {
        return Err(Error::DimMismatch(format!(
            "matrix is {}x{} but dims {:?} give {}",
            mat.nrows(),
            mat.ncols(),
            dims,
            n
        )));
    }
    let dev = linalg::hermiticity_defect(mat);
    if dev > linalg::HERMITIAN_TOL {
        return Err(Error::NonHermitian(dev));
    }
    let h = hermitize(mat);
    let ev = linalg::eigvals(&h);
    let lmin = ev.last().copied().unwrap_or(0.0);
    let lmax = ev.first().copied().unwrap_or(0.0);
    if lmin < -PSD_TOL * lmax.abs().max(1.0) {
        return Err(Error::NotPsd(lmin));
    }
    Ok(h)
}

impl DensityOperator {
    /// Normalized state (trace 1 within 1e-10).
    pub fn new(mat: CMatrix, dims: &[usize]) -> Result<Self> {
        let h = validate(&mat, dims)?;
        let t = h.trace().re;
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace(t));
        }
        Ok(DensityOperator { mat: h, dims: dims.to_vec(), trace_mode: TraceMode::Normalized })
    }

    /// Subnormalized state (0 < trace ≤ 1).
    pub fn new_subnormalized(mat: CMatrix, dims: &[usize]) -> Result<Self> {
        let h = validate(&mat, dims)?;
        let t = h.trace().re;
        if t > 1.0 + TRACE_TOL || t <= 0.0 {
            return Err(Error::BadTrace(t));
        }
        let mode = if (t - 1.0).abs() <= TRACE_TOL { TraceMode::Normalized } else { TraceMode::Subnormalized };
        Ok(DensityOperator { mat: h, dims: dims.to_vec(), trace_mode: mode })
    }

    /// Trace-normalize an arbitrary nonzero PSD operator.
    pub fn normalized_from(mat: CMatrix, dims: &[usize]) -> Result<Self> {
        let h = validate(&mat, dims)?;
        let t = h.trace().re;
        if t <= 0.0 {
            return Err(Error::ZeroOperator);
        }
        Self::new(h / r(t), dims)
    }

    pub fn from_ket(ket: &CMatrix, dims: &[usize]) -> Result<Self> {
        let nrm = frob(ket);
        if nrm == 0.0 {
            return Err(Error::ZeroOperator);
        }
        let v = ket / r(nrm);
        Self::new(&v * v.adjoint(), dims)
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        DensityOperator { mat: identity(n) / r(n as f64), dims: dims.to_vec(), trace_mode: TraceMode::Normalized }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn eig(&self) -> linalg::HermitianEig {
        eig_unchecked(&self.mat)
    }

    pub fn rank(&self) -> usize {
        self.eig().rank()
    }

    pub fn purity(&self) -> f64 {
        linalg::tr_prod_re(&self.mat, &self.mat)
    }

    /// Reduced state on the listed subsystems (original order kept).
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityOperator> {
        let m = partial_trace(&self.mat, &self.dims, keep)?;
        let mut k = keep.to_vec();
        k.sort_unstable();
        k.dedup();
        let dims = k.iter().map(|&i| self.dims[i]).collect();
        Ok(DensityOperator { mat: hermitize(&m), dims, trace_mode: self.trace_mode })
    }

    pub fn permute(&self, perm: &[usize]) -> Result<DensityOperator> {
        let m = linalg::permute_subsystems(&self.mat, &self.dims, perm)?;
        let dims = perm.iter().map(|&p| self.dims[p]).collect();
        Ok(DensityOperator { mat: m, dims, trace_mode: self.trace_mode })
    }

    /// Merge consecutive factors into two parties: [0, split) | [split, n).
    pub fn bipartite(&self, split: usize) -> Result<DensityOperator> {
        if split == 0 || split >= self.dims.len() {
            return Err(Error::DimMismatch(format!("split {} for dims {:?}", split, self.dims)));
        }
        let a: usize = self.dims[..split].iter().product();
        let b: usize = self.dims[split..].iter().product();
        Ok(DensityOperator { mat: self.mat.clone(), dims: vec![a, b], trace_mode: self.trace_mode })
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mode = if self.trace_mode == TraceMode::Normalized && other.trace_mode == TraceMode::Normalized {
            TraceMode::Normalized
        } else {
            TraceMode::Subnormalized
        };
        DensityOperator { mat: kron(&self.mat, &other.mat), dims, trace_mode: mode }
    }

    /// Apply `k ρ k†` for an operator on the full space (no validation of the result).
    pub fn conjugate_by(&self, k: &CMatrix, dims: &[usize]) -> DensityOperator {
        let m = hermitize(&(k * &self.mat * k.adjoint()));
        DensityOperator { mat: m, dims: dims.to_vec(), trace_mode: self.trace_mode }
    }

    /// Two-party dims `[d_A, d_B]`, requiring a bipartite layout.
    pub fn two_party(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::DimMismatch(format!("expected two subsystems, got dims {:?}", self.dims))),
        }
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        let t = self.trace();
        (self.purity() - t * t).abs() <= tol
    }
}

/// Pure state with tensor layout.
#[derive(Debug, Clone)]
pub struct PureState {
    pub ket: CMatrix,
    pub dims: Vec<usize>,
}

impl PureState {
    pub fn density(&self) -> DensityOperator {
        let t = frob(&self.ket).powi(2);
        let mode = if (t - 1.0).abs() <= TRACE_TOL { TraceMode::Normalized } else { TraceMode::Subnormalized };
        DensityOperator { mat: &self.ket * self.ket.adjoint(), dims: self.dims.clone(), trace_mode: mode }
    }
}

/// Purification |ψ⟩ = Σ_k √λ_k |v_k⟩|k⟩ with an appended factor of dimension rank(ρ).
pub fn purify(rho: &DensityOperator) -> PureState {
    let e = rho.eig();
    let k = e.rank().max(1);
    let n = rho.dim();
    let mut ket = CMatrix::zeros(n * k, 1);
    for j in 0..k {
        let s = e.values[j].max(0.0).sqrt();
        for i in 0..n {
            ket[(i * k + j, 0)] = e.vectors[(i, j)] * s;
        }
    }
    let mut dims = rho.dims.clone();
    dims.push(k);
    PureState { ket, dims }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    c(a, b)
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Random state of the given rank from the induced (Ginibre) measure.
pub fn random_state<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> DensityOperator {
    let n: usize = dims.iter().product();
    let k = rank.clamp(1, n);
    let g = ginibre(n, k, rng);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    DensityOperator { mat: hermitize(&(m / r(t))), dims: dims.to_vec(), trace_mode: TraceMode::Normalized }
}

/// Haar-random unitary: QR of a Ginibre matrix with the phase fix R_ii > 0.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = ginibre(d, d, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for k in 0..d {
        let x = rm[(k, k)];
        let ph = if x.norm() > 0.0 { x / r(x.norm()) } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= ph;
        }
    }
    q
}

pub fn random_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> PureState {
    let n: usize = dims.iter().product();
    let g = ginibre(n, 1, rng);
    let nrm = frob(&g);
    PureState { ket: g / r(nrm), dims: dims.to_vec() }
}

/// Random separable state: a mixture of `terms` random product pure states.
pub fn random_separable<R: Rng + ?Sized>(da: usize, db: usize, terms: usize, rng: &mut R) -> DensityOperator {
    let mut m = CMatrix::zeros(da * db, da * db);
    let mut total = 0.0;
    for _ in 0..terms.max(1) {
        let a = random_pure(&[da], rng).ket;
        let b = random_pure(&[db], rng).ket;
        let w: f64 = rng.random::<f64>() + 1e-3;
        let v = kron(&a, &b);
        m += &v * v.adjoint() * r(w);
        total += w;
    }
    DensityOperator { mat: hermitize(&(m / r(total))), dims: vec![da, db], trace_mode: TraceMode::Normalized }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateClass {
    /// Classical on the first party.
    Cq,
    /// Classical on the second party.
    Qc,
    Cc,
    Separable,
    /// Measured-quantum with the first party as register.
    Mq,
}

/// Witness for an MQ state: ρ = V σ V† with V = Σ_j |W_j⟩ ⊗ X_j.
#[derive(Debug, Clone)]
pub struct MqWitness {
    /// Columns form the register basis W.
    pub basis_w: CMatrix,
    /// Orthogonal projectors X_j on the second party (some may be zero).
    pub pvm_x: Vec<CMatrix>,
    pub sigma: CMatrix,
    pub residual: f64,
}

impl MqWitness {
    pub fn isometry(&self) -> CMatrix {
        let d = self.basis_w.nrows();
        let s = self.pvm_x[0].nrows();
        let mut v = CMatrix::zeros(d * s, s);
        for (j, x) in self.pvm_x.iter().enumerate() {
            v += kron(&column(&self.basis_w, j), x);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    None,
    Basis(CMatrix),
    Bases(CMatrix, CMatrix),
    Mq(Box<MqWitness>),
}

#[derive(Debug, Clone)]
pub struct StateClassVerdict {
    pub class: StateClass,
    pub member: bool,
    pub witness: Witness,
    pub tolerance_used: f64,
    /// Size of the violation measured by the test (commutator norm, PPT
    /// eigenvalue or reconstruction residual).
    pub residual: f64,
    /// False when the test is one-sided and could not decide.
    pub decided: bool,
}

/// Local operators A_m = Tr_B[(1 ⊗ F_m) ρ] over a Hermitian basis F_m of B.
fn conditional_images(rho: &CMatrix, da: usize, db: usize) -> Vec<CMatrix> {
    hermitian_basis(db)
        .iter()
        .map(|f| {
            let m = rho * kron(&identity(da), f);
            partial_trace(&m, &[da, db], &[0]).expect("dims checked")
        })
        .collect()
}

fn dephase_first(rho: &CMatrix, w: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * db, da * db);
    for j in 0..w.ncols() {
        let p = kron(&linalg::projector(&column(w, j)), &identity(db));
        out += &p * rho * &p;
    }
    out
}

/// CQ test with the first party classical.
fn cq_first(rho: &CMatrix, da: usize, db: usize, tol: f64) -> (bool, f64, CMatrix) {
    let imgs = conditional_images(rho, da, db);
    let mut resid = 0.0f64;
    for i in 0..imgs.len() {
        for j in (i + 1)..imgs.len() {
            resid = resid.max(frob(&commutator(&imgs[i], &imgs[j])));
        }
    }
    // Fixed pseudo-random combination; any degenerate subspace of it is
    // diagonalized consistently because all images commute there.
    let mut comb = CMatrix::zeros(da, da);
    for (k, a) in imgs.iter().enumerate() {
        let w = ((k as f64 + 1.0) * 0.754_877_666).fract() + 0.1 * ((k as f64 + 1.0) * 0.569_840_290).fract();
        comb += a * r(w);
    }
    let w = eig_unchecked(&hermitize(&comb)).vectors;
    (resid <= tol, resid, w)
}

fn swap_parties(rho: &CMatrix, da: usize, db: usize) -> CMatrix {
    linalg::permute_subsystems(rho, &[da, db], &[1, 0]).expect("two factors")
}

/// Is ρ_AB classical on A (CQ)? Witness: a basis of A diagonalizing every conditional image.
pub fn is_cq(rho: &DensityOperator, tol: f64) -> Result<StateClassVerdict> {
    let (da, db) = rho.two_party()?;
    let (member, residual, w) = cq_first(&rho.mat, da, db, tol);
    Ok(StateClassVerdict {
        class: StateClass::Cq,
        member,
        witness: if member { Witness::Basis(w) } else { Witness::None },
        tolerance_used: tol,
        residual,
        decided: true,
    })
}

/// Is ρ_AB classical on B?
pub fn is_qc(rho: &DensityOperator, tol: f64) -> Result<StateClassVerdict> {
    let (da, db) = rho.two_party()?;
    let (member, residual, w) = cq_first(&swap_parties(&rho.mat, da, db), db, da, tol);
    Ok(StateClassVerdict {
        class: StateClass::Qc,
        member,
        witness: if member { Witness::Basis(w) } else { Witness::None },
        tolerance_used: tol,
        residual,
        decided: true,
    })
}

pub fn is_cc(rho: &DensityOperator, tol: f64) -> Result<StateClassVerdict> {
    let a = is_cq(rho, tol)?;
    let b = is_qc(rho, tol)?;
    let member = a.member && b.member;
    let witness = match (&a.witness, &b.witness) {
        (Witness::Basis(wa), Witness::Basis(wb)) if member => Witness::Bases(wa.clone(), wb.clone()),
        _ => Witness::None,
    };
    Ok(StateClassVerdict {
        class: StateClass::Cc,
        member,
        witness,
        tolerance_used: tol,
        residual: a.residual.max(b.residual),
        decided: true,
    })
}

pub fn partial_transpose_second(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * db, da * db);
    for a1 in 0..da {
        for b1 in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    out[(a1 * db + b2, a2 * db + b1)] = m[(a1 * db + b1, a2 * db + b2)];
                }
            }
        }
    }
    out
}

/// PPT test. Exact for 2×2 and 2×3; for larger dims only a PPT violation is
/// conclusive (`decided = false` otherwise).
pub fn is_separable_small(rho: &DensityOperator, tol: f64) -> Result<StateClassVerdict> {
    let (da, db) = rho.two_party()?;
    let pt = partial_transpose_second(&rho.mat, da, db);
    let lmin = linalg::min_eig(&pt);
    let ppt = lmin >= -tol;
    let exact = da * db <= 6;
    Ok(StateClassVerdict {
        class: StateClass::Separable,
        member: ppt,
        witness: Witness::None,
        tolerance_used: tol,
        residual: (-lmin).max(0.0),
        decided: exact || !ppt,
    })
}

/// MQ test with the first party as register: purify to ABC, test ρ_AC for
/// CQ on A, and rebuild V σ V† from the resulting witness.
pub fn is_mq(rho: &DensityOperator, tol: f64) -> Result<StateClassVerdict> {
    let (da, db) = rho.two_party()?;
    let psi = purify(rho);
    let dc = psi.dims[2];
    let full = psi.density().mat;
    let rho_ac = partial_trace(&full, &[da, db, dc], &[0, 2])?;
    let (cq, resid, w) = cq_first(&rho_ac, da, dc, tol);
    if !cq {
        return Ok(StateClassVerdict {
            class: StateClass::Mq,
            member: false,
            witness: Witness::None,
            tolerance_used: tol,
            residual: resid,
            decided: true,
        });
    }
    let witness = mq_witness_from_basis(&rho.mat, &w, da, db)?;
    if witness.residual > 10.0 * tol.max(1e-12) {
        return Err(Error::InconsistentWitness(witness.residual));
    }
    Ok(StateClassVerdict {
        class: StateClass::Mq,
        member: true,
        residual: witness.residual,
        witness: Witness::Mq(Box::new(witness)),
        tolerance_used: tol,
        decided: true,
    })
}

/// Given a candidate register basis W, extract X_j = supp Tr_A[(|W_j⟩⟨W_j| ⊗ 1) ρ],
/// σ = V†ρV and the reconstruction residual ‖ρ − VσV†‖_F.
pub fn mq_witness_from_basis(rho: &CMatrix, w: &CMatrix, da: usize, db: usize) -> Result<MqWitness> {
    let mut xs = Vec::with_capacity(da);
    for j in 0..da {
        let p = kron(&linalg::projector(&column(w, j)), &identity(db));
        let tau = partial_trace(&(&p * rho * &p), &[da, db], &[1])?;
        let e = eig_unchecked(&hermitize(&tau));
        // Support relative to the whole state, so tiny blocks are not inflated.
        let cutoff = linalg::SUPPORT_CUTOFF * rho.trace().re.abs().max(1e-300);
        let mut x = CMatrix::zeros(db, db);
        for k in 0..db {
            if e.values[k] > cutoff {
                let v = column(&e.vectors, k);
                x += &v * v.adjoint();
            }
        }
        xs.push(x);
    }
    let sum: CMatrix = xs.iter().fold(CMatrix::zeros(db, db), |a, x| a + x);
    let kernel = identity(db) - &sum;
    // Orthogonality defect of the X_j shows up as a non-projector remainder.
    let kdef = frob(&(&kernel * &kernel - &kernel));
    let kernel_proj = if kdef < 1e-6 { kernel.clone() } else { CMatrix::zeros(db, db) };
    if let Some(first) = xs.first_mut() {
        *first += &kernel_proj;
    }
    let mut v = CMatrix::zeros(da * db, db);
    for (j, x) in xs.iter().enumerate() {
        v += kron(&column(w, j), x);
    }
    let sigma = hermitize(&(v.adjoint() * rho * &v));
    let recon = &v * &sigma * v.adjoint();
    let residual = frob(&(rho - recon)) + kdef;
    Ok(MqWitness { basis_w: w.clone(), pvm_x: xs, sigma, residual })
}

/// Dephase the first party in basis `w` (columns).
pub fn dephase_first_party(rho: &DensityOperator, w: &CMatrix) -> Result<DensityOperator> {
    let (da, db) = rho.two_party()?;
    Ok(DensityOperator { mat: dephase_first(&rho.mat, w, da, db), dims: rho.dims.clone(), trace_mode: rho.trace_mode })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> DensityOperator {
        let mut v = CMatrix::zeros(4, 1);
        v[(0, 0)] = r(1.0);
        v[(3, 0)] = r(1.0);
        DensityOperator::from_ket(&v, &[2, 2]).unwrap()
    }

    #[test]
    fn constructor_checks() {
        let m = CMatrix::from_row_slice(2, 2, &[r(0.5), r(0.0), r(0.0), r(0.4)]);
        assert!(matches!(DensityOperator::new(m.clone(), &[2]), Err(Error::BadTrace(_))));
        assert!(DensityOperator::new_subnormalized(m, &[2]).is_ok());
        let neg = CMatrix::from_row_slice(2, 2, &[r(1.2), r(0.0), r(0.0), r(-0.2)]);
        assert!(matches!(DensityOperator::new(neg, &[2]), Err(Error::NotPsd(_))));
        let bad = CMatrix::from_row_slice(2, 2, &[r(0.5), r(0.3), r(0.0), r(0.5)]);
        assert!(matches!(DensityOperator::new(bad, &[2]), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn purification_reduces_back() {
        let mut rng = rng_from_seed(1);
        let rho = random_state(&[2, 3], 4, &mut rng);
        let psi = purify(&rho);
        assert_eq!(psi.dims, vec![2, 3, 4]);
        let back = psi.density().reduce(&[0, 1]).unwrap();
        assert!(linalg::max_abs_diff(&back.mat, &rho.mat) < 1e-12);
    }

    #[test]
    fn haar_unitary_is_unitary_and_seeded() {
        let u1 = random_unitary(4, &mut rng_from_seed(3));
        let u2 = random_unitary(4, &mut rng_from_seed(3));
        assert!(linalg::orthonormality_residual(&u1) < 1e-12);
        assert_eq!(u1, u2);
    }

    #[test]
    fn bell_is_mq_not_cq() {
        let b = bell();
        assert!(!is_cq(&b, CLASS_TOL).unwrap().member);
        let v = is_mq(&b, CLASS_TOL).unwrap();
        assert!(v.member);
        assert!(v.residual < 1e-10);
        assert!(!is_separable_small(&b, CLASS_TOL).unwrap().member);
    }

    #[test]
    fn maximally_mixed_two_qubits() {
        let m = DensityOperator::maximally_mixed(&[2, 2]);
        assert!(!is_mq(&m, CLASS_TOL).unwrap().member);
        assert!(is_cc(&m, CLASS_TOL).unwrap().member);
        assert!(is_separable_small(&m, CLASS_TOL).unwrap().member);
    }

    #[test]
    fn cq_witness_diagonalizes() {
        let mut rng = rng_from_seed(5);
        let u = random_unitary(3, &mut rng);
        let t0 = random_state(&[2], 2, &mut rng).mat;
        let t1 = random_state(&[2], 1, &mut rng).mat;
        let t2 = random_state(&[2], 2, &mut rng).mat;
        let mut m = CMatrix::zeros(6, 6);
        for (j, t) in [t0, t1, t2].iter().enumerate() {
            m += kron(&linalg::projector(&column(&u, j)), t) * r([0.2, 0.3, 0.5][j]);
        }
        let rho = DensityOperator::new(m, &[3, 2]).unwrap();
        let v = is_cq(&rho, CLASS_TOL).unwrap();
        assert!(v.member);
        if let Witness::Basis(w) = v.witness {
            let d = dephase_first_party(&rho, &w).unwrap();
            assert!(linalg::max_abs_diff(&d.mat, &rho.mat) < 1e-10);
        } else {
            panic!("expected basis witness");
        }
        assert!(!is_qc(&rho, CLASS_TOL).unwrap().member);
    }
}
