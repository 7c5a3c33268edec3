//! Premeasurement isometries, Naimark dilation, Fourier-conjugate bases and
//! the Petz recovery map for basis decoherence.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, basis_ket, c, column, eig_unchecked, frob, hermitize, identity, kron, partial_trace, r, CMatrix,
};
use crate::states::{self, DensityOperator, TraceMode};

const MEAS_TOL: f64 = 1e-8;
/// Default reconstruction tolerance for [`mus_reconstruct`].
pub const MUS_TOL: f64 = 1e-6;

/// Projective measurement: orthogonal projectors summing to the identity.
/// Zero elements are allowed.
#[derive(Debug, Clone)]
pub struct Pvm {
    pub elements: Vec<CMatrix>,
}

/// Positive operator-valued measure.
#[derive(Debug, Clone)]
pub struct Povm {
    pub elements: Vec<CMatrix>,
}

fn check_sum_to_identity(elements: &[CMatrix]) -> Result<usize> {
    let d = elements.first().map(|e| e.nrows()).ok_or_else(|| Error::InvalidMeasurement("no elements".into()))?;
    let mut sum = CMatrix::zeros(d, d);
    for e in elements {
        if e.nrows() != d || e.ncols() != d {
            return Err(Error::InvalidMeasurement("elements have different dimensions".into()));
        }
        if linalg::hermiticity_defect(e) > MEAS_TOL {
            return Err(Error::InvalidMeasurement("element is not Hermitian".into()));
        }
        sum += e;
    }
    let dev = frob(&(sum - identity(d)));
    if dev > MEAS_TOL {
        return Err(Error::InvalidMeasurement(format!("elements sum to identity only within {:.3e}", dev)));
    }
    Ok(d)
}

impl Pvm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        check_sum_to_identity(&elements)?;
        for (j, p) in elements.iter().enumerate() {
            if frob(&(p * p - p)) > MEAS_TOL {
                return Err(Error::InvalidMeasurement(format!("element {} is not a projector", j)));
            }
        }
        for j in 0..elements.len() {
            for k in (j + 1)..elements.len() {
                if frob(&(&elements[j] * &elements[k])) > MEAS_TOL {
                    return Err(Error::InvalidMeasurement(format!("elements {} and {} overlap", j, k)));
                }
            }
        }
        Ok(Pvm { elements: elements.into_iter().map(|e| hermitize(&e)).collect() })
    }

    /// Rank-one PVM from the columns of a unitary.
    pub fn from_basis(u: &CMatrix) -> Result<Self> {
        let res = linalg::orthonormality_residual(u);
        if !u.is_square() || res > MEAS_TOL {
            return Err(Error::NonOrthonormalBasis(res));
        }
        Ok(Pvm { elements: (0..u.ncols()).map(|k| linalg::projector(&column(u, k))).collect() })
    }

    pub fn computational(d: usize) -> Self {
        Pvm::from_basis(&identity(d)).expect("identity is a basis")
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_rank_one(&self) -> bool {
        self.elements.iter().all(|e| (e.trace().re - 1.0).abs() < 1e-8)
    }

    /// For a rank-one PVM, the basis vectors as columns.
    pub fn basis(&self) -> Option<CMatrix> {
        if !self.is_rank_one() {
            return None;
        }
        let d = self.dim();
        let mut u = CMatrix::zeros(d, d);
        for (k, e) in self.elements.iter().enumerate() {
            let v = eig_unchecked(e).vectors.column(0).into_owned();
            u.set_column(k, &v);
        }
        Some(u)
    }

    pub fn as_povm(&self) -> Povm {
        Povm { elements: self.elements.clone() }
    }
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        check_sum_to_identity(&elements)?;
        for (j, e) in elements.iter().enumerate() {
            let m = linalg::min_eig(e);
            if m < -MEAS_TOL {
                return Err(Error::InvalidMeasurement(format!("element {} is not PSD ({:.3e})", j, m)));
            }
        }
        Ok(Povm { elements: elements.into_iter().map(|e| hermitize(&e)).collect() })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_projective(&self) -> bool {
        self.elements.iter().all(|e| frob(&(e * e - e)) <= MEAS_TOL)
    }

    /// Qubit trine: (2/3)|φ_k⟩⟨φ_k| with Bloch vectors 120° apart in the x–z plane.
    pub fn trine() -> Self {
        let els = (0..3)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 3.0;
                let v = CMatrix::from_column_slice(2, 1, &[r((th / 2.0).cos()), r((th / 2.0).sin())]);
                linalg::projector(&v) * r(2.0 / 3.0)
            })
            .collect();
        Povm { elements: els }
    }
}

/// V = Σ_j |W_j⟩ ⊗ X_j together with its ingredients.
#[derive(Debug, Clone)]
pub struct PremeasurementIsometry {
    pub v: CMatrix,
    pub basis_w: CMatrix,
    pub pvm_x: Pvm,
}

impl PremeasurementIsometry {
    pub fn d_m(&self) -> usize {
        self.basis_w.nrows()
    }

    pub fn d_s(&self) -> usize {
        self.pvm_x.dim()
    }

    /// Projector VV† onto the range of the isometry.
    pub fn range_projector(&self) -> CMatrix {
        &self.v * self.v.adjoint()
    }
}

/// Premeasured state together with its generator.
#[derive(Debug, Clone)]
pub struct PremeasurementState {
    /// State on M ⊗ S with dims [d_M, d_S].
    pub state: DensityOperator,
    pub generator: PremeasurementIsometry,
    pub sigma_s: DensityOperator,
}

pub fn build_isometry(w: &CMatrix, x: &Pvm) -> Result<PremeasurementIsometry> {
    if w.ncols() != x.len() || !w.is_square() {
        return Err(Error::SizeMismatch(format!("basis has {} vectors but PVM has {} elements", w.ncols(), x.len())));
    }
    let res = linalg::orthonormality_residual(w);
    if res > MEAS_TOL {
        return Err(Error::NonOrthonormalBasis(res));
    }
    let ds = x.dim();
    let dm = w.nrows();
    let mut v = CMatrix::zeros(dm * ds, ds);
    for (j, xj) in x.elements.iter().enumerate() {
        v += kron(&column(w, j), xj);
    }
    Ok(PremeasurementIsometry { v, basis_w: w.clone(), pvm_x: x.clone() })
}

/// Standard register basis with the given PVM.
pub fn standard_isometry(x: &Pvm) -> PremeasurementIsometry {
    build_isometry(&identity(x.len()), x).expect("standard basis matches PVM size")
}

pub fn premeasure(rho_s: &DensityOperator, iso: &PremeasurementIsometry) -> Result<PremeasurementState> {
    let ds = iso.d_s();
    if rho_s.dim() != ds {
        return Err(Error::DimMismatch(format!("state has dim {} but PVM acts on dim {}", rho_s.dim(), ds)));
    }
    let m = hermitize(&(&iso.v * &rho_s.mat * iso.v.adjoint()));
    let state = DensityOperator { mat: m, dims: vec![iso.d_m(), ds], trace_mode: rho_s.trace_mode };
    let sigma = DensityOperator { mat: rho_s.mat.clone(), dims: vec![ds], trace_mode: rho_s.trace_mode };
    Ok(PremeasurementState { state, generator: iso.clone(), sigma_s: sigma })
}

/// Premeasure factor `k` of a multipartite state; the register is inserted
/// immediately before that factor.
pub fn premeasure_factor(rho: &DensityOperator, k: usize, iso: &PremeasurementIsometry) -> Result<DensityOperator> {
    if k >= rho.dims.len() || rho.dims[k] != iso.d_s() {
        return Err(Error::DimMismatch(format!("factor {} of {:?} does not match PVM dim {}", k, rho.dims, iso.d_s())));
    }
    let left: usize = rho.dims[..k].iter().product();
    let right: usize = rho.dims[k + 1..].iter().product();
    let big = kron(&kron(&identity(left), &iso.v), &identity(right));
    let m = hermitize(&(&big * &rho.mat * big.adjoint()));
    let mut dims = rho.dims[..k].to_vec();
    dims.push(iso.d_m());
    dims.extend_from_slice(&rho.dims[k..]);
    Ok(DensityOperator { mat: m, dims, trace_mode: rho.trace_mode })
}

/// Minimal Naimark dilation: ι = Σ_k Σ_i |k,i⟩ √λ_{ki} ⟨e_{ki}| with extended
/// dimension Σ_k rank(E_k). A projective input maps to the identity embedding.
pub fn naimark_extend(povm: &Povm) -> (Pvm, CMatrix) {
    let d = povm.dim();
    if povm.is_projective() {
        return (Pvm { elements: povm.elements.clone() }, identity(d));
    }
    let mut rows: Vec<(usize, CMatrix)> = Vec::new();
    for (k, e) in povm.elements.iter().enumerate() {
        let eg = eig_unchecked(e);
        for i in 0..eg.rank() {
            let v = column(&eg.vectors, i);
            rows.push((k, v.adjoint() * r(eg.values[i].sqrt())));
        }
    }
    let big = rows.len();
    let mut iota = CMatrix::zeros(big, d);
    for (row, (_, v)) in rows.iter().enumerate() {
        iota.set_row(row, &v.row(0));
    }
    let mut elements = vec![CMatrix::zeros(big, big); povm.len()];
    for (row, (k, _)) in rows.iter().enumerate() {
        elements[*k][(row, row)] = r(1.0);
    }
    (Pvm { elements }, iota)
}

/// |Z_k⟩ = Σ_j ω^{jk}/√d |W_j⟩, ω = e^{2πi/d}.
pub fn fourier_basis(w: &CMatrix) -> CMatrix {
    let d = w.ncols();
    let mut z = CMatrix::zeros(w.nrows(), d);
    let s = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        for j in 0..d {
            let ph = c(0.0, 2.0 * PI * ((j * k) % d) as f64 / d as f64).exp() * s;
            for i in 0..w.nrows() {
                z[(i, k)] += w[(i, j)] * ph;
            }
        }
    }
    z
}

/// Which party of a bipartite state is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// τ_j = Tr_meas[(P_j ⊗ 1) ρ] for projectors/effects on the measured side.
pub fn conditional_operators(rho: &DensityOperator, effects: &[CMatrix], side: Side) -> Result<Vec<CMatrix>> {
    let (da, db) = rho.two_party()?;
    let (dm, keep) = match side {
        Side::A => (da, 1),
        Side::B => (db, 0),
    };
    effects
        .iter()
        .map(|p| {
            if p.nrows() != dm {
                return Err(Error::DimMismatch(format!("effect dim {} vs measured side dim {}", p.nrows(), dm)));
            }
            let big = match side {
                Side::A => kron(p, &identity(db)),
                Side::B => kron(&identity(da), p),
            };
            Ok(hermitize(&partial_trace(&(&big * &rho.mat), &[da, db], &[keep])?))
        })
        .collect()
}

pub fn basis_projectors(w: &CMatrix) -> Vec<CMatrix> {
    (0..w.ncols()).map(|k| linalg::projector(&column(w, k))).collect()
}

/// Decoherence of the first factor in basis `z` (columns).
pub fn decohere(m: &CMatrix, z: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * db, da * db);
    for k in 0..z.ncols() {
        let p = kron(&linalg::projector(&column(z, k)), &identity(db));
        out += &p * m * &p;
    }
    out
}

/// Petz recovery map of σ for the channel decohering the first factor in basis Z:
/// X ↦ √σ E(E(σ)^{-1/2} X E(σ)^{-1/2}) √σ.
#[derive(Debug, Clone)]
pub struct PetzMap {
    sqrt_sigma: CMatrix,
    e_sigma_inv_sqrt: CMatrix,
    support: CMatrix,
    z: CMatrix,
    da: usize,
    db: usize,
}

pub fn petz_map(sigma: &CMatrix, z: &CMatrix, dims: (usize, usize)) -> Result<PetzMap> {
    let (da, db) = dims;
    if sigma.nrows() != da * db || z.nrows() != da {
        return Err(Error::DimMismatch("sigma / basis dimensions".into()));
    }
    let min = linalg::min_eig(sigma);
    if min < -1e-9 {
        return Err(Error::NotPsd(min));
    }
    let es = decohere(sigma, z, da, db);
    let eg = eig_unchecked(&hermitize(&es));
    Ok(PetzMap {
        sqrt_sigma: linalg::psd_sqrt(sigma),
        e_sigma_inv_sqrt: eg.apply(|x| 1.0 / x.sqrt(), true),
        support: eg.support_projector(),
        z: z.clone(),
        da,
        db,
    })
}

impl PetzMap {
    pub fn channel(&self, x: &CMatrix) -> CMatrix {
        decohere(x, &self.z, self.da, self.db)
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let outside = frob(&(x - &self.support * x * &self.support));
        if outside > linalg::SUPPORT_CUTOFF * frob(x).max(1e-300) * 1e3 {
            return Err(Error::Support(format!("input leaves the support of E(σ) by {:.3e}", outside)));
        }
        let inner = &self.e_sigma_inv_sqrt * x * &self.e_sigma_inv_sqrt;
        Ok(hermitize(&(&self.sqrt_sigma * self.channel(&inner) * &self.sqrt_sigma)))
    }
}

/// Closed-form MUS reconstruction in basis W:
/// Σ_{j,j′,k} ω^{(j−j′)k} |W_j⟩⟨W_{j′}| ⊗ √τ_j ρ_B^{-1/2} τ^Z_k ρ_B^{-1/2} √τ_{j′}.
/// Fails with `NotMus` when the result differs from ρ_AB by more than `tol`.
pub fn mus_reconstruct(rho: &DensityOperator, w: &CMatrix, tol: f64) -> Result<DensityOperator> {
    let (da, db) = rho.two_party()?;
    if w.ncols() != da || w.nrows() != da {
        return Err(Error::SizeMismatch(format!("basis size {} for register dim {}", w.ncols(), da)));
    }
    let res = linalg::orthonormality_residual(w);
    if res > MEAS_TOL {
        return Err(Error::NonOrthonormalBasis(res));
    }
    let m = reconstruct_raw(rho, w, da, db)?;
    let resid = frob(&(&m - &rho.mat));
    if resid > tol {
        return Err(Error::NotMus(resid));
    }
    Ok(DensityOperator { mat: m, dims: rho.dims.clone(), trace_mode: rho.trace_mode })
}

fn reconstruct_raw(rho: &DensityOperator, w: &CMatrix, da: usize, db: usize) -> Result<CMatrix> {
    let z = fourier_basis(w);
    let tw = conditional_operators(rho, &basis_projectors(w), Side::A)?;
    let tz = conditional_operators(rho, &basis_projectors(&z), Side::A)?;
    let rho_b = partial_trace(&rho.mat, &[da, db], &[1])?;
    let rb_is = linalg::psd_inv_sqrt(&rho_b);
    let sq: Vec<CMatrix> = tw.iter().map(linalg::psd_sqrt).collect();
    let mid: Vec<CMatrix> = tz.iter().map(|t| &rb_is * t * &rb_is).collect();
    let mut out = CMatrix::zeros(da * db, da * db);
    for j in 0..da {
        for jp in 0..da {
            let mut blk = CMatrix::zeros(db, db);
            for (k, mk) in mid.iter().enumerate() {
                let ph = c(0.0, 2.0 * PI * ((j + da - jp) * k % da) as f64 / da as f64).exp();
                blk += mk * ph;
            }
            let blk = &sq[j] * blk * &sq[jp];
            let wj = column(w, j);
            let wjp = column(w, jp);
            out += kron(&(&wj * wjp.adjoint()), &blk);
        }
    }
    Ok(hermitize(&out))
}

/// Random PVM on dimension d with the given ranks (Haar-random eigenbasis).
pub fn random_pvm<R: Rng + ?Sized>(d: usize, ranks: &[usize], rng: &mut R) -> Result<Pvm> {
    if ranks.iter().sum::<usize>() != d {
        return Err(Error::SizeMismatch(format!("ranks {:?} do not sum to {}", ranks, d)));
    }
    let u = states::random_unitary(d, rng);
    let mut start = 0;
    let mut elements = Vec::with_capacity(ranks.len());
    for &k in ranks {
        let mut p = CMatrix::zeros(d, d);
        for i in start..start + k {
            p += linalg::projector(&column(&u, i));
        }
        start += k;
        elements.push(p);
    }
    Ok(Pvm { elements })
}

pub fn random_basis_pvm<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Pvm {
    random_pvm(d, &vec![1; d], rng).expect("ranks sum to d")
}

/// Random premeasurement state: Ginibre ρ_S of the given rank, Haar PVM with
/// the given ranks, standard register basis.
pub fn random_premeasurement<R: Rng + ?Sized>(
    d_s: usize,
    ranks: &[usize],
    state_rank: usize,
    rng: &mut R,
) -> Result<PremeasurementState> {
    let rho = states::random_state(&[d_s], state_rank, rng);
    let x = random_pvm(d_s, ranks, rng)?;
    premeasure(&rho, &standard_isometry(&x))
}

/// Pure single-system state |k⟩.
pub fn ket_state(d: usize, k: usize) -> DensityOperator {
    let v = basis_ket(d, k);
    DensityOperator { mat: &v * v.adjoint(), dims: vec![d], trace_mode: TraceMode::Normalized }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::rng_from_seed;

    fn x_basis() -> CMatrix {
        fourier_basis(&identity(2))
    }

    #[test]
    fn cnot_isometry_for_z() {
        let iso = standard_isometry(&Pvm::computational(2));
        assert!(linalg::orthonormality_residual(&iso.v) < 1e-14);
        // |0⟩ ↦ |00⟩, |1⟩ ↦ |11⟩
        assert!((iso.v[(0, 0)] - r(1.0)).norm() < 1e-15);
        assert!((iso.v[(3, 1)] - r(1.0)).norm() < 1e-15);
    }

    #[test]
    fn single_projector_is_trivial() {
        let x = Pvm::new(vec![identity(2)]).unwrap();
        let iso = build_isometry(&identity(1), &x).unwrap();
        assert!(linalg::max_abs_diff(&iso.v, &identity(2)) < 1e-15);
    }

    #[test]
    fn size_and_basis_errors() {
        let x = Pvm::computational(2);
        assert!(matches!(build_isometry(&identity(3), &x), Err(Error::SizeMismatch(_))));
        let bad = CMatrix::from_row_slice(2, 2, &[r(1.0), r(1.0), r(0.0), r(1.0)]);
        assert!(matches!(build_isometry(&bad, &x), Err(Error::NonOrthonormalBasis(_))));
    }

    #[test]
    fn qutrit_rank_two_one_isometry() {
        let mut rng = rng_from_seed(11);
        let x = random_pvm(3, &[2, 1], &mut rng).unwrap();
        let iso = standard_isometry(&x);
        assert!(linalg::orthonormality_residual(&iso.v) < 1e-12);
    }

    #[test]
    fn intro_example_states() {
        let zero = ket_state(2, 0);
        let z = premeasure(&zero, &standard_isometry(&Pvm::computational(2))).unwrap();
        let expect = ket_state(4, 0);
        assert!(linalg::max_abs_diff(&z.state.mat, &expect.mat) < 1e-15);
        let xs = premeasure(&zero, &standard_isometry(&Pvm::from_basis(&x_basis()).unwrap())).unwrap();
        // (|0,+⟩ + |1,−⟩)/√2 ... maximally entangled: reduced state is I/2.
        let red = xs.state.reduce(&[0]).unwrap();
        assert!(linalg::max_abs_diff(&red.mat, &(identity(2) * r(0.5))) < 1e-14);
        assert!((xs.state.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trine_dilation_is_minimal() {
        let t = Povm::trine();
        let (pvm, iota) = naimark_extend(&t);
        assert_eq!(pvm.dim(), 3);
        for (k, e) in t.elements.iter().enumerate() {
            let back = iota.adjoint() * &pvm.elements[k] * &iota;
            assert!(frob(&(back - e)) < 1e-10);
        }
        assert!(linalg::orthonormality_residual(&iota) < 1e-12);
    }

    #[test]
    fn projective_povm_dilates_to_itself() {
        let p = Pvm::computational(3).as_povm();
        let (pvm, iota) = naimark_extend(&p);
        assert!(linalg::max_abs_diff(&iota, &identity(3)) < 1e-15);
        assert_eq!(pvm.len(), 3);
        let single = Povm::new(vec![identity(2)]).unwrap();
        let (pvm, iota) = naimark_extend(&single);
        assert_eq!(pvm.len(), 1);
        assert!(linalg::max_abs_diff(&iota, &identity(2)) < 1e-15);
    }

    #[test]
    fn fourier_twice_reverses_indices() {
        let mut rng = rng_from_seed(4);
        let w = states::random_unitary(3, &mut rng);
        let zz = fourier_basis(&fourier_basis(&w));
        for j in 0..3 {
            let target = column(&w, (3 - j) % 3);
            assert!(frob(&(column(&zz, j) - target)) < 1e-12);
        }
        let z = fourier_basis(&w);
        let ov = w.adjoint() * z;
        for x in ov.iter() {
            assert!((x.norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mus_reconstruction_of_bell_state() {
        let v = (basis_ket(4, 0) + basis_ket(4, 3)) / r(2f64.sqrt());
        let bell = DensityOperator::from_ket(&v, &[2, 2]).unwrap();
        let out = mus_reconstruct(&bell, &identity(2), MUS_TOL).unwrap();
        assert!(frob(&(out.mat - bell.mat)) < 1e-12);
    }

    #[test]
    fn generic_state_is_not_mus() {
        let mut rng = rng_from_seed(8);
        let rho = states::random_state(&[2, 2], 4, &mut rng);
        assert!(matches!(mus_reconstruct(&rho, &identity(2), MUS_TOL), Err(Error::NotMus(_))));
    }

    #[test]
    fn petz_recovers_sigma() {
        let mut rng = rng_from_seed(9);
        let sigma = states::random_state(&[2], 2, &mut rng).mat;
        let z = x_basis();
        let p = petz_map(&sigma, &z, (2, 1)).unwrap();
        let back = p.apply(&p.channel(&sigma)).unwrap();
        assert!(frob(&(back - sigma)) < 1e-10);
        let mixed = identity(2) * r(0.5);
        let p = petz_map(&mixed, &z, (2, 1)).unwrap();
        let x = states::random_state(&[2], 2, &mut rng).mat;
        // For σ = I/d the recovery is the decoherence channel itself.
        assert!(frob(&(p.apply(&x).unwrap() - p.channel(&x))) < 1e-12);
    }

    #[test]
    fn petz_rejects_input_outside_support() {
        let sigma = ket_state(2, 0).mat;
        let p = petz_map(&sigma, &identity(2), (2, 1)).unwrap();
        let outside = ket_state(2, 1).mat;
        assert!(matches!(p.apply(&outside), Err(Error::Support(_))));
    }
}
