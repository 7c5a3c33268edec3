//! Conditional entropies H_K(A|B) = max_σ −D_K(ρ_AB ‖ 1_A ⊗ σ_B), their dual
//! pairs, and entropies of measured observables given quantum memory.

use serde::Serialize;

use crate::divergence::{div, DivergenceKind, ExtReal};
use crate::error::{Error, Result};
use crate::linalg::{self, eig_unchecked, hermitize, identity, kron, r, CMatrix};
use crate::optimize::{multistart, OptimizerDiag, SearchOptions};
use crate::premeasurement::{premeasure_factor, standard_isometry, Pvm};
use crate::sdp::{ComplexVar, HermVar, Lmi};
use crate::states::{DensityOperator, TraceMode};

/// Which party is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    /// H(A|B).
    OnSecond,
    /// H(B|A).
    OnFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Sdp,
    ParametrizedSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Closed form where one exists, otherwise the SDP.
    Auto,
    /// Multistart Nelder–Mead over σ = LL†/Tr(LL†).
    Search,
}

#[derive(Debug, Clone, Copy)]
pub struct EntropyOptions {
    pub route: Route,
    pub starts: usize,
    pub seed: u64,
    pub search: SearchOptions,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions { route: Route::Auto, starts: 8, seed: 0, search: SearchOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SdpDiag {
    pub objective: f64,
    pub bound: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CondEntropyResult {
    /// Bits; equals −D_K(ρ ‖ 1 ⊗ optimal_sigma) evaluated afresh.
    pub value: f64,
    /// Certified upper bound on the optimum: the value itself for closed
    /// forms, the dual bound for SDPs, absent for the search route.
    pub bound: Option<f64>,
    pub optimal_sigma: DensityOperator,
    pub method: Method,
    pub optimizer: Option<OptimizerDiag>,
    pub sdp: Option<SdpDiag>,
    pub converged: bool,
}

pub(crate) fn sdp_diag(s: &crate::sdp::SdpSolution) -> SdpDiag {
    SdpDiag { objective: s.objective, bound: s.bound, rel_gap: s.rel_gap, iterations: s.iterations, converged: s.converged }
}

/// Clip tiny negative eigenvalues and rescale to unit trace.
pub(crate) fn normalize_state(m: &CMatrix) -> CMatrix {
    let e = eig_unchecked(&hermitize(m));
    let p = e.apply(|x| x.max(0.0), false);
    let t = p.trace().re;
    if t > 0.0 {
        p / r(t)
    } else {
        identity(m.nrows()) / r(m.nrows() as f64)
    }
}

fn neg_div(kind: DivergenceKind, rho: &CMatrix, da: usize, sigma: &CMatrix) -> Result<f64> {
    Ok(match div(kind, rho, &kron(&identity(da), sigma))? {
        ExtReal::Finite(v) => -v,
        ExtReal::PosInf => f64::NEG_INFINITY,
    })
}

fn check_operator(rho: &CMatrix, da: usize, db: usize) -> Result<()> {
    if rho.nrows() != da * db || !rho.is_square() {
        return Err(Error::DimMismatch(format!("operator is {}x{} but dims are {}x{}", rho.nrows(), rho.ncols(), da, db)));
    }
    linalg::herm_eig(rho)?;
    if linalg::frob(rho) == 0.0 {
        return Err(Error::ZeroOperator);
    }
    Ok(())
}

/// H_min(A|B) = −log min{Tr σ̃ : 1 ⊗ σ̃ ⪰ ρ}. Returns (value, σ̃).
pub(crate) fn hmin_sdp(rho: &CMatrix, da: usize, db: usize) -> Result<(CMatrix, crate::sdp::SdpSolution)> {
    let mut lmi = Lmi::new();
    let b = lmi.add_block(da * db);
    let s = HermVar::new(&mut lmi, db, |e| -linalg::tr_re(e));
    lmi.add_const(b, 0, &(-hermitize(rho)));
    s.add_mapped(&mut lmi, b, 0, |e| kron(&identity(da), e));
    let sol = lmi.solve()?;
    Ok((hermitize(&s.value(&sol.y)), sol))
}

/// Traceless Hermitian basis of dimension d: off-diagonal generators and E_kk − 1/d.
pub(crate) fn traceless_basis(d: usize) -> Vec<CMatrix> {
    let id = identity(d) / r(d as f64);
    linalg::hermitian_basis(d)
        .into_iter()
        .enumerate()
        .filter_map(|(k, e)| {
            if k < d {
                if k + 1 < d {
                    Some(e - &id)
                } else {
                    None
                }
            } else {
                Some(e)
            }
        })
        .collect()
}

/// max_σ F(ρ, 1 ⊗ σ) over normalized σ, by the standard fidelity LMI with ρ
/// compressed onto its support. Returns (σ, F-solution).
pub(crate) fn max_fidelity_sdp(rho: &CMatrix, da: usize, db: usize) -> Result<(CMatrix, crate::sdp::SdpSolution)> {
    let e = eig_unchecked(&hermitize(rho));
    let bmat = e.support_basis();
    let rk = bmat.ncols();
    let rho_s = hermitize(&(bmat.adjoint() * rho * &bmat));
    let id_a = identity(da);
    let compress = |t: &CMatrix| hermitize(&(bmat.adjoint() * kron(&id_a, t) * &bmat));
    let mut lmi = Lmi::new();
    let b0 = lmi.add_block(2 * rk);
    let b1 = lmi.add_block(db);
    let x = ComplexVar::new(&mut lmi, rk, rk, |i, j| if i == j { 1.0 } else { 0.0 });
    x.place(&mut lmi, b0, 0, rk);
    lmi.add_const(b0, 0, &rho_s);
    let center = identity(db) / r(db as f64);
    lmi.add_const(b0, rk, &compress(&center));
    lmi.add_const(b1, 0, &center);
    let basis = traceless_basis(db);
    let mut vars = Vec::with_capacity(basis.len());
    for t in &basis {
        let v = lmi.add_var(0.0);
        lmi.add_term(v, b0, rk, &compress(t));
        lmi.add_term(v, b1, 0, t);
        vars.push(v);
    }
    let sol = lmi.solve()?;
    let mut sigma = center;
    for (t, &v) in basis.iter().zip(&vars) {
        sigma += t * r(sol.y[v]);
    }
    Ok((normalize_state(&sigma), sol))
}

fn sigma_from_cholesky(d: usize, p: &[f64]) -> CMatrix {
    let mut l = CMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        l[(i, i)] = r(p[i]);
        for j in 0..i {
            l[(i, j)] = linalg::c(p[k], p[k + 1]);
            k += 2;
        }
    }
    let s = &l * l.adjoint();
    let t = s.trace().re.max(1e-300);
    s / r(t)
}

fn cholesky_params(sigma: &CMatrix) -> Vec<f64> {
    let d = sigma.nrows();
    let reg = hermitize(sigma) + identity(d) * r(1e-3);
    let l = nalgebra::Cholesky::new(reg).map(|c| c.l()).unwrap_or_else(|| identity(d));
    let mut p = Vec::with_capacity(d * d);
    for i in 0..d {
        p.push(l[(i, i)].re);
    }
    for i in 0..d {
        for j in 0..i {
            p.push(l[(i, j)].re);
            p.push(l[(i, j)].im);
        }
    }
    p
}

fn search_route(kind: DivergenceKind, rho: &CMatrix, da: usize, db: usize, opts: &EntropyOptions) -> Result<CondEntropyResult> {
    let rho_b = linalg::partial_trace(rho, &[da, db], &[1])?;
    let seed = cholesky_params(&normalize_state(&rho_b));
    let mixed = cholesky_params(&(identity(db) / r(db as f64)));
    let f = |p: &[f64]| {
        let s = sigma_from_cholesky(db, p);
        match div(kind, rho, &kron(&identity(da), &s)) {
            Ok(ExtReal::Finite(v)) => v,
            _ => 1e6,
        }
    };
    let random = opts.starts.saturating_sub(2);
    let res = multistart(&f, &[seed, mixed], db * db, random, 1.0, opts.seed, &opts.search)?;
    let sigma = sigma_from_cholesky(db, &res.x);
    let value = neg_div(kind, rho, da, &sigma)?;
    let converged = res.diag.converged;
    Ok(CondEntropyResult {
        value,
        bound: None,
        optimal_sigma: DensityOperator { mat: sigma, dims: vec![db], trace_mode: TraceMode::Normalized },
        method: Method::ParametrizedSearch,
        optimizer: Some(res.diag),
        sdp: None,
        converged,
    })
}

/// H_K(A|B) for an operator on C^{da} ⊗ C^{db} (subnormalized allowed).
pub fn cond_entropy_mat(kind: DivergenceKind, rho: &CMatrix, da: usize, db: usize, opts: &EntropyOptions) -> Result<CondEntropyResult> {
    kind.validate()?;
    check_operator(rho, da, db)?;
    if opts.route == Route::Search {
        return search_route(kind, rho, da, db, opts);
    }
    let wrap = |sigma: CMatrix, value: f64, bound: f64, method: Method, sdp: Option<SdpDiag>| {
        let converged = sdp.map(|s| s.converged).unwrap_or(true);
        CondEntropyResult {
            value,
            bound: Some(bound),
            optimal_sigma: DensityOperator { mat: sigma, dims: vec![db], trace_mode: TraceMode::Normalized },
            method,
            optimizer: None,
            sdp,
            converged,
        }
    };
    match kind {
        DivergenceKind::VonNeumann => {
            let rho_b = linalg::partial_trace(rho, &[da, db], &[1])?;
            let t = rho_b.trace().re;
            let value = linalg::vn_entropy_of(rho) - linalg::vn_entropy_of(&rho_b) - t * t.log2();
            Ok(wrap(normalize_state(&rho_b), value, value, Method::ClosedForm, None))
        }
        DivergenceKind::Renyi(a) => {
            // Optimal σ ∝ (Tr_A ρ^α)^{1/α}.
            let pa = eig_unchecked(&hermitize(rho)).apply(|x| x.max(0.0).powf(a), true);
            let x = hermitize(&linalg::partial_trace(&pa, &[da, db], &[1])?);
            let xe = eig_unchecked(&x);
            let cut = xe.cutoff();
            let s: f64 = xe.values.iter().filter(|&&v| v > cut).map(|v| v.powf(1.0 / a)).sum();
            let value = a / (1.0 - a) * s.log2();
            let sigma = normalize_state(&xe.apply(|v| v.max(0.0).powf(1.0 / a), true));
            Ok(wrap(sigma, value, value, Method::ClosedForm, None))
        }
        DivergenceKind::Dmax => {
            let (st, sol) = hmin_sdp(rho, da, db)?;
            let sigma = normalize_state(&st);
            let value = neg_div(kind, rho, da, &sigma)?;
            // The dual bound caps max −Tr σ̃, hence H_min ≤ −log(−bound).
            let bound = if sol.bound < 0.0 { -(-sol.bound).log2() } else { f64::INFINITY };
            Ok(wrap(sigma, value, bound, Method::Sdp, Some(sdp_diag(&sol))))
        }
        DivergenceKind::Dfid => {
            let (sigma, sol) = max_fidelity_sdp(rho, da, db)?;
            let value = neg_div(kind, rho, da, &sigma)?;
            let bound = 2.0 * sol.bound.max(0.0).log2();
            Ok(wrap(sigma, value, bound, Method::Sdp, Some(sdp_diag(&sol))))
        }
    }
}

fn oriented(rho: &DensityOperator, cut: Cut) -> Result<(CMatrix, usize, usize)> {
    let (da, db) = rho.two_party()?;
    match cut {
        Cut::OnSecond => Ok((rho.mat.clone(), da, db)),
        Cut::OnFirst => Ok((linalg::permute_subsystems(&rho.mat, &[da, db], &[1, 0])?, db, da)),
    }
}

pub fn cond_entropy(kind: DivergenceKind, rho: &DensityOperator, cut: Cut) -> Result<CondEntropyResult> {
    cond_entropy_with(kind, rho, cut, &EntropyOptions::default())
}

pub fn cond_entropy_with(kind: DivergenceKind, rho: &DensityOperator, cut: Cut, opts: &EntropyOptions) -> Result<CondEntropyResult> {
    let (m, da, db) = oriented(rho, cut)?;
    cond_entropy_mat(kind, &m, da, db, opts)
}

/// Dual pairs: von Neumann with itself, min-entropy with max-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualPair {
    VonNeumann,
    MinMax,
}

pub const PURITY_TOL: f64 = 1e-10;

/// |H_K(A|B) + H_K̂(A|C)| for a pure tripartite state.
pub fn dual_entropy_check(pair: DualPair, rho_abc: &DensityOperator) -> Result<f64> {
    if rho_abc.dims.len() != 3 {
        return Err(Error::DimMismatch(format!("expected three subsystems, got {:?}", rho_abc.dims)));
    }
    if !rho_abc.is_pure(PURITY_TOL) {
        let t = rho_abc.trace();
        return Err(Error::NotPure(t * t - rho_abc.purity()));
    }
    let ab = rho_abc.reduce(&[0, 1])?;
    let ac = rho_abc.reduce(&[0, 2])?;
    let (k1, k2) = match pair {
        DualPair::VonNeumann => (DivergenceKind::VonNeumann, DivergenceKind::VonNeumann),
        DualPair::MinMax => (DivergenceKind::Dmax, DivergenceKind::Dfid),
    };
    let h1 = cond_entropy(k1, &ab, Cut::OnSecond)?.value;
    let h2 = cond_entropy(k2, &ac, Cut::OnSecond)?.value;
    Ok((h1 + h2).abs())
}

/// Premeasure the first factor of ρ_SE in the PVM's outcome register and
/// return H_K(M_X|E) after discarding S.
pub fn uncertainty_given_memory(rho_se: &DensityOperator, x: &Pvm, kind: DivergenceKind) -> Result<CondEntropyResult> {
    let (ds, _) = rho_se.two_party()?;
    if x.dim() != ds {
        return Err(Error::DimMismatch(format!("PVM acts on dimension {} but S has {}", x.dim(), ds)));
    }
    let pre = premeasure_factor(rho_se, 0, &standard_isometry(x))?;
    let me = pre.reduce(&[0, 2])?;
    cond_entropy(kind, &me, Cut::OnSecond)
}

/// Cq-state Σ_j |j⟩⟨j| ⊗ Tr_S((X_j ⊗ 1) ρ_SE), equal to the premeasured state with S traced out.
pub fn measured_cq(rho_se: &DensityOperator, x: &Pvm) -> Result<DensityOperator> {
    let (ds, de) = rho_se.two_party()?;
    let n = x.len();
    let mut m = CMatrix::zeros(n * de, n * de);
    for (j, xj) in x.elements.iter().enumerate() {
        let blk = linalg::partial_trace(&(kron(xj, &identity(de)) * &rho_se.mat), &[ds, de], &[1])?;
        let pj = linalg::projector(&linalg::basis_ket(n, j));
        m += kron(&pj, &hermitize(&blk));
    }
    Ok(DensityOperator { mat: m, dims: vec![n, de], trace_mode: rho_se.trace_mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::premeasurement::{fourier_basis, ket_state};
    use crate::states::{random_pure, random_state, rng_from_seed};

    fn bell() -> DensityOperator {
        let s = 0.5f64.sqrt();
        let ket = CMatrix::from_column_slice(4, 1, &[r(s), r(0.0), r(0.0), r(s)]);
        DensityOperator::from_ket(&ket, &[2, 2]).unwrap()
    }

    #[test]
    fn bell_state_values() {
        let b = bell();
        for k in [DivergenceKind::VonNeumann, DivergenceKind::Dmax, DivergenceKind::Dfid, DivergenceKind::Renyi(0.5)] {
            let h = cond_entropy(k, &b, Cut::OnSecond).unwrap();
            assert!((h.value + 1.0).abs() < 1e-7, "{}: {}", k, h.value);
        }
    }

    #[test]
    fn classical_copy_has_zero_entropy() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = r(0.5);
        m[(3, 3)] = r(0.5);
        let rho = DensityOperator::new(m, &[2, 2]).unwrap();
        for k in DivergenceKind::all_standard() {
            let h = cond_entropy(k, &rho, Cut::OnSecond).unwrap();
            assert!(h.value.abs() < 1e-7, "{}: {}", k, h.value);
        }
    }

    #[test]
    fn product_of_mixed_qubits() {
        let rho = DensityOperator::maximally_mixed(&[2, 2]);
        let h = cond_entropy(DivergenceKind::VonNeumann, &rho, Cut::OnSecond).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordering_min_vn_max() {
        let mut rng = rng_from_seed(11);
        for _ in 0..6 {
            let rho = random_state(&[2, 3], 3, &mut rng);
            let hmin = cond_entropy(DivergenceKind::Dmax, &rho, Cut::OnSecond).unwrap().value;
            let h = cond_entropy(DivergenceKind::VonNeumann, &rho, Cut::OnSecond).unwrap().value;
            let hmax = cond_entropy(DivergenceKind::Dfid, &rho, Cut::OnSecond).unwrap().value;
            assert!(hmin <= h + 1e-7 && h <= hmax + 1e-7, "{} {} {}", hmin, h, hmax);
        }
    }

    #[test]
    fn sdp_and_search_agree() {
        let mut rng = rng_from_seed(12);
        let rho = random_state(&[2, 2], 2, &mut rng);
        let opts = EntropyOptions { route: Route::Search, starts: 4, ..Default::default() };
        for k in [DivergenceKind::Dmax, DivergenceKind::Dfid, DivergenceKind::Renyi(1.5), DivergenceKind::VonNeumann] {
            let a = cond_entropy(k, &rho, Cut::OnSecond).unwrap().value;
            let b = cond_entropy_with(k, &rho, Cut::OnSecond, &opts).unwrap().value;
            // The search is a feasible point, so it can only fall short.
            assert!(b <= a + 1e-7, "{}: {} vs {}", k, a, b);
            assert!(a - b < 1e-5, "{}: {} vs {}", k, a, b);
        }
    }

    #[test]
    fn duality_on_random_pure_states() {
        let mut rng = rng_from_seed(13);
        for _ in 0..3 {
            let psi = random_pure(&[2, 2, 2], &mut rng).density();
            assert!(dual_entropy_check(DualPair::VonNeumann, &psi).unwrap() < 1e-8);
            assert!(dual_entropy_check(DualPair::MinMax, &psi).unwrap() < 1e-6);
        }
        let mixed = DensityOperator::maximally_mixed(&[2, 2, 2]);
        assert!(matches!(dual_entropy_check(DualPair::VonNeumann, &mixed), Err(Error::NotPure(_))));
    }

    #[test]
    fn memoryless_observable_entropies() {
        let z0 = ket_state(2, 0).tensor(&DensityOperator::maximally_mixed(&[1]));
        let zpvm = Pvm::computational(2);
        let xpvm = Pvm::from_basis(&fourier_basis(&identity(2))).unwrap();
        let hz = uncertainty_given_memory(&z0, &zpvm, DivergenceKind::VonNeumann).unwrap().value;
        let hx = uncertainty_given_memory(&z0, &xpvm, DivergenceKind::VonNeumann).unwrap().value;
        assert!(hz.abs() < 1e-12 && (hx - 1.0).abs() < 1e-12);
        let y = Pvm::from_basis(&CMatrix::from_row_slice(2, 2, &[r(0.5f64.sqrt()), r(0.5f64.sqrt()), c(0.0, 0.5f64.sqrt()), c(0.0, -(0.5f64.sqrt()))])).unwrap();
        let hy = uncertainty_given_memory(&bell(), &y, DivergenceKind::VonNeumann).unwrap().value;
        assert!(hy.abs() < 1e-10);
    }

    #[test]
    fn result_matches_fresh_divergence() {
        let mut rng = rng_from_seed(14);
        let rho = random_state(&[2, 2], 4, &mut rng);
        for k in DivergenceKind::all_standard() {
            let h = cond_entropy(k, &rho, Cut::OnFirst).unwrap();
            let (m, da, _) = oriented(&rho, Cut::OnFirst).unwrap();
            let fresh = neg_div(k, &m, da, &h.optimal_sigma.mat).unwrap();
            assert!((fresh - h.value).abs() < 1e-8, "{}", k);
            let b = h.bound.unwrap();
            assert!(b >= h.value - 1e-12 && b - h.value < 1e-8, "{}: {} vs {}", k, b, h.value);
        }
    }
}
