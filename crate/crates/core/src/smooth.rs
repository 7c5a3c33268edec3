//! Purified distance, ε-balls, smooth min/max entropies and smooth correlation
//! measures, with the smoothed collapse certificate for premeasurement states.
//!
//! The purified-distance ball is convex and its fidelity constraint is an LMI,
//! so smooth H_min over a full or projected ball is one SDP whose dual gives a
//! certified bound. Smooth H_max is taken through a purification,
//! H^ε_max(A|B) = −H^ε_min(A|C); the optimal AB operator is rebuilt from an
//! Uhlmann partner of the optimal AC operator, which keeps the value exact.
//! Pure-state balls are not convex and use a local parametrized search.

use serde::Serialize;

use crate::correlations::{
    cc_candidate, cc_generators, certify_collapse, cq_generators, default_seed_pairs, delta_one_way, delta_two_way,
    entanglement_bracket, mq_witness, steered_search, surrogate, swap, CollapseCertificate, MeasureName, MeasureReport,
    SearchConfig,
};
use crate::divergence::{div, DivergenceKind};
use crate::entropies::{cond_entropy_mat, sdp_diag, EntropyOptions, SdpDiag};
use crate::error::{Error, Result};
use crate::io::{ser_mat, ser_state};
use crate::linalg::{
    self, eig_unchecked, frob, hermitize, identity, kron, permute_ket, polar_unitary, psd_inv_sqrt, psd_sqrt, r, CMatrix,
};
use crate::optimize::{multistart, OptimizerDiag, SearchOptions};
use crate::premeasurement::Side;
use crate::sdp::{ComplexVar, HermVar, Lmi, SdpSolution};
use crate::states::{is_separable_small, purify, DensityOperator, TraceMode, CLASS_TOL};

/// Slack allowed when testing ball membership of computed optima.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
const PROJECTOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Restriction {
    Full,
    SupportProjector {
        #[serde(serialize_with = "ser_mat")]
        projector: CMatrix,
    },
    PureOnly,
    PureAndProjector {
        #[serde(serialize_with = "ser_mat")]
        projector: CMatrix,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BallSpec {
    pub epsilon: f64,
    pub restriction: Restriction,
}

impl BallSpec {
    pub fn full(epsilon: f64) -> Self {
        BallSpec { epsilon, restriction: Restriction::Full }
    }

    pub fn projected(epsilon: f64, projector: CMatrix) -> Self {
        BallSpec { epsilon, restriction: Restriction::SupportProjector { projector } }
    }

    pub fn projector(&self) -> Option<&CMatrix> {
        match &self.restriction {
            Restriction::SupportProjector { projector } | Restriction::PureAndProjector { projector } => Some(projector),
            _ => None,
        }
    }

    pub fn pure_only(&self) -> bool {
        matches!(self.restriction, Restriction::PureOnly | Restriction::PureAndProjector { .. })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1)", self.epsilon)));
        }
        if let Some(p) = self.projector() {
            if p.nrows() != n || !p.is_square() {
                return Err(Error::DimMismatch(format!("projector is {}x{}, state dimension {}", p.nrows(), p.ncols(), n)));
            }
            let idem = frob(&(p * p - p)).max(frob(&(p - p.adjoint())));
            if idem > 1e-8 {
                return Err(Error::InvalidParameter(format!("restriction is not a projector (defect {:.3e})", idem)));
            }
        }
        Ok(())
    }
}

fn check_subnormalized(m: &CMatrix) -> Result<()> {
    let e = linalg::herm_eig(m)?;
    let scale = e.max_abs().max(1.0);
    let lo = e.values.last().copied().unwrap_or(0.0);
    if lo < -1e-9 * scale {
        return Err(Error::NotPsd(lo));
    }
    let t = linalg::tr_re(m);
    if t > 1.0 + 1e-9 {
        return Err(Error::BadTrace(t));
    }
    Ok(())
}

/// F̄(ρ,σ) = F(ρ,σ) + √((1 − Tr ρ)(1 − Tr σ)).
pub fn generalized_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let a = (1.0 - linalg::tr_re(rho)).max(0.0);
    let b = (1.0 - linalg::tr_re(sigma)).max(0.0);
    linalg::fidelity(rho, sigma) + (a * b).sqrt()
}

/// P(ρ,σ) = √(1 − F̄²) on subnormalized operators.
pub fn purified_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimMismatch(format!("{:?} vs {:?}", rho.shape(), sigma.shape())));
    }
    check_subnormalized(rho)?;
    check_subnormalized(sigma)?;
    let f = generalized_fidelity(rho, sigma).min(1.0);
    Ok((1.0 - f * f).max(0.0).sqrt())
}

fn distance_unchecked(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let f = generalized_fidelity(rho, sigma).min(1.0);
    (1.0 - f * f).max(0.0).sqrt()
}

pub fn ball_membership(center: &CMatrix, candidate: &CMatrix, spec: &BallSpec) -> bool {
    if center.shape() != candidate.shape() || check_subnormalized(candidate).is_err() {
        return false;
    }
    if distance_unchecked(center, candidate) > spec.epsilon + MEMBERSHIP_TOL {
        return false;
    }
    if let Some(p) = spec.projector() {
        let scale = frob(candidate).max(1.0);
        if frob(&(p * candidate * p - candidate)) > PROJECTOR_TOL * scale {
            return false;
        }
    }
    if spec.pure_only() && eig_unchecked(&hermitize(candidate)).rank() > 1 {
        return false;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Min,
    Max,
}

impl Which {
    fn kind(self) -> DivergenceKind {
        match self {
            Which::Min => DivergenceKind::Dmax,
            Which::Max => DivergenceKind::Dfid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    /// ε = 0: the ball is the center alone.
    ExactEps0,
    /// Convex ball solved as an SDP; `lower`/`upper` come from primal and dual.
    SdpBracket,
    /// Local parametrized search; the value is a feasible point only.
    LocalOptimum,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothResult {
    pub quantity: String,
    pub value: f64,
    /// Bracket for the smooth quantity; `None` means no bound on that side.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(serialize_with = "ser_state")]
    pub optimal_state: DensityOperator,
    /// Purified distance of `optimal_state` from the center.
    pub distance: f64,
    pub ball_used: BallSpec,
    pub certified: Certification,
    pub unit: &'static str,
    pub sdp: Option<SdpDiag>,
    pub optimizer: Option<OptimizerDiag>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SmoothOptions {
    /// Force the local parametrized ball search even where an SDP exists.
    pub force_search: bool,
    pub random_starts: usize,
    pub seed: u64,
    pub search: SearchOptions,
}

impl Default for SmoothOptions {
    fn default() -> Self {
        SmoothOptions {
            force_search: false,
            random_starts: 2,
            seed: 0,
            search: SearchOptions { max_iters: 600, sd_tol: 1e-10, restarts: 1, step: 0.1 },
        }
    }
}

fn as_state(m: CMatrix, dims: &[usize]) -> DensityOperator {
    let t = linalg::tr_re(&m);
    let mode = if (t - 1.0).abs() <= 1e-9 { TraceMode::Normalized } else { TraceMode::Subnormalized };
    DensityOperator { mat: hermitize(&m), dims: dims.to_vec(), trace_mode: mode }
}

// ---------------------------------------------------------------------------
// Ball LMI

/// Ball variable ρ̃ = V τ V† with P(center, ρ̃) ≤ ε, Tr τ ≤ 1.
struct BallVar {
    tau: HermVar,
    v: CMatrix,
}

impl BallVar {
    fn add(lmi: &mut Lmi, center: &CMatrix, v: &CMatrix, eps: f64) -> BallVar {
        let n = center.nrows();
        let rdim = v.ncols();
        let tau = HermVar::new(lmi, rdim, |_| 0.0);
        let e = eig_unchecked(&hermitize(center));
        let bmat = e.support_basis();
        let k = bmat.ncols();
        let ck = hermitize(&(bmat.adjoint() * center * &bmat));
        // [[ρ_k, Y], [Y†, ρ̃]] ⪰ 0, so F(center, ρ̃) ≥ Re Tr(Y B).
        let bf = lmi.add_block(k + n);
        lmi.add_const(bf, 0, &ck);
        tau.add_mapped(lmi, bf, k, |x| v * x * v.adjoint());
        let y = ComplexVar::new(lmi, k, n, |_, _| 0.0);
        y.place(lmi, bf, 0, k);
        // [[1 − Tr τ, s], [s, 1]] ⪰ 0, so s ≤ √(1 − Tr ρ̃).
        let bt = lmi.add_block(2);
        lmi.add_const(bt, 0, &identity(2));
        tau.add_mapped(lmi, bt, 0, |x| {
            let mut m = CMatrix::zeros(1, 1);
            m[(0, 0)] = r(-linalg::tr_re(x));
            m
        });
        let s = lmi.add_var(0.0);
        lmi.add_entry(s, bt, 0, 1, r(1.0));
        let bs = lmi.add_block(1);
        let c = (1.0 - eps * eps).sqrt();
        lmi.add_const_entry(bs, 0, 0, r(-c));
        y.add_re_trace(lmi, bs, 0, &bmat);
        let g = (1.0 - linalg::tr_re(center)).max(0.0).sqrt();
        if g > 0.0 {
            lmi.add_entry(s, bs, 0, 0, r(g));
        }
        BallVar { tau, v: v.clone() }
    }

    fn state(&self, y: &[f64]) -> CMatrix {
        let t = eig_unchecked(&hermitize(&self.tau.value(y))).apply(|x| x.max(0.0), false);
        hermitize(&(&self.v * t * self.v.adjoint()))
    }

    fn subtract_into(&self, lmi: &mut Lmi, block: usize) {
        let v = self.v.clone();
        self.tau.add_mapped(lmi, block, 0, |x| -(&v * x * v.adjoint()));
    }
}

/// max H_min over the ball: min Tr σ̃ s.t. 1 ⊗ σ̃ ⪰ ρ̃. Returns (ρ̃, solution).
fn hmin_ball_sdp(center: &CMatrix, da: usize, db: usize, v: &CMatrix, eps: f64) -> Result<(CMatrix, SdpSolution)> {
    let mut lmi = Lmi::new();
    let ball = BallVar::add(&mut lmi, center, v, eps);
    let b = lmi.add_block(da * db);
    let s = HermVar::new(&mut lmi, db, |e| -linalg::tr_re(e));
    s.add_mapped(&mut lmi, b, 0, |e| kron(&identity(da), e));
    ball.subtract_into(&mut lmi, b);
    let sol = lmi.solve()?;
    Ok((ball.state(&sol.y), sol))
}

/// min over the ball and over σ in the cone of `gens` of D_max(ρ̃ ‖ σ/Tr σ).
fn dmax_ball_span(center: &CMatrix, gens: &[CMatrix], v: &CMatrix, eps: f64) -> Result<(f64, CMatrix)> {
    let n = center.nrows();
    let mut lmi = Lmi::new();
    let ball = BallVar::add(&mut lmi, center, v, eps);
    let b = lmi.add_block(n);
    for g in gens {
        let k = lmi.add_var(-linalg::tr_re(g));
        lmi.add_term(k, b, 0, g);
    }
    ball.subtract_into(&mut lmi, b);
    let sol = lmi.solve()?;
    let t = -sol.objective;
    Ok((t.max(1e-300).log2(), ball.state(&sol.y)))
}

fn support_isometry(p: &CMatrix) -> CMatrix {
    eig_unchecked(&hermitize(p)).support_basis()
}

// ---------------------------------------------------------------------------
// Smooth conditional entropies

/// Uhlmann partner on ABC of the optimal AC operator. Returns the AB marginal.
fn uhlmann_ab(psi: &CMatrix, da: usize, db: usize, dc: usize, rho_ac_tilde: &CMatrix) -> Result<CMatrix> {
    let acb = permute_ket(psi, &[da, db, dc], &[0, 2, 1])?;
    let nac = da * dc;
    let big_psi = CMatrix::from_fn(nac, db, |i, b| acb[(i * db + b, 0)]);
    let rho_ac = hermitize(&(&big_psi * big_psi.adjoint()));
    let w = psd_inv_sqrt(&rho_ac) * &big_psi;
    let st = psd_sqrt(rho_ac_tilde);
    let u = polar_unitary(&(psd_sqrt(&rho_ac) * &st)).adjoint();
    let partner = st * u * w;
    let ket = CMatrix::from_fn(nac * db, 1, |k, _| partner[(k / db, k % db)]);
    let full = &ket * ket.adjoint();
    Ok(hermitize(&linalg::partial_trace(&full, &[da, dc, db], &[0, 2])?))
}

struct MaxDuality {
    state_ab: CMatrix,
    /// Certified lower bound on H^ε_max(A|B).
    lower: f64,
    sol: SdpSolution,
}

fn hmax_by_duality(center: &DensityOperator, eps: f64) -> Result<MaxDuality> {
    let (da, db) = center.two_party()?;
    let psi = purify(center);
    let dc = psi.dims[2];
    let full = &psi.ket * psi.ket.adjoint();
    let rho_ac = hermitize(&linalg::partial_trace(&full, &[da, db, dc], &[0, 2])?);
    let (tilde_ac, sol) = hmin_ball_sdp(&rho_ac, da, dc, &identity(da * dc), eps)?;
    let state_ab = uhlmann_ab(&psi.ket, da, db, dc, &tilde_ac)?;
    // H^ε_min(A|C) ≤ −log t_d, so H^ε_max(A|B) ≥ log t_d.
    let lower = (-sol.bound).max(1e-300).log2();
    Ok(MaxDuality { state_ab, lower, sol })
}

pub fn smooth_cond_entropy(which: Which, rho: &DensityOperator, spec: &BallSpec) -> Result<SmoothResult> {
    smooth_cond_entropy_with(which, rho, spec, &SmoothOptions::default())
}

pub fn smooth_cond_entropy_with(which: Which, rho: &DensityOperator, spec: &BallSpec, opts: &SmoothOptions) -> Result<SmoothResult> {
    let (da, db) = rho.two_party()?;
    spec.validate(rho.dim())?;
    check_subnormalized(&rho.mat)?;
    if let Some(p) = spec.projector() {
        if frob(&(p * &rho.mat * p - &rho.mat)) > 1e-8 * frob(&rho.mat).max(1.0) {
            return Err(Error::InvalidParameter("restriction projector must contain the support of the center".into()));
        }
    }
    let kind = which.kind();
    let label = match which {
        Which::Min => "h_min",
        Which::Max => "h_max",
    };
    let eopts = EntropyOptions::default();
    let evaluate = |m: &CMatrix| cond_entropy_mat(kind, m, da, db, &eopts);
    let result = |value: f64, lower: Option<f64>, upper: Option<f64>, m: CMatrix, cert, sdp, opt, note: Option<String>| SmoothResult {
        quantity: label.into(),
        value,
        lower,
        upper,
        distance: distance_unchecked(&rho.mat, &m),
        optimal_state: as_state(m, &rho.dims),
        ball_used: spec.clone(),
        certified: cert,
        unit: "bits",
        sdp,
        optimizer: opt,
        note,
    };

    if spec.epsilon == 0.0 {
        let h = evaluate(&rho.mat)?;
        return Ok(result(h.value, Some(h.value), Some(h.bound.unwrap_or(h.value)), rho.mat.clone(), Certification::ExactEps0, None, None, None));
    }
    if spec.pure_only() || opts.force_search {
        return ball_search(which, rho, spec, opts, label);
    }
    let v = spec.projector().map(support_isometry).unwrap_or_else(|| identity(rho.dim()));
    match which {
        Which::Min => {
            let (m, sol) = hmin_ball_sdp(&rho.mat, da, db, &v, spec.epsilon)?;
            let h = evaluate(&m)?;
            let upper = -(-sol.bound).max(1e-300).log2();
            Ok(result(h.value, Some(h.value), Some(upper.max(h.value)), m, Certification::SdpBracket, Some(sdp_diag(&sol)), None, None))
        }
        Which::Max => {
            let d = hmax_by_duality(rho, spec.epsilon)?;
            let (m, note) = match spec.projector() {
                Some(p) => (hermitize(&(p * &d.state_ab * p)), Some("full-ball optimum projected onto the restriction".to_string())),
                None => (d.state_ab, None),
            };
            let h = evaluate(&m)?;
            let upper = h.bound.unwrap_or(h.value);
            Ok(result(h.value, Some(d.lower.min(h.value)), Some(upper), m, Certification::SdpBracket, Some(sdp_diag(&d.sol)), None, note))
        }
    }
}

/// Candidate generator for the parametrized ball search.
enum BallParam {
    /// Perturb a purification and trace out the purifying factor.
    Purification { ket: CMatrix, n: usize, dc: usize },
    /// ρ̃ = V L L† V† with L perturbed around √(V† ρ V).
    Projected { v: CMatrix, l0: CMatrix },
    /// ρ̃ = V k k† V† with k perturbed around the top eigenvector.
    Pure { v: CMatrix, k0: CMatrix },
}

impl BallParam {
    fn dim(&self) -> usize {
        match self {
            BallParam::Purification { ket, .. } => 2 * ket.nrows(),
            BallParam::Projected { l0, .. } => 2 * l0.nrows() * l0.ncols(),
            BallParam::Pure { k0, .. } => 2 * k0.nrows(),
        }
    }

    fn raw(&self, x: &[f64]) -> CMatrix {
        let perturb = |base: &CMatrix| {
            let mut m = base.clone();
            for (k, z) in m.iter_mut().enumerate() {
                *z += linalg::c(x[2 * k], x[2 * k + 1]);
            }
            m
        };
        match self {
            BallParam::Purification { ket, n, dc } => {
                let mut phi = perturb(ket);
                let nrm = frob(&phi);
                if nrm > 1.0 {
                    phi /= r(nrm);
                }
                let full = &phi * phi.adjoint();
                hermitize(&linalg::partial_trace(&full, &[*n, *dc], &[0]).expect("consistent dims"))
            }
            BallParam::Projected { v, l0 } => {
                let l = perturb(l0);
                let mut t = &l * l.adjoint();
                let tr = linalg::tr_re(&t);
                if tr > 1.0 {
                    t /= r(tr);
                }
                hermitize(&(v * t * v.adjoint()))
            }
            BallParam::Pure { v, k0 } => {
                let mut k = perturb(k0);
                let nrm = frob(&k);
                if nrm > 1.0 {
                    k /= r(nrm);
                }
                let u = v * k;
                hermitize(&(&u * u.adjoint()))
            }
        }
    }

    /// Pull x toward the origin until the candidate lies in the ball.
    fn candidate(&self, x: &[f64], center: &CMatrix, spec: &BallSpec) -> Option<CMatrix> {
        let m = self.raw(x);
        if ball_membership(center, &m, spec) {
            return Some(m);
        }
        let zero = vec![0.0; x.len()];
        if !ball_membership(center, &self.raw(&zero), spec) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let xm: Vec<f64> = x.iter().map(|v| v * mid).collect();
            if ball_membership(center, &self.raw(&xm), spec) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let xm: Vec<f64> = x.iter().map(|v| v * lo).collect();
        Some(self.raw(&xm))
    }
}

fn ball_param(rho: &DensityOperator, spec: &BallSpec) -> BallParam {
    let n = rho.dim();
    let v = spec.projector().map(support_isometry).unwrap_or_else(|| identity(n));
    if spec.pure_only() {
        let inner = hermitize(&(v.adjoint() * &rho.mat * &v));
        let e = eig_unchecked(&inner);
        let k0 = linalg::column(&e.vectors, 0) * r(e.values[0].max(0.0).sqrt());
        return BallParam::Pure { v, k0 };
    }
    if spec.projector().is_some() {
        let l0 = psd_sqrt(&(v.adjoint() * &rho.mat * &v));
        return BallParam::Projected { v, l0 };
    }
    let psi = purify(rho);
    let dc = *psi.dims.last().expect("purifying factor");
    BallParam::Purification { ket: psi.ket, n, dc }
}

fn ball_search(which: Which, rho: &DensityOperator, spec: &BallSpec, opts: &SmoothOptions, label: &str) -> Result<SmoothResult> {
    let (da, db) = rho.two_party()?;
    let param = ball_param(rho, spec);
    let zero = vec![0.0; param.dim()];
    if param.candidate(&zero, &rho.mat, spec).is_none() {
        return Err(Error::InvalidParameter("no candidate of the requested form lies in the ball".into()));
    }
    let eopts = EntropyOptions::default();
    let kind = which.kind();
    let sign = if which == Which::Min { -1.0 } else { 1.0 };
    let f = |x: &[f64]| match param.candidate(x, &rho.mat, spec) {
        Some(m) => cond_entropy_mat(kind, &m, da, db, &eopts).map(|h| sign * h.value).unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    };
    let res = multistart(&f, &[zero], param.dim(), opts.random_starts, 0.5 * spec.epsilon, opts.seed, &opts.search)?;
    let m = param.candidate(&res.x, &rho.mat, spec).expect("origin is feasible");
    let h = cond_entropy_mat(kind, &m, da, db, &eopts)?;
    let (lower, upper) = match which {
        Which::Min => (Some(h.value), None),
        Which::Max => (None, Some(h.bound.unwrap_or(h.value))),
    };
    Ok(SmoothResult {
        quantity: label.into(),
        value: h.value,
        lower,
        upper,
        distance: distance_unchecked(&rho.mat, &m),
        optimal_state: as_state(m, &rho.dims),
        ball_used: spec.clone(),
        certified: Certification::LocalOptimum,
        unit: "bits",
        sdp: None,
        optimizer: Some(res.diag),
        note: Some("local parametrized ball search".into()),
    })
}

// ---------------------------------------------------------------------------
// Smooth correlation measures

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothMeasure {
    EMax,
    DeltaMaxAB,
    DeltaMaxBA,
    DeltaMaxTwoWay,
    EFid,
    DeltaFidAB,
    DeltaFidBA,
    DeltaFidTwoWay,
}

impl SmoothMeasure {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "e_max" => SmoothMeasure::EMax,
            "delta_max_ab" => SmoothMeasure::DeltaMaxAB,
            "delta_max_ba" => SmoothMeasure::DeltaMaxBA,
            "delta2_max" => SmoothMeasure::DeltaMaxTwoWay,
            "e_fid" => SmoothMeasure::EFid,
            "delta_fid_ab" => SmoothMeasure::DeltaFidAB,
            "delta_fid_ba" => SmoothMeasure::DeltaFidBA,
            "delta2_fid" => SmoothMeasure::DeltaFidTwoWay,
            _ => return Err(Error::InvalidParameter(format!("unknown smooth measure '{}'", s))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            SmoothMeasure::EMax => "e_max",
            SmoothMeasure::DeltaMaxAB => "delta_max_ab",
            SmoothMeasure::DeltaMaxBA => "delta_max_ba",
            SmoothMeasure::DeltaMaxTwoWay => "delta2_max",
            SmoothMeasure::EFid => "e_fid",
            SmoothMeasure::DeltaFidAB => "delta_fid_ab",
            SmoothMeasure::DeltaFidBA => "delta_fid_ba",
            SmoothMeasure::DeltaFidTwoWay => "delta2_fid",
        }
    }

    pub fn is_max_family(&self) -> bool {
        matches!(self, SmoothMeasure::EMax | SmoothMeasure::DeltaMaxAB | SmoothMeasure::DeltaMaxBA | SmoothMeasure::DeltaMaxTwoWay)
    }

    fn kind(&self) -> DivergenceKind {
        if self.is_max_family() {
            DivergenceKind::Dmax
        } else {
            DivergenceKind::Dfid
        }
    }

    fn base(&self) -> MeasureName {
        match self {
            SmoothMeasure::EMax | SmoothMeasure::EFid => MeasureName::Entanglement,
            SmoothMeasure::DeltaMaxAB | SmoothMeasure::DeltaFidAB => MeasureName::DeltaAB,
            SmoothMeasure::DeltaMaxBA | SmoothMeasure::DeltaFidBA => MeasureName::DeltaBA,
            SmoothMeasure::DeltaMaxTwoWay | SmoothMeasure::DeltaFidTwoWay => MeasureName::DeltaTwoWay,
        }
    }
}

fn unsmoothed(kind: DivergenceKind, name: MeasureName, rho: &DensityOperator, cfg: &SearchConfig) -> Result<MeasureReport> {
    match name {
        MeasureName::Entanglement => entanglement_bracket(kind, rho, cfg),
        MeasureName::DeltaAB => delta_one_way(kind, rho, Side::A, cfg),
        MeasureName::DeltaBA => delta_one_way(kind, rho, Side::B, cfg),
        _ => delta_two_way(kind, rho, cfg),
    }
}

/// Smooth Δ_max over the ball with the basis search on top of the joint SDP.
/// `extra` seeds are (W, V) pairs. Returns (value, ball state, bases).
fn smooth_delta_max(
    rho: &DensityOperator,
    name: MeasureName,
    spec: &BallSpec,
    extra: &[(CMatrix, CMatrix)],
    cfg: &SearchConfig,
) -> Result<(f64, CMatrix, Vec<CMatrix>, OptimizerDiag)> {
    let (da, db) = rho.two_party()?;
    let eps = spec.epsilon;
    let mut pairs: Vec<(CMatrix, CMatrix)> = extra.to_vec();
    pairs.extend(default_seed_pairs(rho)?);
    let sk = surrogate(DivergenceKind::Dmax).expect("dmax has a surrogate");
    let v_full = spec.projector().map(support_isometry).unwrap_or_else(|| identity(da * db));
    let found = match name {
        MeasureName::DeltaTwoWay => {
            let seeds: Vec<Vec<CMatrix>> = pairs.iter().map(|(w, v)| vec![w.clone(), v.clone()]).collect();
            let m = &rho.mat;
            let f = |b: &[CMatrix]| dmax_ball_span(m, &cc_generators(&b[0], &b[1]), &v_full, eps).map(|x| x.0).unwrap_or(f64::INFINITY);
            let g = |b: &[CMatrix]| crate::correlations::cc_divergence(sk, m, &b[0], &b[1]).map(|x| x.0).unwrap_or(f64::INFINITY);
            steered_search(DivergenceKind::Dmax, &f, &g, &[da, db], &seeds, cfg)?
        }
        _ => {
            let side_b = name == MeasureName::DeltaBA;
            let (m, dc, dq) = if side_b { (swap(&rho.mat, da, db), db, da) } else { (rho.mat.clone(), da, db) };
            let vv = if side_b {
                let p = &v_full * v_full.adjoint();
                support_isometry(&swap(&p, da, db))
            } else {
                v_full.clone()
            };
            let seeds: Vec<Vec<CMatrix>> =
                pairs.iter().map(|(w, v)| vec![if side_b { v.clone() } else { w.clone() }]).collect();
            let f = |b: &[CMatrix]| dmax_ball_span(&m, &cq_generators(&b[0], dq), &vv, eps).map(|x| x.0).unwrap_or(f64::INFINITY);
            let g = |b: &[CMatrix]| crate::correlations::cq_divergence(sk, &m, dc, dq, &b[0]).map(|x| x.0).unwrap_or(f64::INFINITY);
            steered_search(DivergenceKind::Dmax, &f, &g, &[dc], &seeds, cfg)?
        }
    };
    let state = match name {
        MeasureName::DeltaTwoWay => dmax_ball_span(&rho.mat, &cc_generators(&found.bases[0], &found.bases[1]), &v_full, eps)?.1,
        MeasureName::DeltaBA => {
            let m = swap(&rho.mat, da, db);
            let p = &v_full * v_full.adjoint();
            let vv = support_isometry(&swap(&p, da, db));
            swap(&dmax_ball_span(&m, &cq_generators(&found.bases[0], da), &vv, eps)?.1, db, da)
        }
        _ => dmax_ball_span(&rho.mat, &cq_generators(&found.bases[0], db), &v_full, eps)?.1,
    };
    Ok((found.value, state, found.bases, found.diag))
}

pub fn smooth_measure(m: SmoothMeasure, rho: &DensityOperator, spec: &BallSpec, cfg: &SearchConfig) -> Result<SmoothResult> {
    rho.two_party()?;
    spec.validate(rho.dim())?;
    check_subnormalized(&rho.mat)?;
    if spec.pure_only() {
        return Err(Error::InvalidParameter("smooth measures use full or projected balls".into()));
    }
    let kind = m.kind();
    let mk = |value: f64, lower: Option<f64>, upper: Option<f64>, state: CMatrix, cert, opt, note: String| SmoothResult {
        quantity: m.label().into(),
        value,
        lower,
        upper,
        distance: distance_unchecked(&rho.mat, &state),
        optimal_state: as_state(state, &rho.dims),
        ball_used: spec.clone(),
        certified: cert,
        unit: "bits",
        sdp: None,
        optimizer: opt,
        // Ball candidates may be subnormalized; the CC/CQ targets they are compared against are not.
        note: Some(format!("{note}; targets normalized")),
    };
    if spec.epsilon == 0.0 {
        let rep = unsmoothed(kind, m.base(), rho, cfg)?;
        let v = rep.value.unwrap_or(rep.upper);
        let note = format!("singleton ball; {}", rep.diagnostics.note.clone().unwrap_or_else(|| rep.diagnostics.method.clone()));
        return Ok(mk(v, Some(rep.lower), Some(rep.upper), rho.mat.clone(), Certification::ExactEps0, rep.diagnostics.optimizer, note));
    }
    let witness = mq_witness(rho);
    if m.is_max_family() {
        // Floor: −H^ε_min lies below every member of the family.
        let h = smooth_cond_entropy(Which::Min, rho, spec)?;
        let floor = -h.upper.unwrap_or(h.value);
        if m == SmoothMeasure::EMax {
            let (a, sa, _, _) = smooth_delta_max(rho, MeasureName::DeltaAB, spec, &[], cfg)?;
            let (b, sb, _, _) = smooth_delta_max(rho, MeasureName::DeltaBA, spec, &[], cfg)?;
            let (mut upper, mut state) = if a <= b { (a, sa) } else { (b, sb) };
            let mut note = "bracketed by −H^ε_min and the smooth one-way quantities".to_string();
            let (da, db) = rho.two_party()?;
            if da * db <= 6 {
                let sep = is_separable_small(rho, CLASS_TOL)?;
                if sep.member && sep.decided && upper > 0.0 {
                    upper = 0.0;
                    state = rho.mat.clone();
                    note = "center is separable, so the ball minimum is at most 0".into();
                }
            }
            if witness.is_some() {
                let cert = certify_smooth_collapse(rho, spec.epsilon, kind, 1e-3)?;
                if cert.collapsed {
                    note = format!("premeasurement center; smoothed collapse gap {:.3e}", cert.gap);
                    return Ok(mk(cert.lower, Some(floor.min(cert.lower)), Some(upper.min(cert.upper)), state, Certification::SdpBracket, None, note));
                }
            }
            return Ok(mk(upper, Some(floor.min(upper)), Some(upper), state, Certification::LocalOptimum, None, note));
        }
        let (v, state, _, diag) = smooth_delta_max(rho, m.base(), spec, &[], cfg)?;
        let cert = if v - floor <= 1e-6 { Certification::SdpBracket } else { Certification::LocalOptimum };
        return Ok(mk(v, Some(floor.min(v)), Some(v), state, cert, Some(diag), "joint ball and basis search; value is attained".into()));
    }
    // Fid family: maximum over ball candidates of the unsmoothed measure.
    let hmax = smooth_cond_entropy(Which::Max, rho, spec)?;
    let floor = -hmax.upper.unwrap_or(hmax.value);
    let mut cands = vec![rho.mat.clone(), hmax.optimal_state.mat.clone()];
    if let Some(w) = &witness {
        let v = w.isometry();
        let p = &v * v.adjoint();
        cands.push(hermitize(&(&p * &hmax.optimal_state.mat * &p)));
    }
    let mut best: Option<(f64, CMatrix)> = None;
    let mut lower = floor;
    for c in cands {
        if !ball_membership(&rho.mat, &c, &BallSpec::full(spec.epsilon)) {
            continue;
        }
        let st = as_state(c.clone(), &rho.dims);
        let rep = unsmoothed(kind, m.base(), &st, cfg)?;
        lower = lower.max(rep.lower);
        let v = rep.value.unwrap_or(rep.upper);
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, c));
        }
    }
    let (v, state) = best.expect("the center is always a candidate");
    if witness.is_some() {
        let cert = certify_smooth_collapse(rho, spec.epsilon, kind, 1e-3)?;
        if cert.collapsed {
            let note = format!("premeasurement center; smoothed collapse gap {:.3e}", cert.gap);
            return Ok(mk(floor, Some(lower.min(floor)), Some(floor.max(cert.upper)), state, Certification::SdpBracket, None, note));
        }
    }
    Ok(mk(v, Some(lower.min(v)), None, state, Certification::LocalOptimum, None, "maximum over ball candidates (center and the smooth-entropy optimizer)".into()))
}

/// Smoothed two-sided certificate for a premeasurement state (register first).
/// `Dmax` pairs −H^ε_min with smooth Δ↔_max; `Dfid` pairs −H^ε_max with smooth Δ↔_fid.
pub fn certify_smooth_collapse(rho: &DensityOperator, epsilon: f64, kind: DivergenceKind, tol: f64) -> Result<CollapseCertificate> {
    if !matches!(kind, DivergenceKind::Dmax | DivergenceKind::Dfid) {
        return Err(Error::InvalidParameter(format!("smoothing is defined for dmax and dfid, not {}", kind.label())));
    }
    if epsilon == 0.0 {
        return certify_collapse(rho, kind, tol);
    }
    let (da, db) = rho.two_party()?;
    let w = mq_witness(rho).ok_or_else(|| Error::NotMq("no premeasurement witness for the split".into()))?;
    let spec = BallSpec::full(epsilon);
    spec.validate(rho.dim())?;
    let vx = w.isometry();
    let eopts = EntropyOptions::default();
    let (lower, point) = match kind {
        DivergenceKind::Dmax => {
            let (_, full) = hmin_ball_sdp(&rho.mat, da, db, &identity(da * db), epsilon)?;
            let lower = (-full.bound).max(1e-300).log2();
            let (restricted, _) = hmin_ball_sdp(&rho.mat, da, db, &vx, epsilon)?;
            (lower, restricted)
        }
        _ => {
            let d = hmax_by_duality(rho, epsilon)?;
            let h = cond_entropy_mat(kind, &d.state_ab, da, db, &eopts)?;
            let lower = -h.bound.unwrap_or(h.value);
            let p = &vx * vx.adjoint();
            (lower, hermitize(&(&p * &d.state_ab * &p)))
        }
    };
    let h = cond_entropy_mat(kind, &point, da, db, &eopts)?;
    let sigma = h.optimal_sigma.mat.clone();
    let cand = cc_candidate(&w.basis_w, &w.pvm_x, &sigma);
    let upper = div(kind, &point, &cand)?.to_f64();
    let gap = upper - lower;
    let collapsed = gap.abs() <= tol;
    let state = as_state(rho.mat.clone(), &rho.dims);
    Ok(CollapseCertificate {
        state_id: crate::correlations::state_id(&state),
        kind,
        epsilon,
        lower,
        upper,
        gap,
        tolerance: tol,
        collapsed,
        collapsed_measures: if collapsed {
            vec![MeasureName::NegCondEntropy, MeasureName::Entanglement, MeasureName::DeltaAB, MeasureName::DeltaBA, MeasureName::DeltaTwoWay]
        } else {
            Vec::new()
        },
        unit: "bits",
        register_basis: w.basis_w.clone(),
        optimal_sigma: sigma,
        candidate_cc: cand,
    })
}

// ---------------------------------------------------------------------------
// Orderings and monotonicity

#[derive(Debug, Clone, Serialize)]
pub struct SmoothHierarchy {
    pub epsilon: f64,
    pub family: &'static str,
    pub neg_entropy: f64,
    pub e_upper: f64,
    pub delta_ab: f64,
    pub delta_ba: f64,
    pub delta_two_way: f64,
    /// Worst slack of −H ≤ E ≤ Δ→ ≤ Δ↔ on the computed values.
    pub slack: f64,
}

/// The smooth max-family chain, searched so that the one-way quantities start
/// from the two-way optimum.
pub fn smooth_hierarchy_max(rho: &DensityOperator, epsilon: f64, cfg: &SearchConfig) -> Result<SmoothHierarchy> {
    let spec = BallSpec::full(epsilon);
    let h = smooth_cond_entropy(Which::Min, rho, &spec)?;
    let neg = -h.upper.unwrap_or(h.value);
    let (two, _, bases, _) = smooth_delta_max(rho, MeasureName::DeltaTwoWay, &spec, &[], cfg)?;
    let pair = [(bases[0].clone(), bases[1].clone())];
    let (ab, _, _, _) = smooth_delta_max(rho, MeasureName::DeltaAB, &spec, &pair, cfg)?;
    let (ba, _, _, _) = smooth_delta_max(rho, MeasureName::DeltaBA, &spec, &pair, cfg)?;
    let e_upper = ab.min(ba);
    let slack = [e_upper - neg, ab - e_upper, ba - e_upper, two - ab, two - ba].into_iter().fold(f64::INFINITY, f64::min);
    Ok(SmoothHierarchy { epsilon, family: "max", neg_entropy: neg, e_upper, delta_ab: ab, delta_ba: ba, delta_two_way: two, slack })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothEntanglement {
    EMax,
    EFid,
}

#[derive(Debug, Clone)]
pub enum MonotonicityInstance {
    Identity(DensityOperator),
    /// Isometry applied to the second party.
    LocalIsometry { rho: DensityOperator, v: CMatrix },
    /// State on A ⊗ B ⊗ E; the map traces out E.
    TraceAncilla(DensityOperator),
    /// Channel on the second party.
    LocalChannel { rho: DensityOperator, channel: crate::divergence::Channel },
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCheck {
    pub before: f64,
    pub after: f64,
    /// `after ≤ before` (or equality for isometries) holds when slack ≥ 0.
    pub slack: f64,
    pub relation: &'static str,
}

fn entanglement_proxy(which: SmoothEntanglement, rho: &DensityOperator, eps: f64, cfg: &SearchConfig) -> Result<f64> {
    let m = match which {
        SmoothEntanglement::EMax => SmoothMeasure::EMax,
        SmoothEntanglement::EFid => SmoothMeasure::EFid,
    };
    let r = smooth_measure(m, rho, &BallSpec::full(eps), cfg)?;
    Ok(match which {
        SmoothEntanglement::EMax => r.upper.unwrap_or(r.value),
        SmoothEntanglement::EFid => r.value,
    })
}

/// Evaluate the same upper-bound proxy before and after the local map.
pub fn check_smooth_monotonicity(
    which: SmoothEntanglement,
    instance: &MonotonicityInstance,
    epsilon: f64,
    cfg: &SearchConfig,
) -> Result<MonotonicityCheck> {
    let (before_state, after_state, equality) = match instance {
        MonotonicityInstance::Identity(rho) => (rho.clone(), rho.clone(), true),
        MonotonicityInstance::LocalIsometry { rho, v } => {
            let (da, db) = rho.two_party()?;
            if v.nrows() < v.ncols() || v.ncols() != db || linalg::orthonormality_residual(v) > 1e-10 {
                return Err(Error::InvalidParameter("local map is not an isometry on the second party".into()));
            }
            let big = kron(&identity(da), v);
            let m = hermitize(&(&big * &rho.mat * big.adjoint()));
            (rho.clone(), DensityOperator { mat: m, dims: vec![da, v.nrows()], trace_mode: rho.trace_mode }, true)
        }
        MonotonicityInstance::TraceAncilla(rho) => {
            if rho.dims.len() != 3 {
                return Err(Error::DimMismatch("ancilla instance needs dims [A, B, E]".into()));
            }
            (rho.bipartite(1)?, rho.reduce(&[0, 1])?, false)
        }
        MonotonicityInstance::LocalChannel { rho, channel } => {
            let (da, _) = rho.two_party()?;
            let kraus: Vec<CMatrix> = channel.kraus.iter().map(|k| kron(&identity(da), k)).collect();
            let dout = channel.kraus[0].nrows();
            let lifted = crate::divergence::Channel { kraus };
            (rho.clone(), as_state(lifted.apply(&rho.mat), &[da, dout]), false)
        }
    };
    let before = entanglement_proxy(which, &before_state, epsilon, cfg)?;
    let after = entanglement_proxy(which, &after_state, epsilon, cfg)?;
    let (slack, relation) = if equality { (-(before - after).abs(), "equal") } else { (before - after, "non_increasing") };
    Ok(MonotonicityCheck { before, after, slack, relation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::basis_ket;
    use crate::premeasurement::{build_isometry, fourier_basis, ket_state, premeasure, Pvm};
    use crate::states::{random_state, rng_from_seed};

    fn bell() -> DensityOperator {
        let s = 0.5f64.sqrt();
        DensityOperator::from_ket(&CMatrix::from_column_slice(4, 1, &[r(s), r(0.0), r(0.0), r(s)]), &[2, 2]).unwrap()
    }

    #[test]
    fn purified_distance_examples() {
        let z = projector_of(2, 0);
        let o = projector_of(2, 1);
        assert!(purified_distance(&z, &z).unwrap() < 1e-12);
        assert!((purified_distance(&z, &o).unwrap() - 1.0).abs() < 1e-12);
        // F̄ = √½ for |0⟩⟨0| against ½|0⟩⟨0|.
        let half = &z * r(0.5);
        let expect = (1.0 - 0.5f64).sqrt();
        assert!((purified_distance(&z, &half).unwrap() - expect).abs() < 1e-12);
    }

    fn projector_of(d: usize, k: usize) -> CMatrix {
        linalg::projector(&basis_ket(d, k))
    }

    #[test]
    fn eps_zero_matches_unsmoothed() {
        let mut rng = rng_from_seed(30);
        let rho = random_state(&[2, 2], 3, &mut rng);
        for w in [Which::Min, Which::Max] {
            let s = smooth_cond_entropy(w, &rho, &BallSpec::full(0.0)).unwrap();
            let h = cond_entropy_mat(w.kind(), &rho.mat, 2, 2, &EntropyOptions::default()).unwrap();
            assert_eq!(s.value, h.value);
            assert_eq!(s.certified, Certification::ExactEps0);
        }
    }

    #[test]
    fn smoothing_moves_values_the_right_way() {
        let b = bell();
        let mut prev = -1.0 - 1e-9;
        for eps in [0.0, 0.05, 0.1] {
            let s = smooth_cond_entropy(Which::Min, &b, &BallSpec::full(eps)).unwrap();
            assert!(s.value >= prev - 1e-7, "{} < {}", s.value, prev);
            assert!(s.distance <= eps + 1e-7);
            assert!((s.upper.unwrap() - s.value).abs() < 1e-6);
            prev = s.value;
        }
        let mut cc = CMatrix::zeros(4, 4);
        cc[(0, 0)] = r(0.5);
        cc[(3, 3)] = r(0.5);
        let cc = DensityOperator::new(cc, &[2, 2]).unwrap();
        let h0 = smooth_cond_entropy(Which::Max, &cc, &BallSpec::full(0.0)).unwrap().value;
        let h1 = smooth_cond_entropy(Which::Max, &cc, &BallSpec::full(0.05)).unwrap();
        assert!(h1.value <= 1e-9 && h1.value < h0 - 1e-4, "{} vs {}", h1.value, h0);
        assert!((h1.value - h1.lower.unwrap()).abs() < 1e-5, "{:?}", h1);
        assert!(h1.distance <= 0.05 + 1e-7);
    }

    #[test]
    fn smooth_duality_on_pure_states() {
        let mut rng = rng_from_seed(31);
        let psi = crate::states::random_pure(&[2, 2, 2], &mut rng).density();
        let ab = psi.reduce(&[0, 1]).unwrap();
        let ac = psi.reduce(&[0, 2]).unwrap();
        let hmax = smooth_cond_entropy(Which::Max, &ab, &BallSpec::full(0.05)).unwrap().value;
        let hmin = smooth_cond_entropy(Which::Min, &ac, &BallSpec::full(0.05)).unwrap().value;
        assert!((hmax + hmin).abs() < 1e-5, "{} {}", hmax, hmin);
    }

    #[test]
    fn search_route_agrees_with_sdp() {
        let mut rng = rng_from_seed(32);
        let rho = random_state(&[2, 2], 2, &mut rng);
        let spec = BallSpec::full(0.05);
        let sdp = smooth_cond_entropy(Which::Min, &rho, &spec).unwrap();
        let opts = SmoothOptions { force_search: true, random_starts: 0, ..Default::default() };
        let se = smooth_cond_entropy_with(Which::Min, &rho, &spec, &opts).unwrap();
        assert!(se.value <= sdp.upper.unwrap() + 1e-7);
        assert!(se.value >= sdp.value - 2e-2, "search {} vs sdp {}", se.value, sdp.value);
    }

    #[test]
    fn smooth_collapse_examples() {
        let xb = fourier_basis(&identity(2));
        let iso = build_isometry(&identity(2), &Pvm::from_basis(&xb).unwrap()).unwrap();
        let s = premeasure(&ket_state(2, 0), &iso).unwrap().state;
        let c = certify_smooth_collapse(&s, 0.05, DivergenceKind::Dmax, 1e-3).unwrap();
        assert!(c.collapsed && c.gap >= -1e-8, "{:?}", c.gap);
        let mut rng = rng_from_seed(33);
        let rho_s = random_state(&[2], 2, &mut rng);
        let s = premeasure(&rho_s, &build_isometry(&identity(2), &Pvm::computational(2)).unwrap()).unwrap().state;
        let c = certify_smooth_collapse(&s, 0.1, DivergenceKind::Dfid, 1e-3).unwrap();
        assert!(c.collapsed, "{} {} {}", c.lower, c.upper, c.gap);
        let c0 = certify_smooth_collapse(&s, 0.0, DivergenceKind::Dmax, 1e-6).unwrap();
        let p0 = certify_collapse(&s, DivergenceKind::Dmax, 1e-6).unwrap();
        assert_eq!(c0.upper, p0.upper);
    }

    #[test]
    fn cc_center_delta_max_is_not_positive() {
        let mut cc = CMatrix::zeros(4, 4);
        for (i, p) in [0.4, 0.1, 0.2, 0.3].iter().enumerate() {
            cc[(i, i)] = r(*p);
        }
        let rho = DensityOperator::new(cc, &[2, 2]).unwrap();
        let cfg = SearchConfig { random_starts: 1, ..Default::default() };
        let r0 = smooth_measure(SmoothMeasure::DeltaMaxTwoWay, &rho, &BallSpec::full(0.05), &cfg).unwrap();
        assert!(r0.value <= 1e-9, "{}", r0.value);
        assert!(r0.distance <= 0.05 + 1e-7);
    }

    #[test]
    fn projected_members_stay_in_ball() {
        let mut rng = rng_from_seed(34);
        let rho = random_state(&[2, 2], 2, &mut rng);
        let p = rho.eig().support_projector();
        let spec = BallSpec::full(0.1);
        let h = smooth_cond_entropy(Which::Min, &rho, &spec).unwrap();
        let sigma = h.optimal_state.mat;
        assert!(ball_membership(&rho.mat, &sigma, &spec));
        let ps = hermitize(&(&p * &sigma * &p));
        assert!(ball_membership(&rho.mat, &ps, &BallSpec::projected(0.1, p)));
    }
}
