//! Correlation measures built on a divergence: entanglement brackets, one- and
//! two-way quantumness Δ, mutual-information discords δ, the correlation
//! hierarchy, and collapse certificates for premeasurement (MQ) states.
//!
//! Basis searches are local. Their values are best-found upper bounds and the
//! reports say so; exactness is only claimed through two-sided certificates.

use rand::Rng;
use serde::Serialize;

use crate::divergence::{div, DivergenceKind, ExtReal};
use crate::entropies::{cond_entropy, normalize_state, Cut};
use crate::error::{Error, Result};
use crate::io::{ser_mat, ser_mats};
use crate::linalg::{
    self, column, eig_unchecked, hermitize, identity, kron, projector, r, shannon, vn_entropy_of, CMatrix,
};
use crate::optimize::{minimize, OptimizerDiag, SearchOptions};
use crate::premeasurement::{basis_projectors, premeasure_factor, standard_isometry, Pvm, Side};
use crate::sdp::Lmi;
use crate::states::{
    is_mq, is_separable_small, purify, random_separable, random_unitary, rng_from_seed, DensityOperator, MqWitness,
    Witness, CLASS_TOL,
};

/// Measurement family for the mutual-information discords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmMode {
    ProjectiveRank1,
    /// Rank-one POVMs with d² outcomes (capped), parametrized by isometries.
    GeneralRank1Capped,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub random_starts: usize,
    pub seed: u64,
    pub search: SearchOptions,
    pub povm: PovmMode,
    /// Nelder–Mead iterations spent polishing SDP-backed objectives.
    pub polish_iters: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            random_starts: 8,
            seed: 0,
            search: SearchOptions { max_iters: 3000, sd_tol: 1e-14, restarts: 3, step: 0.4 },
            povm: PovmMode::ProjectiveRank1,
            polish_iters: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureName {
    /// −H_K(A|B); the coherent information for the von Neumann kind.
    NegCondEntropy,
    Entanglement,
    /// Δ with A classical.
    DeltaAB,
    /// Δ with B classical.
    DeltaBA,
    DeltaTwoWay,
    /// δ with a measurement on A.
    DiscordAB,
    DiscordBA,
    DiscordTwoWay,
    GeneralizedDiscord,
    DistillableEntanglement,
    DistillableKey,
    RelEntEntanglementReg,
    DiscordABReg,
    DiscordBAReg,
    DiscordTwoWayReg,
    DeltaTwoWayReg,
}

impl MeasureName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ic" | "neg_cond_entropy" => MeasureName::NegCondEntropy,
            "ent" | "entanglement" => MeasureName::Entanglement,
            "delta_ab" => MeasureName::DeltaAB,
            "delta_ba" => MeasureName::DeltaBA,
            "delta2" => MeasureName::DeltaTwoWay,
            "discord_ab" => MeasureName::DiscordAB,
            "discord_ba" => MeasureName::DiscordBA,
            "discord2" => MeasureName::DiscordTwoWay,
            "gen_discord" => MeasureName::GeneralizedDiscord,
            "ed" | "distillable_entanglement" => MeasureName::DistillableEntanglement,
            "kd" | "distillable_key" => MeasureName::DistillableKey,
            "er_reg" => MeasureName::RelEntEntanglementReg,
            "discord_ab_reg" => MeasureName::DiscordABReg,
            "discord_ba_reg" => MeasureName::DiscordBAReg,
            "discord2_reg" => MeasureName::DiscordTwoWayReg,
            "delta2_reg" => MeasureName::DeltaTwoWayReg,
            _ => return Err(Error::InvalidParameter(format!("unknown measure '{}'", s))),
        })
    }

    pub fn is_asymptotic(&self) -> bool {
        matches!(
            self,
            MeasureName::DistillableEntanglement
                | MeasureName::DistillableKey
                | MeasureName::RelEntEntanglementReg
                | MeasureName::DiscordABReg
                | MeasureName::DiscordBAReg
                | MeasureName::DiscordTwoWayReg
                | MeasureName::DeltaTwoWayReg
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureWitness {
    pub kind: &'static str,
    #[serde(serialize_with = "ser_mats")]
    pub matrices: Vec<CMatrix>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDiag {
    pub method: String,
    pub optimizer: Option<OptimizerDiag>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub name: MeasureName,
    pub kind: DivergenceKind,
    /// Best point estimate (the best-found value for searches); absent for pure brackets.
    pub value: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub unit: &'static str,
    pub tolerance: f64,
    pub witness: Option<MeasureWitness>,
    pub diagnostics: ReportDiag,
}

impl MeasureReport {
    fn new(name: MeasureName, kind: DivergenceKind, lower: f64, upper: f64, method: &str) -> Self {
        MeasureReport {
            name,
            kind,
            value: None,
            lower,
            upper,
            exact: false,
            unit: "bits",
            tolerance: 0.0,
            witness: None,
            diagnostics: ReportDiag { method: method.into(), optimizer: None, note: None },
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

// ---------------------------------------------------------------------------
// Fixed-basis inner problems

fn pow_psd(m: &CMatrix, p: f64) -> CMatrix {
    eig_unchecked(&hermitize(m)).apply(|x| x.max(0.0).powf(p), true)
}

/// Generators P_j ⊗ E for the CQ family in basis `w` on A.
pub(crate) fn cq_generators(w: &CMatrix, db: usize) -> Vec<CMatrix> {
    let herm = linalg::hermitian_basis(db);
    basis_projectors(w).iter().flat_map(|p| herm.iter().map(move |e| kron(p, e))).collect()
}

pub(crate) fn cc_generators(w: &CMatrix, v: &CMatrix) -> Vec<CMatrix> {
    let pb = basis_projectors(v);
    basis_projectors(w).iter().flat_map(|p| pb.iter().map(move |q| kron(p, q))).collect()
}

/// min D_max(ρ‖σ) over normalized σ in the cone spanned by `gens` (which must
/// contain the identity): log min{Tr σ̃ : σ̃ ⪰ ρ}.
fn span_dmax(rho: &CMatrix, gens: &[CMatrix]) -> Result<CMatrix> {
    let n = rho.nrows();
    let mut lmi = Lmi::new();
    let b = lmi.add_block(n);
    lmi.add_const(b, 0, &(-hermitize(rho)));
    let vars: Vec<usize> = gens
        .iter()
        .map(|g| {
            let v = lmi.add_var(-linalg::tr_re(g));
            lmi.add_term(v, b, 0, g);
            v
        })
        .collect();
    let sol = lmi.solve()?;
    let mut s = CMatrix::zeros(n, n);
    for (g, &v) in gens.iter().zip(&vars) {
        s += g * r(sol.y[v]);
    }
    Ok(normalize_state(&s))
}

/// max F(ρ, σ) over normalized σ ⪰ 0 in the span of `gens`.
fn span_max_fid(rho: &CMatrix, gens: &[CMatrix]) -> Result<CMatrix> {
    let n = rho.nrows();
    let e = eig_unchecked(&hermitize(rho));
    let bm = e.support_basis();
    let rk = bm.ncols();
    let compress = |t: &CMatrix| hermitize(&(bm.adjoint() * t * &bm));
    let pivot = gens.iter().position(|g| linalg::tr_re(g).abs() > 1e-12).ok_or_else(|| Error::Solver("no trace direction".into()))?;
    let g0 = &gens[pivot];
    let t0 = linalg::tr_re(g0);
    let traceless: Vec<CMatrix> =
        gens.iter().enumerate().filter(|(k, _)| *k != pivot).map(|(_, g)| g - g0 * r(linalg::tr_re(g) / t0)).collect();
    let center = identity(n) / r(n as f64);
    let mut lmi = Lmi::new();
    let b0 = lmi.add_block(2 * rk);
    let b1 = lmi.add_block(n);
    let x = crate::sdp::ComplexVar::new(&mut lmi, rk, rk, |i, j| if i == j { 1.0 } else { 0.0 });
    x.place(&mut lmi, b0, 0, rk);
    lmi.add_const(b0, 0, &compress(rho));
    lmi.add_const(b0, rk, &compress(&center));
    lmi.add_const(b1, 0, &center);
    let mut vars = Vec::with_capacity(traceless.len());
    for t in &traceless {
        let v = lmi.add_var(0.0);
        lmi.add_term(v, b0, rk, &compress(t));
        lmi.add_term(v, b1, 0, t);
        vars.push(v);
    }
    let sol = lmi.solve()?;
    let mut s = center;
    for (t, &v) in traceless.iter().zip(&vars) {
        s += t * r(sol.y[v]);
    }
    Ok(normalize_state(&s))
}

fn finite_div(kind: DivergenceKind, p: &CMatrix, q: &CMatrix) -> Result<f64> {
    Ok(div(kind, p, q)?.to_f64())
}

/// min_{σ ∈ CQ_W} D_K(ρ‖σ), A classical in basis `w`. Returns (value, σ).
pub fn cq_divergence(kind: DivergenceKind, rho: &CMatrix, da: usize, db: usize, w: &CMatrix) -> Result<(f64, CMatrix)> {
    let sigma = match kind {
        DivergenceKind::VonNeumann => {
            let s = crate::premeasurement::decohere(rho, w, da, db);
            return Ok((vn_entropy_of(&s) - vn_entropy_of(rho), s));
        }
        DivergenceKind::Renyi(a) => {
            // Blocks τ_j ∝ X_j^{1/α} with X_j = ⟨w_j|ρ^α|w_j⟩.
            let ra = pow_psd(rho, a);
            let mut s = CMatrix::zeros(da * db, da * db);
            for j in 0..w.ncols() {
                let bra = kron(&column(w, j).adjoint(), &identity(db));
                let xj = hermitize(&(&bra * &ra * bra.adjoint()));
                s += kron(&projector(&column(w, j)), &pow_psd(&xj, 1.0 / a));
            }
            normalize_state(&s)
        }
        DivergenceKind::Dmax => span_dmax(rho, &cq_generators(w, db))?,
        DivergenceKind::Dfid => span_max_fid(rho, &cq_generators(w, db))?,
    };
    Ok((finite_div(kind, rho, &sigma)?, sigma))
}

/// min_{σ ∈ CC_{W,V}} D_K(ρ‖σ). Returns (value, σ).
pub fn cc_divergence(kind: DivergenceKind, rho: &CMatrix, w: &CMatrix, v: &CMatrix) -> Result<(f64, CMatrix)> {
    let u = kron(w, v);
    let sigma = match kind {
        DivergenceKind::VonNeumann | DivergenceKind::Renyi(_) => {
            let base = match kind {
                DivergenceKind::Renyi(a) => pow_psd(rho, a),
                _ => rho.clone(),
            };
            let p = linalg::diagonal_re(&(u.adjoint() * &base * &u));
            let q: Vec<f64> = match kind {
                DivergenceKind::Renyi(a) => p.iter().map(|x| x.max(0.0).powf(1.0 / a)).collect(),
                _ => p.iter().map(|x| x.max(0.0)).collect(),
            };
            let t: f64 = q.iter().sum();
            let d = linalg::diag_real(&q.iter().map(|x| x / t).collect::<Vec<_>>());
            let s = hermitize(&(&u * d * u.adjoint()));
            if kind == DivergenceKind::VonNeumann {
                let probs: Vec<f64> = q.iter().map(|x| x / t).collect();
                return Ok((shannon(&probs) - vn_entropy_of(rho), s));
            }
            s
        }
        DivergenceKind::Dmax => span_dmax(rho, &cc_generators(w, v))?,
        DivergenceKind::Dfid => span_max_fid(rho, &cc_generators(w, v))?,
    };
    Ok((finite_div(kind, rho, &sigma)?, sigma))
}

/// One-way discord for rank-one effects on A: H(A) − H(AB) + Σ_k p_k H(ρ_{B|k}).
pub fn discord_one_way_value(rho: &CMatrix, da: usize, db: usize, effects: &[CMatrix]) -> Result<f64> {
    let rho_a = linalg::partial_trace(rho, &[da, db], &[0])?;
    let mut cond = 0.0;
    for e in effects {
        let t = hermitize(&linalg::partial_trace(&(kron(e, &identity(db)) * rho), &[da, db], &[1])?);
        let p = t.trace().re;
        if p > 1e-300 {
            cond += vn_entropy_of(&t) + p * p.log2();
        }
    }
    Ok(vn_entropy_of(&rho_a) - vn_entropy_of(rho) + cond)
}

/// Two-way discord: I(ρ) − I(p) with p_{jk} = Tr[(E_j ⊗ F_k) ρ].
pub fn discord_two_way_value(rho: &CMatrix, da: usize, db: usize, ea: &[CMatrix], eb: &[CMatrix]) -> Result<f64> {
    let ra = linalg::partial_trace(rho, &[da, db], &[0])?;
    let rb = linalg::partial_trace(rho, &[da, db], &[1])?;
    let mi = vn_entropy_of(&ra) + vn_entropy_of(&rb) - vn_entropy_of(rho);
    let mut joint = Vec::with_capacity(ea.len() * eb.len());
    let mut pa = vec![0.0; ea.len()];
    let mut pb = vec![0.0; eb.len()];
    for (j, e) in ea.iter().enumerate() {
        for (k, f) in eb.iter().enumerate() {
            let p = linalg::tr_prod_re(&kron(e, f), rho).max(0.0);
            joint.push(p);
            pa[j] += p;
            pb[k] += p;
        }
    }
    Ok(mi - (shannon(&pa) + shannon(&pb) - shannon(&joint)))
}

// ---------------------------------------------------------------------------
// Parametrizations and the generic search driver

/// U = U_seed · exp(iH(θ)) with H off-diagonal (diagonal phases do not change the basis).
fn rotate(seed: &CMatrix, theta: &[f64]) -> CMatrix {
    let d = seed.nrows();
    let mut p = vec![0.0; d];
    p.extend_from_slice(theta);
    seed * linalg::unitary_exp(&linalg::hermitian_from_params(d, &p))
}

fn rotation_params(d: usize) -> usize {
    d * (d - 1)
}

/// Rank-one POVM with K outcomes from an arbitrary K×d matrix via its polar factor.
fn povm_from_params(d: usize, k: usize, p: &[f64]) -> Vec<CMatrix> {
    let m = CMatrix::from_fn(k, d, |i, j| linalg::c(p[2 * (i * d + j)], p[2 * (i * d + j) + 1]));
    let gram = hermitize(&(m.adjoint() * &m));
    let u = &m * eig_unchecked(&gram).apply(|x| if x > 1e-14 { 1.0 / x.sqrt() } else { 0.0 }, false);
    (0..k)
        .map(|i| {
            let row = u.row(i).adjoint();
            let v = CMatrix::from_column_slice(d, 1, row.as_slice());
            &v * v.adjoint()
        })
        .collect()
}

fn povm_params_from_basis(w: &CMatrix, k: usize) -> Vec<f64> {
    let d = w.nrows();
    let mut p = vec![0.0; 2 * k * d];
    for i in 0..d {
        for j in 0..d {
            // Row i of the isometry is ⟨w_i|.
            let z = w[(j, i)].conj();
            p[2 * (i * d + j)] = z.re;
            p[2 * (i * d + j) + 1] = z.im;
        }
    }
    p
}

pub(crate) struct Found {
    pub(crate) bases: Vec<CMatrix>,
    pub(crate) value: f64,
    pub(crate) diag: OptimizerDiag,
}

/// Minimize `f` over tuples of unitaries with the given dimensions. Each seed
/// tuple is refined locally; random Haar tuples are added as further starts.
pub(crate) fn basis_search(
    f: &dyn Fn(&[CMatrix]) -> f64,
    dims: &[usize],
    seeds: &[Vec<CMatrix>],
    cfg: &SearchConfig,
) -> Result<Found> {
    let mut starts: Vec<Vec<CMatrix>> = seeds.iter().filter(|s| s.len() == dims.len()).cloned().collect();
    let mut rng = rng_from_seed(cfg.seed ^ 0x5EED_BA5E);
    for _ in 0..cfg.random_starts {
        starts.push(dims.iter().map(|&d| random_unitary(d, &mut rng)).collect());
    }
    if starts.is_empty() {
        starts.push(dims.iter().map(|&d| identity(d)).collect());
    }
    let np: Vec<usize> = dims.iter().map(|&d| rotation_params(d)).collect();
    let total: usize = np.iter().sum();
    let mut best: Option<Found> = None;
    let mut diag = OptimizerDiag::default();
    for s in &starts {
        let unpack = |x: &[f64]| -> Vec<CMatrix> {
            let mut off = 0;
            s.iter()
                .zip(&np)
                .map(|(u, &n)| {
                    let b = rotate(u, &x[off..off + n]);
                    off += n;
                    b
                })
                .collect()
        };
        let obj = |x: &[f64]| f(&unpack(x));
        let res = minimize(&obj, &vec![0.0; total], &cfg.search)?;
        diag.iterations += res.diag.iterations;
        diag.restarts += res.diag.restarts;
        diag.starts += 1;
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            diag.final_step = res.diag.final_step;
            diag.converged = res.diag.converged;
            best = Some(Found { bases: unpack(&res.x), value: res.value, diag: OptimizerDiag::default() });
        }
    }
    let mut b = best.expect("at least one start");
    b.diag = diag;
    Ok(b)
}

/// Closed-form stand-in used to steer basis searches for the SDP-backed kinds.
pub(crate) fn surrogate(kind: DivergenceKind) -> Option<DivergenceKind> {
    match kind {
        DivergenceKind::Dmax => Some(DivergenceKind::Renyi(2.0)),
        DivergenceKind::Dfid => Some(DivergenceKind::Renyi(0.5)),
        _ => None,
    }
}

/// Search with `f`, or for SDP-backed kinds: search with the surrogate `g`,
/// then rank all starts by `f` and polish the best one with a short budget.
pub(crate) fn steered_search(
    kind: DivergenceKind,
    f: &dyn Fn(&[CMatrix]) -> f64,
    g: &dyn Fn(&[CMatrix]) -> f64,
    dims: &[usize],
    seeds: &[Vec<CMatrix>],
    cfg: &SearchConfig,
) -> Result<Found> {
    if surrogate(kind).is_none() {
        return basis_search(f, dims, seeds, cfg);
    }
    let rough = basis_search(g, dims, seeds, cfg)?;
    let mut cands: Vec<Vec<CMatrix>> = vec![rough.bases.clone()];
    cands.extend(seeds.iter().filter(|s| s.len() == dims.len()).cloned());
    let best = cands
        .iter()
        .map(|b| (f(b), b))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, b)| b.clone())
        .expect("non-empty");
    let polish = SearchConfig {
        random_starts: 0,
        search: SearchOptions { max_iters: cfg.polish_iters, sd_tol: 1e-10, restarts: 1, step: 0.05 },
        ..*cfg
    };
    let mut fin = basis_search(f, dims, &[best], &polish)?;
    fin.diag.iterations += rough.diag.iterations;
    fin.diag.starts += rough.diag.starts;
    Ok(fin)
}

pub(crate) fn marginal_eigenbasis(rho: &CMatrix, da: usize, db: usize, keep: usize) -> Result<CMatrix> {
    let m = linalg::partial_trace(rho, &[da, db], &[keep])?;
    Ok(eig_unchecked(&hermitize(&m)).vectors)
}

pub(crate) fn swap(rho: &CMatrix, da: usize, db: usize) -> CMatrix {
    linalg::permute_subsystems(rho, &[da, db], &[1, 0]).expect("two factors")
}

/// Bases (W on A, V on B) diagonalizing the collapse candidate of an MQ witness:
/// V is assembled block by block from eigenvectors of X_j σ X_j on range X_j.
pub fn witness_bases(w: &MqWitness, sigma: &CMatrix) -> (CMatrix, CMatrix) {
    let db = sigma.nrows();
    let mut v = CMatrix::zeros(db, db);
    let mut col = 0;
    for x in &w.pvm_x {
        let range = eig_unchecked(&hermitize(x)).support_basis();
        if range.ncols() == 0 {
            continue;
        }
        let blk = hermitize(&(range.adjoint() * sigma * &range));
        let e = eig_unchecked(&blk);
        let vecs = &range * &e.vectors;
        for k in 0..vecs.ncols() {
            if col < db {
                v.set_column(col, &vecs.column(k));
                col += 1;
            }
        }
    }
    if col < db {
        v = linalg::complete_basis(&v.columns(0, col).into_owned());
    }
    (w.basis_w.clone(), v)
}

/// Σ_j |W_j⟩⟨W_j| ⊗ X_j σ X_j.
pub fn cc_candidate(w: &CMatrix, xs: &[CMatrix], sigma: &CMatrix) -> CMatrix {
    let n = w.nrows() * sigma.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (j, x) in xs.iter().enumerate() {
        out += kron(&projector(&column(w, j)), &(x * sigma * x));
    }
    hermitize(&out)
}

pub(crate) fn mq_witness(rho: &DensityOperator) -> Option<MqWitness> {
    match is_mq(rho, CLASS_TOL) {
        Ok(v) if v.member => match v.witness {
            Witness::Mq(w) => Some(*w),
            _ => None,
        },
        _ => None,
    }
}

/// Seed pairs (W, V): marginal eigenbases, identity, and the MQ witness when present.
pub(crate) fn default_seed_pairs(rho: &DensityOperator) -> Result<Vec<(CMatrix, CMatrix)>> {
    let (da, db) = rho.two_party()?;
    let mut seeds = Vec::new();
    if let Some(w) = mq_witness(rho) {
        let rho_b = linalg::partial_trace(&rho.mat, &[da, db], &[1])?;
        seeds.push(witness_bases(&w, &hermitize(&rho_b)));
    }
    seeds.push((marginal_eigenbasis(&rho.mat, da, db, 0)?, marginal_eigenbasis(&rho.mat, da, db, 1)?));
    seeds.push((identity(da), identity(db)));
    Ok(seeds)
}

pub(crate) fn neg_cond_lower(kind: DivergenceKind, rho: &DensityOperator) -> Result<f64> {
    let h = cond_entropy(kind, rho, Cut::OnSecond)?;
    Ok(-h.bound.unwrap_or(h.value))
}

// ---------------------------------------------------------------------------
// Δ measures

/// Two-way quantumness Δ↔ = min over CC states. Extra seed pairs are tried first.
pub fn delta_two_way_seeded(
    kind: DivergenceKind,
    rho: &DensityOperator,
    extra: &[(CMatrix, CMatrix)],
    cfg: &SearchConfig,
) -> Result<MeasureReport> {
    kind.validate()?;
    let (da, db) = rho.two_party()?;
    let mut seeds: Vec<Vec<CMatrix>> = extra.iter().map(|(w, v)| vec![w.clone(), v.clone()]).collect();
    seeds.extend(default_seed_pairs(rho)?.into_iter().map(|(w, v)| vec![w, v]));
    let m = &rho.mat;
    let f = |b: &[CMatrix]| cc_divergence(kind, m, &b[0], &b[1]).map(|x| x.0).unwrap_or(f64::INFINITY);
    let sk = surrogate(kind).unwrap_or(kind);
    let g = |b: &[CMatrix]| cc_divergence(sk, m, &b[0], &b[1]).map(|x| x.0).unwrap_or(f64::INFINITY);
    let found = steered_search(kind, &f, &g, &[da, db], &seeds, cfg)?;
    let lower = neg_cond_lower(kind, rho)?.max(0.0);
    let mut rep = MeasureReport::new(MeasureName::DeltaTwoWay, kind, lower.min(found.value), found.value, "basis_search");
    rep.value = Some(found.value);
    rep.witness = Some(MeasureWitness { kind: "bases", matrices: found.bases });
    rep.diagnostics.optimizer = Some(found.diag);
    rep.diagnostics.note = Some("best-found upper bound; lower end from the conditional entropy".into());
    Ok(rep)
}

pub fn delta_two_way(kind: DivergenceKind, rho: &DensityOperator, cfg: &SearchConfig) -> Result<MeasureReport> {
    delta_two_way_seeded(kind, rho, &[], cfg)
}

/// One-way quantumness with `side` classical (Side::A gives Δ^{A|B}).
pub fn delta_one_way_seeded(
    kind: DivergenceKind,
    rho: &DensityOperator,
    side: Side,
    extra: &[CMatrix],
    cfg: &SearchConfig,
) -> Result<MeasureReport> {
    kind.validate()?;
    let (da, db) = rho.two_party()?;
    let pairs = default_seed_pairs(rho)?;
    let (m, dc, dq, mut seeds): (CMatrix, usize, usize, Vec<Vec<CMatrix>>) = match side {
        Side::A => (rho.mat.clone(), da, db, pairs.iter().map(|p| vec![p.0.clone()]).collect()),
        Side::B => (swap(&rho.mat, da, db), db, da, pairs.iter().map(|p| vec![p.1.clone()]).collect()),
    };
    let mut all: Vec<Vec<CMatrix>> = extra.iter().map(|w| vec![w.clone()]).collect();
    all.append(&mut seeds);
    let f = |b: &[CMatrix]| cq_divergence(kind, &m, dc, dq, &b[0]).map(|x| x.0).unwrap_or(f64::INFINITY);
    let sk = surrogate(kind).unwrap_or(kind);
    let g = |b: &[CMatrix]| cq_divergence(sk, &m, dc, dq, &b[0]).map(|x| x.0).unwrap_or(f64::INFINITY);
    let found = steered_search(kind, &f, &g, &[dc], &all, cfg)?;
    let lower = neg_cond_lower(kind, rho)?.max(0.0);
    let name = if side == Side::A { MeasureName::DeltaAB } else { MeasureName::DeltaBA };
    let mut rep = MeasureReport::new(name, kind, lower.min(found.value), found.value, "basis_search");
    rep.value = Some(found.value);
    rep.witness = Some(MeasureWitness { kind: "basis", matrices: found.bases });
    rep.diagnostics.optimizer = Some(found.diag);
    rep.diagnostics.note = Some("best-found upper bound; lower end from the conditional entropy".into());
    Ok(rep)
}

pub fn delta_one_way(kind: DivergenceKind, rho: &DensityOperator, side: Side, cfg: &SearchConfig) -> Result<MeasureReport> {
    delta_one_way_seeded(kind, rho, side, &[], cfg)
}

// ---------------------------------------------------------------------------
// δ measures (von Neumann mutual information)

/// One-way discord δ with the measurement on `side`.
pub fn discord_one_way_seeded(rho: &DensityOperator, side: Side, extra: &[CMatrix], cfg: &SearchConfig) -> Result<MeasureReport> {
    let (da, db) = rho.two_party()?;
    let pairs = default_seed_pairs(rho)?;
    let (m, dm, dr, mut seeds): (CMatrix, usize, usize, Vec<CMatrix>) = match side {
        Side::A => (rho.mat.clone(), da, db, pairs.iter().map(|p| p.0.clone()).collect()),
        Side::B => (swap(&rho.mat, da, db), db, da, pairs.iter().map(|p| p.1.clone()).collect()),
    };
    let mut all: Vec<CMatrix> = extra.to_vec();
    all.append(&mut seeds);
    let (value, witness, diag) = match cfg.povm {
        PovmMode::ProjectiveRank1 => {
            let f = |b: &[CMatrix]| discord_one_way_value(&m, dm, dr, &basis_projectors(&b[0])).unwrap_or(f64::INFINITY);
            let starts: Vec<Vec<CMatrix>> = all.iter().map(|w| vec![w.clone()]).collect();
            let found = basis_search(&f, &[dm], &starts, cfg)?;
            (found.value, MeasureWitness { kind: "basis", matrices: found.bases }, found.diag)
        }
        PovmMode::GeneralRank1Capped => {
            let k = dm * dm;
            let f = |p: &[f64]| discord_one_way_value(&m, dm, dr, &povm_from_params(dm, k, p)).unwrap_or(f64::INFINITY);
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut diag = OptimizerDiag::default();
            let mut rng = rng_from_seed(cfg.seed ^ 0x9011);
            let mut starts: Vec<Vec<f64>> = all.iter().map(|w| povm_params_from_basis(w, k)).collect();
            for _ in 0..cfg.random_starts {
                starts.push((0..2 * k * dm).map(|_| rng.random_range(-1.0..1.0)).collect());
            }
            for s in &starts {
                let res = minimize(&f, s, &cfg.search)?;
                diag.iterations += res.diag.iterations;
                diag.starts += 1;
                if best.as_ref().is_none_or(|b| res.value < b.1) {
                    diag.converged = res.diag.converged;
                    best = Some((res.x, res.value));
                }
            }
            let (x, v) = best.expect("starts");
            (v, MeasureWitness { kind: "povm", matrices: povm_from_params(dm, k, &x) }, diag)
        }
    };
    let ic = neg_cond_lower(DivergenceKind::VonNeumann, rho)?;
    let name = if side == Side::A { MeasureName::DiscordAB } else { MeasureName::DiscordBA };
    let mut rep = MeasureReport::new(name, DivergenceKind::VonNeumann, ic.max(0.0).min(value), value, "basis_search");
    rep.value = Some(value);
    rep.witness = Some(witness);
    rep.diagnostics.optimizer = Some(diag);
    rep.diagnostics.note = Some(match cfg.povm {
        PovmMode::ProjectiveRank1 => "rank-one projective measurements".into(),
        PovmMode::GeneralRank1Capped => format!("rank-one POVMs capped at {} outcomes", dm * dm),
    });
    Ok(rep)
}

/// Two-way discord δ↔ over rank-one projective measurements on both sides.
pub fn discord_two_way_seeded(rho: &DensityOperator, extra: &[(CMatrix, CMatrix)], cfg: &SearchConfig) -> Result<MeasureReport> {
    let (da, db) = rho.two_party()?;
    let mut seeds: Vec<Vec<CMatrix>> = extra.iter().map(|(w, v)| vec![w.clone(), v.clone()]).collect();
    seeds.extend(default_seed_pairs(rho)?.into_iter().map(|(w, v)| vec![w, v]));
    let m = &rho.mat;
    let f = |b: &[CMatrix]| {
        discord_two_way_value(m, da, db, &basis_projectors(&b[0]), &basis_projectors(&b[1])).unwrap_or(f64::INFINITY)
    };
    let found = basis_search(&f, &[da, db], &seeds, cfg)?;
    let ic = neg_cond_lower(DivergenceKind::VonNeumann, rho)?;
    let mut rep =
        MeasureReport::new(MeasureName::DiscordTwoWay, DivergenceKind::VonNeumann, ic.max(0.0).min(found.value), found.value, "basis_search");
    rep.value = Some(found.value);
    rep.witness = Some(MeasureWitness { kind: "bases", matrices: found.bases });
    rep.diagnostics.optimizer = Some(found.diag);
    rep.diagnostics.note = Some("rank-one projective measurements on both sides".into());
    Ok(rep)
}

/// δ on one side (`Some`) or both sides (`None`).
pub fn discord_delta(rho: &DensityOperator, side: Option<Side>, cfg: &SearchConfig) -> Result<MeasureReport> {
    match side {
        Some(s) => discord_one_way_seeded(rho, s, &[], cfg),
        None => discord_two_way_seeded(rho, &[], cfg),
    }
}

// ---------------------------------------------------------------------------
// Collapse certificates

#[derive(Debug, Clone, Serialize)]
pub struct CollapseCertificate {
    pub state_id: String,
    pub kind: DivergenceKind,
    /// Smoothing radius; 0 for the plain certificate.
    pub epsilon: f64,
    /// Certified lower bound on −H_K(A|B).
    pub lower: f64,
    /// D_K(ρ ‖ Σ_j |W_j⟩⟨W_j| ⊗ X_j σ* X_j), an upper bound on Δ↔.
    pub upper: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub collapsed: bool,
    pub collapsed_measures: Vec<MeasureName>,
    pub unit: &'static str,
    #[serde(serialize_with = "ser_mat")]
    pub register_basis: CMatrix,
    #[serde(serialize_with = "ser_mat")]
    pub optimal_sigma: CMatrix,
    #[serde(serialize_with = "ser_mat")]
    pub candidate_cc: CMatrix,
}

/// Short deterministic identifier of a state (FNV-1a over its JSON encoding).
pub fn state_id(rho: &DensityOperator) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in crate::io::state_to_json(rho).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{:016x}", h)
}

fn collapse_list(kind: DivergenceKind) -> Vec<MeasureName> {
    use MeasureName::*;
    let mut v = vec![NegCondEntropy, Entanglement, DeltaAB, DeltaBA, DeltaTwoWay];
    if kind == DivergenceKind::VonNeumann {
        v.extend([
            DistillableEntanglement,
            DistillableKey,
            RelEntEntanglementReg,
            DiscordABReg,
            DiscordBAReg,
            DiscordAB,
            DiscordBA,
            DeltaTwoWayReg,
            DiscordTwoWayReg,
            DiscordTwoWay,
        ]);
    }
    v
}

/// Two-sided certificate for an MQ state (register = first party).
pub fn certify_collapse(rho: &DensityOperator, kind: DivergenceKind, tol: f64) -> Result<CollapseCertificate> {
    kind.validate()?;
    rho.two_party()?;
    let verdict = is_mq(rho, CLASS_TOL)?;
    let w = match (verdict.member, verdict.witness) {
        (true, Witness::Mq(w)) => *w,
        _ => return Err(Error::NotMq(format!("reconstruction residual {:.3e}", verdict.residual))),
    };
    certify_with_witness(rho, kind, tol, &w)
}

pub fn certify_with_witness(rho: &DensityOperator, kind: DivergenceKind, tol: f64, w: &MqWitness) -> Result<CollapseCertificate> {
    let h = cond_entropy(kind, rho, Cut::OnSecond)?;
    let lower = -h.bound.unwrap_or(h.value);
    let sigma = h.optimal_sigma.mat.clone();
    let cand = cc_candidate(&w.basis_w, &w.pvm_x, &sigma);
    let upper = match div(kind, &rho.mat, &cand)? {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => f64::INFINITY,
    };
    let gap = upper - lower;
    let collapsed = gap <= tol;
    Ok(CollapseCertificate {
        state_id: state_id(rho),
        kind,
        epsilon: 0.0,
        lower,
        upper,
        gap,
        tolerance: tol,
        collapsed,
        collapsed_measures: if collapsed { collapse_list(kind) } else { Vec::new() },
        unit: "bits",
        register_basis: w.basis_w.clone(),
        optimal_sigma: sigma,
        candidate_cc: cand,
    })
}

// ---------------------------------------------------------------------------
// Entanglement bracket and the hierarchy

pub fn entanglement_bracket(kind: DivergenceKind, rho: &DensityOperator, cfg: &SearchConfig) -> Result<MeasureReport> {
    kind.validate()?;
    let (da, db) = rho.two_party()?;
    if da * db <= 6 {
        let sep = is_separable_small(rho, CLASS_TOL)?;
        if sep.member && sep.decided {
            let mut rep = MeasureReport::new(MeasureName::Entanglement, kind, 0.0, 0.0, "ppt_certificate");
            rep.value = Some(0.0);
            rep.exact = true;
            rep.diagnostics.note = Some("separable by the PPT criterion (exact in this dimension)".into());
            return Ok(rep);
        }
    }
    if let Some(w) = mq_witness(rho) {
        let cert = certify_with_witness(rho, kind, 1e-6, &w)?;
        if cert.collapsed {
            let lower = cert.lower.max(0.0);
            let mut rep = MeasureReport::new(MeasureName::Entanglement, kind, lower, cert.upper.max(lower), "collapse_certificate");
            rep.value = Some(lower);
            rep.exact = true;
            rep.tolerance = cert.tolerance;
            return Ok(rep);
        }
    }
    let a = delta_one_way(kind, rho, Side::A, cfg)?;
    let b = delta_one_way(kind, rho, Side::B, cfg)?;
    let lower = neg_cond_lower(kind, rho)?.max(0.0);
    let upper = a.upper.min(b.upper).max(lower);
    let mut rep = MeasureReport::new(MeasureName::Entanglement, kind, lower, upper, "bracket");
    rep.diagnostics.note = Some("no minimization over separable states; bracketed by −H_K(A|B) and one-way quantumness".into());
    Ok(rep)
}

fn neg_cond_report(kind: DivergenceKind, rho: &DensityOperator) -> Result<MeasureReport> {
    kind.validate()?;
    let h = cond_entropy(kind, rho, Cut::OnSecond)?;
    let mut neg = MeasureReport::new(MeasureName::NegCondEntropy, kind, -h.bound.unwrap_or(h.value), -h.value, "conditional_entropy");
    neg.value = Some(-h.value);
    neg.exact = true;
    neg.witness = Some(MeasureWitness { kind: "sigma_b", matrices: vec![h.optimal_sigma.mat.clone()] });
    Ok(neg)
}

/// Compute one named measure. The δ discords and the asymptotic entries are
/// von Neumann quantities; asymptotic entries come from the hierarchy table.
pub fn measure(name: MeasureName, kind: DivergenceKind, rho: &DensityOperator, cfg: &SearchConfig) -> Result<MeasureReport> {
    use MeasureName::*;
    kind.validate()?;
    let vn_only = matches!(name, DiscordAB | DiscordBA | DiscordTwoWay | GeneralizedDiscord) || name.is_asymptotic();
    if vn_only && kind != DivergenceKind::VonNeumann {
        return Err(Error::InvalidParameter(format!("{:?} is defined for the von Neumann kind only", name)));
    }
    match name {
        NegCondEntropy => neg_cond_report(kind, rho),
        Entanglement => entanglement_bracket(kind, rho, cfg),
        DeltaAB => delta_one_way(kind, rho, Side::A, cfg),
        DeltaBA => delta_one_way(kind, rho, Side::B, cfg),
        DeltaTwoWay => delta_two_way(kind, rho, cfg),
        DiscordAB => discord_delta(rho, Some(Side::A), cfg),
        DiscordBA => discord_delta(rho, Some(Side::B), cfg),
        DiscordTwoWay => discord_delta(rho, None, cfg),
        GeneralizedDiscord => generalized_discord(rho, DiscordBase::DeltaTwoWay, cfg),
        _ => {
            let table = hierarchy_table(rho, kind, cfg)?;
            Ok(find(&table, name).cloned().expect("von Neumann table lists every asymptotic entry"))
        }
    }
}

/// Every hierarchy member, computed in an order that lets each search start
/// from the previous optimum (Δ↔ first, then one-way Δ, then the discords).
pub fn hierarchy_table(rho: &DensityOperator, kind: DivergenceKind, cfg: &SearchConfig) -> Result<Vec<MeasureReport>> {
    let neg = neg_cond_report(kind, rho)?;
    let two = delta_two_way(kind, rho, cfg)?;
    let (w2, v2) = match &two.witness {
        Some(wt) => (wt.matrices[0].clone(), wt.matrices[1].clone()),
        None => unreachable!("two-way search always reports bases"),
    };
    let dab = delta_one_way_seeded(kind, rho, Side::A, std::slice::from_ref(&w2), cfg)?;
    let dba = delta_one_way_seeded(kind, rho, Side::B, std::slice::from_ref(&v2), cfg)?;
    let mut ent = entanglement_bracket(kind, rho, cfg)?;
    if !ent.exact {
        ent.upper = ent.upper.min(dab.upper).min(dba.upper).max(ent.lower);
    }
    let mut out = vec![neg.clone(), ent.clone(), dab.clone(), dba.clone(), two.clone()];
    if kind == DivergenceKind::VonNeumann {
        let ic = neg.lower;
        let d2 = discord_two_way_seeded(rho, &[(w2.clone(), v2.clone())], cfg)?;
        let (wd, vd) = match &d2.witness {
            Some(wt) => (wt.matrices[0].clone(), wt.matrices[1].clone()),
            None => unreachable!(),
        };
        let dcfg = SearchConfig { povm: PovmMode::ProjectiveRank1, ..*cfg };
        let dab_s = discord_one_way_seeded(rho, Side::A, &[wd, w2.clone()], &dcfg)?;
        let dba_s = discord_one_way_seeded(rho, Side::B, &[vd, v2.clone()], &dcfg)?;
        let bracket = |name: MeasureName, lo: f64, hi: f64| {
            let mut r = MeasureReport::new(name, kind, lo, hi.max(lo), "hierarchy_bracket");
            r.diagnostics.note = Some("asymptotic measure, not computed; bounded by its hierarchy neighbours".into());
            r
        };
        let ed_hi = ent.upper.min(dab_s.upper).min(dba_s.upper);
        let lo = ic.max(0.0).min(ed_hi);
        out.push(bracket(MeasureName::DistillableEntanglement, lo, ed_hi));
        out.push(bracket(MeasureName::DistillableKey, lo, ed_hi));
        let reg_ab = dab.upper;
        let reg_ba = dba.upper;
        out.push(bracket(MeasureName::RelEntEntanglementReg, lo, ent.upper.min(reg_ab).min(reg_ba)));
        out.push(bracket(MeasureName::DiscordABReg, lo, reg_ab));
        out.push(bracket(MeasureName::DiscordBAReg, lo, reg_ba));
        out.push(bracket(MeasureName::DiscordTwoWayReg, lo, two.upper));
        out.push(bracket(MeasureName::DeltaTwoWayReg, lo, two.upper));
        out.push(dab_s);
        out.push(dba_s);
        out.push(d2);
    }
    Ok(out)
}

fn find<'a>(t: &'a [MeasureReport], n: MeasureName) -> Option<&'a MeasureReport> {
    t.iter().find(|m| m.name == n)
}

/// Worst slack over the hierarchy orderings, comparing each upper-bound entry
/// against the lower anchors it must dominate. Negative means violated.
pub fn hierarchy_slack(table: &[MeasureReport]) -> f64 {
    use MeasureName::*;
    let mut worst = f64::INFINITY;
    let mut check = |a: Option<&MeasureReport>, b: Option<&MeasureReport>| {
        if let (Some(a), Some(b)) = (a, b) {
            worst = worst.min(b.upper - a.lower);
        }
    };
    let chains: [(MeasureName, MeasureName); 14] = [
        (NegCondEntropy, Entanglement),
        (Entanglement, DeltaAB),
        (Entanglement, DeltaBA),
        (DeltaAB, DeltaTwoWay),
        (DeltaBA, DeltaTwoWay),
        (NegCondEntropy, DeltaTwoWay),
        (NegCondEntropy, DiscordAB),
        (NegCondEntropy, DiscordBA),
        (DiscordAB, DiscordTwoWay),
        (DiscordBA, DiscordTwoWay),
        (DiscordTwoWay, DeltaTwoWay),
        (NegCondEntropy, DistillableEntanglement),
        (DistillableEntanglement, DistillableKey),
        (RelEntEntanglementReg, DeltaTwoWay),
    ];
    for (a, b) in chains {
        check(find(table, a), find(table, b));
    }
    // Upper-bound entries must also respect each other where seeding makes that exact.
    for (a, b) in [(DeltaAB, DeltaTwoWay), (DeltaBA, DeltaTwoWay), (DiscordAB, DiscordTwoWay), (DiscordTwoWay, DeltaTwoWay)] {
        if let (Some(x), Some(y)) = (find(table, a), find(table, b)) {
            worst = worst.min(y.upper - x.upper);
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Uniqueness gap and generalized discord

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub ic: f64,
    pub discord_ab: f64,
    pub discord_ac: f64,
    /// |I_c − (δ(A|B) − δ(A|C))|.
    pub identity_residual: f64,
    /// δ(A|C), positive exactly when the state is not MQ.
    pub gap: f64,
    pub unit: &'static str,
    #[serde(serialize_with = "ser_mat")]
    pub basis: CMatrix,
}

/// Coherent information against the two one-way discords of a purification.
pub fn uniqueness_gap(rho: &DensityOperator, cfg: &SearchConfig) -> Result<UniquenessReport> {
    let (da, db) = rho.two_party()?;
    let psi = purify(rho).density();
    let dc = psi.dims[2];
    let ac = DensityOperator { mat: linalg::partial_trace(&psi.mat, &[da, db, dc], &[0, 2])?, dims: vec![da, dc], trace_mode: rho.trace_mode };
    let ic = -cond_entropy(DivergenceKind::VonNeumann, rho, Cut::OnSecond)?.value;
    let pcfg = SearchConfig { povm: PovmMode::ProjectiveRank1, ..*cfg };
    let basis_of = |r: &MeasureReport| r.witness.as_ref().map(|w| w.matrices[0].clone()).expect("basis witness");
    let mut ab = discord_one_way_seeded(rho, Side::A, &[], &pcfg)?;
    let mut acr = discord_one_way_seeded(&ac, Side::A, &[basis_of(&ab)], &pcfg)?;
    // Both optima sit at the same measurement, so cross-seed once more.
    let ab2 = discord_one_way_seeded(rho, Side::A, &[basis_of(&acr)], &pcfg)?;
    if ab2.upper < ab.upper {
        ab = ab2;
    }
    let ac2 = discord_one_way_seeded(&ac, Side::A, &[basis_of(&ab)], &pcfg)?;
    if ac2.upper < acr.upper {
        acr = ac2;
    }
    let dab = ab.upper;
    let dac = acr.upper;
    Ok(UniquenessReport {
        ic,
        discord_ab: dab,
        discord_ac: dac,
        identity_residual: (ic - (dab - dac)).abs(),
        gap: dac,
        unit: "bits",
        basis: basis_of(&ab),
    })
}

/// Measures a generalized discord may be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscordBase {
    DeltaTwoWay,
    DiscordTwoWay,
    Entanglement,
}

/// Premeasure A in basis `w` and split as register | AB.
fn premeasured_split(rho: &DensityOperator, w: &CMatrix) -> Result<DensityOperator> {
    let pvm = Pvm::from_basis(w)?;
    premeasure_factor(rho, 0, &standard_isometry(&pvm))?.bipartite(1)
}

/// min over bases W of Q(M_W | AB). On the premeasured split every base
/// measure collapses to −H(M_W|AB), which is what the search minimizes; the
/// certificate at the optimum is kept in the diagnostics.
pub fn generalized_discord(rho: &DensityOperator, q: DiscordBase, cfg: &SearchConfig) -> Result<MeasureReport> {
    let (da, db) = rho.two_party()?;
    let f = |b: &[CMatrix]| {
        premeasured_split(rho, &b[0])
            .and_then(|s| cond_entropy(DivergenceKind::VonNeumann, &s, Cut::OnSecond))
            .map(|h| -h.value)
            .unwrap_or(f64::INFINITY)
    };
    let mut seeds = vec![vec![marginal_eigenbasis(&rho.mat, da, db, 0)?], vec![identity(da)]];
    if let Some(w) = mq_witness(rho) {
        seeds.insert(0, vec![w.basis_w]);
    }
    let found = basis_search(&f, &[da], &seeds, cfg)?;
    let w = found.bases[0].clone();
    let split = premeasured_split(rho, &w)?;
    let cert = certify_collapse(&split, DivergenceKind::VonNeumann, 1e-6)?;
    let mut rep = MeasureReport::new(MeasureName::GeneralizedDiscord, DivergenceKind::VonNeumann, 0.0, found.value, "basis_search");
    rep.lower = cert.lower.max(0.0).min(found.value);
    rep.value = Some(found.value);
    rep.witness = Some(MeasureWitness { kind: "basis", matrices: vec![w] });
    rep.diagnostics.optimizer = Some(found.diag);
    rep.diagnostics.note = Some(format!(
        "base measure {:?}; collapse certificate gap at the optimum {:.3e}",
        q, cert.gap
    ));
    Ok(rep)
}

/// Direct evaluation of the base measure on the premeasured split at basis `w`
/// (no collapse shortcut), for cross-checking [`generalized_discord`].
pub fn generalized_discord_direct(rho: &DensityOperator, w: &CMatrix, q: DiscordBase, cfg: &SearchConfig) -> Result<f64> {
    let split = premeasured_split(rho, w)?;
    Ok(match q {
        DiscordBase::DeltaTwoWay => delta_two_way(DivergenceKind::VonNeumann, &split, cfg)?.upper,
        DiscordBase::DiscordTwoWay => discord_two_way_seeded(&split, &[], cfg)?.upper,
        DiscordBase::Entanglement => entanglement_bracket(DivergenceKind::VonNeumann, &split, cfg)?.upper,
    })
}

// ---------------------------------------------------------------------------
// Bures dominance of the closest CC state

#[derive(Debug, Clone, Serialize)]
pub struct BuresReport {
    pub pass: bool,
    /// min over samples of F(ρ, α) − F(ρ, σ).
    pub worst_margin: f64,
    pub samples: usize,
    pub tolerance: f64,
}

pub fn bures_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    (2.0 - 2.0 * linalg::fidelity(rho, sigma)).max(0.0).sqrt()
}

pub fn bures_cc_dominance(rho: &DensityOperator, n_samples: usize, seed: u64) -> Result<BuresReport> {
    let (da, db) = rho.two_party()?;
    let w = mq_witness(rho).ok_or_else(|| Error::NotMq("state is not a premeasurement state".into()))?;
    let mut rng = rng_from_seed(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..n_samples {
        let terms = rng.random_range(1..=4);
        let sigma = random_separable(da, db, terms, &mut rng).mat;
        let sigma_s = hermitize(&linalg::partial_trace(&sigma, &[da, db], &[1])?);
        let alpha = cc_candidate(&w.basis_w, &w.pvm_x, &sigma_s);
        let margin = linalg::fidelity(&rho.mat, &alpha) - linalg::fidelity(&rho.mat, &sigma);
        worst = worst.min(margin);
    }
    let tol = 1e-9;
    Ok(BuresReport { pass: worst >= -tol, worst_margin: worst, samples: n_samples, tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::premeasurement::{fourier_basis, ket_state, premeasure, random_premeasurement};

    fn bell() -> DensityOperator {
        let s = 0.5f64.sqrt();
        DensityOperator::from_ket(&CMatrix::from_column_slice(4, 1, &[r(s), r(0.0), r(0.0), r(s)]), &[2, 2]).unwrap()
    }

    fn quick() -> SearchConfig {
        SearchConfig { random_starts: 3, ..Default::default() }
    }

    #[test]
    fn bell_state_measures_are_one_bit() {
        let b = bell();
        let cfg = quick();
        assert!((delta_two_way(DivergenceKind::VonNeumann, &b, &cfg).unwrap().upper - 1.0).abs() < 1e-9);
        assert!((delta_one_way(DivergenceKind::VonNeumann, &b, Side::A, &cfg).unwrap().upper - 1.0).abs() < 1e-9);
        assert!((discord_delta(&b, Some(Side::A), &cfg).unwrap().upper - 1.0).abs() < 1e-9);
        let e = entanglement_bracket(DivergenceKind::VonNeumann, &b, &cfg).unwrap();
        assert!(e.exact && (e.lower - 1.0).abs() < 1e-9);
    }

    #[test]
    fn x_premeasurement_of_zero_collapses_to_one_bit() {
        let iso = crate::premeasurement::build_isometry(&identity(2), &Pvm::from_basis(&fourier_basis(&identity(2))).unwrap()).unwrap();
        let s = premeasure(&ket_state(2, 0), &iso).unwrap().state;
        for k in DivergenceKind::all_standard() {
            let c = certify_collapse(&s, k, 1e-6).unwrap();
            assert!(c.collapsed, "{}: gap {}", k, c.gap);
            assert!((c.lower - 1.0).abs() < 1e-6 && (c.upper - 1.0).abs() < 1e-6, "{}: {} {}", k, c.lower, c.upper);
        }
    }

    #[test]
    fn cc_state_has_zero_quantumness() {
        let mut m = CMatrix::zeros(4, 4);
        for (i, p) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            m[(i, i)] = r(*p);
        }
        let rho = DensityOperator::new(m, &[2, 2]).unwrap();
        let cfg = quick();
        for k in [DivergenceKind::VonNeumann, DivergenceKind::Dmax, DivergenceKind::Dfid] {
            assert!(delta_two_way(k, &rho, &cfg).unwrap().upper.abs() < 1e-8, "{}", k);
        }
        assert!(discord_delta(&rho, None, &cfg).unwrap().upper.abs() < 1e-10);
    }

    #[test]
    fn product_of_mixed_states_counterexample() {
        let rho = DensityOperator::maximally_mixed(&[2, 2]);
        let u = uniqueness_gap(&rho, &quick()).unwrap();
        assert!((u.ic + 1.0).abs() < 1e-12);
        assert!(u.discord_ab.abs() < 1e-9);
        assert!((u.gap - 1.0).abs() < 1e-9);
        assert!(u.identity_residual < 1e-9);
    }

    #[test]
    fn premeasurement_certificates_close() {
        let mut rng = rng_from_seed(21);
        for _ in 0..3 {
            let s = random_premeasurement(3, &[2, 1], 3, &mut rng).unwrap().state;
            for k in DivergenceKind::all_standard() {
                let c = certify_collapse(&s, k, 1e-5).unwrap();
                assert!(c.gap >= -1e-9 && c.gap < 1e-5, "{}: {}", k, c.gap);
            }
        }
    }

    #[test]
    fn fixed_basis_forms_match_direct_divergence() {
        let mut rng = rng_from_seed(22);
        let rho = crate::states::random_state(&[2, 2], 3, &mut rng);
        let w = random_unitary(2, &mut rng);
        let v = random_unitary(2, &mut rng);
        for k in DivergenceKind::all_standard() {
            let (val, sigma) = cq_divergence(k, &rho.mat, 2, 2, &w).unwrap();
            assert!((val - div(k, &rho.mat, &sigma).unwrap().to_f64()).abs() < 1e-9);
            let (cval, _) = cc_divergence(k, &rho.mat, &w, &v).unwrap();
            assert!(cval >= val - 1e-8, "{}: CC {} below CQ {}", k, cval, val);
        }
    }

    #[test]
    fn povm_discord_not_above_projective() {
        let mut rng = rng_from_seed(23);
        let rho = crate::states::random_state(&[2, 2], 2, &mut rng);
        let p = discord_delta(&rho, Some(Side::A), &quick()).unwrap().upper;
        let cfg = SearchConfig { povm: PovmMode::GeneralRank1Capped, random_starts: 2, ..Default::default() };
        let q = discord_delta(&rho, Some(Side::A), &cfg).unwrap().upper;
        assert!(q <= p + 1e-9, "{} vs {}", q, p);
    }

    #[test]
    fn bures_dominance_on_premeasured_state() {
        let mut rng = rng_from_seed(24);
        let s = random_premeasurement(2, &[1, 1], 1, &mut rng).unwrap().state;
        let rep = bures_cc_dominance(&s, 100, 3).unwrap();
        assert!(rep.pass, "{}", rep.worst_margin);
    }
}
