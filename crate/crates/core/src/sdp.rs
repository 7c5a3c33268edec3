//! Small dense primal-dual interior-point solver for complex Hermitian LMIs.
//!
//! Problem form (LMI side):
//!
//! ```text
//!   maximize    b·y
//!   subject to  F0 + Σ_i y_i F_i ⪰ 0        (block diagonal, Hermitian blocks)
//! ```
//!
//! Internally this is the dual of `min ⟨C,X⟩ s.t. ⟨A_i,X⟩ = b_i, X ⪰ 0` with
//! `C = F0`, `A_i = −F_i`. Infeasible-start path following with the HKM search
//! direction and a Mehrotra predictor–corrector. Coefficient matrices are kept
//! sparse, which keeps the Schur complement cheap for the structured problems
//! in this crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitize, CMatrix, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Relative primal/dual infeasibility target.
    pub feas_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { max_iter: 120, gap_tol: 1e-11, feas_tol: 1e-11 }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    block: usize,
    row: usize,
    col: usize,
    val: C64,
}

/// Builder for `F0 + Σ y_i F_i ⪰ 0`, maximize `b·y`.
#[derive(Debug, Clone, Default)]
pub struct Lmi {
    blocks: Vec<usize>,
    f0: Vec<CMatrix>,
    terms: Vec<Vec<Entry>>,
    obj: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub y: Vec<f64>,
    /// Slack blocks F0 + Σ y_i F_i.
    pub slack: Vec<CMatrix>,
    /// Multiplier blocks (the `X` of the conic dual).
    pub multiplier: Vec<CMatrix>,
    /// b·y at the returned point (a lower bound on the optimum when feasible).
    pub objective: f64,
    /// ⟨F0, X⟩ (an upper bound on the optimum when the multiplier is feasible).
    pub bound: f64,
    pub rel_gap: f64,
    pub infeasibility: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Lmi {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, n: usize) -> usize {
        self.blocks.push(n);
        self.f0.push(CMatrix::zeros(n, n));
        self.blocks.len() - 1
    }

    pub fn add_var(&mut self, objective: f64) -> usize {
        self.terms.push(Vec::new());
        self.obj.push(objective);
        self.obj.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.blocks
    }

    /// Add a Hermitian matrix to the constant term of a block at an offset.
    pub fn add_const(&mut self, block: usize, offset: usize, m: &CMatrix) {
        let f = &mut self.f0[block];
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                f[(offset + i, offset + j)] += m[(i, j)];
            }
        }
    }

    pub fn add_const_entry(&mut self, block: usize, i: usize, j: usize, v: C64) {
        self.f0[block][(i, j)] += v;
        if i != j {
            self.f0[block][(j, i)] += v.conj();
        }
    }

    /// Add `v` at (i,j) and conj(v) at (j,i) of F_var in `block`.
    pub fn add_entry(&mut self, var: usize, block: usize, i: usize, j: usize, v: C64) {
        self.terms[var].push(Entry { block, row: i, col: j, val: v });
        if i != j {
            self.terms[var].push(Entry { block, row: j, col: i, val: v.conj() });
        }
    }

    /// Add a dense Hermitian matrix (placed at `offset`) to F_var.
    pub fn add_term(&mut self, var: usize, block: usize, offset: usize, m: &CMatrix) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm() > 0.0 {
                    self.terms[var].push(Entry { block, row: offset + i, col: offset + j, val: v });
                }
            }
        }
    }

    /// Add a general (non-Hermitian) rectangular matrix `m` at rows `ro`,
    /// cols `co` together with its adjoint at the transposed position.
    pub fn add_offdiag_term(&mut self, var: usize, block: usize, ro: usize, co: usize, m: &CMatrix) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm() > 0.0 {
                    self.terms[var].push(Entry { block, row: ro + i, col: co + j, val: v });
                    self.terms[var].push(Entry { block, row: co + j, col: ro + i, val: v.conj() });
                }
            }
        }
    }

    /// F0 + Σ y_i F_i for the given point.
    pub fn evaluate(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut s = self.f0.clone();
        for (i, t) in self.terms.iter().enumerate() {
            for e in t {
                s[e.block][(e.row, e.col)] += e.val * y[i];
            }
        }
        s
    }

    pub fn solve(&self) -> Result<SdpSolution> {
        self.solve_with(&SdpOptions::default())
    }

    pub fn solve_with(&self, opts: &SdpOptions) -> Result<SdpSolution> {
        Solver::new(self).run(opts)
    }
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y.iter()) {
            s += (p.conj() * q).re;
        }
    }
    s
}

fn fro_all(a: &[CMatrix]) -> f64 {
    inner(a, a).sqrt()
}

fn chol_inverse(m: &CMatrix) -> Option<CMatrix> {
    let ch = hermitize(m).cholesky()?;
    Some(hermitize(&ch.inverse()))
}

/// Largest α ≤ 1/0 such that x + α d stays PSD, via the Cholesky factor of x.
fn max_step(x: &CMatrix, d: &CMatrix) -> f64 {
    let ch = match hermitize(x).cholesky() {
        Some(ch) => ch,
        None => return 0.0,
    };
    let l = ch.l();
    let linv = match l.clone().try_inverse() {
        Some(v) => v,
        None => return 0.0,
    };
    let w = hermitize(&(&linv * d * linv.adjoint()));
    let lmin = crate::linalg::eig_unchecked(&w).values.last().copied().unwrap_or(0.0);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Solver<'a> {
    p: &'a Lmi,
    /// A_i = −F_i.
    a: Vec<Vec<Entry>>,
    c: Vec<CMatrix>,
    n_total: usize,
}

impl<'a> Solver<'a> {
    fn new(p: &'a Lmi) -> Self {
        let a = p
            .terms
            .iter()
            .map(|t| t.iter().map(|e| Entry { block: e.block, row: e.row, col: e.col, val: -e.val }).collect())
            .collect();
        let c = p.f0.iter().map(hermitize).collect();
        let n_total = p.blocks.iter().sum();
        Solver { p, a, c, n_total }
    }

    fn zeros(&self) -> Vec<CMatrix> {
        self.p.blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect()
    }

    /// ⟨A_i, M⟩ for all i.
    fn apply_a(&self, m: &[CMatrix]) -> Vec<f64> {
        self.a
            .iter()
            .map(|t| t.iter().map(|e| (e.val.conj() * m[e.block][(e.row, e.col)]).re).sum())
            .collect()
    }

    /// Σ_i y_i A_i.
    fn apply_at(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut out = self.zeros();
        for (i, t) in self.a.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for e in t {
                out[e.block][(e.row, e.col)] += e.val * y[i];
            }
        }
        out
    }

    fn a_norm(t: &[Entry]) -> f64 {
        t.iter().map(|e| e.val.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Schur complement M_ij = Re Tr(A_i X A_j Z⁻¹).
    fn schur(&self, x: &[CMatrix], zinv: &[CMatrix]) -> DMatrix<f64> {
        let m = self.a.len();
        let mut out = DMatrix::<f64>::zeros(m, m);
        // Per variable j, the blocks it touches and G_j = X A_j Z⁻¹ restricted to them.
        for j in 0..m {
            let tj = &self.a[j];
            if tj.is_empty() {
                continue;
            }
            let mut touched: Vec<usize> = tj.iter().map(|e| e.block).collect();
            touched.sort_unstable();
            touched.dedup();
            let mut g: Vec<Option<CMatrix>> = vec![None; self.p.blocks.len()];
            for &b in &touched {
                let nb = self.p.blocks[b];
                let mut gb = CMatrix::zeros(nb, nb);
                for e in tj.iter().filter(|e| e.block == b) {
                    // X[:, row] * val * Zinv[col, :]
                    let xc = x[b].column(e.row);
                    let zr = zinv[b].row(e.col);
                    for q in 0..nb {
                        let xq = xc[q] * e.val;
                        if xq == ZERO {
                            continue;
                        }
                        for pp in 0..nb {
                            gb[(q, pp)] += xq * zr[pp];
                        }
                    }
                }
                g[b] = Some(gb);
            }
            for i in 0..=j {
                let mut s = 0.0;
                for e in &self.a[i] {
                    if let Some(gb) = &g[e.block] {
                        // Tr(A_i G) with A_i = Σ val E_{row,col}: Σ val G[col,row]
                        s += (e.val * gb[(e.col, e.row)]).re;
                    }
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    fn initial_point(&self) -> (Vec<CMatrix>, Vec<f64>, Vec<CMatrix>) {
        let n = self.n_total as f64;
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut eta: f64 = 10.0f64.max(n.sqrt()).max(fro_all(&self.c));
        for (i, t) in self.a.iter().enumerate() {
            let an = Self::a_norm(t);
            xi = xi.max(n * (1.0 + self.p.obj[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        let x = self.p.blocks.iter().map(|&k| CMatrix::identity(k, k) * c(xi, 0.0)).collect();
        let z = self.p.blocks.iter().map(|&k| CMatrix::identity(k, k) * c(eta, 0.0)).collect();
        (x, vec![0.0; self.a.len()], z)
    }

    fn run(&self, opts: &SdpOptions) -> Result<SdpSolution> {
        let m = self.a.len();
        let nb = self.p.blocks.len();
        let b = &self.p.obj;
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cnorm = fro_all(&self.c);
        let (mut x, mut y, mut z) = self.initial_point();
        let mut best: Option<(f64, Vec<CMatrix>, Vec<f64>, Vec<CMatrix>, f64, f64)> = None;
        let mut iterations = 0;
        let mut converged = false;

        for it in 0..opts.max_iter {
            iterations = it;
            let ax = self.apply_a(&x);
            let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let aty = self.apply_at(&y);
            let rd: Vec<CMatrix> = (0..nb).map(|k| &self.c[k] - &z[k] - &aty[k]).collect();
            let pobj = inner(&self.c, &x);
            let dobj: f64 = b.iter().zip(&y).map(|(p, q)| p * q).sum();
            let gap = inner(&x, &z);
            let rel_gap = (pobj - dobj).abs().max(gap.abs()) / (1.0 + pobj.abs() + dobj.abs());
            let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
            let dinf = fro_all(&rd) / (1.0 + cnorm);
            let infeas = pinf.max(dinf);
            let score = rel_gap.max(infeas);
            if best.as_ref().map_or(true, |bst| score < bst.0) {
                best = Some((score, x.clone(), y.clone(), z.clone(), rel_gap, infeas));
            }
            if rel_gap < opts.gap_tol && infeas < opts.feas_tol {
                converged = true;
                break;
            }
            let mu = gap / self.n_total as f64;

            let mut zinv = Vec::with_capacity(nb);
            for zk in &z {
                match chol_inverse(zk) {
                    Some(v) => zinv.push(v),
                    None => return self.finish(best, iterations, false),
                }
            }
            let mut schur = self.schur(&x, &zinv);
            let scale = (0..m).fold(0.0f64, |acc, i| acc.max(schur[(i, i)].abs())).max(1e-300);
            let chol = match schur.clone().cholesky() {
                Some(ch) => ch,
                None => {
                    for i in 0..m {
                        schur[(i, i)] += 1e-13 * scale;
                    }
                    match schur.cholesky() {
                        Some(ch) => ch,
                        None => return self.finish(best, iterations, false),
                    }
                }
            };

            // X R_d Z⁻¹ term shared by predictor and corrector.
            let xrdz: Vec<CMatrix> = (0..nb).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();
            let a_xrdz = self.apply_a(&xrdz);

            let direction = |kmat: &[CMatrix]| -> (Vec<f64>, Vec<CMatrix>, Vec<CMatrix>) {
                let kz: Vec<CMatrix> = (0..nb).map(|k| &kmat[k] * &zinv[k]).collect();
                let a_kz = self.apply_a(&kz);
                let rhs: Vec<f64> = (0..m).map(|i| rp[i] - a_kz[i] + a_xrdz[i]).collect();
                let dy_v = chol.solve(&nalgebra::DVector::from_vec(rhs));
                let dy: Vec<f64> = dy_v.iter().copied().collect();
                let atdy = self.apply_at(&dy);
                let dz: Vec<CMatrix> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
                let dx: Vec<CMatrix> =
                    (0..nb).map(|k| hermitize(&(&kz[k] - &x[k] * &dz[k] * &zinv[k]))).collect();
                (dy, dx, dz)
            };

            let step_len = |xs: &[CMatrix], dxs: &[CMatrix]| -> f64 {
                let mut a = f64::INFINITY;
                for k in 0..nb {
                    a = a.min(max_step(&xs[k], &dxs[k]));
                }
                a
            };

            // Predictor.
            let k_aff: Vec<CMatrix> = (0..nb).map(|k| -(&x[k] * &z[k])).collect();
            let (_, dx_a, dz_a) = direction(&k_aff);
            let ap = step_len(&x, &dx_a).min(1.0);
            let ad = step_len(&z, &dz_a).min(1.0);
            let xa: Vec<CMatrix> = (0..nb).map(|k| &x[k] + &dx_a[k] * c(ap, 0.0)).collect();
            let za: Vec<CMatrix> = (0..nb).map(|k| &z[k] + &dz_a[k] * c(ad, 0.0)).collect();
            let mu_aff = inner(&xa, &za) / self.n_total as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // Corrector.
            let k_cor: Vec<CMatrix> = (0..nb)
                .map(|k| {
                    let nk = self.p.blocks[k];
                    CMatrix::identity(nk, nk) * c(sigma * mu, 0.0) - &x[k] * &z[k] - &dx_a[k] * &dz_a[k]
                })
                .collect();
            let (dy, dx, dz) = direction(&k_cor);
            let tau = 0.98;
            let ap = (tau * step_len(&x, &dx)).min(1.0);
            let ad = (tau * step_len(&z, &dz)).min(1.0);
            if !(ap > 1e-14 && ad > 1e-14) {
                break;
            }
            for k in 0..nb {
                x[k] = hermitize(&(&x[k] + &dx[k] * c(ap, 0.0)));
                z[k] = hermitize(&(&z[k] + &dz[k] * c(ad, 0.0)));
            }
            for i in 0..m {
                y[i] += ad * dy[i];
            }
        }
        if converged {
            let ax = self.apply_a(&x);
            let rp: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / (1.0 + bnorm);
            let aty = self.apply_at(&y);
            let rd: Vec<CMatrix> = (0..nb).map(|k| &self.c[k] - &z[k] - &aty[k]).collect();
            let inf = rp.max(fro_all(&rd) / (1.0 + cnorm));
            let pobj = inner(&self.c, &x);
            let dobj: f64 = b.iter().zip(&y).map(|(p, q)| p * q).sum();
            let rg = (pobj - dobj).abs().max(inner(&x, &z).abs()) / (1.0 + pobj.abs() + dobj.abs());
            return self.finish(Some((0.0, x, y, z, rg, inf)), iterations, true);
        }
        self.finish(best, iterations, false)
    }

    #[allow(clippy::type_complexity)]
    fn finish(
        &self,
        best: Option<(f64, Vec<CMatrix>, Vec<f64>, Vec<CMatrix>, f64, f64)>,
        iterations: usize,
        converged: bool,
    ) -> Result<SdpSolution> {
        let (_, x, y, _z, rel_gap, infeasibility) =
            best.ok_or_else(|| Error::Solver("interior-point solver made no progress".into()))?;
        let objective = self.p.obj.iter().zip(&y).map(|(p, q)| p * q).sum();
        let bound = inner(&self.c, &x);
        let slack = self.p.evaluate(&y);
        Ok(SdpSolution { y, slack, multiplier: x, objective, bound, rel_gap, infeasibility, iterations, converged })
    }
}

/// Helper: coordinates of a Hermitian d×d variable in an [`Lmi`].
#[derive(Debug, Clone)]
pub struct HermVar {
    pub dim: usize,
    /// Variable indices in the [`crate::linalg::hermitian_from_params`] layout.
    pub vars: Vec<usize>,
}

impl HermVar {
    /// Allocate d² real variables with objective weights given by `obj(basis element)`.
    pub fn new(lmi: &mut Lmi, dim: usize, obj: impl Fn(&CMatrix) -> f64) -> Self {
        let basis = crate::linalg::hermitian_basis(dim);
        let vars = basis.iter().map(|b| lmi.add_var(obj(b))).collect();
        HermVar { dim, vars }
    }

    pub fn basis(&self) -> Vec<CMatrix> {
        crate::linalg::hermitian_basis(self.dim)
    }

    /// Add `coef · (L ⊗ H ⊗ R)` style placement: for each basis element E_k,
    /// adds `map(E_k)` (placed at `offset`) to the variable's coefficient.
    pub fn add_mapped(&self, lmi: &mut Lmi, block: usize, offset: usize, map: impl Fn(&CMatrix) -> CMatrix) {
        for (k, e) in self.basis().iter().enumerate() {
            let m = map(e);
            lmi.add_term(self.vars[k], block, offset, &m);
        }
    }

    pub fn value(&self, y: &[f64]) -> CMatrix {
        let p: Vec<f64> = self.vars.iter().map(|&v| y[v]).collect();
        crate::linalg::hermitian_from_params(self.dim, &p)
    }
}

/// Helper: a general complex r×c matrix variable (2·r·c real coordinates).
#[derive(Debug, Clone)]
pub struct ComplexVar {
    pub rows: usize,
    pub cols: usize,
    re: Vec<usize>,
    im: Vec<usize>,
}

impl ComplexVar {
    pub fn new(lmi: &mut Lmi, rows: usize, cols: usize, obj_re: impl Fn(usize, usize) -> f64) -> Self {
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(lmi.add_var(obj_re(i, j)));
                im.push(lmi.add_var(0.0));
            }
        }
        ComplexVar { rows, cols, re, im }
    }

    /// Place the variable at (ro, co) of a Hermitian block (and its adjoint at (co, ro)).
    pub fn place(&self, lmi: &mut Lmi, block: usize, ro: usize, co: usize) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = i * self.cols + j;
                lmi.add_entry(self.re[k], block, ro + i, co + j, ONE);
                lmi.add_entry(self.im[k], block, ro + i, co + j, c(0.0, 1.0));
            }
        }
    }

    /// Add Re Tr(Y·m) to the diagonal entry (pos, pos) of a block; `m` is cols×rows.
    pub fn add_re_trace(&self, lmi: &mut Lmi, block: usize, pos: usize, m: &CMatrix) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = i * self.cols + j;
                let z = m[(j, i)];
                if z.re != 0.0 {
                    lmi.add_entry(self.re[k], block, pos, pos, c(z.re, 0.0));
                }
                if z.im != 0.0 {
                    lmi.add_entry(self.im[k], block, pos, pos, c(-z.im, 0.0));
                }
            }
        }
    }

    pub fn value(&self, y: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            c(y[self.re[k]], y[self.im[k]])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvals, r};

    #[test]
    fn largest_eigenvalue_as_sdp() {
        // minimize t s.t. t·1 − A ⪰ 0  ⇔  maximize −t.
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[r(2.0), c(0.5, 0.3), r(0.0), c(0.5, -0.3), r(1.0), c(0.0, 0.2), r(0.0), c(0.0, -0.2), r(-1.0)],
        );
        let mut lmi = Lmi::new();
        let b = lmi.add_block(3);
        let t = lmi.add_var(-1.0);
        lmi.add_const(b, 0, &(-a.clone()));
        lmi.add_term(t, b, 0, &CMatrix::identity(3, 3));
        let sol = lmi.solve().unwrap();
        assert!(sol.converged);
        let lmax = eigvals(&a)[0];
        assert!((-sol.objective - lmax).abs() < 1e-9, "{} vs {}", -sol.objective, lmax);
    }

    #[test]
    fn fidelity_sdp_matches_closed_form() {
        let p = CMatrix::from_row_slice(2, 2, &[r(0.7), c(0.2, 0.1), c(0.2, -0.1), r(0.3)]);
        let q = CMatrix::from_row_slice(2, 2, &[r(0.4), c(-0.1, 0.05), c(-0.1, -0.05), r(0.6)]);
        let mut lmi = Lmi::new();
        let b = lmi.add_block(4);
        lmi.add_const(b, 0, &p);
        lmi.add_const(b, 2, &q);
        let x = ComplexVar::new(&mut lmi, 2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        x.place(&mut lmi, b, 0, 2);
        let sol = lmi.solve().unwrap();
        assert!(sol.converged);
        let f = crate::linalg::fidelity(&p, &q);
        assert!((sol.objective - f).abs() < 1e-9, "{} vs {}", sol.objective, f);
    }
}
