//! Dense complex linear algebra on small Hermitian operators.
//!
//! Thin layer over nalgebra. Eigenvalues are reported in descending order and
//! the numerical support of an operator is everything above
//! `SUPPORT_CUTOFF * λ_max`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative eigenvalue cutoff defining the numerical support.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
/// Relative Frobenius deviation from Hermiticity tolerated by `herm_eig`.
pub const HERMITIAN_TOL: f64 = 1e-8;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Absolute threshold below which eigenvalues count as zero.
    pub fn cutoff(&self) -> f64 {
        SUPPORT_CUTOFF * self.max_abs()
    }

    pub fn rank(&self) -> usize {
        let t = self.cutoff();
        self.values.iter().filter(|&&v| v > t).count()
    }

    /// Rebuild Σ f(λ_k) |v_k⟩⟨v_k|; with `support_only`, eigenvalues at or
    /// below the cutoff are mapped to zero instead of `f(λ)`.
    pub fn apply(&self, f: impl Fn(f64) -> f64, support_only: bool) -> CMatrix {
        let n = self.dim();
        let t = self.cutoff();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let lam = self.values[k];
            let fv = if support_only && lam <= t { 0.0 } else { f(lam) };
            scaled.column_mut(k).scale_mut(fv);
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn support_projector(&self) -> CMatrix {
        self.apply(|_| 1.0, true)
    }

    /// Orthonormal basis of the support as columns of an n×rank isometry.
    pub fn support_basis(&self) -> CMatrix {
        let k = self.rank();
        self.vectors.columns(0, k).into_owned()
    }

    pub fn kernel_basis(&self) -> CMatrix {
        let k = self.rank();
        let n = self.dim();
        self.vectors.columns(k, n - k).into_owned()
    }
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = frob(m);
    if n == 0.0 {
        0.0
    } else {
        frob(&(m - m.adjoint())) / n
    }
}

/// Eigendecomposition of a Hermitian matrix. Fails with `NonHermitian` when
/// ‖m − m†‖_F > 1e-8 ‖m‖_F; smaller deviations are symmetrized away.
pub fn herm_eig(m: &CMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::DimMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = hermiticity_defect(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NonHermitian(dev));
    }
    Ok(eig_unchecked(&hermitize(m)))
}

/// Eigendecomposition of a matrix already known to be Hermitian.
pub fn eig_unchecked(h: &CMatrix) -> HermitianEig {
    let n = h.nrows();
    if n == 0 {
        return HermitianEig { values: vec![], vectors: CMatrix::zeros(0, 0) };
    }
    let se = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }
    HermitianEig { values, vectors }
}

pub fn eigvals(h: &CMatrix) -> Vec<f64> {
    eig_unchecked(&hermitize(h)).values
}

/// f(m) through the eigendecomposition; see [`HermitianEig::apply`].
pub fn mat_func(m: &CMatrix, f: impl Fn(f64) -> f64, support_only: bool) -> Result<CMatrix> {
    Ok(herm_eig(m)?.apply(f, support_only))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn tr_re(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Re Tr(a b) without forming the product.
pub fn tr_prod_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            let x = a[(i, k)] * b[(k, i)];
            s += x.re;
        }
    }
    s
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ms: &[CMatrix]) -> CMatrix {
    let mut out = CMatrix::from_element(1, 1, ONE);
    for m in ms {
        out = out.kronecker(m);
    }
    out
}

pub fn outer(u: &CMatrix, v: &CMatrix) -> CMatrix {
    u * v.adjoint()
}

pub fn projector(v: &CMatrix) -> CMatrix {
    v * v.adjoint()
}

pub fn basis_ket(n: usize, k: usize) -> CMatrix {
    let mut v = CMatrix::zeros(n, 1);
    v[(k, 0)] = ONE;
    v
}

pub fn column(m: &CMatrix, k: usize) -> CMatrix {
    CMatrix::from_column_slice(m.nrows(), 1, m.column(k).as_slice())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = r(*v);
    }
    m
}

pub fn diagonal_re(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

fn checked_dims(n: usize, dims: &[usize]) -> Result<()> {
    let p: usize = dims.iter().product();
    if p != n || dims.is_empty() {
        return Err(Error::DimMismatch(format!("dims {:?} do not multiply to {}", dims, n)));
    }
    Ok(())
}

/// Mixed-radix digits of `i` for the given dims (first subsystem most significant).
fn digits(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = i % dims[k];
        i /= dims[k];
    }
    d
}

fn undigits(d: &[usize], dims: &[usize]) -> usize {
    d.iter().zip(dims).fold(0, |acc, (x, n)| acc * n + x)
}

/// Trace out every subsystem not listed in `keep`. The kept subsystems stay
/// in their original relative order.
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let n = m.nrows();
    checked_dims(n, dims)?;
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimMismatch(format!("keep {:?} out of range for {} subsystems", keep, dims.len())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let kdims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let nk: usize = kdims.iter().product();
    let nt: usize = tdims.iter().product();
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(nk); nt];
    for i in 0..n {
        let d = digits(i, dims);
        let kd: Vec<usize> = keep_sorted.iter().map(|&k| d[k]).collect();
        let td: Vec<usize> = traced.iter().map(|&k| d[k]).collect();
        groups[undigits(&td, &tdims)].push((undigits(&kd, &kdims), i));
    }
    let mut out = CMatrix::zeros(nk, nk);
    for g in &groups {
        for &(a, i1) in g {
            for &(b, i2) in g {
                out[(a, b)] += m[(i1, i2)];
            }
        }
    }
    Ok(out)
}

/// Index map for reordering subsystems: new subsystem `p` is old subsystem `perm[p]`.
fn permutation_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() {
        return Err(Error::DimMismatch(format!("permutation {:?} for {} subsystems", perm, dims.len())));
    }
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::DimMismatch(format!("invalid permutation {:?}", perm)));
        }
        seen[p] = true;
    }
    let n: usize = dims.iter().product();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut map = vec![0; n];
    for (i, slot) in map.iter_mut().enumerate() {
        let d = digits(i, dims);
        let nd: Vec<usize> = perm.iter().map(|&p| d[p]).collect();
        *slot = undigits(&nd, &new_dims);
    }
    Ok(map)
}

/// Reorder the tensor factors of an operator.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    checked_dims(m.nrows(), dims)?;
    let map = permutation_map(dims, perm)?;
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Reorder the tensor factors of a column vector.
pub fn permute_ket(v: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    checked_dims(v.nrows(), dims)?;
    let map = permutation_map(dims, perm)?;
    let mut out = CMatrix::zeros(v.nrows(), 1);
    for i in 0..v.nrows() {
        out[(map[i], 0)] = v[(i, 0)];
    }
    Ok(out)
}

/// 1_left ⊗ m ⊗ 1_right.
pub fn embed(m: &CMatrix, left: usize, right: usize) -> CMatrix {
    kron(&kron(&identity(left), m), &identity(right))
}

/// Hermitian operator basis of dimension n: E_kk, then (E_jk+E_kj), i(E_jk−E_kj) for j<k,
/// matching the coordinate layout of [`hermitian_from_params`].
/// Orthogonal under the Hilbert–Schmidt inner product.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(k, k)] = ONE;
        out.push(e);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut e = CMatrix::zeros(n, n);
            e[(j, k)] = ONE;
            e[(k, j)] = ONE;
            out.push(e);
            let mut f = CMatrix::zeros(n, n);
            f[(j, k)] = I;
            f[(k, j)] = -I;
            out.push(f);
        }
    }
    out
}

/// Hermitian matrix from n² real coordinates in the [`hermitian_basis`] layout.
pub fn hermitian_from_params(n: usize, p: &[f64]) -> CMatrix {
    assert_eq!(p.len(), n * n);
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = r(p[k]);
    }
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = c(p[idx], p[idx + 1]);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Inverse of [`hermitian_from_params`].
pub fn hermitian_to_params(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut p = Vec::with_capacity(n * n);
    for k in 0..n {
        p.push(m[(k, k)].re);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            p.push(m[(j, k)].re);
            p.push(m[(j, k)].im);
        }
    }
    p
}

/// exp(iH) for Hermitian H.
pub fn unitary_exp(h: &CMatrix) -> CMatrix {
    let e = eig_unchecked(&hermitize(h));
    let n = e.dim();
    let mut scaled = e.vectors.clone();
    for k in 0..n {
        let ph = C64::from_polar(1.0, e.values[k]);
        for i in 0..n {
            scaled[(i, k)] *= ph;
        }
    }
    &scaled * e.vectors.adjoint()
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Polar unitary factor of a square matrix (U with m = U |m|).
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Shannon entropy in bits with 0 log 0 = 0.
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Von Neumann entropy of a PSD operator from its spectrum (bits); tiny
/// negative eigenvalues from roundoff are dropped.
pub fn vn_entropy_of(m: &CMatrix) -> f64 {
    let v = eigvals(m);
    let t = SUPPORT_CUTOFF * v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    v.iter().filter(|&&x| x > t).map(|&x| -x * x.log2()).sum()
}

/// Positive semidefinite square root, clipping negative roundoff.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eig_unchecked(&hermitize(m)).apply(|x| x.max(0.0).sqrt(), true)
}

/// Moore–Penrose inverse of a Hermitian PSD operator on its support.
pub fn psd_pinv(m: &CMatrix) -> CMatrix {
    eig_unchecked(&hermitize(m)).apply(|x| 1.0 / x, true)
}

pub fn psd_inv_sqrt(m: &CMatrix) -> CMatrix {
    eig_unchecked(&hermitize(m)).apply(|x| 1.0 / x.sqrt(), true)
}

/// Fidelity F(ρ,σ) = ‖√ρ √σ‖_1 (square-root convention).
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    trace_norm(&(psd_sqrt(rho) * psd_sqrt(sigma)))
}

pub fn min_eig(m: &CMatrix) -> f64 {
    eigvals(m).last().copied().unwrap_or(0.0)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Orthonormality residual ‖U†U − 1‖_F of the columns of `u`.
pub fn orthonormality_residual(u: &CMatrix) -> f64 {
    frob(&(u.adjoint() * u - identity(u.ncols())))
}

/// Complete an n×k isometry to an n×n unitary (Gram–Schmidt against the
/// standard basis).
pub fn complete_basis(v: &CMatrix) -> CMatrix {
    let n = v.nrows();
    let mut cols: Vec<CMatrix> = (0..v.ncols()).map(|k| column(v, k)).collect();
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut w = basis_ket(n, k);
        for _ in 0..2 {
            for q in &cols {
                let ov = (q.adjoint() * &w)[(0, 0)];
                w -= q * ov;
            }
        }
        let nw = frob(&w);
        if nw > 1e-6 {
            cols.push(w / r(nw));
        }
    }
    let mut out = CMatrix::zeros(n, n);
    for (k, q) in cols.iter().enumerate() {
        out.set_column(k, &q.column(0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn eig_is_descending_and_reconstructs() {
        let a = sample(5, 3);
        let h = hermitize(&a);
        let e = herm_eig(&h).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let back = e.apply(|x| x, false);
        assert!(max_abs_diff(&back, &h) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = sample(3, 5);
        assert!(matches!(herm_eig(&a), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = hermitize(&sample(2, 1));
        let b = hermitize(&sample(3, 2));
        let ab = kron(&a, &b);
        let ra = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        let rb = partial_trace(&ab, &[2, 3], &[1]).unwrap();
        assert!(max_abs_diff(&ra, &(a.clone() * b.trace())) < 1e-12);
        assert!(max_abs_diff(&rb, &(b.clone() * a.trace())) < 1e-12);
    }

    #[test]
    fn permutation_swaps_factors() {
        let a = sample(2, 7);
        let b = sample(3, 8);
        let ab = kron(&a, &b);
        let ba = permute_subsystems(&ab, &[2, 3], &[1, 0]).unwrap();
        assert!(max_abs_diff(&ba, &kron(&b, &a)) < 1e-14);
    }

    #[test]
    fn hermitian_params_round_trip() {
        let h = hermitize(&sample(4, 9));
        let p = hermitian_to_params(&h);
        assert!(max_abs_diff(&hermitian_from_params(4, &p), &h) < 1e-15);
        for (k, b) in hermitian_basis(4).iter().enumerate() {
            let mut e = vec![0.0; 16];
            e[k] = 1.0;
            assert!(max_abs_diff(b, &hermitian_from_params(4, &e)) < 1e-15);
        }
    }

    #[test]
    fn unitary_exp_is_unitary() {
        let h = hermitize(&sample(4, 11));
        let u = unitary_exp(&h);
        assert!(orthonormality_residual(&u) < 1e-12);
    }

    #[test]
    fn fidelity_of_identical_states_is_trace() {
        let a = sample(3, 13);
        let rho = &a * a.adjoint();
        let t = rho.trace().re;
        assert!((fidelity(&rho, &rho) - t).abs() < 1e-10);
    }

    #[test]
    fn complete_basis_gives_unitary() {
        let v = basis_ket(3, 1) + basis_ket(3, 2);
        let v = v / r(2f64.sqrt());
        let u = complete_basis(&v);
        assert!(orthonormality_residual(&u) < 1e-12);
        assert!(max_abs_diff(&column(&u, 0), &v) < 1e-15);
    }
}
