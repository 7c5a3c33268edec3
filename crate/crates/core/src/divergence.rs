//! Relative entropies on positive operators (bits) and their structural
//! properties as checkable predicates.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_unchecked, hermitize, CMatrix, SUPPORT_CUTOFF};

/// Pass threshold for property slacks.
pub const PROPERTY_SLACK: f64 = -1e-9;
/// Relative weight of `p` outside supp(q) above which supports count as not nested.
const LEAK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceKind {
    VonNeumann,
    Renyi(f64),
    Dmax,
    Dfid,
}

impl DivergenceKind {
    pub fn renyi(alpha: f64) -> Result<Self> {
        let k = DivergenceKind::Renyi(alpha);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if let DivergenceKind::Renyi(a) = *self {
            if !(a > 0.0 && a <= 2.0) || a == 1.0 || !a.is_finite() {
                return Err(Error::InvalidParameter(format!("Renyi order {} outside (0,1)∪(1,2]", a)));
            }
        }
        Ok(())
    }

    /// Short label used in reports and on the command line.
    pub fn label(&self) -> String {
        match self {
            DivergenceKind::VonNeumann => "vn".into(),
            DivergenceKind::Renyi(a) => format!("renyi:{}", a),
            DivergenceKind::Dmax => "dmax".into(),
            DivergenceKind::Dfid => "dfid".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let k = match s {
            "vn" | "von_neumann" | "vonNeumann" => DivergenceKind::VonNeumann,
            "dmax" => DivergenceKind::Dmax,
            "dfid" => DivergenceKind::Dfid,
            _ => {
                let a = s
                    .strip_prefix("renyi:")
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown divergence kind '{}'", s)))?;
                let a: f64 = a.parse().map_err(|_| Error::InvalidParameter(format!("bad Renyi order '{}'", a)))?;
                DivergenceKind::Renyi(a)
            }
        };
        k.validate()?;
        Ok(k)
    }

    pub fn all_standard() -> Vec<DivergenceKind> {
        vec![
            DivergenceKind::VonNeumann,
            DivergenceKind::Renyi(0.5),
            DivergenceKind::Renyi(2.0),
            DivergenceKind::Dmax,
            DivergenceKind::Dfid,
        ]
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl Serialize for DivergenceKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

/// Real number or +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// As f64, with +∞ mapped to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(v) => *v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(*v),
            ExtReal::PosInf => None,
        }
    }

    /// a − b with ∞ − ∞ taken as 0 (both sides structurally infinite).
    pub fn minus(&self, other: &ExtReal) -> f64 {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a - b,
            (ExtReal::PosInf, ExtReal::PosInf) => 0.0,
            (ExtReal::PosInf, _) => f64::INFINITY,
            (_, ExtReal::PosInf) => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{}", v),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

/// Divergence value plus the conventions that were needed to produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivOutcome {
    pub value: ExtReal,
    /// Rényi order below one with orthogonal supports (value is +∞ by the
    /// intersection-of-supports convention).
    pub disjoint_supports: bool,
}

fn check_psd(m: &CMatrix) -> Result<linalg::HermitianEig> {
    let e = linalg::herm_eig(m)?;
    let lmax = e.values.first().copied().unwrap_or(0.0);
    let lmin = e.values.last().copied().unwrap_or(0.0);
    if lmin < -1e-9 * lmax.abs().max(1.0) {
        return Err(Error::NotPsd(lmin));
    }
    Ok(e)
}

/// Weight of p outside the support of q, relative to Tr p.
fn leak(p: &CMatrix, q_eig: &linalg::HermitianEig) -> f64 {
    let proj = q_eig.support_projector();
    let out = p - &proj * p * &proj;
    let tp = p.trace().re.abs().max(1e-300);
    linalg::frob(&out) / tp
}

pub fn div(kind: DivergenceKind, p: &CMatrix, q: &CMatrix) -> Result<ExtReal> {
    Ok(div_outcome(kind, p, q)?.value)
}

pub fn div_outcome(kind: DivergenceKind, p: &CMatrix, q: &CMatrix) -> Result<DivOutcome> {
    kind.validate()?;
    if p.nrows() != q.nrows() {
        return Err(Error::DimMismatch(format!("p is {} but q is {}", p.nrows(), q.nrows())));
    }
    let pe = check_psd(p)?;
    let qe = check_psd(q)?;
    if pe.max_abs() == 0.0 || pe.rank() == 0 {
        return Err(Error::ZeroOperator);
    }
    let finite = |v: f64| DivOutcome { value: ExtReal::Finite(v), disjoint_supports: false };
    let inf = DivOutcome { value: ExtReal::PosInf, disjoint_supports: false };
    match kind {
        DivergenceKind::VonNeumann => {
            if qe.rank() == 0 || leak(p, &qe) > LEAK_TOL {
                return Ok(inf);
            }
            let t = pe.cutoff();
            let plogp: f64 = pe.values.iter().filter(|&&x| x > t).map(|&x| x * x.log2()).sum();
            let qt = qe.cutoff();
            let mut plogq = 0.0;
            for k in 0..qe.dim() {
                let lam = qe.values[k];
                if lam > qt {
                    let v = qe.vectors.column(k);
                    let w = (v.adjoint() * p * v)[(0, 0)].re;
                    plogq += w * lam.log2();
                }
            }
            Ok(finite(plogp - plogq))
        }
        DivergenceKind::Renyi(a) => {
            let pa = pe.apply(|x| x.powf(a), true);
            if a > 1.0 {
                if qe.rank() == 0 || leak(p, &qe) > LEAK_TOL {
                    return Ok(inf);
                }
                let qp = qe.apply(|x| x.powf(1.0 - a), true);
                let t = linalg::tr_prod_re(&pa, &qp);
                Ok(finite(t.log2() / (a - 1.0)))
            } else {
                let qp = qe.apply(|x| x.powf(1.0 - a), true);
                let t = linalg::tr_prod_re(&pa, &qp);
                let scale = p.trace().re.abs().max(q.trace().re.abs()).max(1e-300);
                if t <= 1e-14 * scale {
                    return Ok(DivOutcome { value: ExtReal::PosInf, disjoint_supports: true });
                }
                Ok(finite(t.log2() / (a - 1.0)))
            }
        }
        DivergenceKind::Dmax => {
            if qe.rank() == 0 || leak(p, &qe) > LEAK_TOL {
                return Ok(inf);
            }
            let qis = qe.apply(|x| 1.0 / x.sqrt(), true);
            let m = hermitize(&(&qis * p * &qis));
            let lmax = eig_unchecked(&m).values[0];
            if lmax <= 0.0 {
                return Ok(inf);
            }
            Ok(finite(lmax.log2()))
        }
        DivergenceKind::Dfid => {
            let sp = pe.apply(|x| x.max(0.0).sqrt(), true);
            let sq = qe.apply(|x| x.max(0.0).sqrt(), true);
            let f = linalg::trace_norm(&(&sp * &sq));
            let scale = p.trace().re.abs().max(q.trace().re.abs()).max(1e-300);
            if f <= 1e-14 * scale {
                return Ok(inf);
            }
            Ok(finite(-2.0 * f.log2()))
        }
    }
}

/// Quantum channel in Kraus form.
#[derive(Debug, Clone)]
pub struct Channel {
    pub kraus: Vec<CMatrix>,
}

impl Channel {
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.kraus[0].nrows(), self.kraus[0].nrows());
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        hermitize(&out)
    }

    /// Tr_B on A ⊗ B (keep_first) or Tr_A (otherwise).
    pub fn partial_trace(da: usize, db: usize, keep_first: bool) -> Self {
        let mut kraus = Vec::new();
        if keep_first {
            for b in 0..db {
                kraus.push(linalg::kron(&linalg::identity(da), &linalg::basis_ket(db, b).adjoint()));
            }
        } else {
            for a in 0..da {
                kraus.push(linalg::kron(&linalg::basis_ket(da, a).adjoint(), &linalg::identity(db)));
            }
        }
        Channel { kraus }
    }

    /// Channel from an isometry V: C^d → C^{d_out·k}, tracing the k-dim environment.
    pub fn from_stinespring(v: &CMatrix, d_out: usize) -> Self {
        let k = v.nrows() / d_out;
        let mut kraus = Vec::with_capacity(k);
        for e in 0..k {
            let sel = linalg::kron(&linalg::identity(d_out), &linalg::basis_ket(k, e).adjoint());
            kraus.push(sel * v);
        }
        Channel { kraus }
    }

    /// Completeness defect ‖Σ K†K − 1‖_F.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.kraus[0].ncols();
        let mut s = CMatrix::zeros(d, d);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        linalg::frob(&(s - linalg::identity(d)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// D(E(P)‖E(Q)) ≤ D(P‖Q).
    ADataProcessing,
    /// D(P⊕0‖Q⊕Q') = D(P‖Q).
    BNullSubspace,
    /// Q̃ ≥ Q ⇒ D(P‖Q) ≥ D(P‖Q̃).
    MonotoneInQ,
    /// supp P ⊆ Π ⇒ D(P‖Q) ≥ D(P‖ΠQΠ).
    Projection,
    /// P' ≥ P ⇒ D_max(P‖Q) ≤ D_max(P'‖Q).
    DmaxMonotoneInP,
    /// P' ≥ P ⇒ D_fid(P‖Q) ≥ D_fid(P'‖Q).
    DfidAntitoneInP,
    /// D_fid(P‖Q) = D_fid(P‖Π_P Q Π_P) = D_fid(Π_Q P Π_Q‖Q).
    DfidSupportProjection,
    /// D_max(P‖Q) ≥ D_max(ΠPΠ‖ΠQΠ) for any projector Π.
    DmaxCompression,
}

impl Property {
    pub fn all() -> [Property; 8] {
        [
            Property::ADataProcessing,
            Property::BNullSubspace,
            Property::MonotoneInQ,
            Property::Projection,
            Property::DmaxMonotoneInP,
            Property::DfidAntitoneInP,
            Property::DfidSupportProjection,
            Property::DmaxCompression,
        ]
    }
}

/// Operators a property quantifies over.
#[derive(Debug, Clone)]
pub enum PropertyInstance {
    Channel { p: CMatrix, q: CMatrix, channel: Channel },
    NullSubspace { p: CMatrix, q: CMatrix, q_extra: CMatrix },
    Dominating { p: CMatrix, q: CMatrix, q_tilde: CMatrix },
    Projector { p: CMatrix, q: CMatrix, pi: CMatrix },
    LargerP { p: CMatrix, p_prime: CMatrix, q: CMatrix },
    SupportProjectors { p: CMatrix, q: CMatrix },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropertyCheck {
    pub holds: bool,
    pub slack: f64,
}

fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.nrows() + b.nrows();
    let mut m = CMatrix::zeros(n, n);
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((a.nrows(), a.nrows()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

/// Evaluate a property on an instance. The slack is the margin by which the
/// inequality holds (negative means violated); equalities report −|difference|.
pub fn check_property(kind: DivergenceKind, property: Property, instance: &PropertyInstance) -> Result<PropertyCheck> {
    let d = |p: &CMatrix, q: &CMatrix| div(kind, p, q);
    let slack = match (property, instance) {
        (Property::ADataProcessing, PropertyInstance::Channel { p, q, channel }) => {
            d(p, q)?.minus(&d(&channel.apply(p), &channel.apply(q))?)
        }
        (Property::BNullSubspace, PropertyInstance::NullSubspace { p, q, q_extra }) => {
            let zero = CMatrix::zeros(q_extra.nrows(), q_extra.nrows());
            let big = d(&direct_sum(p, &zero), &direct_sum(q, q_extra))?;
            -big.minus(&d(p, q)?).abs()
        }
        (Property::MonotoneInQ, PropertyInstance::Dominating { p, q, q_tilde }) => d(p, q)?.minus(&d(p, q_tilde)?),
        (Property::Projection, PropertyInstance::Projector { p, q, pi }) => {
            d(p, q)?.minus(&d(p, &hermitize(&(pi * q * pi)))?)
        }
        (Property::DmaxMonotoneInP, PropertyInstance::LargerP { p, p_prime, q }) => {
            div(DivergenceKind::Dmax, p_prime, q)?.minus(&div(DivergenceKind::Dmax, p, q)?)
        }
        (Property::DfidAntitoneInP, PropertyInstance::LargerP { p, p_prime, q }) => {
            div(DivergenceKind::Dfid, p, q)?.minus(&div(DivergenceKind::Dfid, p_prime, q)?)
        }
        (Property::DfidSupportProjection, PropertyInstance::SupportProjectors { p, q }) => {
            let pp = eig_unchecked(&hermitize(p)).support_projector();
            let pq = eig_unchecked(&hermitize(q)).support_projector();
            let base = div(DivergenceKind::Dfid, p, q)?;
            let one = div(DivergenceKind::Dfid, p, &hermitize(&(&pp * q * &pp)))?;
            let two = div(DivergenceKind::Dfid, &hermitize(&(&pq * p * &pq)), q)?;
            -(base.minus(&one).abs().max(base.minus(&two).abs()))
        }
        (Property::DmaxCompression, PropertyInstance::Projector { p, q, pi }) => {
            let pc = hermitize(&(pi * p * pi));
            if linalg::frob(&pc) <= SUPPORT_CUTOFF * linalg::frob(p) {
                // ΠPΠ = 0: the right side is −∞ by convention and the inequality is trivial.
                f64::INFINITY
            } else {
                div(DivergenceKind::Dmax, p, q)?.minus(&div(DivergenceKind::Dmax, &pc, &hermitize(&(pi * q * pi)))?)
            }
        }
        _ => {
            return Err(Error::InvalidParameter(format!("instance does not match property {:?}", property)));
        }
    };
    let slack = if slack.is_nan() { 0.0 } else { slack };
    Ok(PropertyCheck { holds: slack >= PROPERTY_SLACK, slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, r};
    use crate::premeasurement::ket_state;
    use crate::states::{random_state, rng_from_seed};

    fn all_kinds() -> Vec<DivergenceKind> {
        DivergenceKind::all_standard()
    }

    #[test]
    fn self_divergence_vanishes() {
        let rho = random_state(&[3], 3, &mut rng_from_seed(1)).mat;
        for k in all_kinds() {
            let v = div(k, &rho, &rho).unwrap().to_f64();
            assert!(v.abs() < 1e-9, "{}: {}", k, v);
        }
    }

    #[test]
    fn pure_against_maximally_mixed_is_one_bit() {
        let p = ket_state(2, 0).mat;
        let q = identity(2) * r(0.5);
        assert!((div(DivergenceKind::VonNeumann, &p, &q).unwrap().to_f64() - 1.0).abs() < 1e-12);
        assert!((div(DivergenceKind::Dmax, &p, &q).unwrap().to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_violations_are_infinite() {
        let p = identity(2) * r(0.5);
        let q = ket_state(2, 0).mat;
        assert_eq!(div(DivergenceKind::VonNeumann, &p, &q).unwrap(), ExtReal::PosInf);
        assert_eq!(div(DivergenceKind::Dmax, &p, &q).unwrap(), ExtReal::PosInf);
        assert_eq!(div(DivergenceKind::Renyi(2.0), &p, &q).unwrap(), ExtReal::PosInf);
        // α < 1 with overlapping supports stays finite.
        assert!(div(DivergenceKind::Renyi(0.5), &p, &q).unwrap().is_finite());
        let orth = ket_state(2, 1).mat;
        let o = div_outcome(DivergenceKind::Renyi(0.5), &orth, &q).unwrap();
        assert_eq!(o.value, ExtReal::PosInf);
        assert!(o.disjoint_supports);
        assert_eq!(div(DivergenceKind::Dfid, &orth, &q).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn renyi_approaches_von_neumann() {
        let mut rng = rng_from_seed(2);
        for _ in 0..5 {
            let p = random_state(&[2], 2, &mut rng).mat;
            let q = random_state(&[2], 2, &mut rng).mat;
            let vn = div(DivergenceKind::VonNeumann, &p, &q).unwrap().to_f64();
            for a in [1.0 - 1e-4, 1.0 + 1e-4] {
                let v = div(DivergenceKind::Renyi(a), &p, &q).unwrap().to_f64();
                assert!((v - vn).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn parse_and_validate() {
        assert_eq!(DivergenceKind::parse("renyi:0.5").unwrap(), DivergenceKind::Renyi(0.5));
        assert!(DivergenceKind::parse("renyi:1").is_err());
        assert!(DivergenceKind::parse("renyi:2.5").is_err());
        assert!(DivergenceKind::parse("kl").is_err());
    }

    #[test]
    fn zero_operator_rejected() {
        let z = CMatrix::zeros(2, 2);
        assert!(matches!(div(DivergenceKind::Dmax, &z, &identity(2)), Err(Error::ZeroOperator)));
    }

    #[test]
    fn dmax_dominates_vn() {
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let p = random_state(&[3], 3, &mut rng).mat;
            let q = random_state(&[3], 3, &mut rng).mat;
            let a = div(DivergenceKind::Dmax, &p, &q).unwrap().to_f64();
            let b = div(DivergenceKind::VonNeumann, &p, &q).unwrap().to_f64();
            assert!(a >= b - 1e-10);
        }
    }

    #[test]
    fn null_subspace_padding_is_exact() {
        let mut rng = rng_from_seed(4);
        let p = random_state(&[2], 2, &mut rng).mat;
        let q = random_state(&[2], 2, &mut rng).mat;
        let qx = random_state(&[2], 1, &mut rng).mat;
        let inst = PropertyInstance::NullSubspace { p, q, q_extra: qx };
        for k in all_kinds() {
            let c = check_property(k, Property::BNullSubspace, &inst).unwrap();
            assert!(c.slack > -1e-10, "{}: {}", k, c.slack);
        }
    }
}
