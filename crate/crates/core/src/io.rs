//! JSON encodings shared by the library, the CLI and the Python bindings.
//!
//! Matrices are row-major arrays of `[re, im]` pairs. State files look like
//! `{"dims": [2, 2], "matrix": [[[re, im], ...], ...], "normalized": true}`;
//! measurement files are `{"elements": [matrix, ...]}`.

use std::fmt::Write as _;

use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::premeasurement::{Povm, Pvm};
use crate::states::{DensityOperator, TraceMode};

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    dims: Vec<usize>,
    matrix: RawMatrix,
    #[serde(default = "default_true")]
    normalized: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementFile {
    elements: Vec<RawMatrix>,
}

fn default_true() -> bool {
    true
}

fn raw_to_matrix(raw: &RawMatrix, field: &str) -> Result<CMatrix> {
    let n = raw.len();
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse(format!("{}: row {} has {} entries, expected {}", field, i, row.len(), n)));
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(raw[i][j][0], raw[i][j][1])))
}

/// Parse a state file. Syntax errors report line and column; semantic errors name the field.
pub fn parse_state(text: &str) -> Result<DensityOperator> {
    let f: StateFile = serde_json::from_str(text)?;
    let m = raw_to_matrix(&f.matrix, "matrix")?;
    let n: usize = f.dims.iter().product();
    if f.dims.is_empty() || f.dims.contains(&0) {
        return Err(Error::Parse(format!("dims: invalid factor list {:?}", f.dims)));
    }
    if n != m.nrows() {
        return Err(Error::Parse(format!("dims: product {} does not match matrix size {}", n, m.nrows())));
    }
    if f.normalized {
        DensityOperator::new(m, &f.dims)
    } else {
        DensityOperator::new_subnormalized(m, &f.dims)
    }
}

pub fn parse_pvm(text: &str) -> Result<Pvm> {
    let f: MeasurementFile = serde_json::from_str(text)?;
    let els = f
        .elements
        .iter()
        .enumerate()
        .map(|(k, e)| raw_to_matrix(e, &format!("elements[{}]", k)))
        .collect::<Result<Vec<_>>>()?;
    Pvm::new(els)
}

pub fn parse_povm(text: &str) -> Result<Povm> {
    let f: MeasurementFile = serde_json::from_str(text)?;
    let els = f
        .elements
        .iter()
        .enumerate()
        .map(|(k, e)| raw_to_matrix(e, &format!("elements[{}]", k)))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(els)
}

fn write_matrix(out: &mut String, m: &CMatrix, indent: &str) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push(',');
        }
        out.push('\n');
        out.push_str(indent);
        out.push_str("  [");
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(", ");
            }
            let z = m[(i, j)];
            let _ = write!(out, "[{:.16e}, {:.16e}]", z.re, z.im);
        }
        out.push(']');
    }
    out.push('\n');
    out.push_str(indent);
    out.push(']');
}

/// Serialize a state with 17 significant digits per component.
pub fn state_to_json(rho: &DensityOperator) -> String {
    let dims: Vec<String> = rho.dims.iter().map(|d| d.to_string()).collect();
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"dims\": [{}],\n  \"matrix\": ", dims.join(", "));
    write_matrix(&mut out, &rho.mat, "  ");
    let _ = write!(out, ",\n  \"normalized\": {}\n}}\n", rho.trace_mode == TraceMode::Normalized);
    out
}

pub fn measurement_to_json(elements: &[CMatrix]) -> String {
    let mut out = String::from("{\n  \"elements\": [");
    for (k, e) in elements.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str("\n    ");
        write_matrix(&mut out, e, "    ");
    }
    out.push_str("\n  ]\n}\n");
    out
}

/// Serde helper: a matrix as nested `[re, im]` arrays.
pub fn ser_mat<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    s.collect_seq(rows)
}

pub fn ser_opt_mat<S: Serializer>(m: &Option<CMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => ser_mat(m, s),
        None => s.serialize_none(),
    }
}

pub fn ser_mats<S: Serializer>(ms: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
    struct M<'a>(&'a CMatrix);
    impl serde::Serialize for M<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_mat(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(ms.len()))?;
    for m in ms {
        seq.serialize_element(&M(m))?;
    }
    seq.end()
}

pub fn ser_state<S: Serializer>(rho: &DensityOperator, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("State", 3)?;
    st.serialize_field("dims", &rho.dims)?;
    struct M<'a>(&'a CMatrix);
    impl serde::Serialize for M<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_mat(self.0, s)
        }
    }
    st.serialize_field("matrix", &M(&rho.mat))?;
    st.serialize_field("normalized", &(rho.trace_mode == TraceMode::Normalized))?;
    st.end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{random_state, rng_from_seed};

    #[test]
    fn state_round_trip_is_exact() {
        let rho = random_state(&[2, 3], 3, &mut rng_from_seed(5));
        let back = parse_state(&state_to_json(&rho)).unwrap();
        assert_eq!(back.dims, rho.dims);
        assert_eq!(back.mat, rho.mat);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_state("{\n  \"dims\": [2],\n  \"matrix\": [[[1, 0], [0, 0]], [[0, 0] [0, 0]]]\n}").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 3"), "{}", msg),
            e => panic!("unexpected {:?}", e),
        }
    }

    #[test]
    fn dims_must_match() {
        let err = parse_state(r#"{"dims": [3], "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.starts_with("dims")));
    }

    #[test]
    fn pvm_round_trip() {
        let x = Pvm::computational(3);
        let back = parse_pvm(&measurement_to_json(&x.elements)).unwrap();
        assert_eq!(back.elements, x.elements);
    }
}
