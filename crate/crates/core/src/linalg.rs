//! Small dense linear-algebra helpers shared by the closed-form updates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `a * x = b` for symmetric positive (semi)definite `a` after adding
/// `ridge` to the diagonal. Falls back to LU when Cholesky rejects the matrix.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    debug_assert_eq!(a.nrows(), a.ncols());
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut sys = a.clone();
    for i in 0..sys.nrows() {
        sys[(i, i)] += ridge;
    }
    if let Some(chol) = sys.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let x = sys
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{}x{} system is singular", a.nrows(), a.ncols())))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(format!(
            "{}x{} system produced non-finite solution",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// `tr(aᵀ m a)` without forming the product explicitly.
pub fn quad_trace(a: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let ma = m * a;
    a.component_mul(&ma).sum()
}

pub fn frob_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Column means over the rows whose flag is set.
pub fn masked_column_means(x: &DMatrix<f64>, keep: &[bool]) -> Option<Vec<f64>> {
    let count = keep.iter().filter(|&&k| k).count();
    if count == 0 {
        return None;
    }
    let mut means = vec![0.0; x.ncols()];
    for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        for (j, m) in means.iter_mut().enumerate() {
            *m += x[(i, j)];
        }
    }
    for m in &mut means {
        *m /= count as f64;
    }
    Some(means)
}

/// Row-major serialization of dense matrices (`{"rows","cols","data"}`).
pub mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct RowMajor {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        RowMajor {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rm = RowMajor::deserialize(d)?;
        if rm.rows * rm.cols != rm.data.len() {
            return Err(serde::de::Error::custom(format!(
                "matrix shape {}x{} does not match {} entries",
                rm.rows,
                rm.cols,
                rm.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(rm.rows, rm.cols, &rm.data))
    }

    pub mod vec {
        use nalgebra::DMatrix;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrapped(#[serde(with = "super")] DMatrix<f64>);

        pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
            let wrapped: Vec<Wrapped> = ms.iter().cloned().map(Wrapped).collect();
            wrapped.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
            let wrapped = Vec::<Wrapped>::deserialize(d)?;
            Ok(wrapped.into_iter().map(|w| w.0).collect())
        }
    }
}

/// Serde helper for reals that may be infinite; `inf`/`-inf` travel as strings.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("not a real: {t}"))),
            },
        }
    }
}
