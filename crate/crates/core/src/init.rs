//! Weight initialization schemes.
//!
//! Every scheme fills an `n_in x n_out` column-oriented weight matrix, one
//! column per output unit holding that unit's incoming weights, and sets the
//! biases to zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Orientation};
use crate::rng::RngState;

pub const SPARSE3_C1: f64 = 0.456463462775;
pub const SPARSE3_C2: f64 = -1.43515478736;
pub const SPARSE_K: usize = 15;

/// Serialized as its parseable string form, e.g. `"sparse:15"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitScheme {
    /// U[-1/sqrt(n_in), 1/sqrt(n_in)].
    Standard,
    /// U[-b, b] with b = sqrt(6) / sqrt(n_in + n_out).
    Normalized,
    /// `k` unit-Gaussian incoming weights per unit, the rest zero.
    Sparse { k: usize },
    /// Two constants and one tanh(tanh(N(0,1))) draw per unit, the rest zero.
    Sparse3 { c1: f64, c2: f64 },
}

impl InitScheme {
    pub fn sparse() -> Self {
        InitScheme::Sparse { k: SPARSE_K }
    }

    pub fn sparse3() -> Self {
        InitScheme::Sparse3 {
            c1: SPARSE3_C1,
            c2: SPARSE3_C2,
        }
    }

    /// Short identifier used in tables and file names.
    pub fn id(&self) -> String {
        match *self {
            InitScheme::Standard => "standard".into(),
            InitScheme::Normalized => "normalized".into(),
            InitScheme::Sparse { k } if k == SPARSE_K => "sparse".into(),
            InitScheme::Sparse { k } => format!("sparse-k{k}"),
            InitScheme::Sparse3 { c1, c2 } if c1 == SPARSE3_C1 && c2 == SPARSE3_C2 => "sparse3".into(),
            InitScheme::Sparse3 { c1, c2 } => format!("sparse3-c1{c1}-c2{c2}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitScheme::Sparse { k: 0 } => {
                Err(Error::Config("sparse initialization needs k >= 1".into()))
            }
            InitScheme::Sparse3 { c1, c2 } if !c1.is_finite() || !c2.is_finite() => {
                Err(Error::Config("sparse-3 constants must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

impl InitScheme {
    /// String form accepted by [`FromStr`], carrying every parameter.
    pub fn to_spec(&self) -> String {
        match *self {
            InitScheme::Standard => "standard".into(),
            InitScheme::Normalized => "normalized".into(),
            InitScheme::Sparse { k } => format!("sparse:{k}"),
            InitScheme::Sparse3 { c1, c2 } => format!("sparse3:{c1:?}:{c2:?}"),
        }
    }
}

impl From<InitScheme> for String {
    fn from(s: InitScheme) -> String {
        s.to_spec()
    }
}

impl TryFrom<String> for InitScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    /// Accepts `standard`, `normal`, `normalized`, `sparse`, `sparse:K`,
    /// `sparse3` and `sparse3:C1:C2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let args: Vec<&str> = parts.collect();
        let bad = || Error::Config(format!("unknown initialization scheme {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let scheme = match (name.as_str(), args.as_slice()) {
            ("standard" | "normal", []) => InitScheme::Standard,
            ("normalized" | "normalised", []) => InitScheme::Normalized,
            ("sparse", []) => InitScheme::sparse(),
            ("sparse", [k]) => InitScheme::Sparse {
                k: k.trim().parse().map_err(|_| bad())?,
            },
            ("sparse3" | "sparse-3", []) => InitScheme::sparse3(),
            ("sparse3" | "sparse-3", [c1, c2]) => InitScheme::Sparse3 {
                c1: num(c1)?,
                c2: num(c2)?,
            },
            _ => return Err(bad()),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerInit {
    /// `n_in x n_out`, column-oriented.
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerInit {
    pub fn n_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.cols()
    }
}

fn check_sizes(n_in: usize, n_out: usize) -> Result<()> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "layer sizes must be positive, got {n_in}x{n_out}"
        )));
    }
    Ok(())
}

pub fn init_standard(rng: &mut RngState, n_in: usize, n_out: usize) -> Result<LayerInit> {
    check_sizes(n_in, n_out)?;
    let bound = 1.0 / (n_in as f64).sqrt();
    Ok(LayerInit {
        weights: Matrix::uniform(rng, bound, n_in, n_out, Orientation::Col)?,
        biases: vec![0.0; n_out],
    })
}

pub fn normalized_bound(n_in: usize, n_out: usize) -> f64 {
    6f64.sqrt() / ((n_in + n_out) as f64).sqrt()
}

pub fn init_normalized(rng: &mut RngState, n_in: usize, n_out: usize) -> Result<LayerInit> {
    check_sizes(n_in, n_out)?;
    Ok(LayerInit {
        weights: Matrix::uniform(rng, normalized_bound(n_in, n_out), n_in, n_out, Orientation::Col)?,
        biases: vec![0.0; n_out],
    })
}

/// Spreads `values` over the (one-based, ascending) `positions` of a column of
/// length `n_in`: the first value goes to the smallest index.
fn scatter(n_in: usize, positions: &[usize], values: &[f64]) -> Vec<f64> {
    let mut column = vec![0.0; n_in];
    for (&p, &v) in positions.iter().zip(values) {
        column[p - 1] = v;
    }
    column
}

pub fn init_sparse(rng: &mut RngState, n_in: usize, n_out: usize, k: usize) -> Result<LayerInit> {
    check_sizes(n_in, n_out)?;
    if k == 0 {
        return Err(Error::InvalidArgument("sparse initialization needs k >= 1".into()));
    }
    let nonzeros = k.min(n_in);
    let mut columns = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let positions = rng.rand_perm(nonzeros, n_in)?;
        let values: Vec<f64> = (0..nonzeros).map(|_| rng.rand_normal(0.0, 1.0)).collect();
        columns.push(scatter(n_in, &positions, &values));
    }
    Ok(LayerInit {
        weights: Matrix::from_vectors(columns, n_in, n_out, Orientation::Col)?,
        biases: vec![0.0; n_out],
    })
}

/// The per-unit value triple: `(c1, c2, tanh(tanh(z)))`, `z ~ N(0, 1)`.
pub fn sparse3_values(rng: &mut RngState, c1: f64, c2: f64) -> [f64; 3] {
    [c1, c2, rng.rand_normal(0.0, 1.0).tanh().tanh()]
}

pub fn init_sparse3(
    rng: &mut RngState,
    n_in: usize,
    n_out: usize,
    c1: f64,
    c2: f64,
) -> Result<LayerInit> {
    check_sizes(n_in, n_out)?;
    // Fewer than three inputs: keep the leading values of the triple.
    let nonzeros = 3.min(n_in);
    let mut columns = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let values = sparse3_values(rng, c1, c2);
        let positions = rng.rand_perm(nonzeros, n_in)?;
        columns.push(scatter(n_in, &positions, &values[..nonzeros]));
    }
    Ok(LayerInit {
        weights: Matrix::from_vectors(columns, n_in, n_out, Orientation::Col)?,
        biases: vec![0.0; n_out],
    })
}

pub fn init_layer(rng: &mut RngState, n_in: usize, n_out: usize, scheme: InitScheme) -> Result<LayerInit> {
    match scheme {
        InitScheme::Standard => init_standard(rng, n_in, n_out),
        InitScheme::Normalized => init_normalized(rng, n_in, n_out),
        InitScheme::Sparse { k } => init_sparse(rng, n_in, n_out, k),
        InitScheme::Sparse3 { c1, c2 } => init_sparse3(rng, n_in, n_out, c1, c2),
    }
}

/// Initializes one layer per adjacent pair of `layer_sizes`, in order.
///
/// `overrides[i]`, when present, replaces layer `i` verbatim; layers without an
/// override (including those past the end of `overrides`) use `scheme`.
pub fn init_network(
    rng: &mut RngState,
    layer_sizes: &[usize],
    scheme: InitScheme,
    overrides: &[Option<LayerInit>],
) -> Result<Vec<LayerInit>> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a network needs at least two layer sizes, got {layer_sizes:?}"
        )));
    }
    if overrides.len() > layer_sizes.len() - 1 {
        return Err(Error::dim(format!(
            "{} overrides for {} weight layers",
            overrides.len(),
            layer_sizes.len() - 1
        )));
    }
    layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (n_in, n_out) = (pair[0], pair[1]);
            match overrides.get(i).and_then(Option::as_ref) {
                Some(given) => {
                    if given.weights.shape() != (n_in, n_out) || given.biases.len() != n_out {
                        return Err(Error::dim(format!(
                            "override for layer {i} is {}x{} with {} biases, expected {n_in}x{n_out}",
                            given.n_in(),
                            given.n_out(),
                            given.biases.len()
                        )));
                    }
                    let weights = match given.weights.orientation() {
                        Orientation::Col => given.weights.clone(),
                        Orientation::Row => given.weights.change_orientation(),
                    };
                    Ok(LayerInit {
                        weights,
                        biases: given.biases.clone(),
                    })
                }
                None => init_layer(rng, n_in, n_out, scheme),
            }
        })
        .collect()
}
