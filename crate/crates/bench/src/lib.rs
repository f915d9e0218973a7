//! Shared fixtures for the criterion benchmarks.

use tinynet::{init_network, Activation, CostKind, InitScheme, Matrix, Network, Orientation, RngState};

/// The TinyDigits benchmark architecture.
pub const TINY_ARCH: [usize; 5] = [100, 80, 80, 200, 10];

pub fn random_rows(rng: &mut RngState, rows: usize, cols: usize) -> Matrix {
    Matrix::uniform(rng, 1.0, rows, cols, Orientation::Row).expect("non-empty shape")
}

pub fn random_cols(rng: &mut RngState, rows: usize, cols: usize) -> Matrix {
    Matrix::uniform(rng, 1.0, rows, cols, Orientation::Col).expect("non-empty shape")
}

pub fn tiny_network(rng: &mut RngState, scheme: InitScheme) -> Network {
    let inits = init_network(rng, &TINY_ARCH, scheme, &[]).expect("valid architecture");
    Network::from_init(inits, Activation::Tanh, CostKind::Nll).expect("conformable layers")
}

/// A batch of one-hot targets cycling through the classes.
pub fn cyclic_targets(batch: usize, classes: usize) -> Matrix {
    let mut t = vec![0.0; batch * classes];
    for i in 0..batch {
        t[i * classes + i % classes] = 1.0;
    }
    Matrix::from_row_major(&t, batch, classes, Orientation::Row).expect("shape matches")
}
