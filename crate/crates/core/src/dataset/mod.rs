//! TinyDigits synthesis and batched datasets.
//!
//! TinyDigits samples are 10x10 images made by padding an 8x8 digit pattern
//! with a zero border and elastically deforming it. Images are flattened
//! row-major to 100 inputs and paired with one-hot 10-way targets.

mod csv;
mod deform;
mod pattern;

use std::path::Path;

pub use self::csv::{count_samples, csv_file_width, format_csv_value, format_line, parse_line, read_batches, write_csv};
pub(crate) use self::csv::write_atomic;
pub use self::deform::{
    displacement_field, elastic_deform, gaussian_kernel, pad_pattern, DeformParams, Image, IMAGE_SIDE,
};
pub use self::pattern::{builtin_patterns, load_patterns, DigitPattern, NUM_CLASSES, PATTERN_SIDE};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Orientation};
use crate::rng::RngState;

pub fn one_hot(class: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    v
}

/// Unbatched labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.labels.iter().map(|&c| one_hot(c, self.num_classes)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    pub fn write_csv(&self, data_path: &Path, labels_path: &Path) -> Result<()> {
        write_csv(&self.inputs, &self.targets(), data_path, labels_path)
    }

    /// Splits into consecutive batches of `batchsize`; a trailing partial
    /// batch is dropped.
    pub fn into_dataset(&self, batchsize: usize) -> Result<Dataset> {
        if batchsize == 0 || batchsize > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot batch {} samples by {batchsize}",
                self.len()
            )));
        }
        let n_batches = self.len() / batchsize;
        let width = self.inputs[0].len();
        let targets = self.targets();
        let mut inputs = Vec::with_capacity(n_batches);
        let mut outs = Vec::with_capacity(n_batches);
        for b in 0..n_batches {
            let range = b * batchsize..(b + 1) * batchsize;
            let x: Vec<f64> = self.inputs[range.clone()].concat();
            let y: Vec<f64> = targets[range].concat();
            inputs.push(Matrix::from_row_major(&x, batchsize, width, Orientation::Row)?);
            outs.push(Matrix::from_row_major(&y, batchsize, self.num_classes, Orientation::Row)?);
        }
        Dataset::new(inputs, outs)
    }
}

/// Generates `n_per_class` deformed samples per digit, cycling through each
/// class's patterns in order, then shuffles the whole set.
pub fn generate_tinydigits(
    rng: &mut RngState,
    patterns: &[DigitPattern],
    n_per_class: usize,
    params: &DeformParams,
) -> Result<Samples> {
    params.validate()?;
    let mut by_class: Vec<Vec<Image>> = vec![Vec::new(); NUM_CLASSES];
    for p in patterns {
        by_class[p.digit].push(pad_pattern(p));
    }
    if let Some(missing) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("no pattern for digit {missing}")));
    }
    let mut inputs = Vec::with_capacity(NUM_CLASSES * n_per_class);
    let mut labels = Vec::with_capacity(NUM_CLASSES * n_per_class);
    for (digit, images) in by_class.iter().enumerate() {
        for i in 0..n_per_class {
            let img = elastic_deform(rng, &images[i % images.len()], params)?;
            inputs.push(img.into_pixels());
            labels.push(digit);
        }
    }
    let order = rng.permutation(inputs.len());
    Ok(Samples {
        inputs: order.iter().map(|&i| inputs[i].clone()).collect(),
        labels: order.iter().map(|&i| labels[i]).collect(),
        num_classes: NUM_CLASSES,
    })
}

/// Equally sized row-oriented batches of inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Matrix>,
    targets: Vec<Matrix>,
}

impl Dataset {
    pub fn new(inputs: Vec<Matrix>, targets: Vec<Matrix>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::dim(format!(
                "{} input batches and {} target batches",
                inputs.len(),
                targets.len()
            )));
        }
        let (rows, width, classes) = (inputs[0].rows(), inputs[0].cols(), targets[0].cols());
        for (x, y) in inputs.iter().zip(&targets) {
            if x.shape() != (rows, width) || y.shape() != (rows, classes) {
                return Err(Error::dim("batches differ in shape".to_string()));
            }
        }
        Ok(Dataset { inputs, targets })
    }

    /// Reads parallel data and label files.
    pub fn load(
        data_path: &Path,
        labels_path: &Path,
        n_atts: usize,
        n_classes: usize,
        batchsize: usize,
        n_batches: usize,
    ) -> Result<Self> {
        let inputs = read_batches(data_path, n_atts, batchsize, n_batches)?;
        let targets = read_batches(labels_path, n_classes, batchsize, n_batches)?;
        Self::new(inputs, targets)
    }

    pub fn inputs(&self) -> &[Matrix] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Matrix] {
        &self.targets
    }

    pub fn n_batches(&self) -> usize {
        self.inputs.len()
    }

    pub fn batchsize(&self) -> usize {
        self.inputs[0].rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs[0].cols()
    }

    pub fn n_classes(&self) -> usize {
        self.targets[0].cols()
    }

    /// Samples per class, by argmax of the targets.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for t in &self.targets {
            for row in t.vectors() {
                let k = row
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
                counts[k] += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> DeformParams {
        DeformParams::default()
    }

    #[test]
    fn generates_balanced_shuffled_set() {
        let mut rng = RngState::new(10, 1);
        let s = generate_tinydigits(&mut rng, &builtin_patterns(), 9, &small_params()).unwrap();
        assert_eq!(s.len(), 90);
        assert_eq!(s.class_counts(), vec![9; 10]);
        assert!(s.inputs.iter().all(|x| x.len() == 100));
        assert!(s.inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        for t in s.targets() {
            assert_eq!(t.iter().sum::<f64>(), 1.0);
            assert_eq!(t.iter().filter(|&&v| v == 1.0).count(), 1);
        }
        // shuffled: labels are not in generation order
        assert!(s.labels.windows(2).any(|w| w[0] > w[1]));
    }

    #[test]
    fn full_training_size() {
        let mut rng = RngState::new(10, 2);
        let s = generate_tinydigits(&mut rng, &builtin_patterns(), 90, &small_params()).unwrap();
        assert_eq!(s.len(), 900);
        assert_eq!(s.class_counts(), vec![90; 10]);
        let d = s.into_dataset(10).unwrap();
        assert_eq!((d.n_batches(), d.batchsize(), d.n_inputs(), d.n_classes()), (90, 10, 100, 10));
        assert_eq!(d.class_counts(), vec![90; 10]);
    }

    #[test]
    fn deterministic_generation() {
        let a = generate_tinydigits(&mut RngState::new(4, 4), &builtin_patterns(), 3, &small_params()).unwrap();
        let b = generate_tinydigits(&mut RngState::new(4, 4), &builtin_patterns(), 3, &small_params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_class_rejected() {
        let only_some: Vec<_> = builtin_patterns().into_iter().filter(|p| p.digit != 6).collect();
        let r = generate_tinydigits(&mut RngState::new(0, 0), &only_some, 2, &small_params());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn flattening_is_row_major() {
        let p = &builtin_patterns()[0];
        let img = pad_pattern(p);
        let flat = img.pixels().to_vec();
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(flat[r * 10 + c], img.get(r, c));
            }
        }
        let back = Image::new(10, flat).unwrap();
        assert_eq!(back, img);
    }
}
