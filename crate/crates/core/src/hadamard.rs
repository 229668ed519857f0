//! Orthonormal fast Walsh-Hadamard transform with bit-reversal permutation.
//!
//! The transform is the n-fold Kronecker power of `[[1,1],[1,-1]]/sqrt(2)`
//! with a bit-reversal row permutation in front. It is symmetric and
//! involutory, so it is its own inverse. Scaling by `1/sqrt(2)` happens per
//! butterfly stage to keep intermediate magnitudes bounded.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HadamardError {
    #[error("signal length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("index {index} out of range [1, {n}]")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("indices must be strictly increasing; saw {prev} then {next}")]
    NotStrictlyIncreasing { prev: usize, next: usize },
    #[error("measurement length {got} does not match index set size {expected}")]
    SizeMismatch { got: usize, expected: usize },
}

/// Sorted, unique 1-based indices into `[1, N]`, the reserved set of kept
/// transform coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    n: usize,
}

impl IndexSet {
    /// Build from 1-based indices; must be strictly increasing and in range.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self, HadamardError> {
        let mut prev = 0usize;
        for &i in &indices {
            if i == 0 || i > n {
                return Err(HadamardError::IndexOutOfRange { index: i, n });
            }
            if i <= prev {
                return Err(HadamardError::NotStrictlyIncreasing { prev, next: i });
            }
            prev = i;
        }
        Ok(IndexSet { indices, n })
    }

    /// All of `[1, N]`.
    pub fn full(n: usize) -> Self {
        IndexSet {
            indices: (1..=n).collect(),
            n,
        }
    }

    pub fn from_unsorted(mut indices: Vec<usize>, n: usize) -> Result<Self, HadamardError> {
        indices.sort_unstable();
        indices.dedup();
        IndexSet::new(indices, n)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Membership mask over 0-based positions.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &i in &self.indices {
            m[i - 1] = true;
        }
        m
    }
}

fn check_len(len: usize) -> Result<u32, HadamardError> {
    if len == 0 || !len.is_power_of_two() {
        return Err(HadamardError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

/// In-place butterflies computing the Kronecker power without the final
/// bit-reversal permutation.
fn butterflies(data: &mut [f64]) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut half = 1usize;
    while half < data.len() {
        let block = half * 2;
        for start in (0..data.len()).step_by(block) {
            for i in start..start + half {
                let a = data[i];
                let b = data[i + half];
                data[i] = (a + b) * inv_sqrt2;
                data[i + half] = (a - b) * inv_sqrt2;
            }
        }
        half = block;
    }
}

fn bit_reverse_permute(data: &[f64], n_bits: u32) -> Vec<f64> {
    let len = data.len();
    (0..len)
        .map(|i| {
            let j = if n_bits == 0 {
                0
            } else {
                (i as u64).reverse_bits() as usize >> (64 - n_bits)
            };
            data[j]
        })
        .collect()
}

/// Orthonormal Hadamard transform of `x`; length must be a power of two.
/// Involutory: `fwht(fwht(x)) == x` up to round-off.
pub fn fwht(x: &[f64]) -> Result<Vec<f64>, HadamardError> {
    let n_bits = check_len(x.len())?;
    let mut data = x.to_vec();
    butterflies(&mut data);
    Ok(bit_reverse_permute(&data, n_bits))
}

/// Inverse transform; identical to [`fwht`] because the matrix is involutory.
pub fn inverse(y: &[f64]) -> Result<Vec<f64>, HadamardError> {
    fwht(y)
}

/// Restrict `y` to the coefficients in `set`, in increasing index order.
pub fn project_rows(y: &[f64], set: &IndexSet) -> Result<Vec<f64>, HadamardError> {
    if y.len() != set.signal_len() {
        return Err(HadamardError::SizeMismatch {
            got: y.len(),
            expected: set.signal_len(),
        });
    }
    Ok(set.indices().iter().map(|&i| y[i - 1]).collect())
}

/// Apply the transpose of the partial-row matrix: zero-fill `z` into the
/// positions of `set` and transform. Valid because the full matrix is
/// symmetric orthogonal, so the kept rows are orthonormal.
pub fn embed_rows_transpose(
    z: &[f64],
    set: &IndexSet,
    signal_len: usize,
) -> Result<Vec<f64>, HadamardError> {
    if z.len() != set.len() || signal_len != set.signal_len() {
        return Err(HadamardError::SizeMismatch {
            got: z.len(),
            expected: set.len(),
        });
    }
    let mut y = vec![0.0; signal_len];
    for (v, &i) in z.iter().zip(set.indices()) {
        y[i - 1] = *v;
    }
    fwht(&y)
}

/// Dense transform matrix for small sizes; test oracle and reference.
pub fn dense_matrix(n_bits: u32) -> Vec<Vec<f64>> {
    let n = 1usize << n_bits;
    (0..n)
        .map(|row| {
            let mut e = vec![0.0; n];
            e[row] = 1.0;
            // Row i of a symmetric matrix is the transform of basis vector i.
            fwht(&e).unwrap()
        })
        .collect()
}
