//! Dense multi-dimensional complex tensors, row-major, with the handful of
//! operations circuit contraction needs: permutation, reshape, outer product,
//! and pairwise axis contraction.
//!
//! A rank-0 tensor is a scalar; closed circuits evaluate to one.

use num_complex::Complex64;

/// Dense tensor over complex scalars. Shape `[]` holds a single scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Tensor {
        assert_eq!(
            element_count(&shape),
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor { shape, data }
    }

    pub fn scalar(value: Complex64) -> Tensor {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let len = element_count(&shape);
        Tensor {
            shape,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Tensor {
        Tensor::new(
            shape,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// All-ones tensor; rank-1 instances are the default discard covectors.
    pub fn ones(shape: Vec<usize>) -> Tensor {
        let len = element_count(&shape);
        Tensor {
            shape,
            data: vec![Complex64::new(1.0, 0.0); len],
        }
    }

    /// Kronecker delta on two legs of equal dimension.
    pub fn delta(dim: usize) -> Tensor {
        let mut t = Tensor::zeros(vec![dim, dim]);
        for i in 0..dim {
            t.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_scalar(&self) -> Option<Complex64> {
        (self.rank() == 0).then(|| self.data[0])
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut strides = vec![1usize; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        strides
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        debug_assert_eq!(index.len(), self.rank());
        let strides = Tensor::strides(&self.shape);
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    pub fn set(&mut self, index: &[usize], value: Complex64) {
        debug_assert_eq!(index.len(), self.rank());
        let strides = Tensor::strides(&self.shape);
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat] = value;
    }

    /// Reinterpret with a new shape of the same element count (row-major).
    pub fn reshape(mut self, shape: Vec<usize>) -> Tensor {
        assert_eq!(
            element_count(&shape),
            self.data.len(),
            "reshape {:?} -> {:?} changes element count",
            self.shape,
            shape
        );
        self.shape = shape;
        self
    }

    /// Axis permutation: `result[i_0, ..] = self[i_{perm[0]}, ..]`, i.e. axis
    /// `k` of the result is axis `perm[k]` of the input.
    pub fn permute(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rank(), "permutation arity mismatch");
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = Tensor::strides(&self.shape);
        let mut result = Tensor::zeros(new_shape.clone());
        let mut index = vec![0usize; perm.len()];
        for flat in 0..result.data.len() {
            let mut rem = flat;
            for (k, &dim) in new_shape.iter().enumerate() {
                let block: usize = new_shape[k + 1..].iter().product();
                index[k] = rem / block;
                rem %= block.max(1);
                debug_assert!(index[k] < dim || dim == 0);
            }
            let old_flat: usize = index
                .iter()
                .enumerate()
                .map(|(k, &i)| i * old_strides[perm[k]])
                .sum();
            result.data[flat] = self.data[old_flat];
        }
        result
    }

    /// Tensor product; legs of `self` first.
    pub fn outer(&self, other: &Tensor) -> Tensor {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for &a in &self.data {
            for &b in &other.data {
                data.push(a * b);
            }
        }
        Tensor::new(shape, data)
    }

    /// Contract `axes_a[k]` of `self` with `axes_b[k]` of `other` for each
    /// `k`; remaining legs of `self` come first in the result.
    pub fn contract(&self, axes_a: &[usize], other: &Tensor, axes_b: &[usize]) -> Tensor {
        assert_eq!(axes_a.len(), axes_b.len(), "contraction arity mismatch");
        for (&a, &b) in axes_a.iter().zip(axes_b) {
            assert_eq!(
                self.shape[a], other.shape[b],
                "contracted axes must have equal dimension"
            );
        }
        let kept_a: Vec<usize> = (0..self.rank()).filter(|i| !axes_a.contains(i)).collect();
        let kept_b: Vec<usize> = (0..other.rank()).filter(|i| !axes_b.contains(i)).collect();

        let perm_a: Vec<usize> = kept_a.iter().chain(axes_a.iter()).copied().collect();
        let perm_b: Vec<usize> = axes_b.iter().chain(kept_b.iter()).copied().collect();
        let a = self.permute(&perm_a);
        let b = other.permute(&perm_b);

        let m: usize = kept_a.iter().map(|&i| self.shape[i]).product();
        let k: usize = axes_a.iter().map(|&i| self.shape[i]).product();
        let n: usize = kept_b.iter().map(|&i| other.shape[i]).product();

        let mut data = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for t in 0..k {
                let lhs = a.data[i * k + t];
                if lhs == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &b.data[t * n..(t + 1) * n];
                for (j, &rhs) in row.iter().enumerate() {
                    data[i * n + j] += lhs * rhs;
                }
            }
        }
        let mut shape: Vec<usize> = kept_a.iter().map(|&i| self.shape[i]).collect();
        shape.extend(kept_b.iter().map(|&i| other.shape[i]));
        Tensor::new(shape, data)
    }

    /// Largest elementwise modulus of the difference; `None` when shapes
    /// differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0f64, f64::max)
    }
}

/// Outcome of a tolerance comparison. `max_abs_diff` is infinite when the
/// shapes disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorComparison {
    pub equal: bool,
    pub max_abs_diff: f64,
}

/// Elementwise comparison with absolute tolerance; shape mismatch is never
/// equal.
pub fn tensors_equal(a: &Tensor, b: &Tensor, tol: f64) -> TensorComparison {
    match a.max_abs_diff(b) {
        Some(diff) => TensorComparison {
            equal: diff <= tol,
            max_abs_diff: diff,
        },
        None => TensorComparison {
            equal: false,
            max_abs_diff: f64::INFINITY,
        },
    }
}
