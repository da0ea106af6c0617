//! Dense n-dimensional tensors in row-major order.

use crate::error::{Error, Result};
use crate::scalar::{Dual, Real};

/// Dense tensor: shape plus row-major data. The universal value carrier.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E: Real = f32> {
    shape: Vec<usize>,
    data: Vec<E>,
}

impl<E: Real> Tensor<E> {
    /// Build from shape and data; `product(shape)` must equal `data.len()`.
    pub fn from_vec(shape: &[usize], data: Vec<E>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} implies {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![E::zero(); numel],
        }
    }

    pub fn filled(shape: &[usize], value: E) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: E) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    /// Same data, new shape; element counts must match.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} ({} elems) to {shape:?} ({numel} elems)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(E, E) -> E) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "zip of {:?} with {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: E) -> Self {
        self.map(|v| v * factor)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "add of {:?} with {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> E {
        let mut acc = E::zero();
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    pub fn dot(&self, other: &Self) -> Result<E> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "dot of {:?} with {:?}",
                self.shape, other.shape
            )));
        }
        let mut acc = E::zero();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            acc += a * b;
        }
        Ok(acc)
    }

    pub fn sq_norm(&self) -> E {
        let mut acc = E::zero();
        for &v in &self.data {
            acc += v * v;
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite_val())
    }

    /// Extract batch row `i` of a `[B, ...]` tensor as a `[...]` tensor.
    pub fn batch_row(&self, i: usize) -> Result<Self> {
        if self.shape.len() < 2 {
            return Err(Error::ShapeMismatch(
                "batch_row needs a rank >= 2 tensor".into(),
            ));
        }
        let b = self.shape[0];
        if i >= b {
            return Err(Error::ShapeMismatch(format!(
                "batch row {i} out of range for batch {b}"
            )));
        }
        let row: usize = self.shape[1..].iter().product();
        Ok(Tensor {
            shape: self.shape[1..].to_vec(),
            data: self.data[i * row..(i + 1) * row].to_vec(),
        })
    }

    /// Stack same-shaped tensors along a new leading batch axis.
    pub fn stack(rows: &[Self]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::ShapeMismatch("stack of zero tensors".into()))?;
        let mut data = Vec::with_capacity(first.numel() * rows.len());
        for r in rows {
            if r.shape != first.shape {
                return Err(Error::ShapeMismatch(format!(
                    "stack of {:?} with {:?}",
                    first.shape, r.shape
                )));
            }
            data.extend_from_slice(&r.data);
        }
        let mut shape = vec![rows.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Tensor { shape, data })
    }

    /// Select a subset of batch rows, in the given order.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self> {
        let rows: Result<Vec<Self>> = idx.iter().map(|&i| self.batch_row(i)).collect();
        Tensor::stack(&rows?)
    }

    pub fn cast<F: Real>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| F::from_f64(v.primal())).collect(),
        }
    }
}

impl Tensor<f32> {
    /// Lift to dual numbers; `tangent`, when given, must match the shape.
    pub fn to_dual(&self, tangent: Option<&Tensor<f32>>) -> Result<Tensor<Dual<f32>>> {
        let data = match tangent {
            Some(t) => {
                if t.shape != self.shape {
                    return Err(Error::ShapeMismatch(format!(
                        "tangent {:?} for tensor {:?}",
                        t.shape, self.shape
                    )));
                }
                self.data
                    .iter()
                    .zip(t.data.iter())
                    .map(|(&v, &dv)| Dual::new(v, dv))
                    .collect()
            }
            None => self.data.iter().map(|&v| Dual::constant(v)).collect(),
        };
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }
}

impl Tensor<Dual<f32>> {
    pub fn primal_part(&self) -> Tensor<f32> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|d| d.val).collect(),
        }
    }

    pub fn tangent_part(&self) -> Tensor<f32> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|d| d.tan).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_validates_shape() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::from_vec(&[2, 3], (0..6).map(|i| i as f32).collect()).unwrap();
        let r = t.reshape(&[6]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(&[4]).is_err());
    }

    #[test]
    fn stack_and_rows_round_trip() {
        let a = Tensor::from_vec(&[2], vec![1.0f32, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0f32, 4.0]).unwrap();
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.batch_row(0).unwrap(), a);
        assert_eq!(s.batch_row(1).unwrap(), b);
    }

    #[test]
    fn dual_round_trip() {
        let t = Tensor::from_vec(&[3], vec![1.0f32, -2.0, 0.5]).unwrap();
        let tan = Tensor::from_vec(&[3], vec![0.1f32, 0.2, 0.3]).unwrap();
        let d = t.to_dual(Some(&tan)).unwrap();
        assert_eq!(d.primal_part(), t);
        assert_eq!(d.tangent_part(), tan);
    }
}
