use crate::scalar::Scalar;

/// Dense row-major tensor of rank 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut() -> T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| f()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `out = self · x` for a matrix.
    pub fn matvec(&self, x: &[T], out: &mut [T]) {
        let c = self.cols();
        debug_assert_eq!(x.len(), c);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * c..(r + 1) * c];
            *o = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    /// `out += selfᵀ · y`.
    pub fn matvec_t_add(&self, y: &[T], out: &mut [T]) {
        let c = self.cols();
        for (r, &yr) in y.iter().enumerate() {
            if yr == T::zero() {
                continue;
            }
            let row = &self.data[r * c..(r + 1) * c];
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + a * yr;
            }
        }
    }

    /// `self += y ⊗ x`.
    pub fn add_outer(&mut self, y: &[T], x: &[T]) {
        let c = self.cols();
        for (r, &yr) in y.iter().enumerate() {
            if yr == T::zero() {
                continue;
            }
            let row = &mut self.data[r * c..(r + 1) * c];
            for (o, &b) in row.iter_mut().zip(x) {
                *o = *o + yr * b;
            }
        }
    }

    pub fn add_vec(&mut self, x: &[T]) {
        for (o, &b) in self.data.iter_mut().zip(x) {
            *o = *o + b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose_agree() {
        let m = Tensor {
            shape: vec![2, 3],
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let mut out = vec![0.0; 2];
        m.matvec(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut back = vec![0.0; 3];
        m.matvec_t_add(&[1.0, 1.0], &mut back);
        assert_eq!(back, vec![5.0, 7.0, 9.0]);
        let mut z = Tensor::<f64>::zeros(&[2, 3]);
        z.add_outer(&[1.0, 2.0], &[1.0, 0.0, 1.0]);
        assert_eq!(z.data, vec![1.0, 0.0, 1.0, 2.0, 0.0, 2.0]);
    }
}
