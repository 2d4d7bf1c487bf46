use serde::Serialize;

/// Dense cubic rank-3 array, `t[a][b][c]` stored at `(a * dim + b) * dim + c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    /// The `dim x dim` slab with the leading index fixed, row-major.
    pub fn slab(&self, a: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.data[a * s..(a + 1) * s]
    }

    pub fn slab_mut(&mut self, a: usize) -> &mut [f64] {
        let s = self.dim * self.dim;
        &mut self.data[a * s..(a + 1) * s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Nested `[a][b][c]` arrays for serialization.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|a| {
                (0..self.dim)
                    .map(|b| self.data[(a * self.dim + b) * self.dim..][..self.dim].to_vec())
                    .collect()
            })
            .collect()
    }
}
