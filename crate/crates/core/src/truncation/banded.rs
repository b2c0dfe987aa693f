//! Banded LU without pivoting, for the M-matrix systems of hitting times.

use crate::error::{QsdError, Result};

/// Square matrix stored in band form: `a[i][j]` for `i - lower <= j <= i + upper`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, lower: usize, upper: usize) -> Self {
        let width = lower + upper + 1;
        BandMatrix {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.lower - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.lower >= i && j <= i + self.upper);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// Solves `A x = b` in place by Gaussian elimination without pivoting.
    /// Fill-in stays inside the band, so the factorization is in place.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(QsdError::Singular(format!("zero pivot at row {k}")));
            }
            let jmax = (k + self.upper).min(n - 1);
            for i in (k + 1)..=(k + self.lower).min(n - 1) {
                let ik = self.at(i, k);
                let f = self.data[ik] / pivot;
                if f == 0.0 {
                    continue;
                }
                self.data[ik] = 0.0;
                for j in (k + 1)..=jmax {
                    let kj = self.data[self.at(k, j)];
                    if kj != 0.0 {
                        let ij = self.at(i, j);
                        self.data[ij] -= f * kj;
                    }
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in (k + 1)..=(k + self.upper).min(n - 1) {
                acc -= self.data[self.at(k, j)] * b[j];
            }
            b[k] = acc / self.data[self.at(k, k)];
        }
        Ok(())
    }
}
