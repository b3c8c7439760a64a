//! Symmetric positive definite band matrices and their Cholesky factors.

/// Lower band of a symmetric matrix with half-bandwidth `b`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.b);
        i * (self.b + 1) + (i - j)
    }

    /// Adds `v` at `(i, j)` (and implicitly at `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(hi, lo);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.b {
            0.0
        } else {
            self.data[self.slot(hi, lo)]
        }
    }

    /// Replaces row and column `i` with the identity.
    pub fn pin(&mut self, i: usize) {
        let lo = i.saturating_sub(self.b);
        for j in lo..i {
            let s = self.slot(i, j);
            self.data[s] = 0.0;
        }
        for k in i + 1..(i + self.b + 1).min(self.n) {
            let s = self.slot(k, i);
            self.data[s] = 0.0;
        }
        let s = self.slot(i, i);
        self.data[s] = 1.0;
    }

    /// In-place Cholesky factorization; `None` if a pivot is not positive.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, b) = (self.n, self.b);
        for j in 0..n {
            let lo = j.saturating_sub(b);
            let mut d = self.data[self.slot(j, j)];
            for k in lo..j {
                let l = self.data[self.slot(j, k)];
                d -= l * l;
            }
            if !(d > 0.0 && d.is_finite()) {
                return None;
            }
            let d = d.sqrt();
            let sjj = self.slot(j, j);
            self.data[sjj] = d;
            for i in j + 1..(j + b + 1).min(n) {
                let lo_i = i.saturating_sub(b);
                let mut s = self.data[self.slot(i, j)];
                for k in lo_i.max(lo)..j {
                    s -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                let sij = self.slot(i, j);
                self.data[sij] = s / d;
            }
        }
        Some(BandCholesky { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    m: BandMatrix,
}

impl BandCholesky {
    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.m.n, self.m.b);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(b)..i {
                s -= self.m.data[self.m.slot(i, k)] * y[k];
            }
            y[i] = s / self.m.data[self.m.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= self.m.data[self.m.slot(k, i)] * y[k];
            }
            y[i] = s / self.m.data[self.m.slot(i, i)];
        }
        y
    }
}
