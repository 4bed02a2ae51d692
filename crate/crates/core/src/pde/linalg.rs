//! Symmetric banded matrices with direct Cholesky factorization. Grids up to
//! 257 nodes per axis keep the band narrow enough for a dense-band factor.

/// Lower-banded symmetric matrix: entry (i, j) with i - bw <= j <= i is
/// stored at `data[i * (bw + 1) + (j + bw - i)]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> BandedMatrix {
        BandedMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Accumulates into the symmetric entry (i, j); only the lower half is
    /// stored, callers may pass indices in either order.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(hi, lo);
        self.data[s] += v;
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.slot(i, i)]
    }

    /// In-place Cholesky A = L L^T. Returns false when a pivot is not
    /// strictly positive (matrix not numerically SPD).
    pub fn cholesky_in_place(&mut self) -> bool {
        let bw = self.bw;
        for j in 0..self.n {
            let start = j.saturating_sub(bw);
            let mut d = self.data[self.slot(j, j)];
            for k in start..j {
                let l = self.data[self.slot(j, k)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            let sj = self.slot(j, j);
            self.data[sj] = d;
            let end = (j + bw + 1).min(self.n);
            for i in (j + 1)..end {
                let start_i = i.saturating_sub(bw).max(start);
                let mut v = self.data[self.slot(i, j)];
                for k in start_i..j {
                    v -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                let s = self.slot(i, j);
                self.data[s] = v / d;
            }
        }
        true
    }

    /// Solves L L^T x = b given the factored form.
    pub fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let bw = self.bw;
        let mut x = b.to_vec();
        for i in 0..self.n {
            let start = i.saturating_sub(bw);
            let mut v = x[i];
            for k in start..i {
                v -= self.data[self.slot(i, k)] * x[k];
            }
            x[i] = v / self.data[self.slot(i, i)];
        }
        for i in (0..self.n).rev() {
            let mut v = x[i];
            let end = (i + bw + 1).min(self.n);
            for k in (i + 1)..end {
                v -= self.data[self.slot(k, i)] * x[k];
            }
            x[i] = v / self.data[self.slot(i, i)];
        }
        x
    }
}
