//! Variable exponents p(x), q(x), alpha_i(x), beta_i(x): closed-form
//! descriptors, nodal samples, extrema and derived quantities.

use crate::grid::Grid;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Closed-form exponent descriptor. Restricted to shapes whose extrema over
/// an axis-aligned box have analytic values, so hypothesis checks do not
/// depend on grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Descriptor {
    Constant(f64),
    /// a + bx*x1 + by*x2
    Affine { a: f64, bx: f64, by: f64 },
    /// a + b*sin(c*x1 + e*x2)
    Sinusoidal { a: f64, b: f64, c: f64, e: f64 },
}

impl Descriptor {
    pub fn eval(&self, point: [f64; 2]) -> f64 {
        match *self {
            Descriptor::Constant(v) => v,
            Descriptor::Affine { a, bx, by } => a + bx * point[0] + by * point[1],
            Descriptor::Sinusoidal { a, b, c, e } => {
                a + b * (c * point[0] + e * point[1]).sin()
            }
        }
    }

    /// Exact (min, max) over the domain box.
    pub fn extrema(&self, grid: &Grid) -> (f64, f64) {
        match *self {
            Descriptor::Constant(v) => (v, v),
            Descriptor::Affine { a, bx, by } => {
                let corners = corner_points(grid);
                let vals = corners.iter().map(|p| a + bx * p[0] + by * p[1]);
                fold_extrema(vals)
            }
            Descriptor::Sinusoidal { a, b, c, e } => {
                // The phase t = c*x1 + e*x2 ranges over an interval; extrema
                // of sin over [t0, t1] are at the endpoints or at pi/2 + k*pi.
                let corners = corner_points(grid);
                let (t0, t1) =
                    fold_extrema(corners.iter().map(|p| c * p[0] + e * p[1]));
                let (mut smin, mut smax) = fold_extrema([t0.sin(), t1.sin()].into_iter());
                let half_pi = std::f64::consts::FRAC_PI_2;
                let pi = std::f64::consts::PI;
                let mut k = ((t0 - half_pi) / pi).ceil();
                while half_pi + k * pi <= t1 {
                    let s = (half_pi + k * pi).sin(); // +1 or -1
                    smin = smin.min(s);
                    smax = smax.max(s);
                    k += 1.0;
                }
                if b >= 0.0 {
                    (a + b * smin, a + b * smax)
                } else {
                    (a + b * smax, a + b * smin)
                }
            }
        }
    }
}

fn corner_points(grid: &Grid) -> Vec<[f64; 2]> {
    let ex = grid.extents();
    if grid.dim() == 1 {
        vec![[ex[0].0, 0.0], [ex[0].1, 0.0]]
    } else {
        vec![
            [ex[0].0, ex[1].0],
            [ex[0].1, ex[1].0],
            [ex[0].0, ex[1].1],
            [ex[0].1, ex[1].1],
        ]
    }
}

fn fold_extrema(iter: impl Iterator<Item = f64>) -> (f64, f64) {
    iter.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// A variable exponent sampled on the grid, with cached extrema.
#[derive(Debug, Clone)]
pub struct ExponentField {
    descriptor: Descriptor,
    node_values: Vec<f64>,
    cell_values: Vec<f64>,
    sampled_min: f64,
    sampled_max: f64,
    analytic_min: f64,
    analytic_max: f64,
}

impl ExponentField {
    pub fn sample(descriptor: Descriptor, grid: &Grid) -> ExponentField {
        let node_values: Vec<f64> = (0..grid.node_count())
            .map(|i| descriptor.eval(grid.node_coord(i)))
            .collect();
        let cell_values: Vec<f64> = (0..grid.cell_count())
            .map(|c| descriptor.eval(grid.cell_center(c)))
            .collect();
        let (sampled_min, sampled_max) =
            fold_extrema(node_values.iter().chain(cell_values.iter()).copied());
        let (analytic_min, analytic_max) = descriptor.extrema(grid);
        ExponentField {
            descriptor,
            node_values,
            cell_values,
            sampled_min,
            sampled_max,
            analytic_min,
            analytic_max,
        }
    }

    pub fn constant(value: f64, grid: &Grid) -> ExponentField {
        Self::sample(Descriptor::Constant(value), grid)
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    pub fn at_node(&self, index: usize) -> f64 {
        self.node_values[index]
    }

    pub fn at_cell(&self, cell: usize) -> f64 {
        self.cell_values[cell]
    }

    /// (min, max) over the nodal and cell-center samples.
    pub fn extrema(&self) -> (f64, f64) {
        (self.sampled_min, self.sampled_max)
    }

    /// Exact extrema of the descriptor over the domain box.
    pub fn analytic_extrema(&self) -> (f64, f64) {
        (self.analytic_min, self.analytic_max)
    }

    pub fn min(&self) -> f64 {
        self.sampled_min
    }

    pub fn max(&self) -> f64 {
        self.sampled_max
    }

    /// Infimum used by hypothesis checks: the analytic value (the sampled one
    /// can only be larger).
    pub fn inf(&self) -> f64 {
        self.analytic_min
    }

    pub fn sup(&self) -> f64 {
        self.analytic_max
    }

    /// The Sobolev conjugate N*s/(N - s), defined when s+ < N.
    pub fn sobolev_conjugate(&self, n: usize, grid: &Grid) -> Result<ExponentField> {
        let n_f = n as f64;
        if self.sampled_max >= n_f || self.analytic_max >= n_f {
            return Err(Error::Hypothesis(format!(
                "exponent maximum {} must stay below the dimension {n} for the Sobolev conjugate",
                self.analytic_max.max(self.sampled_max)
            )));
        }
        let node_values: Vec<f64> = self
            .node_values
            .iter()
            .map(|&s| n_f * s / (n_f - s))
            .collect();
        let cell_values: Vec<f64> = self
            .cell_values
            .iter()
            .map(|&s| n_f * s / (n_f - s))
            .collect();
        let (sampled_min, sampled_max) =
            fold_extrema(node_values.iter().chain(cell_values.iter()).copied());
        // s -> N*s/(N-s) is increasing, so extrema map through.
        let analytic_min = n_f * self.analytic_min / (n_f - self.analytic_min);
        let analytic_max = n_f * self.analytic_max / (n_f - self.analytic_max);
        let _ = grid;
        Ok(ExponentField {
            descriptor: Descriptor::Constant(f64::NAN), // derived field, no closed form kept
            node_values,
            cell_values,
            sampled_min,
            sampled_max,
            analytic_min,
            analytic_max,
        })
    }

    /// Pointwise scaling of the exponent, used by the sup-norm limit check.
    pub fn scaled(&self, factor: f64) -> ExponentField {
        let node_values: Vec<f64> = self.node_values.iter().map(|v| v * factor).collect();
        let cell_values: Vec<f64> = self.cell_values.iter().map(|v| v * factor).collect();
        let (sampled_min, sampled_max) =
            fold_extrema(node_values.iter().chain(cell_values.iter()).copied());
        ExponentField {
            descriptor: Descriptor::Constant(f64::NAN),
            node_values,
            cell_values,
            sampled_min,
            sampled_max,
            analytic_min: self.analytic_min * factor,
            analytic_max: self.analytic_max * factor,
        }
    }
}

/// Outcome of the sampled log-Holder check. The scan is a verification over
/// node pairs at the given resolution, not a proof.
#[derive(Debug, Clone, Serialize)]
pub struct LogHolderReport {
    pub supplied_c: f64,
    /// Smallest C admissible over all sampled pairs with |x - y| < 1/2.
    pub smallest_admissible_c: f64,
    pub pass: bool,
    pub pairs_checked: usize,
}

/// Checks |s(x) - s(y)| <= C / (-ln |x - y|) over all node pairs closer
/// than 1/2, against nodal samples of the field.
pub fn log_holder_check(values: &[f64], grid: &Grid, c: f64) -> LogHolderReport {
    let n = grid.node_count();
    let mut smallest = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..n {
        let xi = grid.node_coord(i);
        for j in (i + 1)..n {
            let xj = grid.node_coord(j);
            let dist = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
            if dist >= 0.5 || dist == 0.0 {
                continue;
            }
            pairs += 1;
            let needed = (values[i] - values[j]).abs() * (-dist.ln());
            smallest = smallest.max(needed);
        }
    }
    LogHolderReport {
        supplied_c: c,
        smallest_admissible_c: smallest,
        pass: smallest <= c,
        pairs_checked: pairs,
    }
}
