//! Variable-exponent Lebesgue machinery: nodal fields, modulars, Luxemburg
//! norms and sup norms, all over the cell-averaged midpoint quadrature.

use std::sync::Arc;

use crate::exponents::ExponentField;
use crate::grid::Grid;

/// Relative tolerance of the Luxemburg-norm bisection.
pub const LUXEMBURG_TOL: f64 = 1e-12;

/// Real-valued nodal field on a grid. Dirichlet-flagged fields keep exact
/// zeros on boundary nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    dirichlet: bool,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>, dirichlet: bool) -> GridFunction {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![0.0; n],
            dirichlet,
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>, dirichlet: bool) -> GridFunction {
        assert_eq!(values.len(), grid.node_count());
        let mut f = GridFunction {
            grid,
            values,
            dirichlet,
        };
        if dirichlet {
            f.enforce_boundary();
        }
        f
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        dirichlet: bool,
        f: impl Fn([f64; 2]) -> f64,
    ) -> GridFunction {
        let values = (0..grid.node_count())
            .map(|i| f(grid.node_coord(i)))
            .collect();
        Self::from_values(grid, values, dirichlet)
    }

    fn enforce_boundary(&mut self) {
        for i in 0..self.values.len() {
            if self.grid.is_boundary(i) {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value interpolated to a cell center (mean of the corner values).
    pub fn at_cell(&self, cell: usize) -> f64 {
        let corners = self.grid.cell_corners(cell);
        let sum: f64 = corners.iter().map(|&i| self.values[i]).sum();
        sum / corners.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Nodewise max{u - t, 0}. The Dirichlet flag survives for t >= 0.
    pub fn positive_excess(&self, t: f64) -> GridFunction {
        let values = self.values.iter().map(|&v| (v - t).max(0.0)).collect();
        GridFunction {
            grid: Arc::clone(&self.grid),
            values,
            dirichlet: self.dirichlet && t >= 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        let values = self.values.iter().map(|&v| c * v).collect();
        GridFunction {
            grid: Arc::clone(&self.grid),
            values,
            dirichlet: self.dirichlet,
        }
    }

    /// Sup distance to another field on the same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// rho_p(u) = integral of |u|^{p(x)}, by the cell-averaged midpoint rule.
pub fn modular(u: &GridFunction, p: &ExponentField) -> f64 {
    modular_scaled(u, p, 0.0)
}

/// Modular of u / e^{log_scale}, computed in the log domain so that huge
/// exponent fields (deep Moser chain levels) do not overflow.
fn modular_scaled(u: &GridFunction, p: &ExponentField, log_scale: f64) -> f64 {
    let grid = u.grid();
    let vol = grid.cell_volume();
    let mut exponents: Vec<f64> = Vec::with_capacity(grid.cell_count());
    let mut max_e = f64::NEG_INFINITY;
    for c in 0..grid.cell_count() {
        let uc = u.at_cell(c).abs();
        if uc == 0.0 {
            continue;
        }
        let e = p.at_cell(c) * (uc.ln() - log_scale);
        max_e = max_e.max(e);
        exponents.push(e);
    }
    if exponents.is_empty() {
        return 0.0;
    }
    if max_e > 690.0 {
        // Already astronomically larger than 1; callers only compare to 1.
        return f64::INFINITY;
    }
    vol * exponents.iter().map(|&e| e.exp()).sum::<f64>()
}

/// The Luxemburg norm: the unique a > 0 with rho(u/a) = 1, by bisection on
/// the strictly decreasing map a -> rho(u/a). Returns 0 for u == 0.
pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> f64 {
    let sup = cell_sup(u);
    if sup == 0.0 {
        return 0.0;
    }
    // Bracket in the log domain, expanding geometrically from sup|u|.
    let mut lo = sup.ln();
    let mut hi = lo;
    let ln2 = std::f64::consts::LN_2;
    while modular_scaled(u, p, lo) < 1.0 {
        lo -= ln2;
        if lo < -745.0 {
            return 0.0;
        }
    }
    while modular_scaled(u, p, hi) > 1.0 {
        hi += ln2;
    }
    for _ in 0..200 {
        if hi - lo <= 0.25 * LUXEMBURG_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if modular_scaled(u, p, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn cell_sup(u: &GridFunction) -> f64 {
    (0..u.grid().cell_count()).fold(0.0f64, |m, c| m.max(u.at_cell(c).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Descriptor;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(Grid::interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn modular_of_zero_is_zero() {
        let g = interval(11);
        let u = GridFunction::zeros(Arc::clone(&g), false);
        let p = ExponentField::constant(2.0, &g);
        assert_eq!(modular(&u, &p), 0.0);
    }

    #[test]
    fn modular_of_one_with_p_two() {
        let g = interval(101);
        let u = GridFunction::from_fn(Arc::clone(&g), false, |_| 1.0);
        let p = ExponentField::constant(2.0, &g);
        assert_relative_eq!(modular(&u, &p), 1.0, max_relative = 1e-12);
    }

    // Analytic oracle: integral of 2^{2+x} over (0,1) = 4 / ln 2.
    #[test]
    fn modular_variable_exponent_against_analytic_integral() {
        let oracle = 4.0 / std::f64::consts::LN_2; // 5.770780163555856
        let mut prev_err = f64::INFINITY;
        for n in [51usize, 101, 201] {
            let g = interval(n);
            let u = GridFunction::from_fn(Arc::clone(&g), false, |_| 2.0);
            let p = ExponentField::sample(
                Descriptor::Affine {
                    a: 2.0,
                    bx: 1.0,
                    by: 0.0,
                },
                &g,
            );
            let err = (modular(&u, &p) - oracle).abs();
            let h = g.spacing()[0];
            assert!(err < 2.0 * h * h * oracle, "err {err} at h {h}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn luxemburg_constant_exponent_is_lp_norm() {
        let g = interval(101);
        let u = GridFunction::from_fn(Arc::clone(&g), false, |x| 1.0 + x[0]);
        let p = ExponentField::constant(2.0, &g);
        let lux = luxemburg_norm(&u, &p);
        let lp = modular(&u, &p).sqrt();
        assert_relative_eq!(lux, lp, max_relative = 1e-9);

        let unit = GridFunction::from_fn(Arc::clone(&g), false, |_| 1.0);
        assert_relative_eq!(luxemburg_norm(&unit, &p), 1.0, max_relative = 1e-9);
    }

    // Root of integral over (0,1) of (u(x)/a)^{2+x} dx = 1, computed by a
    // scalar bisection against Simpson quadrature of the integrand.
    fn scalar_luxemburg_oracle(u: impl Fn(f64) -> f64) -> f64 {
        let rho = |a: f64| {
            let m = 4096usize;
            let h = 1.0 / m as f64;
            let f = |x: f64| (u(x).abs() / a).powf(2.0 + x);
            let mut s = f(0.0) + f(1.0);
            for k in 1..m {
                let x = k as f64 * h;
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        let (mut lo, mut hi) = (1e-3f64, 1e3f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rho(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn luxemburg_variable_exponent_against_scalar_oracle() {
        // A constant on a unit-measure domain has norm equal to its value
        // for any exponent: rho(u/a) = 1 exactly at a = 2.
        let root_const = scalar_luxemburg_oracle(|_| 2.0);
        assert_relative_eq!(root_const, 2.0, max_relative = 1e-10);

        let root = scalar_luxemburg_oracle(|x| 1.0 + x);
        let g = interval(401);
        let p = ExponentField::sample(
            Descriptor::Affine {
                a: 2.0,
                bx: 1.0,
                by: 0.0,
            },
            &g,
        );
        let uc = GridFunction::from_fn(Arc::clone(&g), false, |_| 2.0);
        assert_relative_eq!(luxemburg_norm(&uc, &p), 2.0, max_relative = 1e-9);
        let u = GridFunction::from_fn(Arc::clone(&g), false, |x| 1.0 + x[0]);
        let lux = luxemburg_norm(&u, &p);
        let h = g.spacing()[0];
        assert!(
            (lux - root).abs() < 4.0 * h * h * root + 1e-9,
            "lux {lux} vs oracle {root}"
        );
    }

    #[test]
    fn positive_excess_examples() {
        let g = interval(5);
        let half = GridFunction::from_fn(Arc::clone(&g), false, |_| 0.5);
        assert_eq!(half.positive_excess(1.0).sup_norm(), 0.0);
        let three = GridFunction::from_fn(Arc::clone(&g), false, |_| 3.0);
        assert_eq!(three.positive_excess(1.0).values()[2], 2.0);
        let mixed =
            GridFunction::from_values(Arc::clone(&g), vec![0.5, 1.5, 0.5, 1.5, 0.5], false);
        let e = mixed.positive_excess(1.0);
        assert_eq!(e.values(), &[0.0, 0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn sup_norm_examples() {
        let g = interval(1001);
        let u = GridFunction::from_fn(Arc::clone(&g), true, |x| x[0] * (1.0 - x[0]) / 2.0);
        assert!((u.sup_norm() - 0.125).abs() < 1e-6);
        assert_eq!(u.scaled(-1.0).sup_norm(), u.sup_norm());
        assert_eq!(GridFunction::zeros(g, true).sup_norm(), 0.0);
    }

    #[test]
    fn dirichlet_flag_zeroes_boundary() {
        let g = interval(5);
        let u = GridFunction::from_fn(Arc::clone(&g), true, |_| 7.0);
        assert_eq!(u.values()[0], 0.0);
        assert_eq!(u.values()[4], 0.0);
        assert_eq!(u.values()[2], 7.0);
    }

    #[test]
    fn sup_norm_is_limit_of_luxemburg_norms() {
        let g = interval(201);
        let u = GridFunction::from_fn(Arc::clone(&g), false, |x| {
            0.3 + (3.0 * x[0]).sin().abs()
        });
        let p = ExponentField::constant(1.5, &g);
        // Cell interpolation caps the achievable value at the cell-level sup.
        let cell_sup_val = cell_sup(&u);
        let mut prev = 0.0;
        for r in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let norm = luxemburg_norm(&u, &p.scaled(r));
            assert!(norm >= prev - 1e-9);
            prev = norm;
        }
        assert!(prev <= cell_sup_val + 1e-9);
        assert!(cell_sup_val - prev < 0.2 * cell_sup_val);
        assert!(u.sup_norm() >= cell_sup_val - 1e-12);
    }

    fn random_field_and_exponent(
        n: usize,
        seed: u64,
    ) -> (Arc<Grid>, GridFunction, ExponentField) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), n, n).unwrap());
        let values = (0..g.node_count())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let u = GridFunction::from_values(Arc::clone(&g), values, false);
        let a = rng.gen_range(1.3..1.7);
        let b = rng.gen_range(0.0..0.2);
        let p = ExponentField::sample(
            Descriptor::Sinusoidal {
                a,
                b,
                c: rng.gen_range(0.5..4.0),
                e: rng.gen_range(0.5..4.0),
            },
            &g,
        );
        (g, u, p)
    }

    #[test]
    fn lemma_l1_on_random_fields() {
        for seed in 0..40 {
            let (_, u, p) = random_field_and_exponent(9, seed);
            let norm = luxemburg_norm(&u, &p);
            if norm == 0.0 {
                continue;
            }
            let rho = modular(&u, &p);
            let (pm, pp) = p.extrema();
            let tol = 1e-9;
            if norm > 1.0 {
                assert!(norm.powf(pm) <= rho * (1.0 + tol));
                assert!(rho <= norm.powf(pp) * (1.0 + tol));
            } else {
                assert!(norm.powf(pp) <= rho * (1.0 + tol));
                assert!(rho <= norm.powf(pm) * (1.0 + tol));
            }
            // L1(ii): unit modular at the norm.
            let unit = modular(&u.scaled(1.0 / norm), &p);
            assert!((unit - 1.0).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn homogeneity(seed in 0u64..1000, c in -5.0f64..5.0) {
            prop_assume!(c.abs() > 1e-6);
            let (_, u, p) = random_field_and_exponent(7, seed);
            let norm = luxemburg_norm(&u, &p);
            let scaled = luxemburg_norm(&u.scaled(c), &p);
            prop_assert!((scaled - c.abs() * norm).abs() <= 1e-9 * (1.0 + norm));
        }

        #[test]
        fn monotonicity_in_magnitude(seed in 0u64..1000, shrink in 0.0f64..1.0) {
            let (g, u, p) = random_field_and_exponent(7, seed);
            // |w| <= |u| nodewise with the same sign pattern.
            let w = GridFunction::from_values(
                Arc::clone(&g),
                u.values().iter().map(|v| v * shrink).collect(),
                false,
            );
            prop_assert!(luxemburg_norm(&w, &p) <= luxemburg_norm(&u, &p) + 1e-9);
        }
    }
}
