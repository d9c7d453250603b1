//! Scalar and bivariate normal distribution oracles.
//!
//! These back the closed-form limit laws the verification suite compares
//! against. The bivariate CDF is computed by integrating the conditional
//! normal CDF along one axis; a precomputed lookup table serves bulk grid
//! evaluation at ~1e-5 absolute accuracy.

use statrs::function::erf;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile (inverse CDF).
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Bivariate normal law with general means, standard deviations, and
/// correlation.
#[derive(Debug, Clone, Copy)]
pub struct BivariateNormal {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub rho: f64,
}

impl BivariateNormal {
    pub fn new(mean: [f64; 2], sd: [f64; 2], rho: f64) -> Self {
        assert!(sd[0] > 0.0 && sd[1] > 0.0, "standard deviations must be positive");
        assert!(rho.abs() < 1.0, "correlation must lie in (-1, 1)");
        BivariateNormal { mean, sd, rho }
    }

    fn standardize(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.mean[0]) / self.sd[0],
            (y - self.mean[1]) / self.sd[1],
        )
    }

    /// Joint CDF `P(X <= x, Y <= y)`.
    ///
    /// Composite two-point Gauss–Legendre along the first axis with the
    /// conditional CDF as integrand; absolute error is far below 1e-10.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let (s, t) = self.standardize(x, y);
        std_bvn_cdf(s, t, self.rho)
    }

    /// Precompute a grid table for bulk evaluation.
    pub fn table(&self) -> BvnTable {
        BvnTable::build(*self)
    }
}

/// Standardized bivariate normal CDF by direct quadrature.
fn std_bvn_cdf(s: f64, t: f64, rho: f64) -> f64 {
    const LO: f64 = -9.0;
    if s <= LO || t <= LO {
        return 0.0;
    }
    let upper = s.min(9.0);
    let cond_sd = (1.0 - rho * rho).sqrt();
    // 2-point Gauss-Legendre on segments of width <= 0.02
    let n_seg = (((upper - LO) / 0.02).ceil() as usize).max(1);
    let h = (upper - LO) / n_seg as f64;
    let offset = h * 0.5 / 3.0_f64.sqrt();
    let mut acc = 0.0;
    for i in 0..n_seg {
        let mid = LO + (i as f64 + 0.5) * h;
        for u in [mid - offset, mid + offset] {
            acc += 0.5 * h * std_normal_pdf(u) * std_normal_cdf((t - rho * u) / cond_sd);
        }
    }
    acc.clamp(0.0, 1.0)
}

/// Lookup table for a [`BivariateNormal`] CDF on a uniform standardized grid,
/// evaluated by bilinear interpolation.
///
/// Grid step 0.01 over [-6.5, 6.5]^2 keeps the interpolation error below
/// ~1e-5 in absolute terms; queries beyond the grid fall back to the exact
/// marginal (the truncated mass is below 1e-10).
pub struct BvnTable {
    law: BivariateNormal,
    lo: f64,
    step: f64,
    n: usize,
    values: Vec<f64>,
    /// Phi at each grid ordinate, for out-of-range queries.
    marginal: Vec<f64>,
}

impl BvnTable {
    fn build(law: BivariateNormal) -> Self {
        let lo = -6.5;
        let hi = 6.5;
        let n = 1301usize;
        let step = (hi - lo) / (n - 1) as f64;
        let cond_sd = (1.0 - law.rho * law.rho).sqrt();
        let ts: Vec<f64> = (0..n).map(|j| lo + j as f64 * step).collect();
        let marginal: Vec<f64> = ts.iter().map(|&t| std_normal_cdf(t)).collect();

        // cumulative quadrature along s, all t columns at once
        let mut values = vec![0.0f64; n * n];
        let mut row = vec![0.0f64; n];
        let offset = step * 0.5 / 3.0_f64.sqrt();
        // row 0: integral from -inf to lo, below 5e-11; start from zero
        for i in 1..n {
            let mid = lo + (i as f64 - 0.5) * step;
            for u in [mid - offset, mid + offset] {
                let w = 0.5 * step * std_normal_pdf(u);
                if w < 1e-300 {
                    continue;
                }
                for (j, &t) in ts.iter().enumerate() {
                    row[j] += w * std_normal_cdf((t - law.rho * u) / cond_sd);
                }
            }
            values[i * n..(i + 1) * n].copy_from_slice(&row);
        }
        BvnTable {
            law,
            lo,
            step,
            n,
            values,
            marginal,
        }
    }

    fn axis(&self, v: f64) -> AxisPos {
        let hi = self.lo + self.step * (self.n - 1) as f64;
        if v < self.lo {
            AxisPos::Below
        } else if v >= hi {
            AxisPos::Above
        } else {
            let f = (v - self.lo) / self.step;
            let i = (f as usize).min(self.n - 2);
            AxisPos::In(i, f - i as f64)
        }
    }

    /// CDF on the product grid `xs x ys`, row-major; the bulk path behind
    /// coordinate-lattice sup-distances.
    pub fn cdf_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let ypos: Vec<AxisPos> = ys
            .iter()
            .map(|&y| self.axis((y - self.law.mean[1]) / self.law.sd[1]))
            .collect();
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in xs {
            let s = (x - self.law.mean[0]) / self.law.sd[0];
            match self.axis(s) {
                AxisPos::Below => out.extend(std::iter::repeat(0.0).take(ys.len())),
                AxisPos::Above => {
                    for yp in &ypos {
                        out.push(match *yp {
                            AxisPos::Below => 0.0,
                            AxisPos::Above => 1.0,
                            AxisPos::In(j, fj) => {
                                self.marginal[j] * (1.0 - fj) + self.marginal[j + 1] * fj
                            }
                        });
                    }
                }
                AxisPos::In(i, fi) => {
                    let n = self.n;
                    let row0 = &self.values[i * n..(i + 1) * n];
                    let row1 = &self.values[(i + 1) * n..(i + 2) * n];
                    let mlo = self.marginal[i] * (1.0 - fi) + self.marginal[i + 1] * fi;
                    for yp in &ypos {
                        out.push(match *yp {
                            AxisPos::Below => 0.0,
                            AxisPos::Above => mlo,
                            AxisPos::In(j, fj) => {
                                (row0[j] * (1.0 - fj) + row0[j + 1] * fj) * (1.0 - fi)
                                    + (row1[j] * (1.0 - fj) + row1[j + 1] * fj) * fi
                            }
                        });
                    }
                }
            }
        }
        out
    }

    /// CDF at `(x, y)` in original coordinates.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let (s, t) = self.law.standardize(x, y);
        match (self.axis(s), self.axis(t)) {
            (AxisPos::Below, _) | (_, AxisPos::Below) => 0.0,
            (AxisPos::Above, AxisPos::Above) => 1.0,
            (AxisPos::Above, AxisPos::In(j, fj)) => {
                self.marginal[j] * (1.0 - fj) + self.marginal[j + 1] * fj
            }
            (AxisPos::In(i, fi), AxisPos::Above) => {
                self.marginal[i] * (1.0 - fi) + self.marginal[i + 1] * fi
            }
            (AxisPos::In(i, fi), AxisPos::In(j, fj)) => {
                let n = self.n;
                let v00 = self.values[i * n + j];
                let v01 = self.values[i * n + j + 1];
                let v10 = self.values[(i + 1) * n + j];
                let v11 = self.values[(i + 1) * n + j + 1];
                (v00 * (1.0 - fj) + v01 * fj) * (1.0 - fi) + (v10 * (1.0 - fj) + v11 * fj) * fi
            }
        }
    }
}

enum AxisPos {
    Below,
    In(usize, f64),
    Above,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_cdf_known_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((std_normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn bvn_independent_factorizes() {
        let law = BivariateNormal::new([0.0, 0.0], [1.0, 1.0], 0.0);
        for (x, y) in [(0.0, 0.0), (1.0, -0.5), (-2.0, 0.3), (2.5, 2.5)] {
            let expect = std_normal_cdf(x) * std_normal_cdf(y);
            assert!(
                (law.cdf(x, y) - expect).abs() < 1e-10,
                "({x},{y}): {} vs {expect}",
                law.cdf(x, y)
            );
        }
    }

    #[test]
    fn bvn_orthant_closed_form() {
        // P(X<=0, Y<=0) = 1/4 + asin(rho)/(2 pi)
        for rho in [-0.8, -0.3, 0.0, 0.476, 0.9] {
            let law = BivariateNormal::new([0.0, 0.0], [1.0, 1.0], rho);
            let expect = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            assert!(
                (law.cdf(0.0, 0.0) - expect).abs() < 1e-9,
                "rho={rho}: {} vs {expect}",
                law.cdf(0.0, 0.0)
            );
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let law = BivariateNormal::new([0.5, -1.0], [2.0, 0.7], 0.476);
        let table = law.table();
        let mut worst = 0.0f64;
        for i in 0..20 {
            for j in 0..20 {
                let x = -6.0 + 0.631 * i as f64;
                let y = -3.0 + 0.219 * j as f64;
                let d = (table.cdf(x, y) - law.cdf(x, y)).abs();
                worst = worst.max(d);
            }
        }
        assert!(worst < 2e-5, "worst table error {worst}");
    }

    #[test]
    fn table_marginal_fallback() {
        let law = BivariateNormal::new([0.0, 0.0], [1.0, 1.0], 0.3);
        let table = law.table();
        assert!((table.cdf(100.0, 0.7) - std_normal_cdf(0.7)).abs() < 2e-5);
        assert!((table.cdf(0.7, 100.0) - std_normal_cdf(0.7)).abs() < 2e-5);
        assert_eq!(table.cdf(-100.0, 0.0), 0.0);
        assert_eq!(table.cdf(100.0, 100.0), 1.0);
    }
}
