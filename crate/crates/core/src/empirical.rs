//! Randomized empirical distribution functions, sup-distances, empirical
//! processes, broken-line partial-sum processes, and closed-form limit laws.

use crate::error::Error;
use crate::field::FieldRealization;
use crate::gauss::{std_normal_cdf, BvnTable};
use crate::region::Region;
use crate::stats::TauArray;
use crate::Result;

/// A joint CDF that sup-distances are measured against.
pub trait JointCdf {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;

    /// Values on the product grid `xs x ys`, row-major. Only called for
    /// 2-dimensional targets; implementations with precomputed tables
    /// override this for bulk evaluation.
    fn eval_grid2(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in xs {
            for &y in ys {
                out.push(self.eval(&[x, y]));
            }
        }
        out
    }
}

/// Scalar CDF from a closure.
pub struct ScalarCdf<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> JointCdf for ScalarCdf<F> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x[0])
    }
}

impl JointCdf for crate::field::MarginalCdf {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64 {
        crate::field::MarginalCdf::eval(self, x[0])
    }
}

impl JointCdf for crate::gauss::BivariateNormal {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.cdf(x[0], x[1])
    }
}

impl JointCdf for BvnTable {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.cdf(x[0], x[1])
    }

    fn eval_grid2(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        self.cdf_grid(xs, ys)
    }
}

/// The standard map taking field values into `(0, 1)`.
pub fn arctan_unit(x: f64) -> f64 {
    x.atan() / std::f64::consts::PI + 0.5
}

/// Inverse of [`arctan_unit`].
pub fn arctan_unit_inv(u: f64) -> f64 {
    (std::f64::consts::PI * (u - 0.5)).tan()
}

/// A target CDF composed with the arctan map, for processes built from
/// transformed samples.
pub struct ArctanOf<'a>(pub &'a dyn JointCdf);

impl JointCdf for ArctanOf<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let x: Vec<f64> = u.iter().map(|&c| arctan_unit_inv(c)).collect();
        self.0.eval(&x)
    }
}

/// Randomized empirical distribution function.
///
/// Samples are l-dimensional tuples collected from `arrays` independent
/// randomizing arrays of `points_per` points each; the EDF averages the
/// per-array EDFs, which equals the pooled EDF over all
/// `arrays * points_per` samples.
#[derive(Debug, Clone)]
pub struct Edf {
    dim: usize,
    arrays: usize,
    points_per: usize,
    /// Sample-major tuples: `samples[s * dim + j]`.
    samples: Vec<f64>,
    /// Pooled sorted values, kept for the 1-D exact paths.
    sorted: Option<Vec<f64>>,
}

impl Edf {
    pub fn from_samples(dim: usize, arrays: usize, samples: Vec<f64>) -> Result<Edf> {
        if dim == 0 || arrays == 0 || samples.is_empty() {
            return Err(Error::Validation("empty EDF sample set".into()));
        }
        if samples.len() % (dim * arrays) != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim * arrays,
                got: samples.len(),
            });
        }
        let points_per = samples.len() / (dim * arrays);
        let sorted = if dim == 1 {
            let mut s = samples.clone();
            s.sort_by(f64::total_cmp);
            Some(s)
        } else {
            None
        };
        Ok(Edf {
            dim,
            arrays,
            points_per,
            samples,
            sorted,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arrays(&self) -> usize {
        self.arrays
    }

    pub fn points_per_array(&self) -> usize {
        self.points_per
    }

    pub fn total_samples(&self) -> usize {
        self.arrays * self.points_per
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.samples.chunks_exact(self.dim)
    }

    /// EDF value at a point: the fraction of samples dominated by `x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "query dimension mismatch");
        if let Some(sorted) = &self.sorted {
            let k = sorted.partition_point(|&v| v <= x[0]);
            return k as f64 / sorted.len() as f64;
        }
        let hits = self
            .samples()
            .filter(|s| s.iter().zip(x).all(|(a, b)| a <= b))
            .count();
        hits as f64 / self.total_samples() as f64
    }

    /// The same samples with every coordinate pushed through the arctan map.
    pub fn arctan_transformed(&self) -> Edf {
        let samples = self.samples.iter().map(|&v| arctan_unit(v)).collect();
        Edf::from_samples(self.dim, self.arrays, samples).expect("same shape")
    }

    /// Exact sup-distance to a continuous target CDF.
    ///
    /// 1-D uses the order statistics. In higher dimension the sup is taken
    /// over the coordinate lattice of all sample coordinate combinations,
    /// closed from above and below (left limits included); for an EDF
    /// against a continuous target that lattice attains the sup.
    pub fn sup_distance(&self, target: &dyn JointCdf) -> Result<f64> {
        if target.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: target.dim(),
            });
        }
        match self.dim {
            1 => {
                let sorted = self.sorted.as_ref().expect("kept for dim 1");
                let n = sorted.len() as f64;
                let mut d = 0.0f64;
                for (i, &x) in sorted.iter().enumerate() {
                    let f = target.eval(&[x]);
                    d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
                }
                Ok(d)
            }
            2 => Ok(self.sup_distance_2d(target)),
            _ => Ok(self.sup_distance_lattice(target)),
        }
    }

    /// Kolmogorov statistic `sqrt(k) * sup |F_k - F|` for scalar samples,
    /// with `k` the pooled sample count.
    pub fn ks_statistic(&self, target: &dyn JointCdf) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::DimensionUnsupported(self.dim));
        }
        Ok((self.total_samples() as f64).sqrt() * self.sup_distance(target)?)
    }

    fn sup_distance_2d(&self, target: &dyn JointCdf) -> f64 {
        let n = self.total_samples();
        // coordinate compression per axis, sentinel +inf closes the grid
        let mut xs: Vec<f64> = self.samples().map(|s| s[0]).collect();
        let mut ys: Vec<f64> = self.samples().map(|s| s[1]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let mut xs_ext = xs.clone();
        xs_ext.push(f64::INFINITY);
        let mut ys_ext = ys.clone();
        ys_ext.push(f64::INFINITY);
        let cols = ys_ext.len();

        let fgrid = target.eval_grid2(&xs_ext, &ys_ext);

        // samples bucketed by x-rank, as y-ranks
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); xs.len()];
        for s in self.samples() {
            let xi = xs.partition_point(|&v| v < s[0]);
            let yi = ys.partition_point(|&v| v < s[1]);
            buckets[xi].push(yi as u32);
        }

        let inv_n = 1.0 / n as f64;
        let mut cnt = vec![0u32; cols];
        let mut prev = vec![0.0f64; cols]; // F_n row for x <= xs_ext[i-1]
        let mut cur = vec![0.0f64; cols];
        let mut d = 0.0f64;
        for i in 0..xs_ext.len() {
            if i < xs.len() {
                for &yi in &buckets[i] {
                    cnt[yi as usize] += 1;
                }
            }
            let mut run = 0u32;
            let frow = &fgrid[i * cols..(i + 1) * cols];
            for j in 0..cols {
                run += cnt[j];
                let fn_le = run as f64 * inv_n;
                cur[j] = fn_le;
                // F_n right-continuous at the grid point vs the target
                d = d.max(fn_le - frow[j]);
                // target vs F_n left limit in both coordinates
                let fn_lt = if i == 0 || j == 0 { 0.0 } else { prev[j - 1] };
                d = d.max(frow[j] - fn_lt);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        d
    }

    /// Generic lattice sup for dimension >= 3; quadratic in the sample
    /// count per grid axis, intended for small diagnostic samples.
    fn sup_distance_lattice(&self, target: &dyn JointCdf) -> f64 {
        let l = self.dim;
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(l);
        for j in 0..l {
            let mut c: Vec<f64> = self.samples().map(|s| s[j]).collect();
            c.sort_by(f64::total_cmp);
            c.dedup();
            c.push(f64::INFINITY);
            axes.push(c);
        }
        let mut idx = vec![0usize; l];
        let mut point = vec![0.0f64; l];
        let mut point_prev = vec![0.0f64; l];
        let mut d = 0.0f64;
        loop {
            let mut below_all = false;
            for j in 0..l {
                point[j] = axes[j][idx[j]];
                if idx[j] == 0 {
                    below_all = true;
                } else {
                    point_prev[j] = axes[j][idx[j] - 1];
                }
            }
            let f = target.eval(&point);
            d = d.max(self.evaluate(&point) - f);
            let fn_lt = if below_all {
                0.0
            } else {
                // strict domination: count samples below the previous grid
                // node in every coordinate
                self.samples()
                    .filter(|s| s.iter().zip(&point_prev).all(|(a, b)| a <= b))
                    .count() as f64
                    / self.total_samples() as f64
            };
            d = d.max(f - fn_lt);
            // advance the mixed-radix counter
            let mut axis = l;
            loop {
                if axis == 0 {
                    return d;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < axes[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Tuple samples `(X(t_1 + tau_i), ..., X(t_l + tau_i))` for every point of
/// every replicate array (component block 0), pooled into one EDF.
pub fn build_edf(
    real: &FieldRealization,
    offsets: &[Vec<i64>],
    tau: &TauArray,
) -> Result<Edf> {
    let m = real.window.dim();
    if offsets.is_empty() || offsets.iter().any(|o| o.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: offsets.first().map(|o| o.len()).unwrap_or(0),
        });
    }
    let l = offsets.len();
    let vals = real.component(0);
    let mut samples = Vec::with_capacity(tau.replicates * tau.points_per * l);
    let mut shifted = vec![0i64; m];
    for u in 0..tau.replicates {
        for t in tau.block(0, u) {
            for off in offsets {
                for a in 0..m {
                    shifted[a] = t[a] + off[a];
                }
                let idx = real.window.site_index(&shifted).ok_or_else(|| {
                    Error::WindowTooSmall(format!(
                        "point {t:?} with offset {off:?} leaves the window"
                    ))
                })?;
                samples.push(vals[idx]);
            }
        }
    }
    Edf::from_samples(l, tau.replicates, samples)
}

/// Centering of an empirical process.
enum ProcessCenter<'a> {
    /// The target CDF itself.
    Target(&'a dyn JointCdf),
    /// The set-average indicator function of the realization over a region.
    SetAverage {
        /// Tuples at all region sites, sample-major.
        tuples: Vec<f64>,
        dim: usize,
        /// Sorted scalar values when `dim == 1`.
        sorted: Option<Vec<f64>>,
    },
}

/// Normalized empirical fluctuation process
/// `x -> sqrt(k) (F_k(x) - center(x))`.
pub struct EmpiricalProcess<'a> {
    edf: &'a Edf,
    center: ProcessCenter<'a>,
    sqrt_k: f64,
}

impl<'a> EmpiricalProcess<'a> {
    /// Center at a target CDF.
    pub fn with_target(edf: &'a Edf, target: &'a dyn JointCdf) -> Result<Self> {
        if target.dim() != edf.dim() {
            return Err(Error::DimensionMismatch {
                expected: edf.dim(),
                got: target.dim(),
            });
        }
        Ok(EmpiricalProcess {
            edf,
            center: ProcessCenter::Target(target),
            sqrt_k: (edf.total_samples() as f64).sqrt(),
        })
    }

    /// Center at the set-average indicator of the realization over the
    /// region (the conditional expectation of the EDF given the field).
    pub fn with_set_average(
        edf: &'a Edf,
        real: &FieldRealization,
        region: &Region,
        offsets: &[Vec<i64>],
    ) -> Result<Self> {
        if offsets.len() != edf.dim() {
            return Err(Error::DimensionMismatch {
                expected: edf.dim(),
                got: offsets.len(),
            });
        }
        let m = real.window.dim();
        let sites = region.lattice_points()?;
        let vals = real.component(0);
        let mut tuples = Vec::with_capacity(sites.len() * offsets.len());
        let mut shifted = vec![0i64; m];
        for t in sites.iter() {
            for off in offsets {
                for a in 0..m {
                    shifted[a] = t[a] + off[a];
                }
                let idx = real.window.site_index(&shifted).ok_or_else(|| {
                    Error::WindowTooSmall(format!(
                        "site {t:?} with offset {off:?} leaves the window"
                    ))
                })?;
                tuples.push(vals[idx]);
            }
        }
        let dim = offsets.len();
        let sorted = if dim == 1 {
            let mut s = tuples.clone();
            s.sort_by(f64::total_cmp);
            Some(s)
        } else {
            None
        };
        Ok(EmpiricalProcess {
            edf,
            center: ProcessCenter::SetAverage {
                tuples,
                dim,
                sorted,
            },
            sqrt_k: (edf.total_samples() as f64).sqrt(),
        })
    }

    /// The centering function at a point.
    pub fn center(&self, x: &[f64]) -> f64 {
        match &self.center {
            ProcessCenter::Target(t) => t.eval(x),
            ProcessCenter::SetAverage {
                tuples,
                dim,
                sorted,
            } => {
                if let Some(sorted) = sorted {
                    return sorted.partition_point(|&v| v <= x[0]) as f64 / sorted.len() as f64;
                }
                let count = tuples
                    .chunks_exact(*dim)
                    .filter(|s| s.iter().zip(x).all(|(a, b)| a <= b))
                    .count();
                count as f64 / (tuples.len() / dim) as f64
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.sqrt_k * (self.edf.evaluate(x) - self.center(x))
    }
}

/// Continuous piecewise-linear partial-sum process on `[0, 1]`.
///
/// Vertex `j / k` carries `S_j / sqrt(k * scale)` where `S_j` is the j-th
/// centered partial sum of the samples in draw order and `scale` is a
/// variance.
#[derive(Debug, Clone)]
pub struct BrokenLine {
    ordinates: Vec<f64>,
}

impl BrokenLine {
    pub fn from_samples(samples: &[f64], center: f64, scale_variance: f64) -> Result<BrokenLine> {
        if samples.is_empty() {
            return Err(Error::Validation("broken line needs samples".into()));
        }
        if !(scale_variance > 0.0) {
            return Err(Error::DegenerateVariance("broken-line scale".into()));
        }
        let k = samples.len() as f64;
        let denom = (k * scale_variance).sqrt();
        let mut ordinates = Vec::with_capacity(samples.len() + 1);
        ordinates.push(0.0);
        let mut s = 0.0;
        for &x in samples {
            s += x - center;
            ordinates.push(s / denom);
        }
        Ok(BrokenLine { ordinates })
    }

    pub fn segments(&self) -> usize {
        self.ordinates.len() - 1
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// Linear interpolation between vertices; `t` clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.segments() as f64;
        let pos = (t.clamp(0.0, 1.0)) * k;
        let j = (pos.floor() as usize).min(self.segments() - 1);
        let frac = pos - j as f64;
        self.ordinates[j] * (1.0 - frac) + self.ordinates[j + 1] * frac
    }

    /// Supremum over `[0, 1]`; attained at a vertex by piecewise linearity.
    pub fn sup(&self) -> f64 {
        self.ordinates.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Supremum of the absolute value.
    pub fn sup_abs(&self) -> f64 {
        self.ordinates.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// `integral of Z(t) h(t) dt` by the exact trapezoid rule on segments,
    /// with `h` evaluated at the segment endpoints.
    pub fn integral_against(&self, h: impl Fn(f64) -> f64) -> f64 {
        let k = self.segments() as f64;
        let dt = 1.0 / k;
        let mut acc = 0.0;
        for j in 0..self.segments() {
            let t0 = j as f64 * dt;
            let t1 = (j + 1) as f64 * dt;
            acc += 0.5 * dt * (self.ordinates[j] * h(t0) + self.ordinates[j + 1] * h(t1));
        }
        acc
    }
}

/// Law of the supremum of the Brownian bridge modulus; the limit of the
/// scaled Kolmogorov statistic.
#[derive(Debug, Clone, Copy)]
pub struct KolmogorovLaw {
    /// Truncation bound on |k| in the alternating series.
    pub max_terms: usize,
}

impl Default for KolmogorovLaw {
    fn default() -> Self {
        KolmogorovLaw { max_terms: 64 }
    }
}

impl KolmogorovLaw {
    /// CDF `sum_k (-1)^k exp(-2 k^2 x^2)`.
    ///
    /// Below `x = 0.2` the alternating series cancels catastrophically, so
    /// the dual theta-series representation is used there.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x < 0.2 {
            // sqrt(2 pi)/x * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))
            let mut acc = 0.0;
            for k in 1..=self.max_terms {
                let e = (2 * k - 1) as f64 * std::f64::consts::PI / x;
                let term = (-e * e / 8.0).exp();
                acc += term;
                if term < 1e-300 {
                    break;
                }
            }
            return ((2.0 * std::f64::consts::PI).sqrt() / x * acc).clamp(0.0, 1.0);
        }
        let mut acc = 1.0;
        let mut sign = -1.0;
        for k in 1..=self.max_terms {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            acc += 2.0 * sign * term;
            sign = -sign;
            if term < 1e-16 {
                break;
            }
        }
        acc.clamp(0.0, 1.0)
    }

    /// Quantile by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p));
        let (mut lo, mut hi) = (1e-8, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// CDF of the Kolmogorov law with the default truncation.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    KolmogorovLaw::default().cdf(x)
}

/// CDF of the supremum of the standard Wiener process on `[0, 1]`:
/// `P(sup W <= x) = 2 Phi(x) - 1` for `x >= 0`.
pub fn wiener_sup_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        2.0 * std_normal_cdf(x) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate, LatticeWindow, MarginalCdf, MarginalDist, ModelSpec, ModelVariant};
    use crate::region::{RegionShape, SamplingDensity};
    use crate::rng::RngKey;
    use rand::Rng;
    use rayon::prelude::*;

    fn simple_edf(vals: &[f64]) -> Edf {
        Edf::from_samples(1, 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn edf_counting() {
        let edf = simple_edf(&[1.0, 2.0, 3.0]);
        assert!((edf.evaluate(&[2.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(edf.evaluate(&[0.5]), 0.0);
        assert_eq!(edf.evaluate(&[3.5]), 1.0);
    }

    #[test]
    fn pooled_equals_average_of_arrays() {
        // r arrays pooled: EDF is the arithmetic mean of the per-array EDFs
        let a = [0.5, 1.5, 2.5];
        let b = [1.0, 2.0, 3.0];
        let pooled = Edf::from_samples(1, 2, [a, b].concat()).unwrap();
        let ea = simple_edf(&a);
        let eb = simple_edf(&b);
        for x in [-1.0, 0.7, 1.2, 2.2, 4.0] {
            let avg = 0.5 * (ea.evaluate(&[x]) + eb.evaluate(&[x]));
            assert!((pooled.evaluate(&[x]) - avg).abs() < 1e-15);
        }
    }

    #[test]
    fn edf_monotone_in_each_coordinate() {
        let mut rng = RngKey::new(31).rng();
        let samples: Vec<f64> = (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let edf = Edf::from_samples(2, 1, samples).unwrap();
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 / 4.0).collect();
        for &x in &grid {
            let mut prev = -1.0;
            for &y in &grid {
                let v = edf.evaluate(&[x, y]);
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
        assert_eq!(edf.evaluate(&[1e12, 1e12]), 1.0);
    }

    #[test]
    fn sup_distance_single_jump() {
        // one sample at the median of the target: distance exactly 1/2
        let edf = simple_edf(&[0.0]);
        let target = ScalarCdf(std_normal_cdf);
        assert!((edf.sup_distance(&target).unwrap() - 0.5).abs() < 1e-12);
        assert!((edf.ks_statistic(&target).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sup_distance_quantile_construction() {
        // samples at target quantiles i/(k+1): distance at most 1/(k+1)
        let k = 9;
        let samples: Vec<f64> = (1..=k)
            .map(|i| crate::gauss::std_normal_quantile(i as f64 / (k + 1) as f64))
            .collect();
        let edf = simple_edf(&samples);
        let d = edf.sup_distance(&ScalarCdf(std_normal_cdf)).unwrap();
        assert!(d <= 1.0 / (k + 1) as f64 + 1e-12, "d = {d}");
    }

    #[test]
    fn sup_distance_2d_matches_lattice_scan() {
        // the sweep implementation against the generic mixed-radix scan
        let law = crate::gauss::BivariateNormal::new([0.0, 0.0], [1.0, 1.0], 0.4);
        let mut rng = RngKey::new(32).rng();
        for trial in 0..20 {
            let n = 3 + (trial % 7);
            let samples: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let edf = Edf::from_samples(2, 1, samples).unwrap();
            let fast = edf.sup_distance_2d(&law);
            let slow = edf.sup_distance_lattice(&law);
            assert!(
                (fast - slow).abs() < 1e-12,
                "trial {trial}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn dkw_band_large_sample() {
        // i.i.d. standard normal marginal, k = 1e4: distance below 0.02
        let model = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Normal { mean: 0.0, sd: 1.0 },
        });
        let window = LatticeWindow::interval(0, 100_000);
        let real = generate(&model, &window, RngKey::new(33)).unwrap();
        let region = Region::new(RegionShape::Interval, 100_000.0, 1.0).unwrap();
        let tau = TauArray::draw(
            &[&region],
            10_000,
            &SamplingDensity::Uniform,
            1,
            RngKey::new(34),
        )
        .unwrap();
        let edf = build_edf(&real, &[vec![0]], &tau).unwrap();
        let d = edf
            .sup_distance(&MarginalCdf::Normal { mean: 0.0, sd: 1.0 })
            .unwrap();
        assert!(d < 0.02, "sup distance {d}");
    }

    #[test]
    fn ks_exact_path_matches_grid_evaluation() {
        let mut rng = RngKey::new(35).rng();
        for case in 0..100 {
            let k = 5 + case % 40;
            let samples: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let edf = simple_edf(&samples);
            let exact = edf.sup_distance(&ScalarCdf(std_normal_cdf)).unwrap();
            // dense grid evaluation: EDF vs target on 1e4 points
            let mut grid_sup = 0.0f64;
            for i in 0..10_000 {
                let x = -4.0 + 8.0 * i as f64 / 9_999.0;
                grid_sup = grid_sup.max((edf.evaluate(&[x]) - std_normal_cdf(x)).abs());
            }
            assert!(
                exact >= grid_sup - 1e-9 && exact - grid_sup < 0.01,
                "case {case}: exact {exact} grid {grid_sup}"
            );
        }
    }

    #[test]
    fn probability_integral_invariance() {
        // strictly increasing marginal map leaves the statistic unchanged
        let mut rng = RngKey::new(36).rng();
        let samples: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let edf = simple_edf(&samples);
        let d_orig = edf.ks_statistic(&ScalarCdf(std_normal_cdf)).unwrap();
        let transformed = edf.arctan_transformed();
        let target = ScalarCdf(|u: f64| std_normal_cdf(arctan_unit_inv(u)));
        let d_mapped = transformed.ks_statistic(&target).unwrap();
        assert!((d_orig - d_mapped).abs() < 1e-12);
    }

    #[test]
    fn empirical_process_identities() {
        let model = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Uniform { min: 0.0, max: 1.0 },
        });
        let window = LatticeWindow::interval(0, 64);
        let real = generate(&model, &window, RngKey::new(37)).unwrap();
        let region = Region::new(RegionShape::Interval, 64.0, 1.0).unwrap();

        // exhaustive randomizing points = all lattice sites, in order
        let mut coords = Vec::new();
        for t in region.lattice_points().unwrap().iter() {
            coords.extend_from_slice(t);
        }
        let edf = Edf::from_samples(1, 1, {
            let vals = real.component(0);
            coords.iter().map(|&t| vals[t as usize]).collect()
        })
        .unwrap();
        let proc = EmpiricalProcess::with_set_average(&edf, &real, &region, &[vec![0]]).unwrap();
        for x in [-0.5, 0.1, 0.3, 0.77, 1.5] {
            assert!(
                proc.eval(&[x]).abs() < 1e-12,
                "exhaustive case not identically zero at {x}"
            );
        }

        // G_n - L_n = sqrt(k) (center_L - center_G) pointwise
        let target = MarginalCdf::Uniform { min: 0.0, max: 1.0 };
        let g = EmpiricalProcess::with_target(&edf, &target).unwrap();
        let sqrt_k = (edf.total_samples() as f64).sqrt();
        for x in [0.2, 0.5, 0.9] {
            let gap = g.eval(&[x]) - proc.eval(&[x]);
            let expect = sqrt_k * (proc.center(&[x]) - target.eval(x));
            assert!((gap - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn kolmogorov_cdf_values() {
        assert_eq!(kolmogorov_cdf(0.0), 0.0);
        assert!((kolmogorov_cdf(10.0) - 1.0).abs() < 1e-12);
        // direct truncated summation with |k| <= 10 as the oracle
        let mut oracle = 0.0;
        for k in -10i64..=10 {
            oracle += (if k % 2 == 0 { 1.0 } else { -1.0 })
                * (-2.0 * (k * k) as f64).exp();
        }
        assert!(
            (kolmogorov_cdf(1.0) - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            kolmogorov_cdf(1.0)
        );
        // literature value at x = 1
        assert!((kolmogorov_cdf(1.0) - 0.730_000_3).abs() < 1e-6);
        // monotone on a grid, high quantile
        let law = KolmogorovLaw::default();
        let mut prev = 0.0;
        for i in 1..=300 {
            let x = i as f64 * 0.01;
            let v = law.cdf(x);
            assert!(v >= prev - 1e-15, "not monotone at {x}");
            prev = v;
        }
        assert!(law.cdf(2.5) > 0.9999);
        // dual representation continuous across the switch
        assert!((law.cdf(0.1999) - law.cdf(0.2001)).abs() < 1e-9);
        // quantile inverts
        assert!((law.cdf(law.quantile(0.95)) - 0.95).abs() < 1e-9);
    }

    #[test]
    fn broken_line_construction() {
        let line = BrokenLine::from_samples(&[2.0, -1.0], 0.5, 2.0).unwrap();
        // vertices: 0, (2 - 0.5)/2, (2 - 0.5 - 1.5)/2
        assert_eq!(line.eval(0.0), 0.0);
        assert!((line.eval(0.5) - 0.75).abs() < 1e-15);
        assert!((line.eval(1.0) - 0.0).abs() < 1e-15);
        assert!(line.sup_abs() >= line.eval(1.0).abs());
        assert!(matches!(
            BrokenLine::from_samples(&[1.0], 0.0, 0.0),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn broken_line_continuity_at_midpoints() {
        let mut rng = RngKey::new(38).rng();
        let samples: Vec<f64> = (0..257).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let line = BrokenLine::from_samples(&samples, 0.0, 1.0).unwrap();
        let k = line.segments() as f64;
        let mut worst = 0.0f64;
        for j in 0..line.segments() {
            let mid = (j as f64 + 0.5) / k;
            let interp = 0.5 * (line.ordinates()[j] + line.ordinates()[j + 1]);
            worst = worst.max((line.eval(mid) - interp).abs());
        }
        assert!(worst <= 1e-12, "worst midpoint gap {worst}");
    }

    #[test]
    fn line_functionals() {
        // single positive vertex at (1/2, 1): sup 1, triangle area 1/2
        let line = BrokenLine::from_samples(&[2.0f64.sqrt(), -2.0f64.sqrt()], 0.0, 1.0).unwrap();
        assert!((line.sup() - 1.0).abs() < 1e-12);
        assert!((line.integral_against(|_| 1.0) - 0.5).abs() < 1e-12);
        let flat = BrokenLine::from_samples(&[0.0, 0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(flat.sup(), 0.0);
        assert_eq!(flat.integral_against(|_| 1.0), 0.0);
    }

    #[test]
    fn wiener_sup_cdf_basics() {
        assert_eq!(wiener_sup_cdf(0.0), 0.0);
        assert_eq!(wiener_sup_cdf(-1.0), 0.0);
        assert!((wiener_sup_cdf(50.0) - 1.0).abs() < 1e-15);
        assert!((wiener_sup_cdf(1.0) - (2.0 * std_normal_cdf(1.0) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn wiener_sup_matches_random_walk_maximum() {
        // brute-force oracle: maxima of 1e5 simple random walks of 1e5 steps
        let steps = 100_000usize;
        let paths = 100_000usize;
        let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 0.05).collect();
        let counts: Vec<u64> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = RngKey::new(39).with_tag("walk").with_index(p as u64).rng();
                let mut pos = 0i64;
                let mut max = 0i64;
                let mut left = steps;
                while left > 0 {
                    let mut bits: u64 = rng.gen();
                    let take = left.min(64);
                    for _ in 0..take {
                        pos += if bits & 1 == 1 { 1 } else { -1 };
                        bits >>= 1;
                        if pos > max {
                            max = pos;
                        }
                    }
                    left -= take;
                }
                let scaled = max as f64 / (steps as f64).sqrt();
                let mut mask = 0u64;
                for (i, &x) in grid.iter().enumerate() {
                    if scaled <= x {
                        mask |= 1 << i;
                    }
                }
                mask
            })
            .fold(
                || vec![0u64; 60],
                |mut acc, mask| {
                    for (i, slot) in acc.iter_mut().enumerate() {
                        *slot += (mask >> i) & 1;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; 60],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        let mut worst = 0.0f64;
        for (i, &x) in grid.iter().enumerate() {
            let emp = counts[i] as f64 / paths as f64;
            worst = worst.max((emp - wiener_sup_cdf(x)).abs());
        }
        assert!(worst < 0.01, "sup CDF distance {worst}");
    }
}
