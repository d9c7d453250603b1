//! Randomized set estimators and normalized sums.
//!
//! A realization restricted to an averaging region yields the set mean and
//! set variance; randomizing points drawn on the region, independently of
//! the field, turn the restriction into i.i.d. observations whose normalized
//! sums are asymptotically standard normal. This module computes those
//! statistics together with the point-count schedules and the diagnostic for
//! the mean-centering growth condition.

use crate::error::Error;
use crate::field::{generate, marginal_truth, FieldRealization, ModelSpec, TruthOracle, TupleFn};
use crate::region::{Region, SamplingDensity};
use crate::rng::RngKey;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Growth rule for the number of randomizing points per region index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum KnSchedule {
    /// `k_n = ceil(measure^alpha)`; any `alpha < 1` keeps `k_n = o(measure)`.
    PowerOfMeasure { alpha: f64 },
    /// Explicit nondecreasing list, one entry per region index.
    Explicit { values: Vec<usize> },
    /// `k_n = ceil(factor * measure)`.
    ProportionalToMeasure { factor: f64 },
}

impl KnSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            KnSchedule::PowerOfMeasure { alpha } => {
                if *alpha > 0.0 && *alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "power-of-measure exponent {alpha} outside (0, 1)"
                    )))
                }
            }
            KnSchedule::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::Validation("explicit schedule is empty".into()));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Validation(
                        "explicit point counts must be nondecreasing".into(),
                    ));
                }
                Ok(())
            }
            KnSchedule::ProportionalToMeasure { factor } => {
                if *factor > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Validation("proportional factor must be positive".into()))
                }
            }
        }
    }

    /// Point count for the region at `index` with the given measure.
    pub fn points_for(&self, index: usize, measure: f64) -> Result<usize> {
        self.validate()?;
        let k = match self {
            KnSchedule::PowerOfMeasure { alpha } => measure.powf(*alpha).ceil() as usize,
            KnSchedule::Explicit { values } => *values.get(index).ok_or_else(|| {
                Error::Validation(format!("explicit schedule has no entry {index}"))
            })?,
            KnSchedule::ProportionalToMeasure { factor } => (factor * measure).ceil() as usize,
        };
        Ok(k)
    }

    /// Evaluate over a full measure list, checking monotone growth.
    pub fn evaluate(&self, measures: &[f64]) -> Result<Vec<usize>> {
        let ks = measures
            .iter()
            .enumerate()
            .map(|(i, &m)| self.points_for(i, m))
            .collect::<Result<Vec<_>>>()?;
        if ks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation(
                "point counts must be nondecreasing over the index list".into(),
            ));
        }
        Ok(ks)
    }
}

/// Randomizing points, one block of `points_per` draws for every
/// (component, replicate-array) pair, each block from its own stream.
#[derive(Debug, Clone)]
pub struct TauArray {
    pub dim: usize,
    pub components: usize,
    pub replicates: usize,
    pub points_per: usize,
    coords: Vec<i64>,
}

impl TauArray {
    /// Draw the array: `regions` gives one region per component (repeat the
    /// same region to share it), `replicates` is the number of independent
    /// arrays per component.
    pub fn draw(
        regions: &[&Region],
        points_per: usize,
        density: &SamplingDensity,
        replicates: usize,
        key: RngKey,
    ) -> Result<TauArray> {
        if points_per < 2 {
            return Err(Error::TooFewPoints(points_per));
        }
        if regions.is_empty() || replicates == 0 {
            return Err(Error::Validation("need at least one component and array".into()));
        }
        let dim = regions[0].dim();
        if regions.iter().any(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: regions.iter().map(|r| r.dim()).find(|&d| d != dim).unwrap(),
            });
        }
        density.validate()?;
        let d = regions.len();
        let mut coords = vec![0i64; d * replicates * points_per * dim];
        let mut buf = Vec::with_capacity(dim);
        for (l, region) in regions.iter().enumerate() {
            for u in 0..replicates {
                let mut rng = key.with_index(l as u64).with_index(u as u64).rng();
                for i in 0..points_per {
                    region.sample_site(density, &mut rng, &mut buf)?;
                    let at = (((l * replicates) + u) * points_per + i) * dim;
                    coords[at..at + dim].copy_from_slice(&buf);
                }
            }
        }
        Ok(TauArray {
            dim,
            components: d,
            replicates,
            points_per,
            coords,
        })
    }

    /// One point of block `(l, u)`, in draw order.
    pub fn point(&self, l: usize, u: usize, i: usize) -> &[i64] {
        let at = (((l * self.replicates) + u) * self.points_per + i) * self.dim;
        &self.coords[at..at + self.dim]
    }

    /// Iterate the points of block `(l, u)` in draw order.
    pub fn block(&self, l: usize, u: usize) -> impl Iterator<Item = &[i64]> + '_ {
        let start = (((l * self.replicates) + u) * self.points_per) * self.dim;
        self.coords[start..start + self.points_per * self.dim].chunks_exact(self.dim)
    }
}

/// Set mean and set variance of one component over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub mean: f64,
    pub variance: f64,
    /// Set when rounding produced a negative variance that was clamped to 0.
    pub clamped: bool,
}

/// Per-component set statistics plus the region bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub per_component: Vec<SetStats>,
    pub measure: f64,
    pub k_n: Option<usize>,
}

/// Centering and scaling of the normalized randomized sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    /// Center at the set mean, scale by the set standard deviation.
    StudentizedSetMean,
    /// Center at the set mean, scale by the true standard deviation.
    SigmaSetMean,
    /// Center at the true mean, scale by the set standard deviation.
    StudentizedTrueMean,
    /// Center at the true mean, scale by the true standard deviation.
    SigmaTrueMean,
}

impl SumMode {
    pub fn needs_truth(self) -> bool {
        !matches!(self, SumMode::StudentizedSetMean)
    }

    fn center_is_true_mean(self) -> bool {
        matches!(self, SumMode::StudentizedTrueMean | SumMode::SigmaTrueMean)
    }

    fn scale_is_true_sd(self) -> bool {
        matches!(self, SumMode::SigmaSetMean | SumMode::SigmaTrueMean)
    }
}

/// Kahan-compensated accumulator; site counts reach 1e7 and the algebraic
/// identities are asserted at 1e-10 relative.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

/// Which window values belong to the region.
enum Sites {
    /// The region covers the window exactly; every value participates.
    All(usize),
    /// Explicit window indices, optionally with normalized density weights.
    Indexed(Vec<usize>, Option<Vec<f64>>),
}

impl Sites {
    fn count(&self) -> usize {
        match self {
            Sites::All(n) => *n,
            Sites::Indexed(idx, _) => idx.len(),
        }
    }

    /// Visit `(value, weight)` over the region; weights sum to 1.
    #[inline]
    fn fold<A>(&self, vals: &[f64], mut acc: A, mut f: impl FnMut(&mut A, f64, f64)) -> A {
        match self {
            Sites::All(n) => {
                let w = 1.0 / *n as f64;
                for &v in vals {
                    f(&mut acc, v, w);
                }
                acc
            }
            Sites::Indexed(idx, None) => {
                let w = 1.0 / idx.len() as f64;
                for &i in idx {
                    f(&mut acc, vals[i], w);
                }
                acc
            }
            Sites::Indexed(idx, Some(ws)) => {
                for (&i, &w) in idx.iter().zip(ws) {
                    f(&mut acc, vals[i], w);
                }
                acc
            }
        }
    }
}

/// A realization restricted to a region: the site list, optional density
/// weights, and the set statistics of every component.
pub struct SetContext<'a> {
    pub real: &'a FieldRealization,
    pub region: &'a Region,
    sites: Sites,
    bundle: EstimateBundle,
}

impl<'a> SetContext<'a> {
    pub fn new(
        real: &'a FieldRealization,
        region: &'a Region,
        density: &SamplingDensity,
    ) -> Result<Self> {
        if region.dim() != real.window.dim() {
            return Err(Error::DimensionMismatch {
                expected: real.window.dim(),
                got: region.dim(),
            });
        }
        let sites = if region_covers_window(region, real) && matches!(density, SamplingDensity::Uniform)
        {
            Sites::All(real.window.site_count())
        } else {
            let (site_list, raw_weights) = region.weighted_sites(density)?;
            let mut site_indices = Vec::with_capacity(site_list.len());
            for t in site_list.iter() {
                let idx = real.window.site_index(t).ok_or_else(|| {
                    Error::WindowTooSmall(format!(
                        "region site {t:?} outside the realization window"
                    ))
                })?;
                site_indices.push(idx);
            }
            if site_indices.is_empty() {
                return Err(Error::EmptyRegion);
            }
            let weights = raw_weights.map(|w| {
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect::<Vec<f64>>()
            });
            Sites::Indexed(site_indices, weights)
        };
        let mut per_component = Vec::with_capacity(real.components);
        for l in 0..real.components {
            per_component.push(set_stats(real.component(l), &sites));
        }
        let bundle = EstimateBundle {
            per_component,
            measure: region.measure(),
            k_n: None,
        };
        Ok(SetContext {
            real,
            region,
            sites,
            bundle,
        })
    }

    pub fn bundle(&self) -> &EstimateBundle {
        &self.bundle
    }

    pub fn bundle_with_k(&self, k_n: usize) -> EstimateBundle {
        let mut b = self.bundle.clone();
        b.k_n = Some(k_n);
        b
    }

    /// Set mean of a component.
    pub fn set_mean(&self, l: usize) -> f64 {
        self.bundle.per_component[l].mean
    }

    /// Set variance of a component.
    pub fn set_variance(&self, l: usize) -> f64 {
        self.bundle.per_component[l].variance
    }

    /// Weighted set average of an arbitrary site function (consistency
    /// checks of the randomizing expectation).
    pub fn set_average(&self, l: usize, f: impl Fn(f64) -> f64) -> f64 {
        let vals = self.real.component(l);
        self.sites
            .fold(vals, Kahan::default(), |acc, v, w| acc.add(w * f(v)))
            .value()
    }

    /// Truncated second-moment fraction of the sampled observations:
    /// the share of the set variance carried by sites deviating more than
    /// `eps * sqrt(k_n * V_n)` from the set mean. Always in [0, 1].
    pub fn lindeberg_fraction(&self, l: usize, k_n: usize, eps: f64) -> Result<f64> {
        let SetStats { mean, variance, .. } = self.bundle.per_component[l];
        if variance <= 0.0 {
            return Err(Error::DegenerateVariance(
                "set variance is zero; the fraction is undefined".into(),
            ));
        }
        let threshold = eps * (k_n as f64 * variance).sqrt();
        let vals = self.real.component(l);
        let acc = self.sites.fold(vals, Kahan::default(), |acc, v, w| {
            let d = v - mean;
            if d.abs() > threshold {
                acc.add(w * d * d);
            }
        });
        Ok((acc.value() / variance).clamp(0.0, 1.0))
    }

    fn center_scale(
        &self,
        l: usize,
        mode: SumMode,
        truth: Option<&TruthOracle>,
    ) -> Result<(f64, f64)> {
        let stats = self.bundle.per_component[l];
        let truth = if mode.needs_truth() {
            Some(truth.or(self.real.truth.as_ref()).ok_or_else(|| {
                Error::MissingTruth("mode centers or scales by exact marginal truth".into())
            })?)
        } else {
            None
        };
        let center = if mode.center_is_true_mean() {
            truth.unwrap().mean
        } else {
            stats.mean
        };
        let scale = if mode.scale_is_true_sd() {
            truth.unwrap().sd()
        } else {
            stats.variance.sqrt()
        };
        if !(scale > 0.0) {
            return Err(Error::DegenerateVariance(format!(
                "component {l}: zero scale in normalized sum"
            )));
        }
        Ok((center, scale))
    }

    /// Normalized randomized sum for block `(l, u)`:
    /// `sum_i (X_l(tau_i) - center) / (sqrt(k_n) * scale)`.
    pub fn normalized_sum(
        &self,
        tau: &TauArray,
        l: usize,
        u: usize,
        mode: SumMode,
        truth: Option<&TruthOracle>,
    ) -> Result<f64> {
        let (center, scale) = self.center_scale(l, mode, truth)?;
        let vals = self.real.component(l);
        let mut acc = Kahan::default();
        for t in tau.block(l, u) {
            let idx = self
                .real
                .window
                .site_index(t)
                .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })?;
            acc.add(vals[idx] - center);
        }
        Ok(acc.value() / ((tau.points_per as f64).sqrt() * scale))
    }

    /// Normalized sums for all `(l, u)` blocks; row l, column u.
    pub fn replicated_sums(
        &self,
        tau: &TauArray,
        mode: SumMode,
        truth: Option<&TruthOracle>,
    ) -> Result<Vec<Vec<f64>>> {
        (0..tau.components)
            .map(|l| {
                (0..tau.replicates)
                    .map(|u| self.normalized_sum(tau, l, u, mode, truth))
                    .collect()
            })
            .collect()
    }

    /// Vector statistic with one shared block: per component `l`,
    /// `k_n^{-1/2} sum_i (X_l(tau_i) - center_l)`, no studentization, so the
    /// replication covariance estimates the marginal covariance matrix.
    pub fn vector_sum(
        &self,
        tau: &TauArray,
        u: usize,
        true_center: bool,
        truth: Option<&TruthOracle>,
    ) -> Result<Vec<f64>> {
        let sqrt_k = (tau.points_per as f64).sqrt();
        (0..self.real.components)
            .map(|l| {
                let center = if true_center {
                    truth
                        .or(self.real.truth.as_ref())
                        .ok_or_else(|| Error::MissingTruth("vector sum with true centering".into()))?
                        .mean
                } else {
                    self.bundle.per_component[l].mean
                };
                let vals = self.real.component(l);
                let mut acc = Kahan::default();
                // block 0 of the tau array is shared across components
                for t in tau.block(0, u) {
                    let idx = self
                        .real
                        .window
                        .site_index(t)
                        .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })?;
                    acc.add(vals[idx] - center);
                }
                Ok(acc.value() / sqrt_k)
            })
            .collect()
    }

    /// Classical normalized partial sum over the whole region:
    /// `sum_t (X(t) - mu) / sqrt(measure * V_n)`.
    ///
    /// The benchmark the randomized statistics are contrasted with; for
    /// telescoping models it degenerates to 0 while the randomized sums stay
    /// asymptotically normal.
    pub fn classical_partial_sum(&self, l: usize, truth: Option<&TruthOracle>) -> Result<f64> {
        let stats = self.bundle.per_component[l];
        if !(stats.variance > 0.0) {
            return Err(Error::DegenerateVariance("classical sum".into()));
        }
        let mu = truth
            .or(self.real.truth.as_ref())
            .ok_or_else(|| Error::MissingTruth("classical sum centers at the true mean".into()))?
            .mean;
        let count = self.sites.count() as f64;
        // sum (X - mu) = count * (M_n - mu)
        Ok(count * (stats.mean - mu) / (count * stats.variance).sqrt())
    }

    /// Values of the component at the block's points, in draw order.
    pub fn sampled_values(&self, tau: &TauArray, l: usize, u: usize) -> Result<Vec<f64>> {
        let vals = self.real.component(l);
        tau.block(l, u)
            .map(|t| {
                self.real
                    .window
                    .site_index(t)
                    .map(|i| vals[i])
                    .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })
            })
            .collect()
    }
}

/// True when the region is a box that coincides with the realization window,
/// so every window value participates without an index list.
fn region_covers_window(region: &Region, real: &FieldRealization) -> bool {
    use crate::region::RegionShape;
    if region.pitch != 1.0
        || !matches!(region.shape, RegionShape::Interval | RegionShape::Cube { .. })
    {
        return false;
    }
    let (lo, hi) = region.bounding_box();
    lo == real.window.origin
        && hi
            .iter()
            .zip(&real.window.origin)
            .zip(&real.window.extent)
            .all(|((&h, &o), &e)| h == o + e as i64 - 1)
}

fn set_stats(vals: &[f64], sites: &Sites) -> SetStats {
    let mean = sites
        .fold(vals, Kahan::default(), |acc, v, w| acc.add(w * v))
        .value();
    let (var_acc, sq_acc) = sites.fold(
        vals,
        (Kahan::default(), Kahan::default()),
        |acc, v, w| {
            let d = v - mean;
            acc.0.add(w * d * d);
            acc.1.add(w * v * v);
        },
    );
    let mut variance = var_acc.value();
    let mut clamped = false;
    if variance < 0.0 {
        // rounding noise; anything beyond the documented threshold is a bug
        debug_assert!(variance.abs() <= 1e-14 * sq_acc.value().abs().max(1.0));
        variance = 0.0;
        clamped = true;
    }
    SetStats {
        mean,
        variance,
        clamped,
    }
}

/// Context for statistics of a derived tuple field
/// `Y(t) = f(X(t_1 + t), ..., X(t_k + t))` over a region.
pub struct TupleContext<'a> {
    real: &'a FieldRealization,
    offsets: &'a [Vec<i64>],
    f: &'a TupleFn,
    /// Linear index shift per offset inside the realization window.
    shifts: Vec<i64>,
    stats: SetStats,
    site_count: usize,
}

impl<'a> TupleContext<'a> {
    pub fn new(
        real: &'a FieldRealization,
        region: &Region,
        offsets: &'a [Vec<i64>],
        f: &'a TupleFn,
    ) -> Result<Self> {
        let m = real.window.dim();
        if offsets.is_empty() || offsets.iter().any(|o| o.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: offsets.first().map(|o| o.len()).unwrap_or(0),
            });
        }
        let strides = real.window.strides();
        let shifts: Vec<i64> = offsets
            .iter()
            .map(|off| off.iter().zip(&strides).map(|(&o, &s)| o * s as i64).sum())
            .collect();
        let sites = region.lattice_points()?;
        // every shifted site must stay inside the window
        let mut check = vec![0i64; m];
        for t in sites.iter() {
            for off in offsets {
                for a in 0..m {
                    check[a] = t[a] + off[a];
                }
                if !real.window.contains(&check) {
                    return Err(Error::WindowTooSmall(format!(
                        "site {t:?} with offset {off:?} leaves the window"
                    )));
                }
            }
        }
        let vals = real.component(0);
        let mut tuple = vec![0.0; offsets.len()];
        let mut mean_acc = Kahan::default();
        let mut derived = Vec::with_capacity(sites.len());
        for t in sites.iter() {
            let base = real.window.site_index(t).unwrap() as i64;
            for (j, &s) in shifts.iter().enumerate() {
                tuple[j] = vals[(base + s) as usize];
            }
            let y = f.eval(&tuple);
            derived.push(y);
            mean_acc.add(y);
        }
        let count = derived.len() as f64;
        let mean = mean_acc.value() / count;
        let mut var_acc = Kahan::default();
        for &y in &derived {
            var_acc.add((y - mean) * (y - mean));
        }
        let stats = SetStats {
            mean,
            variance: (var_acc.value() / count).max(0.0),
            clamped: false,
        };
        Ok(TupleContext {
            real,
            offsets,
            f,
            shifts,
            stats,
            site_count: derived.len(),
        })
    }

    pub fn set_mean(&self) -> f64 {
        self.stats.mean
    }

    pub fn set_variance(&self) -> f64 {
        self.stats.variance
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    fn tuple_value(&self, t: &[i64], tuple: &mut [f64]) -> Result<f64> {
        let m = self.real.window.dim();
        let mut check = vec![0i64; m];
        for off in self.offsets {
            for a in 0..m {
                check[a] = t[a] + off[a];
            }
            if !self.real.window.contains(&check) {
                return Err(Error::WindowTooSmall(format!(
                    "point {t:?} with offset {off:?} leaves the window"
                )));
            }
        }
        let base = self
            .real
            .window
            .site_index(t)
            .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })?;
        let vals = self.real.component(0);
        for (j, &s) in self.shifts.iter().enumerate() {
            tuple[j] = vals[(base as i64 + s) as usize];
        }
        Ok(self.f.eval(tuple))
    }

    /// Normalized tuple sum for block `(l, u)`:
    /// `sum_i (f(X(t_1+tau_i), ...) - theta) / (sqrt(k_n) * sqrt(V_f))`.
    pub fn sum(&self, tau: &TauArray, l: usize, u: usize, theta: f64) -> Result<f64> {
        if !(self.stats.variance > 0.0) {
            return Err(Error::DegenerateVariance("derived set variance is zero".into()));
        }
        self.sum_with_scale(tau, l, u, theta, self.stats.variance)
    }

    /// Tuple sum for an orthant indicator, optionally scaled by the limit
    /// variance `theta (1 - theta)` instead of the set variance.
    pub fn indicator_sum(
        &self,
        tau: &TauArray,
        l: usize,
        u: usize,
        theta: f64,
        limit_variance: bool,
    ) -> Result<f64> {
        if limit_variance {
            let v = theta * (1.0 - theta);
            if !(v > 0.0) {
                return Err(Error::DegenerateVariance(format!(
                    "orthant probability {theta} admits no normal limit"
                )));
            }
            self.sum_with_scale(tau, l, u, theta, v)
        } else {
            self.sum(tau, l, u, theta)
        }
    }

    fn sum_with_scale(
        &self,
        tau: &TauArray,
        l: usize,
        u: usize,
        theta: f64,
        variance: f64,
    ) -> Result<f64> {
        let mut tuple = vec![0.0; self.offsets.len()];
        let mut acc = Kahan::default();
        for t in tau.block(l, u) {
            acc.add(self.tuple_value(t, &mut tuple)? - theta);
        }
        Ok(acc.value() / ((tau.points_per as f64).sqrt() * variance.sqrt()))
    }

    /// Tuple values at the block's points, in draw order (feeds the
    /// empirical distribution function).
    pub fn sampled_values(&self, tau: &TauArray, l: usize, u: usize) -> Result<Vec<f64>> {
        let mut tuple = vec![0.0; self.offsets.len()];
        tau.block(l, u)
            .map(|t| self.tuple_value(t, &mut tuple))
            .collect()
    }

    /// Tuple vectors at the block's points (multidimensional EDF samples).
    pub fn sampled_tuples(&self, tau: &TauArray, l: usize, u: usize) -> Result<Vec<f64>> {
        let m = self.real.window.dim();
        let vals = self.real.component(0);
        let mut out = Vec::with_capacity(tau.points_per * self.offsets.len());
        let mut check = vec![0i64; m];
        for t in tau.block(l, u) {
            for off in self.offsets {
                for a in 0..m {
                    check[a] = t[a] + off[a];
                }
                if !self.real.window.contains(&check) {
                    return Err(Error::WindowTooSmall(format!(
                        "point {t:?} with offset {off:?} leaves the window"
                    )));
                }
            }
            let base = self
                .real
                .window
                .site_index(t)
                .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })? as i64;
            for &s in &self.shifts {
                out.push(vals[(base + s) as usize]);
            }
        }
        Ok(out)
    }
}

/// One index of the mean-centering diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cond17Entry {
    pub measure: f64,
    pub k_n: usize,
    /// Monte Carlo draws of `sqrt(k_n) (M_n - mu)`.
    pub samples: Vec<f64>,
    /// 0.95-quantile of the absolute value.
    pub q95_abs: f64,
}

/// Diagnostic for the growth condition behind true-mean centering:
/// `sqrt(k_n) (M_n - mu)` must shrink along the index list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cond17Report {
    pub entries: Vec<Cond17Entry>,
    /// True when the 0.95-quantile at the last index dropped to at most 80%
    /// of the first.
    pub shrinking: bool,
}

/// Run the diagnostic: for each region index, draw `n_samples` fresh
/// realizations and collect `sqrt(k_n) (M_n - mu)`.
pub fn cond17_diagnostic(
    model: &ModelSpec,
    family: &crate::region::RegionFamily,
    schedule: &KnSchedule,
    density: &SamplingDensity,
    n_samples: usize,
    key: RngKey,
) -> Result<Cond17Report> {
    let truth = marginal_truth(model)?;
    if truth.estimated {
        return Err(Error::MissingTruth(
            "mean-centering diagnostic needs exact truth".into(),
        ));
    }
    let mut entries = Vec::with_capacity(family.len());
    for idx in 0..family.len() {
        let region = family.region(idx)?;
        let k_n = schedule.points_for(idx, region.measure())?;
        let (lo, hi) = region.bounding_box();
        let origin = lo.clone();
        let extent: Vec<u64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| (h - l + 1) as u64)
            .collect();
        let window = crate::field::LatticeWindow::new(origin, extent, region.pitch)?;
        let sqrt_k = (k_n as f64).sqrt();
        let mut samples = Vec::with_capacity(n_samples);
        for r in 0..n_samples {
            let real = generate(
                model,
                &window,
                key.with_tag("cond17").with_index(idx as u64).with_index(r as u64),
            )?;
            let ctx = SetContext::new(&real, &region, density)?;
            samples.push(sqrt_k * (ctx.set_mean(0) - truth.mean));
        }
        let mut abs: Vec<f64> = samples.iter().map(|s| s.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let q95_abs = abs[((abs.len() as f64 * 0.95) as usize).min(abs.len() - 1)];
        entries.push(Cond17Entry {
            measure: region.measure(),
            k_n,
            samples,
            q95_abs,
        });
    }
    let shrinking = match (entries.first(), entries.last()) {
        (Some(first), Some(last)) if entries.len() >= 2 => last.q95_abs <= 0.8 * first.q95_abs,
        _ => false,
    };
    Ok(Cond17Report { entries, shrinking })
}
