//! Monte Carlo verification engine: replicate a statistic over fresh field
//! realizations and randomizing arrays, compare the empirical law against a
//! limit-law oracle, estimate normal distances and their decay, and check
//! vector covariances.
//!
//! Replications are keyed by `(master seed, replicate index)`, so any
//! concurrency budget produces identical output.

use crate::empirical::{build_edf, kolmogorov_cdf, BrokenLine};
use crate::error::Error;
use crate::field::{generate, marginal_truth, LatticeWindow, ModelSpec, TruthOracle, TupleFn};
use crate::gauss::{std_normal_cdf, BivariateNormal, BvnTable};
use crate::region::{Region, SamplingDensity};
use crate::rng::RngKey;
use crate::stats::{SetContext, SumMode, TauArray, TupleContext};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Centering/scaling choices for broken lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineMode {
    /// Center at the set mean, scale by the set variance.
    SetCenterSetScale,
    /// Center at the set mean, scale by the true variance.
    SetCenterTrueScale,
    /// Center at the true mean, scale by the true variance.
    TrueCenterTrueScale,
}

/// Which statistic one replication produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum StatKind {
    /// Scalar normalized randomized sum of component 0.
    NormalizedSum { mode: SumMode },
    /// All (component, array) normalized sums, flattened row-major; the
    /// vector has `components * replicates` entries.
    ReplicatedSums { mode: SumMode, replicates: usize },
    /// Classical normalized partial sum over the whole region.
    ClassicalPartialSum,
    /// Supremum (or absolute supremum) of the broken-line process.
    BrokenLineSup { mode: LineMode, absolute: bool },
    /// Scaled sup-distance of the randomized EDF to the exact marginal or
    /// joint CDF: `sqrt(k) sup|F_k - F|` (1-D only).
    KsEdf { offsets: Vec<Vec<i64>> },
    /// Plain sup-distance of the randomized EDF to the exact CDF;
    /// 1-D and 2-D offsets supported.
    EdfSupDistance { offsets: Vec<Vec<i64>> },
    /// Normalized tuple sum around the parameter `theta` (estimated truth
    /// when omitted).
    TupleSum {
        offsets: Vec<Vec<i64>>,
        f: TupleFn,
        theta: Option<f64>,
    },
    /// Orthant-indicator sum around the exact orthant probability.
    IndicatorSum {
        offsets: Vec<Vec<i64>>,
        thresholds: Vec<f64>,
        limit_variance: bool,
    },
    /// Unstudentized vector sum with one shared randomizing block.
    VectorSum { true_center: bool },
    /// Truncated-second-moment fraction at the given eps.
    LindebergFraction { eps: f64 },
}

impl StatKind {
    /// Entries produced per replication.
    fn width(&self, components: usize) -> usize {
        match self {
            StatKind::ReplicatedSums { replicates, .. } => components * replicates,
            StatKind::VectorSum { .. } => components,
            _ => 1,
        }
    }

    fn offsets(&self) -> &[Vec<i64>] {
        match self {
            StatKind::KsEdf { offsets }
            | StatKind::EdfSupDistance { offsets }
            | StatKind::TupleSum { offsets, .. }
            | StatKind::IndicatorSum { offsets, .. } => offsets,
            _ => &[],
        }
    }
}

/// Everything one replication needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSpec {
    pub model: ModelSpec,
    pub region: RegionSpec,
    pub density: SamplingDensity,
    pub points: usize,
    pub statistic: StatKind,
}

/// Serializable region description (shape + one size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    #[serde(flatten)]
    pub shape: crate::region::RegionShape,
    pub size: f64,
    #[serde(default = "default_pitch")]
    pub pitch: f64,
}

fn default_pitch() -> f64 {
    1.0
}

impl RegionSpec {
    pub fn build(&self) -> Result<Region> {
        Region::new(self.shape.clone(), self.size, self.pitch)
    }
}

/// Values of a replication sample: scalars or fixed-width vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Values {
    Scalars(Vec<f64>),
    Vectors { width: usize, flat: Vec<f64> },
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Scalars(v) => v.len(),
            Values::Vectors { width, flat } => flat.len() / width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scalars(&self) -> Result<&[f64]> {
        match self {
            Values::Scalars(v) => Ok(v),
            Values::Vectors { .. } => Err(Error::NonScalarSample),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let (width, flat): (usize, &[f64]) = match self {
            Values::Scalars(v) => (1, v),
            Values::Vectors { width, flat } => (*width, flat),
        };
        flat.chunks_exact(width)
    }

    pub fn width(&self) -> usize {
        match self {
            Values::Scalars(_) => 1,
            Values::Vectors { width, .. } => *width,
        }
    }
}

/// Monte Carlo sample of a statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSample {
    pub label: String,
    pub master_seed: u64,
    pub region_measure: f64,
    pub points: usize,
    pub requested: usize,
    /// Replications dropped because the statistic errored (at most 1%).
    pub failed: usize,
    pub values: Values,
}

/// Prepared runner: window laid out once, oracles resolved once.
struct Runner {
    spec: ReplicationSpec,
    region: Region,
    window: LatticeWindow,
    truth: Option<TruthOracle>,
    /// Resolved EDF target for the sup-distance statistics.
    edf_target: Option<EdfTarget>,
    theta: Option<f64>,
}

enum EdfTarget {
    Scalar(crate::field::MarginalCdf),
    Joint(Box<BvnTable>),
}

impl Runner {
    fn prepare(spec: &ReplicationSpec) -> Result<Runner> {
        let region = spec.region.build()?;
        let offsets = spec.statistic.offsets().to_vec();
        let (lo, hi) = region.bounding_box();
        let base = LatticeWindow::new(
            lo.clone(),
            lo.iter()
                .zip(&hi)
                .map(|(&l, &h)| (h - l + 1) as u64)
                .collect(),
            region.pitch,
        )?;
        let window = if offsets.is_empty() {
            base
        } else {
            base.hull_with_offsets(&offsets)?
        };
        let truth = marginal_truth(&spec.model).ok();
        let edf_target = match &spec.statistic {
            StatKind::KsEdf { offsets } | StatKind::EdfSupDistance { offsets } => {
                Some(resolve_edf_target(&spec.model, offsets, truth.as_ref())?)
            }
            _ => None,
        };
        let theta = match &spec.statistic {
            StatKind::TupleSum { theta, offsets, f } => Some(match theta {
                Some(t) => *t,
                None => {
                    let derived = ModelSpec::new(crate::field::ModelVariant::DerivedTuple {
                        base: Box::new(spec.model.clone()),
                        offsets: offsets.clone(),
                        f: f.clone(),
                    });
                    marginal_truth(&derived)?.mean
                }
            }),
            StatKind::IndicatorSum {
                offsets,
                thresholds,
                ..
            } => Some(orthant_probability(
                &spec.model,
                offsets,
                thresholds,
                truth.as_ref(),
            )?),
            _ => None,
        };
        Ok(Runner {
            spec: spec.clone(),
            region,
            window,
            truth,
            edf_target,
            theta,
        })
    }

    /// One replication; `key` already carries the replicate index.
    fn replicate(&self, key: RngKey, out: &mut Vec<f64>) -> Result<()> {
        let spec = &self.spec;
        let real = generate(&spec.model, &self.window, key.with_tag("field"))?;
        let tau_key = key.with_tag("tau");
        let d = spec.model.components;
        match &spec.statistic {
            StatKind::NormalizedSum { mode } => {
                let region_refs = vec![&self.region; d];
                let tau =
                    TauArray::draw(&region_refs, spec.points, &spec.density, 1, tau_key)?;
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                out.push(ctx.normalized_sum(&tau, 0, 0, *mode, self.truth.as_ref())?);
            }
            StatKind::ReplicatedSums { mode, replicates } => {
                let region_refs = vec![&self.region; d];
                let tau = TauArray::draw(
                    &region_refs,
                    spec.points,
                    &spec.density,
                    *replicates,
                    tau_key,
                )?;
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                for row in ctx.replicated_sums(&tau, *mode, self.truth.as_ref())? {
                    out.extend(row);
                }
            }
            StatKind::ClassicalPartialSum => {
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                out.push(ctx.classical_partial_sum(0, self.truth.as_ref())?);
            }
            StatKind::BrokenLineSup { mode, absolute } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                let samples = ctx.sampled_values(&tau, 0, 0)?;
                let truth = self.truth.as_ref();
                let (center, scale) = match mode {
                    LineMode::SetCenterSetScale => (ctx.set_mean(0), ctx.set_variance(0)),
                    LineMode::SetCenterTrueScale => (
                        ctx.set_mean(0),
                        truth
                            .ok_or_else(|| Error::MissingTruth("true-variance line".into()))?
                            .variance,
                    ),
                    LineMode::TrueCenterTrueScale => {
                        let t = truth
                            .ok_or_else(|| Error::MissingTruth("true-centered line".into()))?;
                        (t.mean, t.variance)
                    }
                };
                let line = BrokenLine::from_samples(&samples, center, scale)?;
                out.push(if *absolute { line.sup_abs() } else { line.sup() });
            }
            StatKind::KsEdf { offsets } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let edf = build_edf(&real, offsets, &tau)?;
                out.push(match self.edf_target.as_ref().unwrap() {
                    EdfTarget::Scalar(cdf) => edf.ks_statistic(cdf)?,
                    EdfTarget::Joint(_) => return Err(Error::DimensionUnsupported(offsets.len())),
                });
            }
            StatKind::EdfSupDistance { offsets } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let edf = build_edf(&real, offsets, &tau)?;
                out.push(match self.edf_target.as_ref().unwrap() {
                    EdfTarget::Scalar(cdf) => edf.sup_distance(cdf)?,
                    EdfTarget::Joint(table) => edf.sup_distance(table.as_ref())?,
                });
            }
            StatKind::TupleSum { offsets, f, .. } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let tup = TupleContext::new(&real, &self.region, offsets, f)?;
                out.push(tup.sum(&tau, 0, 0, self.theta.unwrap())?);
            }
            StatKind::IndicatorSum {
                offsets,
                thresholds,
                limit_variance,
            } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let f = TupleFn::Orthant {
                    thresholds: thresholds.clone(),
                };
                let tup = TupleContext::new(&real, &self.region, offsets, &f)?;
                out.push(tup.indicator_sum(
                    &tau,
                    0,
                    0,
                    self.theta.unwrap(),
                    *limit_variance,
                )?);
            }
            StatKind::VectorSum { true_center } => {
                let tau = TauArray::draw(
                    &[&self.region],
                    spec.points,
                    &spec.density,
                    1,
                    tau_key,
                )?;
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                out.extend(ctx.vector_sum(&tau, 0, *true_center, self.truth.as_ref())?);
            }
            StatKind::LindebergFraction { eps } => {
                let ctx = SetContext::new(&real, &self.region, &spec.density)?;
                out.push(ctx.lindeberg_fraction(0, spec.points, *eps)?);
            }
        }
        Ok(())
    }
}

fn resolve_edf_target(
    model: &ModelSpec,
    offsets: &[Vec<i64>],
    truth: Option<&TruthOracle>,
) -> Result<EdfTarget> {
    match offsets.len() {
        1 => {
            let cdf = truth
                .and_then(|t| if t.estimated { None } else { t.cdf.clone() })
                .ok_or_else(|| {
                    Error::MissingTruth("EDF distance needs an exact marginal CDF".into())
                })?;
            Ok(EdfTarget::Scalar(cdf))
        }
        2 => {
            let truth = truth.ok_or_else(|| {
                Error::MissingTruth("EDF distance needs exact marginal truth".into())
            })?;
            let gaussian = matches!(
                truth.cdf,
                Some(crate::field::MarginalCdf::Normal { .. })
            );
            if !gaussian {
                return Err(Error::MissingTruth(
                    "2-D EDF distance needs a Gaussian-family model".into(),
                ));
            }
            let lag: Vec<i64> = offsets[1]
                .iter()
                .zip(&offsets[0])
                .map(|(&a, &b)| a - b)
                .collect();
            let cov = model.autocovariance(&lag).ok_or_else(|| {
                Error::MissingTruth("pair correlation unavailable for this model".into())
            })?;
            let sd = truth.sd();
            let rho = cov / truth.variance;
            let law = BivariateNormal::new([truth.mean, truth.mean], [sd, sd], rho);
            Ok(EdfTarget::Joint(Box::new(law.table())))
        }
        l => Err(Error::DimensionUnsupported(l)),
    }
}

/// Exact orthant probability for Gaussian-family models (1- and 2-point
/// tuples); falls back to conditional-quadrature for correlated pairs.
fn orthant_probability(
    model: &ModelSpec,
    offsets: &[Vec<i64>],
    thresholds: &[f64],
    truth: Option<&TruthOracle>,
) -> Result<f64> {
    let truth = truth.ok_or_else(|| Error::MissingTruth("orthant probability".into()))?;
    match offsets.len() {
        1 => {
            let cdf = truth
                .cdf
                .as_ref()
                .ok_or_else(|| Error::MissingTruth("orthant probability".into()))?;
            Ok(cdf.eval(thresholds[0]))
        }
        2 => {
            let gaussian = matches!(truth.cdf, Some(crate::field::MarginalCdf::Normal { .. }));
            if !gaussian {
                return Err(Error::MissingTruth(
                    "2-D orthant probability needs a Gaussian-family model".into(),
                ));
            }
            let lag: Vec<i64> = offsets[1]
                .iter()
                .zip(&offsets[0])
                .map(|(&a, &b)| a - b)
                .collect();
            let cov = model
                .autocovariance(&lag)
                .ok_or_else(|| Error::MissingTruth("pair correlation unavailable".into()))?;
            let sd = truth.sd();
            let law = BivariateNormal::new([truth.mean, truth.mean], [sd, sd], cov / truth.variance);
            Ok(law.cdf(thresholds[0], thresholds[1]))
        }
        l => Err(Error::DimensionUnsupported(l)),
    }
}

/// Replicate a statistic `n_rep` times on `jobs` workers (0 = all cores).
///
/// Output is a pure function of `(spec, n_rep, master_seed)`; the job count
/// only changes the wall time. Aborts when more than 1% of replications
/// fail.
pub fn replicate_statistic(
    spec: &ReplicationSpec,
    n_rep: usize,
    jobs: usize,
    master_seed: u64,
    label: &str,
) -> Result<ReplicationSample> {
    let runner = Runner::prepare(spec)?;
    let key = RngKey::new(master_seed).with_tag("rep");
    let run = || -> Vec<Result<Vec<f64>>> {
        (0..n_rep)
            .into_par_iter()
            .map(|r| {
                let mut out = Vec::with_capacity(spec.statistic.width(spec.model.components));
                runner
                    .replicate(key.with_index(r as u64), &mut out)
                    .map(|()| out)
            })
            .collect()
    };
    let results = if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
            .install(run)
    };
    let total = results.len();
    let mut failed = 0usize;
    let mut first_error: Option<Error> = None;
    let width = spec.statistic.width(spec.model.components);
    let mut flat = Vec::with_capacity(total * width);
    for r in results {
        match r {
            Ok(vals) => flat.extend(vals),
            Err(e) => {
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failed * 100 > total {
        return Err(Error::ReplicationsFailed {
            failed,
            total,
            first: first_error
                .map(|e| e.to_string())
                .unwrap_or_else(|| "unknown".into()),
        });
    }
    let values = if width == 1 {
        Values::Scalars(flat)
    } else {
        Values::Vectors { width, flat }
    };
    Ok(ReplicationSample {
        label: label.to_string(),
        master_seed,
        region_measure: runner.region.measure(),
        points: spec.points,
        requested: n_rep,
        failed,
        values,
    })
}

/// One-sample Kolmogorov test of scalar values against a continuous CDF:
/// `(distance, asymptotic p-value)`.
pub fn ks_against(sample: &ReplicationSample, target: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let values = sample.values.scalars()?;
    let d = ks_distance(values, &target);
    let n = values.len() as f64;
    let p = 1.0 - kolmogorov_cdf(n.sqrt() * d);
    Ok((d, p))
}

/// KS distance of raw values to a CDF.
pub fn ks_distance(values: &[f64], target: &impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = target(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample KS distance (stationarity checks).
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        // advance both EDFs past the smaller value, ties together
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Normal-distance estimate with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub std_error: f64,
}

/// Sup-distance of the sample's empirical CDF to the standard normal, with
/// a 200-resample bootstrap standard error.
pub fn delta_n_estimate(sample: &ReplicationSample) -> Result<DeltaEstimate> {
    let values = sample.values.scalars()?;
    if values.is_empty() {
        return Err(Error::Validation("empty sample".into()));
    }
    let delta = ks_distance(values, &std_normal_cdf);
    let mut rng = RngKey::new(sample.master_seed)
        .with_tag("bootstrap")
        .rng();
    let resamples = 200;
    let mut deltas = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; values.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = values[rand::Rng::gen_range(&mut rng, 0..values.len())];
        }
        deltas.push(ks_distance(&buf, &std_normal_cdf));
    }
    let mean: f64 = deltas.iter().sum::<f64>() / resamples as f64;
    let var: f64 =
        deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (resamples - 1) as f64;
    Ok(DeltaEstimate {
        delta,
        std_error: var.sqrt(),
    })
}

/// The two addends of the normal-distance bound: the small-variance
/// probability and `k^{-delta/2} eps^{-(2+delta)/2} E|X|^{2+delta}`.
///
/// The unknown absolute constant in front of the second addend is never
/// asserted numerically; only the decay shape is verified downstream.
pub fn rate_bound(
    k_n: usize,
    eps: f64,
    delta: f64,
    moment_2_plus_delta: f64,
    p_small_variance: f64,
) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if !(eps > 0.0) || !(moment_2_plus_delta > 0.0) {
        return Err(Error::Validation("eps and the moment must be positive".into()));
    }
    let addend = (k_n as f64).powf(-delta / 2.0) * eps.powf(-(2.0 + delta) / 2.0)
        * moment_2_plus_delta;
    Ok((p_small_variance, addend))
}

/// One point of the normal-distance decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub points: usize,
    pub region_measure: f64,
    pub delta: f64,
    pub std_error: f64,
}

/// Normal-distance decay curve over the region index list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

/// Fitted log-log slope with its standard error and the theoretical
/// prediction it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
    pub prediction: f64,
    /// `slope <= prediction + 0.2`
    pub consistent: bool,
}

/// Weighted least-squares slope of `log delta` against `log k`, compared
/// against the predicted decay exponent `-delta_moment / 2`.
pub fn rate_slope(curve: &RateCurve, delta_moment: f64) -> Result<SlopeFit> {
    let usable: Vec<&RatePoint> = curve
        .points
        .iter()
        .filter(|p| p.delta > 3.0 * p.std_error && p.delta > 0.0)
        .collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientSignal(format!(
            "{} of {} distances exceed 3 standard errors; need 4",
            usable.len(),
            curve.points.len()
        )));
    }
    // weights from the propagated log-scale errors se/delta
    let pts: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|p| {
            let w = (p.delta / p.std_error.max(1e-12)).powi(2);
            ((p.points as f64).ln(), p.delta.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx: f64 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / sw;
    let my: f64 = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let std_error = (1.0 / sxx).sqrt();
    let prediction = -delta_moment / 2.0;
    Ok(SlopeFit {
        slope,
        std_error,
        intercept,
        prediction,
        consistent: slope <= prediction + 0.2,
    })
}

/// Result of comparing a replication covariance against a target matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovCheck {
    pub empirical: Vec<Vec<f64>>,
    pub max_abs_deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Empirical covariance of vector replications against a target, with the
/// pass threshold `6 / sqrt(N) * max diagonal`.
pub fn covariance_check(sample: &ReplicationSample, target: &[Vec<f64>]) -> Result<CovCheck> {
    let width = sample.values.width();
    if target.len() != width || target.iter().any(|row| row.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: target.len(),
        });
    }
    let n = sample.values.len();
    if n < 2 {
        return Err(Error::Validation("need at least 2 vector replications".into()));
    }
    let mut means = vec![0.0f64; width];
    for row in sample.values.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0f64; width]; width];
    for row in sample.values.rows() {
        for a in 0..width {
            for b in 0..width {
                cov[a][b] += (row[a] - means[a]) * (row[b] - means[b]);
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    let max_diag = target
        .iter()
        .enumerate()
        .map(|(i, row)| row[i])
        .fold(0.0f64, f64::max);
    let threshold = 6.0 / (n as f64).sqrt() * max_diag;
    let mut max_abs_deviation = 0.0f64;
    for a in 0..width {
        for b in 0..width {
            max_abs_deviation = max_abs_deviation.max((cov[a][b] - target[a][b]).abs());
        }
    }
    Ok(CovCheck {
        empirical: cov,
        max_abs_deviation,
        threshold,
        pass: max_abs_deviation < threshold,
    })
}

/// Pearson correlation matrix of the vector replications; entries of the
/// block-independence checks.
pub fn correlation_matrix(sample: &ReplicationSample) -> Result<Vec<Vec<f64>>> {
    let trivial = vec![vec![1.0]];
    let width = sample.values.width();
    if width == 1 {
        return Ok(trivial);
    }
    let identity: Vec<Vec<f64>> = (0..width)
        .map(|i| (0..width).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let check = covariance_check(sample, &identity)?;
    let mut corr = check.empirical;
    let sds: Vec<f64> = (0..width).map(|i| corr[i][i].sqrt()).collect();
    for a in 0..width {
        for b in 0..width {
            corr[a][b] /= sds[a] * sds[b];
        }
    }
    Ok(corr)
}
