//! Stationary field models and reproducible realizations on lattice windows.
//!
//! Every model generates a d-component realization over a rectangular window
//! of `Z^m` sites. Regenerating with the same `(model, window, key)` yields
//! bit-identical values. Continuum fields are represented on a grid of pitch
//! `h`; all integrals downstream become Riemann sums over sites.

use crate::error::Error;
use crate::rng::RngKey;
use crate::Result;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A rectangular window of lattice sites.
///
/// Site coordinates are integers; the physical coordinate of a site is
/// `site * pitch`. `pitch = 1` is lattice-native mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub origin: Vec<i64>,
    pub extent: Vec<u64>,
    #[serde(default = "default_pitch")]
    pub pitch: f64,
}

fn default_pitch() -> f64 {
    1.0
}

impl LatticeWindow {
    pub fn new(origin: Vec<i64>, extent: Vec<u64>, pitch: f64) -> Result<Self> {
        if origin.len() != extent.len() || origin.is_empty() {
            return Err(Error::Validation(
                "window origin and extent must have equal, positive dimension".into(),
            ));
        }
        if extent.iter().any(|&e| e == 0) {
            return Err(Error::Validation("window extent must be positive".into()));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::Validation("window pitch must be positive".into()));
        }
        let count = extent.iter().try_fold(1u64, |acc, &e| acc.checked_mul(e));
        if count.is_none() || count.unwrap() > (1 << 33) {
            return Err(Error::Validation("window site count overflows budget".into()));
        }
        Ok(LatticeWindow {
            origin,
            extent,
            pitch,
        })
    }

    /// 1-D window of `len` sites starting at `origin`.
    pub fn interval(origin: i64, len: u64) -> Self {
        LatticeWindow::new(vec![origin], vec![len], 1.0).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn site_count(&self) -> usize {
        self.extent.iter().product::<u64>() as usize
    }

    /// Window measure: site count times `pitch^m`.
    pub fn measure(&self) -> f64 {
        self.site_count() as f64 * self.pitch.powi(self.dim() as i32)
    }

    pub fn contains(&self, t: &[i64]) -> bool {
        t.len() == self.dim()
            && t.iter()
                .zip(&self.origin)
                .zip(&self.extent)
                .all(|((&c, &o), &e)| c >= o && c < o + e as i64)
    }

    /// Row-major index of a site, last axis fastest.
    pub fn site_index(&self, t: &[i64]) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        let mut idx = 0usize;
        for ((c, o), e) in t.iter().zip(&self.origin).zip(&self.extent) {
            idx = idx * *e as usize + (c - o) as usize;
        }
        Some(idx)
    }

    /// Row-major strides per axis.
    pub fn strides(&self) -> Vec<usize> {
        let m = self.dim();
        let mut strides = vec![1usize; m];
        for a in (0..m.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.extent[a + 1] as usize;
        }
        strides
    }

    /// Grow the window so that `self + offset` stays inside for every offset.
    pub fn hull_with_offsets(&self, offsets: &[Vec<i64>]) -> Result<LatticeWindow> {
        let m = self.dim();
        let mut lo = self.origin.clone();
        let mut hi: Vec<i64> = self
            .origin
            .iter()
            .zip(&self.extent)
            .map(|(&o, &e)| o + e as i64)
            .collect();
        for off in offsets {
            if off.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: off.len(),
                });
            }
            for a in 0..m {
                lo[a] = lo[a].min(self.origin[a] + off[a]);
                hi[a] = hi[a].max(self.origin[a] + self.extent[a] as i64 + off[a]);
            }
        }
        let extent = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| (h - l) as u64)
            .collect();
        LatticeWindow::new(lo, extent, self.pitch)
    }
}

/// Marginal distribution of an i.i.d. field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalDist {
    Normal { mean: f64, sd: f64 },
    Uniform { min: f64, max: f64 },
    Exponential { rate: f64 },
    Bernoulli { p: f64 },
    Constant { value: f64 },
}

impl MarginalDist {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            MarginalDist::Normal { sd, .. } => *sd >= 0.0 && sd.is_finite(),
            MarginalDist::Uniform { min, max } => min < max,
            MarginalDist::Exponential { rate } => *rate > 0.0,
            MarginalDist::Bernoulli { p } => (0.0..=1.0).contains(p),
            MarginalDist::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad marginal parameters: {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalDist::Normal { mean, sd } => {
                mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }
            MarginalDist::Uniform { min, max } => rng.gen_range(*min..*max),
            MarginalDist::Exponential { rate } => -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate,
            MarginalDist::Bernoulli { p } => {
                if rng.gen::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            MarginalDist::Constant { value } => *value,
        }
    }

    fn truth(&self) -> TruthOracle {
        match *self {
            MarginalDist::Normal { mean, sd } => TruthOracle {
                mean,
                variance: sd * sd,
                cdf: Some(MarginalCdf::Normal { mean, sd }),
                // E|X|^3 in closed form only for the centered case
                moment_2_plus_delta: if mean == 0.0 {
                    Some((1.0, sd.powi(3) * 2.0 * (2.0 / std::f64::consts::PI).sqrt()))
                } else {
                    None
                },
                estimated: false,
            },
            MarginalDist::Uniform { min, max } => TruthOracle {
                mean: 0.5 * (min + max),
                variance: (max - min).powi(2) / 12.0,
                cdf: Some(MarginalCdf::Uniform { min, max }),
                moment_2_plus_delta: if min >= 0.0 {
                    Some((1.0, (max.powi(4) - min.powi(4)) / (4.0 * (max - min))))
                } else {
                    None
                },
                estimated: false,
            },
            MarginalDist::Exponential { rate } => TruthOracle {
                mean: 1.0 / rate,
                variance: 1.0 / (rate * rate),
                cdf: Some(MarginalCdf::Exponential { rate }),
                moment_2_plus_delta: Some((1.0, 6.0 / rate.powi(3))),
                estimated: false,
            },
            MarginalDist::Bernoulli { p } => TruthOracle {
                mean: p,
                variance: p * (1.0 - p),
                cdf: Some(MarginalCdf::Bernoulli { p }),
                moment_2_plus_delta: Some((1.0, p)),
                estimated: false,
            },
            MarginalDist::Constant { value } => TruthOracle {
                mean: value,
                variance: 0.0,
                cdf: Some(MarginalCdf::PointMass { value }),
                moment_2_plus_delta: Some((1.0, value.abs().powi(3))),
                estimated: false,
            },
        }
    }
}

/// Bounded boundary function on `[0, 1)` for the rotation difference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryFn {
    /// `g(u) = amplitude * sin(2 pi u)`
    Sin2Pi { amplitude: f64 },
    /// `g(u) = 1{u < threshold}`
    Indicator { threshold: f64 },
}

impl BoundaryFn {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            BoundaryFn::Sin2Pi { amplitude } => {
                amplitude * (2.0 * std::f64::consts::PI * u).sin()
            }
            BoundaryFn::Indicator { threshold } => {
                if u < *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Supremum of |g|.
    pub fn sup_abs(&self) -> f64 {
        match self {
            BoundaryFn::Sin2Pi { amplitude } => amplitude.abs(),
            BoundaryFn::Indicator { .. } => 1.0,
        }
    }
}

/// Function applied to a tuple of field values to build a derived field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TupleFn {
    /// k = 1 passthrough.
    Identity,
    /// Product of powers, one exponent per offset.
    MixedMoment { powers: Vec<u32> },
    /// Indicator of the orthant event `{x_j <= threshold_j for all j}`.
    Orthant { thresholds: Vec<f64> },
}

impl TupleFn {
    pub fn eval(&self, vals: &[f64]) -> f64 {
        match self {
            TupleFn::Identity => vals[0],
            TupleFn::MixedMoment { powers } => vals
                .iter()
                .zip(powers)
                .map(|(v, &p)| v.powi(p as i32))
                .product(),
            TupleFn::Orthant { thresholds } => {
                if vals.iter().zip(thresholds).all(|(v, x)| v <= x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn arity_matches(&self, k: usize) -> bool {
        match self {
            TupleFn::Identity => k == 1,
            TupleFn::MixedMoment { powers } => powers.len() == k,
            TupleFn::Orthant { thresholds } => thresholds.len() == k,
        }
    }
}

/// Field model variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Independent identically distributed values at all sites.
    Iid { distribution: MarginalDist },
    /// Gaussian moving average: `X(t) = mean + sum_s w_s xi(t+s)` with
    /// i.i.d. standard normal innovations and a finite kernel.
    GaussianMa {
        kernel: Vec<(Vec<i64>, f64)>,
        mean: f64,
    },
    /// First-order autoregression, 1-D only, started stationary.
    Ar1 { rho: f64, innovation_variance: f64 },
    /// Differences of a boundary function along an irrational rotation,
    /// 1-D only: `X_i = g({(i+1) alpha + U}) - g({i alpha + U})`.
    ///
    /// Stationary and ergodic; partial sums telescope, so the classical
    /// normalized partial sum degenerates while randomized statistics do not.
    RotationCoboundary { alpha: f64, boundary: BoundaryFn },
    /// Observation of a finite-state stationary Markov chain, 1-D only.
    FiniteMarkov {
        transition: Vec<Vec<f64>>,
        observation: Vec<f64>,
    },
    /// `Y(t) = f(X(t_1 + t), ..., X(t_k + t))` over a scalar base model.
    DerivedTuple {
        base: Box<ModelSpec>,
        offsets: Vec<Vec<i64>>,
        f: TupleFn,
    },
}

/// A field model: variant plus component count.
///
/// Components are generated from independent streams unless `shared_noise`
/// is set, in which case every component consumes the same stream (used by
/// the covariance experiment with duplicated components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub variant: ModelVariant,
    #[serde(default = "one")]
    pub components: usize,
    #[serde(default)]
    pub shared_noise: bool,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn new(variant: ModelVariant) -> Self {
        ModelSpec {
            variant,
            components: 1,
            shared_noise: false,
        }
    }

    pub fn with_components(mut self, d: usize) -> Self {
        self.components = d;
        self
    }

    pub fn with_shared_noise(mut self) -> Self {
        self.shared_noise = true;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidModel("components must be positive".into()));
        }
        match &self.variant {
            ModelVariant::Iid { distribution } => distribution.validate(),
            ModelVariant::GaussianMa { kernel, .. } => {
                if kernel.is_empty() {
                    return Err(Error::InvalidModel("empty moving-average kernel".into()));
                }
                if kernel.iter().any(|(off, w)| off.len() != dim || !w.is_finite()) {
                    return Err(Error::InvalidModel(
                        "kernel offsets must match the window dimension".into(),
                    ));
                }
                let ssq: f64 = kernel.iter().map(|(_, w)| w * w).sum();
                if !(ssq > 0.0) {
                    return Err(Error::InvalidModel("kernel has zero energy".into()));
                }
                Ok(())
            }
            ModelVariant::Ar1 {
                rho,
                innovation_variance,
            } => {
                if rho.abs() >= 1.0 {
                    return Err(Error::InvalidModel(format!("|rho| = {} >= 1", rho.abs())));
                }
                if !(*innovation_variance > 0.0) {
                    return Err(Error::InvalidModel("innovation variance must be positive".into()));
                }
                if dim != 1 {
                    return Err(Error::InvalidModel("AR(1) is one-dimensional".into()));
                }
                Ok(())
            }
            ModelVariant::RotationCoboundary { alpha, .. } => {
                if dim != 1 {
                    return Err(Error::InvalidModel("rotation model is one-dimensional".into()));
                }
                if !alpha.is_finite() {
                    return Err(Error::InvalidModel("alpha must be finite".into()));
                }
                Ok(())
            }
            ModelVariant::FiniteMarkov {
                transition,
                observation,
            } => {
                if dim != 1 {
                    return Err(Error::InvalidModel("Markov model is one-dimensional".into()));
                }
                validate_markov(transition, observation).map(|_| ())
            }
            ModelVariant::DerivedTuple { base, offsets, f } => {
                if base.components != 1 {
                    return Err(Error::InvalidModel("derived tuple needs a scalar base".into()));
                }
                if offsets.is_empty() || offsets.iter().any(|o| o.len() != dim) {
                    return Err(Error::InvalidModel(
                        "tuple offsets must be nonempty and match the dimension".into(),
                    ));
                }
                if !f.arity_matches(offsets.len()) {
                    return Err(Error::InvalidModel(
                        "tuple function arity must match the offset count".into(),
                    ));
                }
                base.validate(dim)
            }
        }
    }

    /// Autocovariance at a lag, for the models where it is closed-form.
    pub fn autocovariance(&self, lag: &[i64]) -> Option<f64> {
        match &self.variant {
            ModelVariant::Iid { distribution } => {
                if lag.iter().all(|&c| c == 0) {
                    Some(distribution.truth().variance)
                } else {
                    Some(0.0)
                }
            }
            ModelVariant::GaussianMa { kernel, .. } => {
                let mut acc = 0.0;
                for (s, w) in kernel {
                    for (s2, w2) in kernel {
                        if s2.iter().zip(s).zip(lag).all(|((&a, &b), &l)| a - b == l) {
                            acc += w * w2;
                        }
                    }
                }
                Some(acc)
            }
            ModelVariant::Ar1 {
                rho,
                innovation_variance,
            } => {
                let h = lag.first().copied().unwrap_or(0).unsigned_abs() as i32;
                Some(innovation_variance / (1.0 - rho * rho) * rho.powi(h))
            }
            _ => None,
        }
    }
}

/// Marginal CDF families with closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalCdf {
    Normal { mean: f64, sd: f64 },
    Uniform { min: f64, max: f64 },
    Exponential { rate: f64 },
    Bernoulli { p: f64 },
    PointMass { value: f64 },
    /// Arcsine law of `c * cos(Theta)` with uniform angle; `c = half_width`.
    Arcsine { half_width: f64 },
    /// Finite discrete law, atoms sorted ascending with cumulative weights.
    Discrete { atoms: Vec<f64>, cumulative: Vec<f64> },
}

impl MarginalCdf {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MarginalCdf::Normal { mean, sd } => {
                if *sd == 0.0 {
                    if x >= *mean {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    crate::gauss::std_normal_cdf((x - mean) / sd)
                }
            }
            MarginalCdf::Uniform { min, max } => ((x - min) / (max - min)).clamp(0.0, 1.0),
            MarginalCdf::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            MarginalCdf::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            MarginalCdf::PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            MarginalCdf::Arcsine { half_width } => {
                if *half_width == 0.0 {
                    return if x >= 0.0 { 1.0 } else { 0.0 };
                }
                let z = x / half_width;
                if z <= -1.0 {
                    0.0
                } else if z >= 1.0 {
                    1.0
                } else {
                    0.5 + z.asin() / std::f64::consts::PI
                }
            }
            MarginalCdf::Discrete { atoms, cumulative } => {
                match atoms.partition_point(|&a| a <= x) {
                    0 => 0.0,
                    k => cumulative[k - 1],
                }
            }
        }
    }
}

/// Exact (or Monte Carlo estimated, when flagged) marginal parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthOracle {
    pub mean: f64,
    pub variance: f64,
    pub cdf: Option<MarginalCdf>,
    /// `(delta, E|X(0)|^{2+delta})` when known.
    pub moment_2_plus_delta: Option<(f64, f64)>,
    /// True when the values come from brute-force simulation rather than a
    /// closed form.
    pub estimated: bool,
}

impl TruthOracle {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Length of the overlap of the circle arcs `[a, a+la)` and `[b, b+lb)`
/// on the unit circle.
fn circle_overlap(a: f64, la: f64, b: f64, lb: f64) -> f64 {
    let frac = |x: f64| x - x.floor();
    let mut total = 0.0;
    // split each arc at the wrap point and intersect on the line
    let split = |start: f64, len: f64| -> Vec<(f64, f64)> {
        let s = frac(start);
        if s + len <= 1.0 {
            vec![(s, s + len)]
        } else {
            vec![(s, 1.0), (0.0, s + len - 1.0)]
        }
    };
    for (a0, a1) in split(a, la) {
        for (b0, b1) in split(b, lb) {
            total += (a1.min(b1) - a0.max(b0)).max(0.0);
        }
    }
    total
}

fn validate_markov(transition: &[Vec<f64>], observation: &[f64]) -> Result<Vec<f64>> {
    let s = transition.len();
    if s == 0 || observation.len() != s {
        return Err(Error::InvalidModel(
            "transition matrix and observation map sizes disagree".into(),
        ));
    }
    for row in transition {
        if row.len() != s {
            return Err(Error::InvalidModel("transition matrix must be square".into()));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel("transition rows must be stochastic".into()));
        }
    }
    // irreducibility: every state reaches every state through positive entries
    let reach = |forward: bool| -> bool {
        let mut seen = vec![false; s];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..s {
                let p = if forward {
                    transition[i][j]
                } else {
                    transition[j][i]
                };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|b| b)
    };
    if !reach(true) || !reach(false) {
        return Err(Error::InvalidModel(
            "transition matrix is reducible; stationary distribution not unique".into(),
        ));
    }
    // stationary distribution by power iteration on the lazy chain
    let mut pi = vec![1.0 / s as f64; s];
    for _ in 0..200_000 {
        let mut next = vec![0.0; s];
        for i in 0..s {
            for j in 0..s {
                next[j] += pi[i] * 0.5 * (transition[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let norm: f64 = next.iter().sum();
        for v in &mut next {
            *v /= norm;
        }
        let diff: f64 = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    Ok(pi)
}

/// Exact marginal truth for a model, Monte Carlo estimated where no closed
/// form exists (derived tuples with nontrivial `f`).
pub fn marginal_truth(model: &ModelSpec) -> Result<TruthOracle> {
    match &model.variant {
        ModelVariant::Iid { distribution } => {
            distribution.validate()?;
            Ok(distribution.truth())
        }
        ModelVariant::GaussianMa { kernel, mean } => {
            let variance: f64 = kernel.iter().map(|(_, w)| w * w).sum();
            Ok(TruthOracle {
                mean: *mean,
                variance,
                cdf: Some(MarginalCdf::Normal {
                    mean: *mean,
                    sd: variance.sqrt(),
                }),
                moment_2_plus_delta: if *mean == 0.0 {
                    Some((
                        1.0,
                        variance.sqrt().powi(3) * 2.0 * (2.0 / std::f64::consts::PI).sqrt(),
                    ))
                } else {
                    None
                },
                estimated: false,
            })
        }
        ModelVariant::Ar1 {
            rho,
            innovation_variance,
        } => {
            let variance = innovation_variance / (1.0 - rho * rho);
            Ok(TruthOracle {
                mean: 0.0,
                variance,
                cdf: Some(MarginalCdf::Normal {
                    mean: 0.0,
                    sd: variance.sqrt(),
                }),
                moment_2_plus_delta: Some((
                    1.0,
                    variance.sqrt().powi(3) * 2.0 * (2.0 / std::f64::consts::PI).sqrt(),
                )),
                estimated: false,
            })
        }
        ModelVariant::RotationCoboundary { alpha, boundary } => {
            // E g({U+a}) = E g(U) by shift invariance, so the mean is 0.
            match boundary {
                BoundaryFn::Sin2Pi { amplitude } => {
                    let c = 2.0 * amplitude.abs() * (std::f64::consts::PI * alpha).sin().abs();
                    Ok(TruthOracle {
                        mean: 0.0,
                        variance: 0.5 * c * c,
                        cdf: Some(MarginalCdf::Arcsine { half_width: c }),
                        moment_2_plus_delta: Some((
                            1.0,
                            c.powi(3) * 4.0 / (3.0 * std::f64::consts::PI),
                        )),
                        estimated: false,
                    })
                }
                BoundaryFn::Indicator { threshold } => {
                    let c = threshold.clamp(0.0, 1.0);
                    // X = 1 exactly when {u + alpha} < c <= {u}
                    let p_one = c - circle_overlap(0.0, c, 1.0 - alpha.rem_euclid(1.0), c);
                    let variance = 2.0 * p_one;
                    Ok(TruthOracle {
                        mean: 0.0,
                        variance,
                        cdf: Some(MarginalCdf::Discrete {
                            atoms: vec![-1.0, 0.0, 1.0],
                            cumulative: vec![p_one, 1.0 - p_one, 1.0],
                        }),
                        moment_2_plus_delta: Some((1.0, 2.0 * p_one)),
                        estimated: false,
                    })
                }
            }
        }
        ModelVariant::FiniteMarkov {
            transition,
            observation,
        } => {
            let pi = validate_markov(transition, observation)?;
            let mean: f64 = pi.iter().zip(observation).map(|(p, f)| p * f).sum();
            let second: f64 = pi.iter().zip(observation).map(|(p, f)| p * f * f).sum();
            let m3: f64 = pi
                .iter()
                .zip(observation)
                .map(|(p, f)| p * f.abs().powi(3))
                .sum();
            let mut order: Vec<usize> = (0..observation.len()).collect();
            order.sort_by(|&a, &b| observation[a].total_cmp(&observation[b]));
            let mut atoms = Vec::new();
            let mut cumulative = Vec::new();
            let mut acc = 0.0;
            for i in order {
                acc += pi[i];
                if atoms.last().is_some_and(|&a: &f64| a == observation[i]) {
                    *cumulative.last_mut().unwrap() = acc;
                } else {
                    atoms.push(observation[i]);
                    cumulative.push(acc);
                }
            }
            Ok(TruthOracle {
                mean,
                variance: (second - mean * mean).max(0.0),
                cdf: Some(MarginalCdf::Discrete { atoms, cumulative }),
                moment_2_plus_delta: Some((1.0, m3)),
                estimated: false,
            })
        }
        ModelVariant::DerivedTuple { base, offsets, f } => {
            if let TupleFn::Identity = f {
                return marginal_truth(base);
            }
            // brute-force Monte Carlo over fresh tuple draws, fixed internal
            // stream so the estimate is reproducible
            let dim = offsets[0].len();
            let mut lo = vec![i64::MAX; dim];
            let mut hi = vec![i64::MIN; dim];
            for off in offsets {
                for a in 0..dim {
                    lo[a] = lo[a].min(off[a]);
                    hi[a] = hi[a].max(off[a]);
                }
            }
            let extent: Vec<u64> = lo.iter().zip(&hi).map(|(&l, &h)| (h - l + 1) as u64).collect();
            let window = LatticeWindow::new(lo, extent, 1.0)?;
            let key = RngKey::new(0x7a75_7468_6f72_6163).with_tag("tuple-truth");
            let reps = 200_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut vals = vec![0.0; offsets.len()];
            for r in 0..reps {
                let real = generate(base, &window, key.with_index(r as u64))?;
                for (j, off) in offsets.iter().enumerate() {
                    vals[j] = real.evaluate(off, 0)?;
                }
                let y = f.eval(&vals);
                sum += y;
                sumsq += y * y;
            }
            let mean = sum / reps as f64;
            Ok(TruthOracle {
                mean,
                variance: (sumsq / reps as f64 - mean * mean).max(0.0),
                cdf: None,
                moment_2_plus_delta: None,
                estimated: true,
            })
        }
    }
}

/// A realized field over a window.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    pub window: LatticeWindow,
    pub components: usize,
    /// Component-major values: `values[l * site_count + site_index]`.
    values: Vec<f64>,
    pub model: ModelSpec,
    pub seed: RngKey,
    pub truth: Option<TruthOracle>,
}

impl FieldRealization {
    /// Build a realization from explicit values (component-major), mainly
    /// for tests and tooling that replay recorded fields.
    pub fn from_values(
        window: LatticeWindow,
        components: usize,
        values: Vec<f64>,
        model: ModelSpec,
        truth: Option<TruthOracle>,
    ) -> Result<Self> {
        if values.len() != window.site_count() * components {
            return Err(Error::DimensionMismatch {
                expected: window.site_count() * components,
                got: values.len(),
            });
        }
        Ok(FieldRealization {
            window,
            components,
            values,
            model,
            seed: RngKey::new(0),
            truth,
        })
    }

    /// Value at a lattice point.
    pub fn evaluate(&self, t: &[i64], component: usize) -> Result<f64> {
        let idx = self
            .window
            .site_index(t)
            .ok_or_else(|| Error::OutOfWindow { point: t.to_vec() })?;
        Ok(self.values[component * self.window.site_count() + idx])
    }

    /// All values of one component, site row-major.
    pub fn component(&self, l: usize) -> &[f64] {
        let n = self.window.site_count();
        &self.values[l * n..(l + 1) * n]
    }

    /// Pointwise affine image `a X + b`. Marginal truth is transformed when
    /// it stays in a closed-form family, and dropped otherwise.
    pub fn affine(&self, a: f64, b: f64) -> FieldRealization {
        let values = self.values.iter().map(|&v| a * v + b).collect();
        let truth = self.truth.as_ref().and_then(|t| {
            let cdf = match t.cdf.as_ref()? {
                MarginalCdf::Normal { mean, sd } if a != 0.0 => Some(MarginalCdf::Normal {
                    mean: a * mean + b,
                    sd: (a * sd).abs(),
                }),
                MarginalCdf::Uniform { min, max } if a > 0.0 => Some(MarginalCdf::Uniform {
                    min: a * min + b,
                    max: a * max + b,
                }),
                MarginalCdf::PointMass { value } => Some(MarginalCdf::PointMass {
                    value: a * value + b,
                }),
                _ => None,
            }?;
            Some(TruthOracle {
                mean: a * t.mean + b,
                variance: a * a * t.variance,
                cdf: Some(cdf),
                moment_2_plus_delta: None,
                estimated: t.estimated,
            })
        });
        FieldRealization {
            window: self.window.clone(),
            components: self.components,
            values,
            model: self.model.clone(),
            seed: self.seed,
            truth,
        }
    }
}

/// Generate a realization of `model` on `window`, reproducibly keyed.
pub fn generate(model: &ModelSpec, window: &LatticeWindow, key: RngKey) -> Result<FieldRealization> {
    model.validate(window.dim())?;
    let n = window.site_count();
    let d = model.components;
    let mut values = vec![0.0f64; n * d];
    for l in 0..d {
        let stream = if model.shared_noise {
            key.with_tag("component-shared")
        } else {
            key.with_tag("component").with_index(l as u64)
        };
        let out = &mut values[l * n..(l + 1) * n];
        fill_component(&model.variant, window, stream, out)?;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel("model produced non-finite values".into()));
    }
    let truth = marginal_truth(model).ok();
    Ok(FieldRealization {
        window: window.clone(),
        components: d,
        values,
        model: model.clone(),
        seed: key,
        truth,
    })
}

fn fill_component(
    variant: &ModelVariant,
    window: &LatticeWindow,
    stream: RngKey,
    out: &mut [f64],
) -> Result<()> {
    let mut rng = stream.rng();
    match variant {
        ModelVariant::Iid { distribution } => {
            for v in out.iter_mut() {
                *v = distribution.sample(&mut rng);
            }
        }
        ModelVariant::GaussianMa { kernel, mean } => {
            // simulate noise on a window padded by the kernel bounding box,
            // then convolve and crop: stationarity holds exactly inside
            let m = window.dim();
            let mut pad_lo = vec![0i64; m];
            let mut pad_hi = vec![0i64; m];
            for (off, _) in kernel {
                for a in 0..m {
                    pad_lo[a] = pad_lo[a].min(off[a]);
                    pad_hi[a] = pad_hi[a].max(off[a]);
                }
            }
            let noise_origin: Vec<i64> = window
                .origin
                .iter()
                .zip(&pad_lo)
                .map(|(&o, &p)| o + p)
                .collect();
            let noise_extent: Vec<u64> = window
                .extent
                .iter()
                .zip(pad_lo.iter().zip(&pad_hi))
                .map(|(&e, (&l, &h))| e + (h - l) as u64)
                .collect();
            let noise_win = LatticeWindow::new(noise_origin, noise_extent, window.pitch)?;
            let mut noise = vec![0.0f64; noise_win.site_count()];
            for v in noise.iter_mut() {
                *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            let strides = noise_win.strides();
            // linear-index shift of each kernel tap inside the noise window
            let taps: Vec<(i64, f64)> = kernel
                .iter()
                .map(|(off, w)| {
                    let shift: i64 = off
                        .iter()
                        .zip(&strides)
                        .map(|(&o, &s)| o * s as i64)
                        .sum();
                    (shift, *w)
                })
                .collect();
            let mut coord = window.origin.clone();
            for slot in out.iter_mut() {
                let base = noise_win.site_index(&coord).expect("padded window covers crop") as i64;
                let mut acc = *mean;
                for &(shift, w) in &taps {
                    acc += w * noise[(base + shift) as usize];
                }
                *slot = acc;
                advance(&mut coord, &window.origin, &window.extent);
            }
        }
        ModelVariant::Ar1 {
            rho,
            innovation_variance,
        } => {
            let innov_sd = innovation_variance.sqrt();
            let stat_sd = (innovation_variance / (1.0 - rho * rho)).sqrt();
            let mut x = stat_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            for v in out.iter_mut() {
                *v = x;
                x = rho * x
                    + innov_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
        }
        ModelVariant::RotationCoboundary { alpha, boundary } => {
            let u: f64 = rng.gen();
            let frac = |x: f64| x - x.floor();
            let start = window.origin[0];
            for (i, v) in out.iter_mut().enumerate() {
                let t = start + i as i64;
                *v = boundary.eval(frac((t + 1) as f64 * alpha + u))
                    - boundary.eval(frac(t as f64 * alpha + u));
            }
        }
        ModelVariant::FiniteMarkov {
            transition,
            observation,
        } => {
            let pi = validate_markov(transition, observation)?;
            let draw = |probs: &[f64], rng: &mut rand_chacha::ChaCha12Rng| -> usize {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                probs.len() - 1
            };
            let mut state = draw(&pi, &mut rng);
            for v in out.iter_mut() {
                *v = observation[state];
                state = draw(&transition[state], &mut rng);
            }
        }
        ModelVariant::DerivedTuple { base, offsets, f } => {
            let hull = window.hull_with_offsets(offsets)?;
            let mut base_vals = vec![0.0f64; hull.site_count()];
            fill_component(&base.variant, &hull, stream.with_tag("base"), &mut base_vals)?;
            let strides = hull.strides();
            let shifts: Vec<i64> = offsets
                .iter()
                .map(|off| {
                    off.iter()
                        .zip(&strides)
                        .map(|(&o, &s)| o * s as i64)
                        .sum()
                })
                .collect();
            let mut coord = window.origin.clone();
            let mut vals = vec![0.0; offsets.len()];
            for slot in out.iter_mut() {
                let bi = hull.site_index(&coord).expect("hull covers window") as i64;
                for (j, &s) in shifts.iter().enumerate() {
                    vals[j] = base_vals[(bi + s) as usize];
                }
                *slot = f.eval(&vals);
                advance(&mut coord, &window.origin, &window.extent);
            }
        }
    }
    Ok(())
}

/// Advance a coordinate tuple in row-major order, last axis fastest.
fn advance(coord: &mut [i64], origin: &[i64], extent: &[u64]) {
    for a in (0..coord.len()).rev() {
        coord[a] += 1;
        if coord[a] < origin[a] + extent[a] as i64 {
            return;
        }
        coord[a] = origin[a];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> RngKey {
        RngKey::new(0xfeed_beef)
    }

    #[test]
    fn constant_field_is_constant() {
        let model = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Constant { value: 3.5 },
        });
        let w = LatticeWindow::interval(0, 100);
        let real = generate(&model, &w, key()).unwrap();
        assert!(real.component(0).iter().all(|&v| v == 3.5));
        assert_eq!(real.evaluate(&[17], 0).unwrap(), 3.5);
    }

    #[test]
    fn generation_is_reproducible() {
        let model = ModelSpec::new(ModelVariant::GaussianMa {
            kernel: vec![(vec![0], 1.0), (vec![1], 0.5), (vec![2], 0.25)],
            mean: 0.0,
        });
        let w = LatticeWindow::interval(-5, 200);
        let a = generate(&model, &w, key()).unwrap();
        let b = generate(&model, &w, key()).unwrap();
        assert_eq!(a.component(0), b.component(0));
        let c = generate(&model, &w, key().with_index(1)).unwrap();
        assert_ne!(a.component(0), c.component(0));
    }

    #[test]
    fn evaluate_is_pure_and_bounded() {
        let model = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Uniform { min: -1.0, max: 1.0 },
        });
        let w = LatticeWindow::new(vec![0, 0], vec![8, 8], 1.0).unwrap();
        let real = generate(&model, &w, key()).unwrap();
        let v1 = real.evaluate(&[3, 4], 0).unwrap();
        let v2 = real.evaluate(&[3, 4], 0).unwrap();
        assert_eq!(v1, v2);
        assert!(matches!(
            real.evaluate(&[8, 0], 0),
            Err(Error::OutOfWindow { .. })
        ));
    }

    #[test]
    fn ma_delta_kernel_is_standard_normal() {
        // kernel {0: 1} reduces to i.i.d. N(0,1): sample variance over 1e5
        // sites within the 3-sigma Monte Carlo band [0.98, 1.02]
        let model = ModelSpec::new(ModelVariant::GaussianMa {
            kernel: vec![(vec![0], 1.0)],
            mean: 0.0,
        });
        let w = LatticeWindow::interval(0, 100_000);
        let real = generate(&model, &w, key()).unwrap();
        let vals = real.component(0);
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!((0.98..=1.02).contains(&var), "sample variance {var}");
    }

    #[test]
    fn coboundary_partial_sums_telescope() {
        let model = ModelSpec::new(ModelVariant::RotationCoboundary {
            alpha: std::f64::consts::SQRT_2 - 1.0,
            boundary: BoundaryFn::Sin2Pi { amplitude: 1.0 },
        });
        for n in [10u64, 100, 1000, 10_000] {
            let w = LatticeWindow::interval(1, n);
            let real = generate(&model, &w, key()).unwrap();
            let s: f64 = real.component(0).iter().sum();
            assert!(s.abs() <= 2.0 + 1e-9, "|S_{n}| = {}", s.abs());
        }
    }

    #[test]
    fn ar1_truth_matches_identity() {
        let model = ModelSpec::new(ModelVariant::Ar1 {
            rho: 0.5,
            innovation_variance: 0.75,
        });
        let t = marginal_truth(&model).unwrap();
        assert!((t.variance - 1.0).abs() < 1e-12);
        assert_eq!(t.mean, 0.0);
    }

    #[test]
    fn ma_truth_sum_of_squares() {
        let model = ModelSpec::new(ModelVariant::GaussianMa {
            kernel: vec![(vec![-1], 0.5), (vec![0], 0.5)],
            mean: 0.0,
        });
        let t = marginal_truth(&model).unwrap();
        assert_eq!(t.mean, 0.0);
        assert!((t.variance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coboundary_truth_mean_zero() {
        let model = ModelSpec::new(ModelVariant::RotationCoboundary {
            alpha: 0.3,
            boundary: BoundaryFn::Sin2Pi { amplitude: 2.0 },
        });
        let t = marginal_truth(&model).unwrap();
        assert_eq!(t.mean, 0.0);
        // Var = 2 a^2 (1 - cos 2 pi alpha)
        let expect = 2.0 * 4.0 * (std::f64::consts::PI * 0.3).sin().powi(2);
        assert!((t.variance - expect).abs() < 1e-12);
    }

    #[test]
    fn markov_truth_and_generation() {
        let model = ModelSpec::new(ModelVariant::FiniteMarkov {
            transition: vec![vec![0.9, 0.1], vec![0.4, 0.6]],
            observation: vec![-1.0, 2.0],
        });
        let t = marginal_truth(&model).unwrap();
        // stationary distribution (0.8, 0.2)
        assert!((t.mean - (-0.8 + 0.4)).abs() < 1e-10);
        let w = LatticeWindow::interval(0, 200_000);
        let real = generate(&model, &w, key()).unwrap();
        let mean: f64 = real.component(0).iter().sum::<f64>() / 200_000.0;
        assert!((mean - t.mean).abs() < 0.05, "chain mean {mean}");
    }

    #[test]
    fn reducible_markov_rejected() {
        let model = ModelSpec::new(ModelVariant::FiniteMarkov {
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            observation: vec![0.0, 1.0],
        });
        assert!(matches!(
            marginal_truth(&model),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        let w = LatticeWindow::interval(0, 10);
        let bad_rho = ModelSpec::new(ModelVariant::Ar1 {
            rho: 1.0,
            innovation_variance: 1.0,
        });
        assert!(generate(&bad_rho, &w, key()).is_err());
        let empty_kernel = ModelSpec::new(ModelVariant::GaussianMa {
            kernel: vec![],
            mean: 0.0,
        });
        assert!(generate(&empty_kernel, &w, key()).is_err());
    }

    #[test]
    fn derived_tuple_values() {
        let base = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Normal { mean: 0.0, sd: 1.0 },
        });
        let model = ModelSpec::new(ModelVariant::DerivedTuple {
            base: Box::new(base.clone()),
            offsets: vec![vec![0], vec![1]],
            f: TupleFn::MixedMoment { powers: vec![1, 1] },
        });
        let w = LatticeWindow::interval(0, 2000);
        let real = generate(&model, &w, key()).unwrap();
        // lag-1 products of a unit normal have mean 0 and variance 1
        let mean: f64 = real.component(0).iter().sum::<f64>() / 2000.0;
        assert!(mean.abs() < 0.1, "lag product mean {mean}");
    }

    #[test]
    fn derived_identity_truth_passthrough() {
        let base = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Normal { mean: 1.0, sd: 2.0 },
        });
        let model = ModelSpec::new(ModelVariant::DerivedTuple {
            base: Box::new(base),
            offsets: vec![vec![0]],
            f: TupleFn::Identity,
        });
        let t = marginal_truth(&model).unwrap();
        assert!(!t.estimated);
        assert_eq!(t.mean, 1.0);
        assert_eq!(t.variance, 4.0);
    }

    #[test]
    fn shared_noise_duplicates_components() {
        let model = ModelSpec::new(ModelVariant::Iid {
            distribution: MarginalDist::Normal { mean: 0.0, sd: 1.0 },
        })
        .with_components(2)
        .with_shared_noise();
        let w = LatticeWindow::interval(0, 100);
        let real = generate(&model, &w, key()).unwrap();
        assert_eq!(real.component(0), real.component(1));
        let mut m = model;
        m.shared_noise = false;
        let indep = generate(&m, &w, key()).unwrap();
        assert_ne!(indep.component(0), indep.component(1));
    }

    #[test]
    fn window_geometry() {
        let w = LatticeWindow::new(vec![-2, 3], vec![4, 5], 1.0).unwrap();
        assert_eq!(w.site_count(), 20);
        assert_eq!(w.measure(), 20.0);
        assert_eq!(w.site_index(&[-2, 3]), Some(0));
        assert_eq!(w.site_index(&[-2, 4]), Some(1));
        assert_eq!(w.site_index(&[-1, 3]), Some(5));
        assert_eq!(w.site_index(&[2, 3]), None);
        let h = w.hull_with_offsets(&[vec![0, 0], vec![2, -1]]).unwrap();
        assert_eq!(h.origin, vec![-2, 2]);
        assert_eq!(h.extent, vec![6, 6]);
    }

    #[test]
    fn circle_overlap_cases() {
        assert!((circle_overlap(0.0, 0.5, 0.25, 0.5) - 0.25).abs() < 1e-15);
        assert!((circle_overlap(0.0, 0.3, 0.9, 0.2) - 0.1).abs() < 1e-12);
        assert!((circle_overlap(0.0, 1.0, 0.4, 0.3) - 0.3).abs() < 1e-15);
    }
}
