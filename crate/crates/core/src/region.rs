//! Growing families of averaging sets: measures, membership, lattice
//! enumeration, and point samplers.
//!
//! Site coordinates are integers; a region with pitch `h` contains a site
//! `t` when the physical point `t * h` belongs to the set. With `h = 1`
//! (lattice mode) measures are exact site counts; otherwise the closed-form
//! (or quadrature) volume is used and sums become Riemann sums.

use crate::error::Error;
use crate::rng::RngKey;
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Positive bounded radial profile of a star-shaped body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadialFn {
    /// Constant radius: the body is a ball.
    Constant { radius: f64 },
    /// Axis-aligned ellipsoid with the given semi-axes.
    Ellipse { axes: Vec<f64> },
    /// 2-D lobed profile `base + amplitude * cos(lobes * angle)`.
    Lobed { base: f64, amplitude: f64, lobes: u32 },
}

impl RadialFn {
    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            RadialFn::Constant { radius } => *radius > 0.0,
            RadialFn::Ellipse { axes } => axes.len() == dim && axes.iter().all(|&a| a > 0.0),
            RadialFn::Lobed { base, amplitude, .. } => dim == 2 && *base > amplitude.abs(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "radial profile {self:?} invalid for dimension {dim}"
            )))
        }
    }

    /// Radius along a unit direction.
    pub fn eval(&self, direction: &[f64]) -> f64 {
        match self {
            RadialFn::Constant { radius } => *radius,
            RadialFn::Ellipse { axes } => {
                let q: f64 = direction
                    .iter()
                    .zip(axes)
                    .map(|(d, a)| (d / a) * (d / a))
                    .sum();
                1.0 / q.sqrt()
            }
            RadialFn::Lobed {
                base,
                amplitude,
                lobes,
            } => {
                let angle = direction[1].atan2(direction[0]);
                base + amplitude * (*lobes as f64 * angle).cos()
            }
        }
    }

    fn max_radius(&self) -> f64 {
        match self {
            RadialFn::Constant { radius } => *radius,
            RadialFn::Ellipse { axes } => axes.iter().cloned().fold(0.0, f64::max),
            RadialFn::Lobed { base, amplitude, .. } => base + amplitude.abs(),
        }
    }
}

/// Shape of an averaging-region family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum RegionShape {
    /// 1-D window `{0, ..., n-1}` (physical `[0, n)`).
    Interval,
    /// Cube `[0, n)^m`, half-open so the lattice count is exactly `n^m`.
    Cube { dim: usize },
    /// Closed centered ball of the indexed radius.
    Ball { dim: usize },
    /// Homothetic images `s_n * A` of a star-shaped body `A` given by a
    /// radial profile; membership is `|x| <= s * r(x/|x|)`.
    Star { dim: usize, radial: RadialFn },
}

impl RegionShape {
    pub fn dim(&self) -> usize {
        match self {
            RegionShape::Interval => 1,
            RegionShape::Cube { dim } | RegionShape::Ball { dim } => *dim,
            RegionShape::Star { dim, .. } => *dim,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RegionShape::Interval => Ok(()),
            RegionShape::Cube { dim } | RegionShape::Ball { dim } => {
                if *dim == 0 {
                    Err(Error::Validation("region dimension must be positive".into()))
                } else {
                    Ok(())
                }
            }
            RegionShape::Star { dim, radial } => {
                if *dim == 0 {
                    return Err(Error::Validation("region dimension must be positive".into()));
                }
                radial.validate(*dim)
            }
        }
    }
}

/// An indexed growing family of regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFamily {
    #[serde(flatten)]
    pub shape: RegionShape,
    /// Size parameter per index: edge, radius, or homothety scale.
    pub sizes: Vec<f64>,
    #[serde(default = "default_pitch")]
    pub pitch: f64,
}

fn default_pitch() -> f64 {
    1.0
}

impl RegionFamily {
    pub fn new(shape: RegionShape, sizes: Vec<f64>) -> Result<Self> {
        let family = RegionFamily {
            shape,
            sizes,
            pitch: 1.0,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.sizes.is_empty() {
            return Err(Error::Validation("region family needs at least one size".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) || self.sizes[0] <= 0.0 {
            return Err(Error::Validation(
                "region sizes must be positive and strictly increasing".into(),
            ));
        }
        if !(self.pitch > 0.0) {
            return Err(Error::Validation("pitch must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn region(&self, index: usize) -> Result<Region> {
        let size = *self
            .sizes
            .get(index)
            .ok_or_else(|| Error::Validation(format!("region index {index} out of range")))?;
        Region::new(self.shape.clone(), size, self.pitch)
    }
}

/// One concrete averaging set.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub shape: RegionShape,
    pub size: f64,
    pub pitch: f64,
    measure: f64,
}

impl Region {
    pub fn new(shape: RegionShape, size: f64, pitch: f64) -> Result<Self> {
        shape.validate()?;
        if !(size > 0.0) || !(pitch > 0.0) {
            return Err(Error::Validation("region size and pitch must be positive".into()));
        }
        let mut region = Region {
            shape,
            size,
            pitch,
            measure: 0.0,
        };
        region.measure = region.compute_measure()?;
        if region.measure <= 0.0 {
            return Err(Error::EmptyRegion);
        }
        Ok(region)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// The measure of the region: exact site count times `pitch^m` in
    /// lattice mode, closed form (Monte Carlo quadrature for star bodies)
    /// otherwise.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    fn compute_measure(&self) -> Result<f64> {
        if self.pitch == 1.0 {
            let mut count = 0usize;
            self.for_each_site(|_| count += 1)?;
            return Ok(count as f64);
        }
        let m = self.dim() as i32;
        Ok(match &self.shape {
            RegionShape::Interval => self.size,
            RegionShape::Cube { .. } => self.size.powi(m),
            RegionShape::Ball { dim } => ball_volume(*dim, self.size),
            RegionShape::Star { .. } => self.quadrature_measure().0,
        })
    }

    /// Monte Carlo volume of a star body with its standard error.
    pub fn quadrature_measure(&self) -> (f64, f64) {
        let (lo, hi) = self.physical_box();
        let vol_box: f64 = lo.iter().zip(&hi).map(|(&l, &h)| h - l).product();
        let mut rng = RngKey::new(0x5354_4152).with_tag("star-measure").rng();
        let n = 1_000_000u64;
        let mut hits = 0u64;
        let mut x = vec![0.0; self.dim()];
        for _ in 0..n {
            for (v, (&l, &h)) in x.iter_mut().zip(lo.iter().zip(&hi)) {
                *v = rng.gen_range(l..h);
            }
            if self.contains_physical(&x) {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        (
            vol_box * p,
            vol_box * (p * (1.0 - p) / n as f64).sqrt(),
        )
    }

    fn physical_box(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        match &self.shape {
            RegionShape::Interval | RegionShape::Cube { .. } => {
                (vec![0.0; m], vec![self.size; m])
            }
            RegionShape::Ball { .. } => (vec![-self.size; m], vec![self.size; m]),
            RegionShape::Star { radial, .. } => {
                let r = self.size * radial.max_radius();
                (vec![-r; m], vec![r; m])
            }
        }
    }

    fn contains_physical(&self, x: &[f64]) -> bool {
        match &self.shape {
            RegionShape::Interval | RegionShape::Cube { .. } => {
                if self.pitch == 1.0 {
                    x.iter().all(|&c| c >= 0.0 && c < self.size)
                } else {
                    // closed boundary in continuum mode
                    x.iter().all(|&c| c >= 0.0 && c <= self.size)
                }
            }
            RegionShape::Ball { .. } => {
                x.iter().map(|&c| c * c).sum::<f64>() <= self.size * self.size
            }
            RegionShape::Star { radial, .. } => {
                let norm = x.iter().map(|&c| c * c).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return true;
                }
                let dir: Vec<f64> = x.iter().map(|&c| c / norm).collect();
                norm <= self.size * radial.eval(&dir)
            }
        }
    }

    /// Membership test for a lattice site.
    pub fn contains(&self, t: &[i64]) -> bool {
        if t.len() != self.dim() {
            return false;
        }
        let x: Vec<f64> = t.iter().map(|&c| c as f64 * self.pitch).collect();
        self.contains_physical(&x)
    }

    /// Inclusive site bounds of the bounding box.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let (lo, hi) = self.physical_box();
        let site_lo: Vec<i64> = lo.iter().map(|&l| (l / self.pitch).ceil() as i64).collect();
        let site_hi: Vec<i64> = hi
            .iter()
            .map(|&h| {
                let s = (h / self.pitch).floor() as i64;
                // half-open cube upper edge is excluded in lattice mode
                if self.pitch == 1.0
                    && matches!(self.shape, RegionShape::Interval | RegionShape::Cube { .. })
                    && (s as f64) >= self.size
                {
                    s - 1
                } else {
                    s
                }
            })
            .collect();
        (site_lo, site_hi)
    }

    fn for_each_site(&self, mut visit: impl FnMut(&[i64])) -> Result<()> {
        let (lo, hi) = self.bounding_box();
        if lo.iter().zip(&hi).any(|(&l, &h)| l > h) {
            return Ok(());
        }
        let mut coord = lo.clone();
        loop {
            if self.contains(&coord) {
                visit(&coord);
            }
            // advance lexicographically, last axis fastest
            let mut axis = coord.len();
            loop {
                if axis == 0 {
                    return Ok(());
                }
                axis -= 1;
                coord[axis] += 1;
                if coord[axis] <= hi[axis] {
                    break;
                }
                coord[axis] = lo[axis];
            }
        }
    }

    /// Deterministic lexicographic enumeration of all contained sites.
    pub fn lattice_points(&self) -> Result<LatticeEnumeration> {
        if self.pitch != 1.0 {
            return Err(Error::ContinuumMode { pitch: self.pitch });
        }
        let dim = self.dim();
        let mut coords = Vec::new();
        self.for_each_site(|t| coords.extend_from_slice(t))?;
        if coords.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(LatticeEnumeration { dim, coords })
    }

    /// Sites of the region that carry positive density weight, with their
    /// (unnormalized) weights. Lattice mode only.
    pub(crate) fn weighted_sites(&self, density: &SamplingDensity) -> Result<(LatticeEnumeration, Option<Vec<f64>>)> {
        let sites = self.lattice_points()?;
        match density {
            SamplingDensity::Uniform => Ok((sites, None)),
            SamplingDensity::Rescaled { .. } => {
                let mut weights = Vec::with_capacity(sites.len());
                let mut phys = vec![0.0; self.dim()];
                for t in sites.iter() {
                    for (p, &c) in phys.iter_mut().zip(t) {
                        *p = c as f64 * self.pitch;
                    }
                    weights.push(density.weight(&phys));
                }
                if weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::EmptyRegion);
                }
                Ok((sites, Some(weights)))
            }
        }
    }

    /// Draw one site from the region under the given density by rejection
    /// from the bounding box.
    pub fn sample_site<R: Rng>(
        &self,
        density: &SamplingDensity,
        rng: &mut R,
        out: &mut Vec<i64>,
    ) -> Result<()> {
        self.sample_site_budget(density, rng, out, 1_000_000)
    }

    fn sample_site_budget<R: Rng>(
        &self,
        density: &SamplingDensity,
        rng: &mut R,
        out: &mut Vec<i64>,
        budget: u64,
    ) -> Result<()> {
        let (lo, hi) = match density {
            SamplingDensity::Uniform => self.bounding_box(),
            SamplingDensity::Rescaled { scale, .. } => {
                // proposals restricted to the density support
                let (rlo, rhi) = self.bounding_box();
                let s = (scale / self.pitch).floor() as i64;
                let lo: Vec<i64> = rlo.iter().map(|&l| l.max(-s)).collect();
                let hi: Vec<i64> = rhi.iter().map(|&h| h.min(s)).collect();
                if lo.iter().zip(&hi).any(|(&l, &h)| l > h) {
                    return Err(Error::EmptyRegion);
                }
                (lo, hi)
            }
        };
        let mut proposed = 0u64;
        let mut phys = vec![0.0; self.dim()];
        loop {
            proposed += 1;
            out.clear();
            for (&l, &h) in lo.iter().zip(&hi) {
                out.push(rng.gen_range(l..=h));
            }
            if self.contains(out) {
                let accept = match density {
                    SamplingDensity::Uniform => true,
                    SamplingDensity::Rescaled { .. } => {
                        for (p, &c) in phys.iter_mut().zip(out.iter()) {
                            *p = c as f64 * self.pitch;
                        }
                        rng.gen::<f64>() < density.weight(&phys)
                    }
                };
                if accept {
                    return Ok(());
                }
            }
            if proposed >= budget {
                return Err(Error::RejectionBudgetExceeded {
                    proposed,
                    accepted: 0,
                });
            }
        }
    }
}

/// Volume of the m-dimensional ball of radius r.
fn ball_volume(dim: usize, r: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let m = dim as f64;
    std::f64::consts::PI.powf(m / 2.0) / gamma(m / 2.0 + 1.0) * r.powf(m)
}

/// Flattened list of lattice sites in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeEnumeration {
    dim: usize,
    coords: Vec<i64>,
}

impl LatticeEnumeration {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn site(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Density of the randomizing points over a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplingDensity {
    /// Uniform over the region (counting measure on sites in lattice mode).
    Uniform,
    /// Rescaled product-triangular density `phi_n(x) = c^{-m} prod (1 - |x_j|/c)`
    /// supported on `[-c, c]^m`, `c = scale`.
    Rescaled { base: BaseDensity, scale: f64 },
}

/// Base density that gets rescaled; compact support `[-1, 1]^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDensity {
    Triangular,
}

impl SamplingDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplingDensity::Uniform => Ok(()),
            SamplingDensity::Rescaled { scale, .. } => {
                if *scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Validation("density scale must be positive".into()))
                }
            }
        }
    }

    /// Unnormalized weight in [0, 1] at a physical point; uniform is 1.
    pub fn weight(&self, x: &[f64]) -> f64 {
        match self {
            SamplingDensity::Uniform => 1.0,
            SamplingDensity::Rescaled { base, scale } => match base {
                BaseDensity::Triangular => x
                    .iter()
                    .map(|&c| (1.0 - (c / scale).abs()).max(0.0))
                    .product(),
            },
        }
    }

    /// Normalized density at a physical point.
    pub fn density(&self, x: &[f64], dim: usize) -> f64 {
        match self {
            SamplingDensity::Uniform => f64::NAN, // depends on the region
            SamplingDensity::Rescaled { scale, .. } => {
                self.weight(x) / scale.powi(dim as i32)
            }
        }
    }

    /// Riemann-sum check that the rescaled density integrates to 1.
    pub fn check_normalization(&self, dim: usize) -> Result<f64> {
        match self {
            SamplingDensity::Uniform => Ok(1.0),
            SamplingDensity::Rescaled { scale, .. } => {
                let n = 2001usize;
                let h = 2.0 * scale / n as f64;
                // product structure: integrate one axis and raise to dim
                let mut one_axis = 0.0;
                for i in 0..n {
                    let x = -scale + (i as f64 + 0.5) * h;
                    one_axis += self.density(&[x], 1) * h;
                }
                let total = one_axis.powi(dim as i32);
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::Validation(format!(
                        "density normalization check failed: integral = {total}"
                    )));
                }
                Ok(total)
            }
        }
    }

    /// CDF of the 1-D marginal of the rescaled density (for sampler tests).
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        match self {
            SamplingDensity::Uniform => f64::NAN,
            SamplingDensity::Rescaled { scale, .. } => {
                let z = (x / scale).clamp(-1.0, 1.0);
                if z <= 0.0 {
                    0.5 * (1.0 + z).powi(2)
                } else {
                    1.0 - 0.5 * (1.0 - z).powi(2)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_measure_lattice() {
        let r = Region::new(RegionShape::Cube { dim: 2 }, 10.0, 1.0).unwrap();
        assert_eq!(r.measure(), 100.0);
        let r = Region::new(RegionShape::Interval, 1000.0, 1.0).unwrap();
        assert_eq!(r.measure(), 1000.0);
    }

    #[test]
    fn ball_measure_matches_brute_force() {
        let r = Region::new(RegionShape::Ball { dim: 2 }, 5.0, 1.0).unwrap();
        // brute force over the bounding box
        let mut count = 0;
        for x in -5i64..=5 {
            for y in -5i64..=5 {
                if x * x + y * y <= 25 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 81);
        assert_eq!(r.measure(), count as f64);
        assert_eq!(r.lattice_points().unwrap().len(), 81);
    }

    #[test]
    fn contains_examples() {
        let cube = Region::new(RegionShape::Cube { dim: 3 }, 4.0, 1.0).unwrap();
        assert!(cube.contains(&[0, 0, 0]));
        assert!(!cube.contains(&[4, 0, 0]));
        let ball = Region::new(RegionShape::Ball { dim: 2 }, 5.0, 1.0).unwrap();
        assert!(ball.contains(&[3, 4]));
        assert!(!ball.contains(&[4, 4]));
    }

    #[test]
    fn star_constant_equals_ball() {
        let star = Region::new(
            RegionShape::Star {
                dim: 2,
                radial: RadialFn::Constant { radius: 1.0 },
            },
            5.0,
            1.0,
        )
        .unwrap();
        let ball = Region::new(RegionShape::Ball { dim: 2 }, 5.0, 1.0).unwrap();
        assert_eq!(star.measure(), ball.measure());
        for x in -6i64..=6 {
            for y in -6i64..=6 {
                assert_eq!(star.contains(&[x, y]), ball.contains(&[x, y]), "({x},{y})");
            }
        }
    }

    #[test]
    fn interval_enumeration_order() {
        let r = Region::new(RegionShape::Interval, 4.0, 1.0).unwrap();
        let pts = r.lattice_points().unwrap();
        let got: Vec<i64> = pts.iter().map(|t| t[0]).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cube_enumeration_lexicographic() {
        let r = Region::new(RegionShape::Cube { dim: 2 }, 2.0, 1.0).unwrap();
        let pts = r.lattice_points().unwrap();
        let got: Vec<Vec<i64>> = pts.iter().map(|t| t.to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn continuum_mode_enumeration_rejected() {
        let r = Region::new(RegionShape::Interval, 10.0, 0.5).unwrap();
        assert!(matches!(
            r.lattice_points(),
            Err(Error::ContinuumMode { .. })
        ));
        // closed-form measure in continuum mode
        assert_eq!(r.measure(), 10.0);
    }

    #[test]
    fn measure_count_agreement_random_shapes() {
        let families: Vec<RegionFamily> = vec![
            RegionFamily::new(RegionShape::Interval, vec![3.0, 7.0, 20.0]).unwrap(),
            RegionFamily::new(RegionShape::Cube { dim: 2 }, vec![2.0, 5.0, 9.0]).unwrap(),
            RegionFamily::new(RegionShape::Ball { dim: 2 }, vec![2.5, 6.0, 11.0]).unwrap(),
            RegionFamily::new(
                RegionShape::Star {
                    dim: 2,
                    radial: RadialFn::Lobed {
                        base: 1.0,
                        amplitude: 0.3,
                        lobes: 3,
                    },
                },
                vec![4.0, 8.0],
            )
            .unwrap(),
        ];
        for fam in &families {
            for i in 0..fam.len() {
                let r = fam.region(i).unwrap();
                assert_eq!(
                    r.measure(),
                    r.lattice_points().unwrap().len() as f64,
                    "{:?} size {}",
                    fam.shape,
                    fam.sizes[i]
                );
            }
        }
    }

    #[test]
    fn monotone_nesting() {
        let fams = vec![
            RegionFamily::new(RegionShape::Interval, vec![5.0, 9.0, 14.0]).unwrap(),
            RegionFamily::new(RegionShape::Cube { dim: 2 }, vec![3.0, 6.0, 8.0]).unwrap(),
            RegionFamily::new(RegionShape::Ball { dim: 2 }, vec![3.0, 5.5, 8.0]).unwrap(),
        ];
        for fam in &fams {
            for i in 0..fam.len() - 1 {
                let small = fam.region(i).unwrap();
                let large = fam.region(i + 1).unwrap();
                for site in small.lattice_points().unwrap().iter() {
                    assert!(large.contains(site), "{site:?} escaped nesting");
                }
            }
        }
    }

    #[test]
    fn uniform_sampler_frequencies() {
        // each of the 4 interval sites at 0.25 within 0.01 over 1e5 draws
        let r = Region::new(RegionShape::Interval, 4.0, 1.0).unwrap();
        let mut rng = RngKey::new(11).with_tag("sampler").rng();
        let mut counts = [0u64; 4];
        let mut buf = Vec::new();
        let n = 100_000;
        for _ in 0..n {
            r.sample_site(&SamplingDensity::Uniform, &mut rng, &mut buf)
                .unwrap();
            counts[buf[0] as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "site frequency {f}");
        }
    }

    #[test]
    fn uniform_cube_coordinates_independent() {
        // chi-square on the 2-D histogram of a 4x4 cube: 16 cells, p uniform
        let r = Region::new(RegionShape::Cube { dim: 2 }, 4.0, 1.0).unwrap();
        let mut rng = RngKey::new(12).with_tag("sampler").rng();
        let mut counts = [[0u64; 4]; 4];
        let mut buf = Vec::new();
        let n = 160_000u64;
        for _ in 0..n {
            r.sample_site(&SamplingDensity::Uniform, &mut rng, &mut buf)
                .unwrap();
            counts[buf[0] as usize][buf[1] as usize] += 1;
        }
        let expected = n as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 15 degrees of freedom: 99.9% quantile ~ 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn rescaled_triangular_sampler_matches_cdf() {
        let c = 200.0;
        let density = SamplingDensity::Rescaled {
            base: BaseDensity::Triangular,
            scale: c,
        };
        density.check_normalization(1).unwrap();
        // 1-D ball of radius c = [-c, c] contains the full support
        let r = Region::new(RegionShape::Ball { dim: 1 }, c, 1.0).unwrap();
        let mut rng = RngKey::new(13).with_tag("sampler").rng();
        let n = 100_000usize;
        let mut draws: Vec<f64> = Vec::with_capacity(n);
        let mut buf = Vec::new();
        for _ in 0..n {
            r.sample_site(&density, &mut rng, &mut buf).unwrap();
            draws.push(buf[0] as f64);
        }
        draws.sort_by(f64::total_cmp);
        let mut ks = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = density.marginal_cdf(x);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn rejection_budget_error() {
        // needle-shaped ellipse: the bounding box almost never hits it
        let r = Region::new(
            RegionShape::Star {
                dim: 2,
                radial: RadialFn::Ellipse {
                    axes: vec![1e-3, 1.0],
                },
            },
            500.0,
            1.0,
        )
        .unwrap();
        let mut rng = RngKey::new(14).rng();
        let mut buf = Vec::new();
        let got = r.sample_site_budget(&SamplingDensity::Uniform, &mut rng, &mut buf, 200);
        assert!(
            matches!(got, Err(Error::RejectionBudgetExceeded { .. })),
            "{got:?}"
        );
    }

    #[test]
    fn decreasing_sizes_rejected() {
        assert!(RegionFamily::new(RegionShape::Interval, vec![5.0, 4.0]).is_err());
    }

    #[test]
    fn star_quadrature_measure_sane() {
        let star = Region::new(
            RegionShape::Star {
                dim: 2,
                radial: RadialFn::Constant { radius: 1.0 },
            },
            3.0,
            0.5,
        )
        .unwrap();
        let (vol, se) = star.quadrature_measure();
        let exact = std::f64::consts::PI * 9.0;
        assert!((vol - exact).abs() < 5.0 * se + 1e-9, "vol {vol} vs {exact}");
    }
}
