//! Synthetic datasets: a Zipf-weighted spherical Gaussian mixture and a
//! duplicated block that defeats few-round oversampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::{cost, CenterSet, Dataset};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixtureSpec {
    pub k: usize,
    pub dim: usize,
    pub sigma: f64,
    /// Component `i` (1-based) has weight proportional to `i^-zipf_gamma`.
    pub zipf_gamma: f64,
    pub n: usize,
    pub seed: u64,
    /// Means are drawn uniformly from `[0, cube_side]^dim`.
    pub cube_side: f64,
}

impl GaussianMixtureSpec {
    pub fn new(k: usize, dim: usize, n: usize, seed: u64) -> Self {
        Self {
            k,
            dim,
            sigma: 0.001,
            zipf_gamma: 1.5,
            n,
            seed,
            cube_side: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.dim == 0 || self.n == 0 {
            return Err(invalid("mixture needs k, dim and n positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive and finite"));
        }
        if !self.zipf_gamma.is_finite() || !(self.cube_side > 0.0 && self.cube_side.is_finite()) {
            return Err(invalid("zipf_gamma and cube_side must be finite, cube_side positive"));
        }
        Ok(())
    }

    /// Normalized component weights.
    pub fn weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = (1..=self.k).map(|i| libm::pow(i as f64, -self.zipf_gamma)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Mixture {
    pub points: Dataset,
    pub means: CenterSet,
    /// `cost(points, means)`.
    pub planted_cost: f64,
    /// Component of each point.
    pub labels: Vec<usize>,
}

pub fn gen_gaussian_mixture(spec: &GaussianMixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let mut rng = seed::stream_rng(spec.seed, 0);
    let mut means = CenterSet::new(spec.dim)?;
    let mut mean = vec![0.0; spec.dim];
    for _ in 0..spec.k {
        for c in &mut mean {
            *c = rng.random::<f64>() * spec.cube_side;
        }
        means.push(&mean)?;
    }
    let pick = WeightedIndex::new(spec.weights()).map_err(|_| invalid("bad mixture weights"))?;
    let mut points = Dataset::with_capacity(spec.dim, spec.n)?;
    let mut labels = Vec::with_capacity(spec.n);
    let mut x = vec![0.0; spec.dim];
    for _ in 0..spec.n {
        let i = pick.sample(&mut rng);
        for (xc, &mc) in x.iter_mut().zip(means.point(i)) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xc = mc + spec.sigma * z;
        }
        points.push(&x)?;
        labels.push(i);
    }
    let planted_cost = cost(&points, &means)?;
    Ok(Mixture {
        points,
        means,
        planted_cost,
        labels,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardInstanceSpec {
    pub k: usize,
    /// Number of copies of the basic block.
    pub z: usize,
    /// Distance of `x_1` from the origin.
    pub separation: f64,
    /// Ratio between consecutive locations' distances from the origin.
    pub growth: f64,
}

impl HardInstanceSpec {
    pub fn new(k: usize, z: usize) -> Self {
        Self {
            k,
            z,
            separation: 1e3,
            growth: 100.0,
        }
    }

    pub fn n(&self) -> usize {
        self.z * (2 * self.k - 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.z == 0 {
            return Err(invalid("hard instance needs k >= 2 and z >= 1"));
        }
        if !(self.separation > 0.0) || !(self.growth >= 1.0) {
            return Err(invalid("separation must be positive and growth at least 1"));
        }
        let far = self.separation * libm::pow(self.growth, (self.k - 1) as f64);
        // Squared distances between locations must stay finite.
        if !(far * far).is_finite() {
            return Err(invalid("hard instance coordinates overflow"));
        }
        Ok(())
    }

    /// The `k` distinct locations: `x_i = separation * growth^(i-1) * e_i` in `k` dimensions.
    pub fn locations(&self) -> Result<CenterSet> {
        let mut c = CenterSet::new(self.k)?;
        let mut row = vec![0.0; self.k];
        for i in 0..self.k {
            row.fill(0.0);
            row[i] = self.separation * libm::pow(self.growth, i as f64);
            c.push(&row)?;
        }
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct HardInstance {
    pub points: Dataset,
    /// The distinct locations; cost 0 against `points`.
    pub optimal: CenterSet,
}

/// Each block holds `k - 1` copies of `x_1` followed by `x_2, ..., x_k` once.
/// The block is repeated `z` times.
pub fn gen_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let optimal = spec.locations()?;
    let mut points = Dataset::with_capacity(spec.k, spec.n())?;
    for _ in 0..spec.z {
        for _ in 0..spec.k - 1 {
            points.push(optimal.point(0))?;
        }
        for i in 1..spec.k {
            points.push(optimal.point(i))?;
        }
    }
    Ok(HardInstance { points, optimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sq_dist;

    #[test]
    fn zipf_weights_decrease() {
        let s = GaussianMixtureSpec::new(5, 2, 10, 0);
        let w = s.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
        assert!((w[0] / w[3] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn mixture_shape_and_determinism() {
        let s = GaussianMixtureSpec::new(4, 3, 1000, 42);
        let a = gen_gaussian_mixture(&s).unwrap();
        let b = gen_gaussian_mixture(&s).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 1000);
        assert_eq!(a.means.len(), 4);
        assert!(a.means.as_flat().iter().all(|&c| (0.0..=1.0).contains(&c)));
        assert_eq!(a.planted_cost, cost(&a.points, &a.means).unwrap());
    }

    #[test]
    fn planted_cost_tracks_sigma() {
        let mut s = GaussianMixtureSpec::new(3, 2, 500, 1);
        s.sigma = 1e-9;
        assert!(gen_gaussian_mixture(&s).unwrap().planted_cost < 1e-12);
        s.sigma = 0.0;
        assert!(gen_gaussian_mixture(&s).is_err());
    }

    #[test]
    fn hard_instance_small() {
        let h = gen_hard_instance(&HardInstanceSpec::new(3, 1)).unwrap();
        assert_eq!(h.points.len(), 4);
        assert_eq!(h.points.point(0), h.points.point(1));
        assert_eq!(h.points.point(0), h.optimal.point(0));
        assert_eq!(h.points.point(2), h.optimal.point(1));
        assert_eq!(h.points.point(3), h.optimal.point(2));
        assert_eq!(cost(&h.points, &h.optimal).unwrap(), 0.0);
    }

    #[test]
    fn hard_instance_counts() {
        let spec = HardInstanceSpec::new(10, 100);
        let h = gen_hard_instance(&spec).unwrap();
        assert_eq!(h.points.len(), 1800);
        let mut distinct: Vec<&[f64]> = h.points.iter().collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        assert_eq!(distinct.len(), 10);
        assert_eq!(cost(&h.points, &h.optimal).unwrap(), 0.0);
        for i in 0..10 {
            for j in 0..i {
                assert!(sq_dist(h.optimal.point(i), h.optimal.point(j)).unwrap() >= 1e6);
            }
        }
    }

    #[test]
    fn hard_instance_rejects_overflow() {
        assert!(gen_hard_instance(&HardInstanceSpec::new(200, 1)).is_err());
        assert!(gen_hard_instance(&HardInstanceSpec::new(1, 1)).is_err());
    }
}
