//! Desk-scale problem builders: synthetic stereo, synthetic optical flow and
//! random MRF fixtures. All builders are deterministic in their seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EnergyModel, GridTopology, LabelUniverse, Labeling, PairwiseCost, ENERGY_SCALE};
use crate::error::{contract, Result};

/// Stereo smoothness truncation: maximum label difference penalized.
pub const STEREO_SIGMA_S: f64 = 4.0;
/// Stereo pairwise scaling relative to the unary terms.
pub const STEREO_PAIRWISE_WEIGHT: f64 = 0.005;

/// Synthetic stereo problem: a piecewise-smooth disparity map observed
/// through a truncated, noisy unary.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoParams {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
    /// Standard deviation of the Gaussian noise added to every unary entry.
    pub noise: f64,
    /// Unary truncation: cost is `min(|l - gt|, unary_truncation)` before noise.
    pub unary_truncation: f64,
    pub sigma_s: f64,
    pub pairwise_weight: f64,
    pub seed: u64,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            width: 80,
            height: 60,
            labels: 16,
            noise: 1.0,
            unary_truncation: 3.0,
            sigma_s: STEREO_SIGMA_S,
            pairwise_weight: STEREO_PAIRWISE_WEIGHT,
            seed: 1,
        }
    }
}

impl StereoParams {
    /// Builds the model and returns it with its ground-truth disparities.
    pub fn build(&self) -> Result<(EnergyModel, Labeling)> {
        let labels = LabelUniverse::with_scalars((0..self.labels).map(|l| l as f64).collect())?;
        let topology = GridTopology::new(self.width, self.height)?;
        if !(self.noise >= 0.0) {
            return contract("noise level must be non-negative");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gt = piecewise_disparity(self.width, self.height, self.labels, &mut rng);
        let noise = Normal::new(0.0, self.noise).expect("finite non-negative std dev");
        let mut unary = Vec::with_capacity(gt.len() * self.labels);
        for &d in &gt {
            for l in 0..self.labels {
                let clean = (l.abs_diff(d) as f64).min(self.unary_truncation);
                let n = if self.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                unary.push((clean + n).max(0.0));
            }
        }
        let model = EnergyModel::new(
            topology,
            labels,
            unary,
            PairwiseCost::TruncatedLinear {
                sigma: self.sigma_s,
            },
            self.pairwise_weight,
        )?;
        Ok((model, Labeling::new(gt)))
    }
}

/// Synthetic stereo with default truncations, `sigma_s = 4` and pairwise
/// weight `0.005`.
pub fn build_synthetic_stereo(
    width: usize,
    height: usize,
    labels: usize,
    noise_level: f64,
    seed: u64,
) -> Result<(EnergyModel, Labeling)> {
    StereoParams {
        width,
        height,
        labels,
        noise: noise_level,
        seed,
        ..StereoParams::default()
    }
    .build()
}

// Slanted background plane plus a few fronto-parallel rectangles.
fn piecewise_disparity(w: usize, h: usize, labels: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let top = (labels - 1) as f64;
    let base = rng.gen_range(0.0..=top * 0.4);
    let gx = rng.gen_range(-0.2..=0.2) * top / w.max(1) as f64;
    let gy = rng.gen_range(0.0..=0.3) * top / h.max(1) as f64;
    let mut d: Vec<f64> = (0..w * h)
        .map(|v| base + gx * (v % w) as f64 + gy * (v / w) as f64)
        .collect();
    let rects = rng.gen_range(2..=4);
    for _ in 0..rects {
        let rw = rng.gen_range(1..=(w / 2).max(1));
        let rh = rng.gen_range(1..=(h / 2).max(1));
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        let level = rng.gen_range(0.0..=top);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                d[y * w + x] = level;
            }
        }
    }
    d.into_iter()
        .map(|v| v.round().clamp(0.0, top) as usize)
        .collect()
}

/// Integer lattice flow vectors ordered by length, then by `(y, x)`.
pub fn default_flow_labels(count: usize) -> Vec<[f64; 2]> {
    let mut r = 1i64;
    loop {
        let mut pts: Vec<(i64, i64)> = (-r..=r)
            .flat_map(|y| (-r..=r).map(move |x| (x, y)))
            .filter(|(x, y)| x * x + y * y <= r * r)
            .collect();
        if pts.len() >= count {
            pts.sort_by_key(|&(x, y)| (x * x + y * y, y, x));
            return pts
                .into_iter()
                .take(count)
                .map(|(x, y)| [x as f64, y as f64])
                .collect();
        }
        r += 1;
    }
}

/// Synthetic optical flow problem over a table of 2D flow labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub width: usize,
    pub height: usize,
    pub noise: f64,
    pub unary_truncation: f64,
    pub pairwise_truncation: f64,
    pub pairwise_weight: f64,
    pub seed: u64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            noise: 1.0,
            unary_truncation: 4.0,
            pairwise_truncation: 3.0,
            pairwise_weight: 0.5,
            seed: 7,
        }
    }
}

impl FlowParams {
    /// Builds the model and returns it with its ground-truth flow field.
    pub fn build(&self, flow_labels: &[[f64; 2]]) -> Result<(EnergyModel, Vec<[f64; 2]>)> {
        if flow_labels.is_empty() {
            return contract("flow label table must not be empty");
        }
        if !(self.noise >= 0.0) {
            return contract("noise level must be non-negative");
        }
        let labels = LabelUniverse::with_vectors(flow_labels.to_vec())?;
        let topology = GridTopology::new(self.width, self.height)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let radius = flow_labels
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max);
        let gt = piecewise_flow(self.width, self.height, 0.8 * radius, &mut rng);
        let noise = Normal::new(0.0, self.noise).expect("finite non-negative std dev");
        let mut unary = Vec::with_capacity(gt.len() * flow_labels.len());
        for g in &gt {
            for p in flow_labels {
                let clean = (p[0] - g[0]).hypot(p[1] - g[1]).min(self.unary_truncation);
                let n = if self.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                unary.push((clean + n).max(0.0));
            }
        }
        let model = EnergyModel::new(
            topology,
            labels,
            unary,
            PairwiseCost::TruncatedEuclidean {
                truncation: self.pairwise_truncation,
            },
            self.pairwise_weight,
        )?;
        Ok((model, gt))
    }
}

/// Synthetic flow problem with default noise and truncations.
pub fn build_synthetic_flow(
    width: usize,
    height: usize,
    flow_labels: &[[f64; 2]],
    seed: u64,
) -> Result<EnergyModel> {
    FlowParams {
        width,
        height,
        seed,
        ..FlowParams::default()
    }
    .build(flow_labels)
    .map(|(m, _)| m)
}

// Smooth affine background motion with a few independently moving rectangles.
fn piecewise_flow(w: usize, h: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let draw = |rng: &mut ChaCha8Rng| {
        let r = radius * rng.gen::<f64>().sqrt();
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        [r * t.cos(), r * t.sin()]
    };
    let center = draw(rng);
    let spread = 0.5 * radius;
    let (ax, ay) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
    let mut f: Vec<[f64; 2]> = (0..w * h)
        .map(|v| {
            let sx = (v % w) as f64 / w as f64 - 0.5;
            let sy = (v / w) as f64 / h as f64 - 0.5;
            [center[0] + spread * ax * sx, center[1] + spread * ay * sy]
        })
        .collect();
    for _ in 0..rng.gen_range(2..=3) {
        let rw = rng.gen_range(1..=(w / 2).max(1));
        let rh = rng.gen_range(1..=(h / 2).max(1));
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        let motion = draw(rng);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                f[y * w + x] = motion;
            }
        }
    }
    f
}

/// Random MRF fixture with unaries uniform in `[0, 10]`.
///
/// With `submodular` set, every edge gets a random-weight absolute label
/// difference `w·|a - b|`, which is convex in the label difference; any
/// binary fusion whose two candidates are ordered consistently
/// (`current_v <= proposal_v` everywhere) is then submodular. Otherwise each
/// edge gets an arbitrary random symmetric table.
pub fn build_random_mrf(
    width: usize,
    height: usize,
    labels: usize,
    submodular: bool,
    seed: u64,
) -> Result<EnergyModel> {
    let topology = GridTopology::new(width, height)?;
    let universe = LabelUniverse::new(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unary = (0..topology.num_vars() * labels)
        .map(|_| rng.gen_range(0.0..=10.0))
        .collect();
    let tables = (0..topology.edges().len())
        .map(|_| {
            let mut t = vec![0.0; labels * labels];
            if submodular {
                // On the fixed-point grid, so rounding keeps w·|a - b| linear.
                let w = rng.gen_range(0..=3_000_000) as f64 / ENERGY_SCALE;
                for a in 0..labels {
                    for b in 0..labels {
                        t[a * labels + b] = w * a.abs_diff(b) as f64;
                    }
                }
            } else {
                for a in 0..labels {
                    for b in 0..=a {
                        let c = rng.gen_range(0.0..=5.0);
                        t[a * labels + b] = c;
                        t[b * labels + a] = c;
                    }
                }
            }
            t
        })
        .collect();
    EnergyModel::new(topology, universe, unary, PairwiseCost::Tables(tables), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereo_defaults() {
        let p = StereoParams::default();
        assert_eq!(p.sigma_s, 4.0);
        assert_eq!(p.pairwise_weight, 0.005);
        let (m, gt) = build_synthetic_stereo(12, 9, 8, 0.5, 3).unwrap();
        assert_eq!(m.pairwise_weight(), 0.005);
        assert_eq!(m.pairwise_cost(), &PairwiseCost::TruncatedLinear { sigma: 4.0 });
        m.check(&gt).unwrap();
    }

    #[test]
    fn stereo_is_deterministic() {
        let (a, ga) = build_synthetic_stereo(20, 15, 16, 1.0, 42).unwrap();
        let (b, gb) = build_synthetic_stereo(20, 15, 16, 1.0, 42).unwrap();
        assert_eq!(ga, gb);
        for v in 0..a.num_vars() {
            for l in 0..16 {
                assert_eq!(a.unary(v, l).to_bits(), b.unary(v, l).to_bits());
            }
        }
        let (c, _) = build_synthetic_stereo(20, 15, 16, 1.0, 43).unwrap();
        assert!((0..c.num_vars()).any(|v| c.unary(v, 0) != a.unary(v, 0)));
    }

    #[test]
    fn flow_label_table() {
        let t = default_flow_labels(60);
        assert_eq!(t.len(), 60);
        assert_eq!(t[0], [0.0, 0.0]);
        let mut dedup = t.clone();
        dedup.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dedup.dedup();
        assert_eq!(dedup.len(), 60);
    }

    #[test]
    fn flow_rejects_empty_table() {
        assert!(build_synthetic_flow(4, 4, &[], 1).is_err());
    }

    #[test]
    fn random_mrf_is_deterministic() {
        let a = build_random_mrf(3, 3, 3, false, 5).unwrap();
        let b = build_random_mrf(3, 3, 3, false, 5).unwrap();
        for e in 0..a.topology().edges().len() {
            for x in 0..3 {
                for y in 0..3 {
                    assert_eq!(a.pairwise(e, x, y), b.pairwise(e, x, y));
                }
            }
        }
        assert_eq!(a.unary(4, 2), b.unary(4, 2));
    }
}
