//! Seeded synthetic source/target task pairs.
//!
//! Every sample `i` has a latent vector `z ~ N(0, I)` drawn from a generator
//! keyed by `(seed, i)`, so any sample can be regenerated on its own. Its
//! image is `sum_j z[j] * basis_j / sqrt(n_latent) + noise * eps` where the
//! bases are low-frequency cosine products (2-D DCT patterns, lowest
//! frequencies first) with seeded per-channel mixing. Labels are
//! `argmax(W z + b)`; the source matrix re-uses `floor(overlap * k_source)`
//! rows of the target matrix, so `overlap` sets how much the source task says
//! about the target task. `b` is zero when the rows are orthonormal and is
//! otherwise a calibrated per-class offset that keeps the classes balanced.
//!
//! Sample indices are partitioned into disjoint ranges per split.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::losses::argmax;

/// A class is positive in multi-label mode when its score exceeds this, and
/// the argmax class is always positive.
pub const MULTI_LABEL_THRESHOLD: f64 = 0.5;

const SOURCE_TRAIN_BASE: u64 = 0;
const SOURCE_TEST_BASE: u64 = 1 << 40;
const TARGET_TRAIN_BASE: u64 = 2 << 40;
const TARGET_TEST_BASE: u64 = 3 << 40;

fn default_image() -> [usize; 3] {
    [1, 8, 8]
}

/// Parameters of a synthetic task pair. Generation is a pure function of these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskPair {
    pub n_latent: usize,
    pub k_target: usize,
    pub k_source: usize,
    /// Fraction of source label directions shared with the target task.
    pub overlap: f64,
    /// `[C, H, W]` of each image or clip frame.
    #[serde(default = "default_image")]
    pub image: [usize; 3],
    /// Clip depth for target samples; 0 produces plain images.
    #[serde(default)]
    pub depth: usize,
    pub noise: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Source training set size; defaults to `n_train`.
    #[serde(default)]
    pub n_source_train: Option<usize>,
    /// Selects the non-shared source directions, so several distinct sources
    /// can be drawn for one target task.
    #[serde(default)]
    pub source_variant: u64,
    /// Multi-hot target labels.
    #[serde(default)]
    pub multi_label: bool,
    pub seed: u64,
}

/// The four splits of a task pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPairData {
    pub source_train: Dataset,
    pub source_test: Dataset,
    pub target_train: Dataset,
    pub target_test: Dataset,
}

fn keyed_rng(seed: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// 2-D frequency pairs ordered by total frequency, then by vertical frequency.
fn low_frequencies(count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    let mut total = 0;
    while out.len() < count {
        for fy in 0..=total {
            if out.len() < count {
                out.push((fy, total - fy));
            }
        }
        total += 1;
    }
    out
}

struct Generator<'a> {
    pair: &'a SyntheticTaskPair,
    bases: Vec<Vec<f64>>,
    target_rows: Vec<Vec<f64>>,
    source_rows: Vec<Vec<f64>>,
    target_offsets: Vec<f64>,
    source_offsets: Vec<f64>,
}

const CALIBRATION_SAMPLES: u64 = 20_000;
const CALIBRATION_ROUNDS: usize = 80;
const CALIBRATION_STEP: f64 = 0.2;

fn is_orthonormal(rows: &[Vec<f64>]) -> bool {
    rows.iter().enumerate().all(|(a, ra)| {
        rows.iter().enumerate().all(|(b, rb)| {
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            (dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-9
        })
    })
}

/// Per-class score offsets that equalize `argmax(W z + offset)` frequencies.
///
/// Orthonormal rows are already balanced by symmetry and get zeros. Other row
/// sets (more classes than latent dimensions, or random source rows) are
/// calibrated on a fixed seeded batch of latents, so the offsets are a pure
/// function of the rows and the seed.
fn class_offsets(rows: &[Vec<f64>], seed: u64) -> Vec<f64> {
    let k = rows.len();
    if is_orthonormal(rows) {
        return vec![0.0; k];
    }
    let n_latent = rows[0].len();
    let scores: Vec<Vec<f64>> = (0..CALIBRATION_SAMPLES)
        .map(|i| {
            let z = normal_vec(&mut keyed_rng(seed, "calibration", i, 0), n_latent);
            Generator::scores(rows, &z)
        })
        .collect();
    let uniform = CALIBRATION_SAMPLES as f64 / k as f64;
    let mut offsets = vec![0.0; k];
    for _ in 0..CALIBRATION_ROUNDS {
        let mut counts = vec![0usize; k];
        for s in &scores {
            let shifted: Vec<f64> = s.iter().zip(&offsets).map(|(a, b)| a + b).collect();
            counts[argmax(&shifted)] += 1;
        }
        for (o, &c) in offsets.iter_mut().zip(&counts) {
            *o -= CALIBRATION_STEP * ((c as f64 + 1.0) / uniform).ln();
        }
    }
    offsets
}

impl<'a> Generator<'a> {
    fn new(pair: &'a SyntheticTaskPair) -> Self {
        let [c, h, w] = pair.image;
        let bases = low_frequencies(pair.n_latent)
            .into_iter()
            .enumerate()
            .map(|(j, (fy, fx))| {
                let mut rng = keyed_rng(pair.seed, "basis", j as u64, 0);
                let mut mix = normal_vec(&mut rng, c);
                normalize(&mut mix);
                let mut b = Vec::with_capacity(c * h * w);
                for &m in &mix {
                    for y in 0..h {
                        let cy = (PI * fy as f64 * (y as f64 + 0.5) / h as f64).cos();
                        for x in 0..w {
                            let cx = (PI * fx as f64 * (x as f64 + 0.5) / w as f64).cos();
                            b.push(m * cy * cx);
                        }
                    }
                }
                let rms = (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt();
                b.iter_mut().for_each(|v| *v /= rms);
                b
            })
            .collect();

        let mut target_rows: Vec<Vec<f64>> = (0..pair.k_target)
            .map(|k| {
                normal_vec(
                    &mut keyed_rng(pair.seed, "target_row", k as u64, 0),
                    pair.n_latent,
                )
            })
            .collect();
        // Orthonormal rows make every class equally likely.
        if pair.k_target <= pair.n_latent {
            for k in 0..target_rows.len() {
                for prev in 0..k {
                    let dot: f64 = target_rows[k]
                        .iter()
                        .zip(&target_rows[prev])
                        .map(|(a, b)| a * b)
                        .sum();
                    let (head, tail) = target_rows.split_at_mut(k);
                    for (v, p) in tail[0].iter_mut().zip(&head[prev]) {
                        *v -= dot * p;
                    }
                }
                normalize(&mut target_rows[k]);
            }
        } else {
            target_rows.iter_mut().for_each(|r| normalize(r));
        }

        let shared = ((pair.overlap * pair.k_source as f64).floor() as usize).min(pair.k_target);
        let source_rows: Vec<Vec<f64>> = (0..pair.k_source)
            .map(|k| {
                if k < shared {
                    target_rows[k].clone()
                } else {
                    let mut r = normal_vec(
                        &mut keyed_rng(pair.seed, "source_row", pair.source_variant, k as u64),
                        pair.n_latent,
                    );
                    normalize(&mut r);
                    r
                }
            })
            .collect();
        Self {
            pair,
            bases,
            target_offsets: class_offsets(&target_rows, pair.seed),
            source_offsets: class_offsets(&source_rows, pair.seed),
            target_rows,
            source_rows,
        }
    }

    fn latent(&self, index: u64) -> (ChaCha8Rng, Vec<f64>) {
        let mut rng = keyed_rng(self.pair.seed, "sample", index, 0);
        let z = normal_vec(&mut rng, self.pair.n_latent);
        (rng, z)
    }

    fn image(&self, z: &[f64], amplitude: f64, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let size = self.bases[0].len();
        let scale = amplitude / (self.pair.n_latent as f64).sqrt();
        for p in 0..size {
            let clean: f64 = z.iter().zip(&self.bases).map(|(zj, b)| zj * b[p]).sum();
            let eps: f64 = rng.sample(StandardNormal);
            out.push(clean * scale + self.pair.noise * eps);
        }
    }

    fn scores(rows: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
        rows.iter()
            .map(|r| r.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn offset_scores(rows: &[Vec<f64>], offsets: &[f64], z: &[f64]) -> Vec<f64> {
        Self::scores(rows, z)
            .iter()
            .zip(offsets)
            .map(|(s, o)| s + o)
            .collect()
    }

    fn source_split(&self, base: u64, n: usize) -> Result<Dataset> {
        let mut inputs = Vec::new();
        let mut labels = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let (mut rng, z) = self.latent(base + i);
            self.image(&z, 1.0, &mut rng, &mut inputs);
            labels.push(argmax(&Self::offset_scores(
                &self.source_rows,
                &self.source_offsets,
                &z,
            )));
        }
        Dataset::new(
            self.pair.image.to_vec(),
            inputs,
            Labels::Class(labels),
            self.pair.k_source,
        )
    }

    fn target_split(&self, base: u64, n: usize) -> Result<Dataset> {
        let [c, h, w] = self.pair.image;
        let depth = self.pair.depth;
        let k = self.pair.k_target;
        let mut inputs = Vec::new();
        let mut classes = Vec::with_capacity(n);
        let mut multi = Vec::new();
        for i in 0..n as u64 {
            let (mut rng, z) = self.latent(base + i);
            if depth == 0 {
                self.image(&z, 1.0, &mut rng, &mut inputs);
            } else {
                // [C, D, H, W]: each frame is the image at a slowly varying amplitude.
                let phase = rng.random::<f64>() * 2.0 * PI;
                let mut frames = Vec::with_capacity(depth);
                for d in 0..depth {
                    let amp = 1.0 + 0.2 * (2.0 * PI * d as f64 / depth as f64 + phase).sin();
                    let mut f = Vec::with_capacity(c * h * w);
                    self.image(&z, amp, &mut rng, &mut f);
                    frames.push(f);
                }
                for ch in 0..c {
                    for f in &frames {
                        inputs.extend_from_slice(&f[ch * h * w..(ch + 1) * h * w]);
                    }
                }
            }
            let s = Self::offset_scores(&self.target_rows, &self.target_offsets, &z);
            let top = argmax(&s);
            if self.pair.multi_label {
                multi.extend(s.iter().enumerate().map(|(j, &v)| {
                    if j == top || v > MULTI_LABEL_THRESHOLD {
                        1.0
                    } else {
                        0.0
                    }
                }));
            } else {
                classes.push(top);
            }
        }
        let shape = if depth == 0 {
            vec![c, h, w]
        } else {
            vec![c, depth, h, w]
        };
        let labels = if self.pair.multi_label {
            Labels::MultiHot(multi)
        } else {
            Labels::Class(classes)
        };
        Dataset::new(shape, inputs, labels, k)
    }
}

impl SyntheticTaskPair {
    pub fn n_source_train(&self) -> usize {
        self.n_source_train.unwrap_or(self.n_train)
    }

    pub fn validate(&self) -> Result<()> {
        let err =
            |field: &str, msg: &str| Err(Error::config(format!("data.synthetic.{field}"), msg));
        if self.n_latent == 0 {
            return err("n_latent", "must be positive");
        }
        if self.k_target < 2 || self.k_source < 2 {
            return err("k_target", "class counts must be at least 2");
        }
        if self.k_target >= self.n_train || self.k_source >= self.n_source_train() {
            return err("n_train", "must exceed the class count");
        }
        if self.n_test == 0 {
            return err("n_test", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return err("overlap", "must lie in [0, 1]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return err("noise", "must be >= 0");
        }
        if self.image.contains(&0) {
            return err("image", "dimensions must be positive");
        }
        Ok(())
    }
}

/// Generates all four splits.
pub fn generate(pair: &SyntheticTaskPair) -> Result<TaskPairData> {
    pair.validate()?;
    let g = Generator::new(pair);
    Ok(TaskPairData {
        source_train: g.source_split(SOURCE_TRAIN_BASE, pair.n_source_train())?,
        source_test: g.source_split(SOURCE_TEST_BASE, pair.n_test)?,
        target_train: g.target_split(TARGET_TRAIN_BASE, pair.n_train)?,
        target_test: g.target_split(TARGET_TEST_BASE, pair.n_test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pair() -> SyntheticTaskPair {
        SyntheticTaskPair {
            n_latent: 6,
            k_target: 4,
            k_source: 4,
            overlap: 1.0,
            image: [1, 8, 8],
            depth: 0,
            noise: 0.0,
            n_train: 40,
            n_test: 20,
            n_source_train: None,
            source_variant: 0,
            multi_label: false,
            seed: 11,
        }
    }

    #[test]
    fn frequencies_are_low_first() {
        assert_eq!(low_frequencies(4), vec![(0, 0), (0, 1), (1, 0), (0, 2)]);
    }

    #[test]
    fn full_overlap_shares_labels() {
        let p = pair();
        let g = Generator::new(&p);
        for i in 0..50 {
            let (_, z) = g.latent(i);
            assert_eq!(
                argmax(&Generator::scores(&g.source_rows, &z)),
                argmax(&Generator::scores(&g.target_rows, &z))
            );
        }
    }

    #[test]
    fn target_rows_orthonormal() {
        let p = pair();
        let g = Generator::new(&p);
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = g.target_rows[a]
                    .iter()
                    .zip(&g.target_rows[b])
                    .map(|(x, y)| x * y)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn validation() {
        let mut p = pair();
        p.overlap = 1.5;
        assert!(generate(&p).is_err());
        let mut p = pair();
        p.n_train = 4;
        assert!(generate(&p).is_err());
    }
}
