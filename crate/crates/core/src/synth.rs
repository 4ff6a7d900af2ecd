//! Synthetic "encoded" datasets with a controllable inter-class prototype
//! similarity.
//!
//! Prototypes are `p_c = sqrt(rho) u + sqrt(1 - rho) v_c` with `u` a shared
//! unit vector and `v_c` per-class unit vectors orthogonalized against `u`,
//! so the expected pairwise prototype cosine is `rho`. Samples are
//! `p_c + sigma * z` with standard normal `z`, plus an optional
//! `tau * B w` term where `B` is a fixed orthonormal basis of
//! `shared_noise_rank` directions common to every class. The shared term
//! keeps one covariance for all classes but makes it anisotropic, which is
//! what lets task subspaces overlap more as prototypes converge.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::{DatasetMeta, EncodedDataset, SplitDataset};
use crate::numeric::DenseMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub latent_dim: usize,
    pub n_classes: usize,
    pub samples_per_class: usize,
    #[serde(default)]
    pub test_samples_per_class: usize,
    pub target_similarity: f64,
    pub within_class_noise: f64,
    #[serde(default)]
    pub shared_noise_rank: usize,
    #[serde(default)]
    pub shared_noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_name")]
    pub name: String,
}

fn default_name() -> String {
    "synth".into()
}

impl SynthConfig {
    pub fn new(
        latent_dim: usize,
        n_classes: usize,
        samples_per_class: usize,
        rho: f64,
        sigma: f64,
    ) -> Self {
        Self {
            latent_dim,
            n_classes,
            samples_per_class,
            test_samples_per_class: 0,
            target_similarity: rho,
            within_class_noise: sigma,
            shared_noise_rank: 0,
            shared_noise_scale: 0.0,
            seed: 0,
            name: default_name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.latent_dim < 8 {
            return bad(format!("latent_dim must be >= 8, got {}", self.latent_dim));
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.target_similarity) {
            return bad(format!(
                "target_similarity must lie in [0, 1], got {}",
                self.target_similarity
            ));
        }
        if !(self.within_class_noise.is_finite() && self.within_class_noise >= 0.0) {
            return bad(format!(
                "within_class_noise must be finite and >= 0, got {}",
                self.within_class_noise
            ));
        }
        if self.shared_noise_rank >= self.latent_dim {
            return bad(format!(
                "shared_noise_rank {} must be below latent_dim {}",
                self.shared_noise_rank, self.latent_dim
            ));
        }
        if !(self.shared_noise_scale.is_finite() && self.shared_noise_scale >= 0.0) {
            return bad("shared_noise_scale must be finite and >= 0".into());
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Removes the components of `v` along each (unit) vector in `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
    }
}

/// The class prototypes of `cfg`, one unit-norm row per class.
pub fn prototypes(cfg: &SynthConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let d = cfg.latent_dim;
    let mut rng = seed::rng(cfg.seed, &[0x5e7]);
    let mut u = gaussian_vec(&mut rng, d);
    normalize(&mut u);
    let (a, b) = (
        cfg.target_similarity.sqrt(),
        (1.0 - cfg.target_similarity).sqrt(),
    );
    let shared = [u.clone()];
    Ok((0..cfg.n_classes)
        .map(|_| {
            let mut v = gaussian_vec(&mut rng, d);
            orthogonalize(&mut v, &shared);
            normalize(&mut v);
            u.iter().zip(&v).map(|(ui, vi)| a * ui + b * vi).collect()
        })
        .collect())
}

fn shared_basis(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let d = cfg.latent_dim;
    let mut rng = seed::rng(cfg.seed, &[0x5e7]);
    // The shared prototype direction, regenerated so the basis avoids it.
    let mut u = gaussian_vec(&mut rng, d);
    normalize(&mut u);
    let mut basis = vec![u];
    let mut rng = seed::rng(cfg.seed, &[0xba5e]);
    while basis.len() < cfg.shared_noise_rank + 1 {
        let mut v = gaussian_vec(&mut rng, d);
        // Twice, for numerical orthogonality.
        orthogonalize(&mut v, &basis);
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        basis.push(v);
    }
    basis.remove(0);
    basis
}

/// Generates `samples_per_class + test_samples_per_class` rows per class,
/// class-major; within a class the training rows come first.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<EncodedDataset> {
    let protos = prototypes(cfg)?;
    let d = cfg.latent_dim;
    let basis = if cfg.shared_noise_scale > 0.0 {
        shared_basis(cfg)
    } else {
        Vec::new()
    };
    let per_class = cfg.samples_per_class + cfg.test_samples_per_class;
    let mut data = Vec::with_capacity(cfg.n_classes * per_class * d);
    let mut labels = Vec::with_capacity(cfg.n_classes * per_class);
    let mut rng = seed::rng(cfg.seed, &[0x5a3]);
    let mut sample = vec![0.0f64; d];
    for (c, p) in protos.iter().enumerate() {
        for _ in 0..per_class {
            sample.copy_from_slice(p);
            if cfg.within_class_noise > 0.0 {
                for s in sample.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *s += cfg.within_class_noise * z;
                }
            }
            for b in &basis {
                let w: f64 = rng.sample(StandardNormal);
                let w = cfg.shared_noise_scale * w;
                sample.iter_mut().zip(b).for_each(|(s, bi)| *s += w * bi);
            }
            data.extend(sample.iter().map(|&v| v as f32));
            labels.push(c as u32);
        }
    }
    EncodedDataset::new(
        DenseMatrix::new(labels.len(), d, data)?,
        labels,
        (0..cfg.n_classes).map(|c| format!("class_{c}")).collect(),
        DatasetMeta {
            encoder_name: format!("synthetic(rho={})", cfg.target_similarity),
            latent_dim: d,
            encode_flops_per_sample: 0,
            source_dataset: cfg.name.clone(),
        },
    )
}

/// Generates a dataset and splits it: per class, the test rows become the
/// test split and `floor(samples_per_class * val_fraction)` of the training
/// rows become validation.
pub fn generate_synthetic_split(cfg: &SynthConfig, val_fraction: f64) -> Result<SplitDataset> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::BadConfig(format!(
            "val_fraction must lie in [0, 1), got {val_fraction}"
        )));
    }
    let ds = generate_synthetic(cfg)?;
    let per_class = cfg.samples_per_class + cfg.test_samples_per_class;
    let n_val = ((cfg.samples_per_class as f64) * val_fraction + 1e-9).floor() as usize;
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..cfg.n_classes {
        let base = c * per_class;
        let train_end = base + cfg.samples_per_class;
        val.extend(train_end - n_val..train_end);
        train.extend(base..train_end - n_val);
        test.extend(train_end..base + per_class);
    }
    Ok(SplitDataset {
        train: ds.select_rows(&train),
        val: ds.select_rows(&val),
        test: ds.select_rows(&test),
        train_rows: train,
        val_rows: val,
        test_rows: test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_pairwise_cos(protos: &[Vec<f64>]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..protos.len() {
            for j in (i + 1)..protos.len() {
                let dot: f64 = protos[i].iter().zip(&protos[j]).map(|(a, b)| a * b).sum();
                let ni: f64 = protos[i].iter().map(|a| a * a).sum::<f64>().sqrt();
                let nj: f64 = protos[j].iter().map(|a| a * a).sum::<f64>().sqrt();
                sum += dot / (ni * nj);
                n += 1;
            }
        }
        sum / n as f64
    }

    #[test]
    fn rho_one_gives_identical_prototypes() {
        let p = prototypes(&SynthConfig::new(16, 4, 1, 1.0, 0.1)).unwrap();
        for q in &p[1..] {
            assert_eq!(q, &p[0]);
        }
        assert!((mean_pairwise_cos(&p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_zero_is_near_orthogonal() {
        for seed in 0..5 {
            let mut cfg = SynthConfig::new(256, 10, 1, 0.0, 0.1);
            cfg.seed = seed;
            let p = prototypes(&cfg).unwrap();
            assert!(mean_pairwise_cos(&p).abs() < 0.05);
        }
    }

    #[test]
    fn prototype_cosine_tracks_rho() {
        for (i, rho) in [0.2, 0.5, 0.8].into_iter().enumerate() {
            let mut cfg = SynthConfig::new(128, 20, 1, rho, 0.1);
            cfg.seed = i as u64;
            let c = mean_pairwise_cos(&prototypes(&cfg).unwrap());
            assert!((c - rho).abs() < 0.05, "rho {rho}: {c}");
        }
    }

    #[test]
    fn deterministic_and_noise_free_means() {
        let mut cfg = SynthConfig::new(12, 3, 5, 0.4, 0.0);
        cfg.test_samples_per_class = 2;
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 21);
        assert_eq!(a.meta().encode_flops_per_sample, 0);
        let protos = prototypes(&cfg).unwrap();
        for i in 0..a.len() {
            let p = &protos[a.labels()[i] as usize];
            let expect: Vec<f32> = p.iter().map(|&v| v as f32).collect();
            assert_eq!(a.row(i), expect.as_slice());
        }
    }

    #[test]
    fn shared_basis_is_orthonormal_and_avoids_u() {
        let mut cfg = SynthConfig::new(32, 2, 1, 0.5, 0.1);
        cfg.shared_noise_rank = 6;
        cfg.shared_noise_scale = 1.0;
        let basis = shared_basis(&cfg);
        assert_eq!(basis.len(), 6);
        let mut u = gaussian_vec(&mut seed::rng(cfg.seed, &[0x5e7]), 32);
        normalize(&mut u);
        for (i, a) in basis.iter().enumerate() {
            let du: f64 = a.iter().zip(&u).map(|(x, y)| x * y).sum();
            assert!(du.abs() < 1e-12);
            for (j, b) in basis.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                assert!((d - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_layout() {
        let mut cfg = SynthConfig::new(8, 3, 10, 0.1, 0.5);
        cfg.test_samples_per_class = 4;
        let s = generate_synthetic_split(&cfg, 0.2).unwrap();
        assert_eq!(s.train.len(), 24);
        assert_eq!(s.val.len(), 6);
        assert_eq!(s.test.len(), 12);
        let mut all: Vec<usize> = [s.train_rows, s.val_rows, s.test_rows].concat();
        all.sort_unstable();
        assert_eq!(all, (0..42).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_synthetic(&SynthConfig::new(4, 3, 1, 0.5, 0.1)).is_err());
        assert!(generate_synthetic(&SynthConfig::new(16, 1, 1, 0.5, 0.1)).is_err());
        assert!(generate_synthetic(&SynthConfig::new(16, 3, 1, 1.5, 0.1)).is_err());
        assert!(generate_synthetic(&SynthConfig::new(16, 3, 1, 0.5, -1.0)).is_err());
    }
}
