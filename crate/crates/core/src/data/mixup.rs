use serde::{Deserialize, Serialize};

use crate::autodiff::{RngState, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixupConfig {
    /// Shape of the symmetric `Beta(α, α)` mixing distribution.
    pub alpha: f64,
    /// Probability that a given minibatch is mixed at all.
    pub prob: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig { alpha: 0.4, prob: 0.7 }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("mixup alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::Config(format!("mixup probability must be in [0, 1], got {}", self.prob)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixupOutcome {
    pub inputs: Tensor,
    pub targets: Tensor,
    /// `None` when the batch was passed through unchanged.
    pub lambda: Option<f64>,
    pub partners: Option<Vec<usize>>,
}

/// `x̃_i = λ·x_i + (1−λ)·x_{partner(i)}`, and likewise for the targets.
pub fn mix_pairs(inputs: &Tensor, targets: &Tensor, lambda: f64, partners: &[usize]) -> Result<(Tensor, Tensor)> {
    let mix = |t: &Tensor| -> Result<Tensor> {
        let n = t.rows();
        if partners.len() != n {
            return Err(Error::dim("mixup", t.shape(), &[partners.len()]));
        }
        let k = t.last_dim();
        let mut data = Vec::with_capacity(t.len());
        for (i, &j) in partners.iter().enumerate() {
            data.extend(t.row(i).iter().zip(t.row(j)).map(|(a, b)| lambda * a + (1.0 - lambda) * b));
        }
        debug_assert_eq!(data.len(), n * k);
        Tensor::new(t.shape().to_vec(), data)
    };
    if inputs.rows() != targets.rows() {
        return Err(Error::dim("mixup", inputs.shape(), targets.shape()));
    }
    Ok((mix(inputs)?, mix(targets)?))
}

/// With probability `cfg.prob`, mixes the batch with a random permutation of
/// itself using one `λ ~ Beta(α, α)`; otherwise returns it unchanged.
pub fn mixup(inputs: &Tensor, targets: &Tensor, cfg: &MixupConfig, rng: &mut RngState) -> Result<MixupOutcome> {
    cfg.validate()?;
    if inputs.rows() < 2 || !rng.bernoulli(cfg.prob) {
        return Ok(MixupOutcome {
            inputs: inputs.clone(),
            targets: targets.clone(),
            lambda: None,
            partners: None,
        });
    }
    let lambda = rng.beta(cfg.alpha, cfg.alpha);
    let partners = rng.permutation(inputs.rows());
    let (x, y) = mix_pairs(inputs, targets, lambda, &partners)?;
    Ok(MixupOutcome {
        inputs: x,
        targets: y,
        lambda: Some(lambda),
        partners: Some(partners),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda_one_is_identity() {
        let x = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let y = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (mx, my) = mix_pairs(&x, &y, 1.0, &[1, 0]).unwrap();
        assert_eq!(mx, x);
        assert_eq!(my, y);
    }

    #[test]
    fn hand_case_quarter() {
        let x = Tensor::from_rows(&[[4.0, 0.0], [0.0, 4.0]]).unwrap();
        let y = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (mx, my) = mix_pairs(&x, &y, 0.25, &[1, 0]).unwrap();
        assert_eq!(mx.row(0), &[1.0, 3.0]);
        assert_eq!(my.row(0), &[0.25, 0.75]);
    }

    #[test]
    fn probability_zero_never_mixes() {
        let x = Tensor::from_rows(&[[4.0], [0.0]]).unwrap();
        let y = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let cfg = MixupConfig { alpha: 0.4, prob: 0.0 };
        let out = mixup(&x, &y, &cfg, &mut RngState::new(1)).unwrap();
        assert!(out.lambda.is_none());
        assert_eq!(out.inputs, x);
    }

    #[test]
    fn mixes_about_seventy_percent_of_batches() {
        let x = Tensor::from_rows(&[[4.0], [0.0]]).unwrap();
        let y = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut rng = RngState::new(2);
        let n = 20_000;
        let mixed = (0..n)
            .filter(|_| mixup(&x, &y, &MixupConfig::default(), &mut rng).unwrap().lambda.is_some())
            .count();
        assert!((mixed as f64 / n as f64 - 0.7).abs() < 0.015);
    }

    proptest! {
        #[test]
        fn convex_hull_and_simplex(seed in any::<u64>(), rows in 2usize..8) {
            let mut rng = RngState::new(seed);
            let x = Tensor::new(vec![rows, 3], (0..rows * 3).map(|_| rng.normal(0.0, 3.0)).collect()).unwrap();
            let labels: Vec<usize> = (0..rows).map(|_| rng.below(2)).collect();
            let y = crate::loss::one_hot(&labels, 2).unwrap();
            let cfg = MixupConfig { alpha: 0.4, prob: 1.0 };
            let out = mixup(&x, &y, &cfg, &mut rng).unwrap();
            let partners = out.partners.unwrap();
            for i in 0..rows {
                let j = partners[i];
                for k in 0..3 {
                    let (a, b) = (x.row(i)[k], x.row(j)[k]);
                    let v = out.inputs.row(i)[k];
                    prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
                }
                let s: f64 = out.targets.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(out.targets.row(i).iter().all(|&p| p >= 0.0));
            }
        }
    }
}
