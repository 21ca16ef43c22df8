use crate::autodiff::RngState;
use crate::error::{Error, Result};
use crate::loss::ClassWeights;

/// Draws `n_draws` indices with replacement; sample `i` has probability
/// `w[label_i] / Σ_j w[label_j]`.
pub fn weighted_sampler(labels: &[usize], weights: &ClassWeights, n_draws: usize, rng: &mut RngState) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Config("cannot sample from an empty dataset".into()));
    }
    if weights.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Config(format!("sampler weights must be positive, got {:?}", weights.weights)));
    }
    let mut cumulative = Vec::with_capacity(labels.len());
    let mut total = 0.0;
    for &y in labels {
        let w = *weights
            .weights
            .get(y)
            .ok_or_else(|| Error::Config(format!("label {y} has no class weight")))?;
        total += w;
        cumulative.push(total);
    }
    Ok((0..n_draws)
        .map(|_| {
            let u = rng.uniform() * total;
            cumulative.partition_point(|&c| c <= u).min(labels.len() - 1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::compute_class_weights;

    #[test]
    fn two_samples_weighted_one_to_three() {
        let w = ClassWeights {
            counts: vec![1, 1],
            weights: vec![1.0, 3.0],
        };
        let mut rng = RngState::new(5);
        let draws = weighted_sampler(&[0, 1], &w, 100_000, &mut rng).unwrap();
        let share = draws.iter().filter(|&&i| i == 1).count() as f64 / 1e5;
        assert!((share - 0.75).abs() < 0.01, "{share}");
    }

    #[test]
    fn equal_weights_sample_uniformly() {
        let labels = [0, 0, 1, 0, 1];
        let mut rng = RngState::new(6);
        let draws = weighted_sampler(&labels, &ClassWeights::uniform(2), 100_000, &mut rng).unwrap();
        for i in 0..5 {
            let share = draws.iter().filter(|&&d| d == i).count() as f64 / 1e5;
            assert!((share - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn inverse_frequency_weights_balance_classes() {
        let mut labels = vec![0usize; 4342];
        labels.extend(vec![1usize; 845]);
        let w = compute_class_weights(&[4342, 845]).unwrap();
        let closed = w.weights[1] * 845.0 / (w.weights[0] * 4342.0 + w.weights[1] * 845.0);
        assert!((closed - 0.5).abs() < 1e-12);
        let draws = weighted_sampler(&labels, &w, 100_000, &mut RngState::new(7)).unwrap();
        let share = draws.iter().filter(|&&i| labels[i] == 1).count() as f64 / 1e5;
        assert!((share - closed).abs() < 0.02, "{share}");
    }

    #[test]
    fn errors() {
        let mut rng = RngState::new(0);
        assert!(weighted_sampler(&[], &ClassWeights::uniform(2), 3, &mut rng).is_err());
        let bad = ClassWeights {
            counts: vec![1, 1],
            weights: vec![1.0, 0.0],
        };
        assert!(weighted_sampler(&[0, 1], &bad, 3, &mut rng).is_err());
    }
}
