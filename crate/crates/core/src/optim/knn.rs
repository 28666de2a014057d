//! Scalar k-nearest-neighbor regression with inverse-distance weighting.

use super::OptimError;

/// Predict the target at `query` from the `k` nearest samples, weighting each
/// neighbor's target by the inverse of its distance.
///
/// A query matching a sample exactly returns that sample's target. Distance
/// ties are broken toward the earlier sample.
pub fn knn_regress(samples: &[(f64, f64)], query: f64, k: usize) -> Result<f64, OptimError> {
    assert!(k >= 1, "k must be at least 1");
    if samples.len() < k {
        return Err(OptimError::TooFewSamples {
            needed: k,
            got: samples.len(),
        });
    }

    // Best-k selection by a single scan; `nearest` stays sorted by
    // (distance, index).
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (idx, &(x, _)) in samples.iter().enumerate() {
        let dist = (x - query).abs();
        if nearest.len() == k && dist >= nearest[k - 1].0 {
            continue;
        }
        let pos = nearest.partition_point(|&(d, _)| d <= dist);
        nearest.insert(pos, (dist, idx));
        nearest.truncate(k);
    }

    if nearest[0].0 == 0.0 {
        return Ok(samples[nearest[0].1].1);
    }

    let mut weight_sum = 0.0;
    let mut value_sum = 0.0;
    for &(dist, idx) in &nearest {
        let w = 1.0 / dist;
        weight_sum += w;
        value_sum += w * samples[idx].1;
    }
    Ok(value_sum / weight_sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_neighbors_average() {
        let samples = [(100.0, 500.0), (200.0, 300.0)];
        assert_eq!(knn_regress(&samples, 150.0, 2).unwrap(), 400.0);
    }

    #[test]
    fn exact_match_returns_sample_target() {
        let samples = [(100.0, 500.0), (200.0, 300.0)];
        assert_eq!(knn_regress(&samples, 100.0, 2).unwrap(), 500.0);
    }

    #[test]
    fn too_few_samples() {
        let samples = [(1.0, 2.0)];
        assert!(matches!(
            knn_regress(&samples, 0.0, 2),
            Err(OptimError::TooFewSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn output_bounded_by_neighbor_targets() {
        let samples = [(0.0, 10.0), (1.0, 30.0), (5.0, -4.0)];
        let v = knn_regress(&samples, 0.4, 2).unwrap();
        assert!((10.0..=30.0).contains(&v), "got {v}");
    }

    /// Independent oracle: sort every sample by (distance, index) and take
    /// the first k.
    fn brute_force(samples: &[(f64, f64)], query: f64, k: usize) -> f64 {
        let mut order: Vec<(f64, usize)> = samples
            .iter()
            .enumerate()
            .map(|(i, &(x, _))| ((x - query).abs(), i))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if order[0].0 == 0.0 {
            return samples[order[0].1].1;
        }
        let (mut ws, mut vs) = (0.0, 0.0);
        for &(d, i) in &order[..k] {
            let w = 1.0 / d;
            ws += w;
            vs += w * samples[i].1;
        }
        vs / ws
    }

    #[test]
    fn matches_brute_force_oracle_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let samples: Vec<(f64, f64)> = (0..100)
            .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(-50.0..50.0)))
            .collect();
        for _ in 0..50 {
            let q = rng.gen_range(-10.0..1010.0);
            let got = knn_regress(&samples, q, 2).unwrap();
            let want = brute_force(&samples, q, 2);
            assert_eq!(got, want, "query {q}");
        }
    }
}
