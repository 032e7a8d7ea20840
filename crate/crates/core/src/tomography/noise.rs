use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::PopulationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub atom_count: u64,
    pub seed: u64,
}

/// Replaces the fractions of `record` by a multinomial draw of
/// `atom_count` atoms. The stream depends only on `seed` and the grid index,
/// so results do not depend on evaluation order.
pub fn sample_shot_noise(record: &PopulationRecord, atom_count: u64, seed: u64) -> Result<PopulationRecord> {
    if atom_count == 0 {
        return Err(Error::param("atom_count", "need at least one atom"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(record.point.index as u64);

    let mut probs = vec![record.p0, record.p1];
    probs.extend(&record.higher);
    probs.push(record.p_lost);
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidState("record populations must be non-negative with positive total".into()));
    }

    // sequential binomials: category k takes Bin(remaining, pₖ / remaining mass)
    let mut counts = Vec::with_capacity(probs.len());
    let mut remaining = atom_count;
    let mut mass = total;
    for (k, p) in probs.iter().enumerate() {
        let c = if k + 1 == probs.len() || remaining == 0 {
            remaining
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            let draw = Binomial::new(remaining, q).map_err(|e| Error::NumericalFailure(e.to_string()))?;
            draw.sample(&mut rng)
        };
        counts.push(c);
        remaining -= c;
        mass -= p;
    }

    let n = atom_count as f64;
    let frac: Vec<f64> = counts.iter().map(|c| *c as f64 / n).collect();
    let last = frac.len() - 1;
    Ok(PopulationRecord {
        point: record.point,
        p0: frac[0],
        p1: frac[1],
        higher: frac[2..last].to_vec(),
        p_lost: frac[last],
        atom_count: Some(atom_count),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::{GridPoint, PopulationRecord};

    fn record(index: usize, p0: f64, p1: f64, p_lost: f64) -> PopulationRecord {
        let point = GridPoint { index, angle: 0.0, displacement: 0.0, alpha_magnitude: 0.0 };
        PopulationRecord { point, p0, p1, higher: vec![], p_lost, atom_count: None }
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let r = record(5, 0.4, 0.35, 0.25);
        let a = sample_shot_noise(&r, 1000, 42).unwrap();
        assert_eq!(a, sample_shot_noise(&r, 1000, 42).unwrap());
        assert_ne!(a, sample_shot_noise(&r, 1000, 43).unwrap());
        assert_ne!(a, sample_shot_noise(&record(6, 0.4, 0.35, 0.25), 1000, 42).unwrap());
        assert!(a.is_sampled());
        assert!((a.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn certain_outcome_is_exact() {
        for seed in 0..10 {
            let s = sample_shot_noise(&record(seed as usize, 1.0, 0.0, 0.0), 137, seed).unwrap();
            assert_eq!((s.p0, s.p1, s.p_lost), (1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn large_counts_within_binomial_bounds() {
        let n = 1_000_000u64;
        let r = record(0, 0.3, 0.5, 0.2);
        for seed in 0..5 {
            let s = sample_shot_noise(&r, n, seed).unwrap();
            for (got, p) in [(s.p0, 0.3), (s.p1, 0.5), (s.p_lost, 0.2)] {
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!((got - p).abs() < 3.0 * sigma + 1e-12, "{got} vs {p}");
            }
        }
    }

    #[test]
    fn zero_atoms_rejected() {
        assert!(sample_shot_noise(&record(0, 1.0, 0.0, 0.0), 0, 1).is_err());
    }
}
