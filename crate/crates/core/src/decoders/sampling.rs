//! Greedy search and the truncated-sampling baselines.

use crate::backend::TokenId;
use crate::error::{argument, Result};
use crate::prob::{shannon_entropy, top_k_indices, ProbabilityDistribution};
use crate::rng::{sample_support, SampleRng};

/// Slack on cumulative-mass thresholds, so that e.g. three masses of `0.1`
/// reach `0.3`.
const MASS_SLACK: f64 = 1e-12;

/// Resolution at which typical-sampling deviations are compared. Values closer
/// than this count as tied and fall through to the mass/id tie-break.
const DEVIATION_RESOLUTION: f64 = 1e-9;

/// Highest-mass token, lowest id on ties.
pub fn greedy_step(dist: &ProbabilityDistribution) -> TokenId {
    let mut best = 0;
    for (i, &p) in dist.probs().iter().enumerate().skip(1) {
        if p > dist.get(best) {
            best = i;
        }
    }
    TokenId::from(best)
}

pub fn topk_sample_step(
    dist: &ProbabilityDistribution,
    k: usize,
    rng: &mut SampleRng,
) -> Result<TokenId> {
    let support = top_k_indices(dist, k)?;
    Ok(sample_support(dist, &support, rng))
}

fn check_mass_threshold(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(argument(format!("{name} = {value} outside (0, 1]")));
    }
    Ok(())
}

/// Shortest prefix of `ranked` whose cumulative mass reaches `threshold`.
fn mass_prefix(dist: &ProbabilityDistribution, ranked: Vec<usize>, threshold: f64) -> Vec<usize> {
    let mut cumulative = 0.0;
    let mut end = ranked.len();
    for (i, &t) in ranked.iter().enumerate() {
        cumulative += dist.get(t);
        if cumulative >= threshold - MASS_SLACK {
            end = i + 1;
            break;
        }
    }
    let mut ranked = ranked;
    ranked.truncate(end);
    ranked
}

/// Smallest highest-mass set with cumulative mass `>= p`, in rank order.
pub fn nucleus_support(dist: &ProbabilityDistribution, p: f64) -> Result<Vec<usize>> {
    check_mass_threshold("p", p)?;
    let ranked = top_k_indices(dist, dist.vocab_size())?;
    Ok(mass_prefix(dist, ranked, p))
}

pub fn nucleus_step(
    dist: &ProbabilityDistribution,
    p: f64,
    rng: &mut SampleRng,
) -> Result<TokenId> {
    Ok(sample_support(dist, &nucleus_support(dist, p)?, rng))
}

/// Locally typical set: tokens ranked by `|−ln p − H|` (ties by higher mass,
/// then lower id), truncated at cumulative mass `tau`. Zero-mass tokens never
/// enter the ranking.
pub fn typical_support(dist: &ProbabilityDistribution, tau: f64) -> Result<Vec<usize>> {
    check_mass_threshold("tau", tau)?;
    let entropy = shannon_entropy(dist);
    let mut ranked: Vec<(i64, usize)> = dist
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| {
            let deviation = (-p.ln() - entropy).abs();
            ((deviation / DEVIATION_RESOLUTION).round() as i64, i)
        })
        .collect();
    ranked.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| dist.get(b.1).total_cmp(&dist.get(a.1)))
            .then_with(|| a.1.cmp(&b.1))
    });
    Ok(mass_prefix(
        dist,
        ranked.into_iter().map(|(_, i)| i).collect(),
        tau,
    ))
}

pub fn typical_step(
    dist: &ProbabilityDistribution,
    tau: f64,
    rng: &mut SampleRng,
) -> Result<TokenId> {
    Ok(sample_support(dist, &typical_support(dist, tau)?, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> ProbabilityDistribution {
        ProbabilityDistribution::new(p.to_vec()).unwrap()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_step(&dist(&[0.1, 0.7, 0.2])), TokenId(1));
        assert_eq!(greedy_step(&dist(&[0.5, 0.5])), TokenId(0));
    }

    #[test]
    fn topk_one_is_greedy() {
        let d = dist(&[0.1, 0.2, 0.4, 0.3]);
        for seed in 0..20 {
            let mut rng = SampleRng::from_seed(seed);
            assert_eq!(topk_sample_step(&d, 1, &mut rng).unwrap(), TokenId(2));
        }
        assert!(topk_sample_step(&d, 0, &mut SampleRng::from_seed(0)).is_err());
        assert!(topk_sample_step(&d, 5, &mut SampleRng::from_seed(0)).is_err());
    }

    #[test]
    fn nucleus_supports() {
        let d = dist(&[0.4, 0.3, 0.2, 0.1]);
        assert_eq!(sorted(nucleus_support(&d, 0.5).unwrap()), vec![0, 1]);
        assert_eq!(nucleus_support(&d, 0.3).unwrap(), vec![0]);
        assert_eq!(sorted(nucleus_support(&d, 1.0).unwrap()), vec![0, 1, 2, 3]);
        assert!(nucleus_support(&d, 0.0).is_err());
        assert!(nucleus_support(&d, 1.5).is_err());
    }

    #[test]
    fn typical_supports() {
        let d = dist(&[0.5, 0.25, 0.25]);
        // Deviations tie at ln(2)/2; the heavier token ranks first and alone reaches 0.5.
        assert_eq!(typical_support(&d, 0.5).unwrap(), vec![0]);
        assert_eq!(typical_support(&d, 0.6).unwrap(), vec![0, 1]);
        assert_eq!(sorted(typical_support(&d, 1.0).unwrap()), vec![0, 1, 2]);

        let u = ProbabilityDistribution::uniform(10).unwrap();
        assert_eq!(typical_support(&u, 0.3).unwrap(), vec![0, 1, 2]);
        assert_eq!(typical_support(&u, 0.35).unwrap(), vec![0, 1, 2, 3]);

        let z = dist(&[0.0, 0.5, 0.5]);
        assert_eq!(typical_support(&z, 1.0).unwrap(), vec![1, 2]);
    }
}
