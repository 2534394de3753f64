//! The selection operator: score every policy couple by a weighted blend of
//! performance and diversity fitness, and return the top couples for
//! reproduction.

use rand::seq::SliceRandom;

use crate::error::{GpoError, Result};
use crate::nn::dist::gauss_kl;
use crate::nn::policy::GaussianPolicy;
use crate::rng::Prng;

/// A scored couple; indices satisfy i < j.
#[derive(Debug, Clone, PartialEq)]
pub struct Couple {
    pub i: usize,
    pub j: usize,
    pub f_perf: f64,
    pub f_div: f64,
    pub score: f64,
}

/// Sum of the two policies' expected returns.
pub fn performance_fitness(mean_return_x: f64, mean_return_y: f64) -> f64 {
    mean_return_x + mean_return_y
}

/// Mean symmetrized closed-form KL between the two policies' action
/// distributions over a shared probe state set.
pub fn diversity_fitness(
    px: &GaussianPolicy,
    py: &GaussianPolicy,
    probe_states: &[Vec<f64>],
) -> Result<f64> {
    if probe_states.is_empty() {
        return Err(GpoError::EmptyProbe);
    }
    let mut sum = 0.0;
    for s in probe_states {
        let dx = px.dist(s)?;
        let dy = py.dist(s)?;
        sum += 0.5 * (gauss_kl(&dx, &dy) + gauss_kl(&dy, &dx));
    }
    Ok(sum / probe_states.len() as f64)
}

/// Score all C(m, 2) couples with alpha_perf * f_perf + alpha_div * f_div
/// and return the top `count` by score. Ties break by lexicographic index
/// order; a policy may appear in several returned couples.
pub fn select_couples(
    perf: &[f64],
    div: &dyn Fn(usize, usize) -> f64,
    alpha: (f64, f64),
    count: usize,
) -> Result<Vec<Couple>> {
    let m = perf.len();
    let max = m * (m - 1) / 2;
    if count > max {
        return Err(GpoError::CoupleCountTooLarge { count, max });
    }
    let mut couples = Vec::with_capacity(max);
    for i in 0..m {
        for j in (i + 1)..m {
            let f_perf = performance_fitness(perf[i], perf[j]);
            let f_div = div(i, j);
            couples.push(Couple {
                i,
                j,
                f_perf,
                f_div,
                score: alpha.0 * f_perf + alpha.1 * f_div,
            });
        }
    }
    couples.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    couples.truncate(count);
    Ok(couples)
}

/// Uniformly random distinct couples (the ablation's selection baseline).
pub fn random_couples(m: usize, count: usize, rng: &mut Prng) -> Result<Vec<Couple>> {
    let max = m * (m - 1) / 2;
    if count > max {
        return Err(GpoError::CoupleCountTooLarge { count, max });
    }
    let mut all: Vec<(usize, usize)> = Vec::with_capacity(max);
    for i in 0..m {
        for j in (i + 1)..m {
            all.push((i, j));
        }
    }
    all.shuffle(rng);
    Ok(all
        .into_iter()
        .take(count)
        .map(|(i, j)| Couple {
            i,
            j,
            f_perf: 0.0,
            f_div: 0.0,
            score: 0.0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::MlpParams;
    use crate::rng::{self, Stream};
    use rand::Rng;

    #[test]
    fn performance_fitness_arithmetic() {
        assert_eq!(performance_fitness(5.0, 3.0), 8.0);
        assert_eq!(performance_fitness(3.0, 5.0), performance_fitness(5.0, 3.0));
        assert_eq!(performance_fitness(0.0, 0.0), 0.0);
    }

    fn constant_policy(bias: f64) -> GaussianPolicy {
        let mut net = MlpParams::zeros(&[2, 1]);
        net.load_flat(&[0.0, 0.0, bias]);
        GaussianPolicy {
            mean_net: net,
            log_std: vec![0.0],
        }
    }

    #[test]
    fn diversity_of_identical_policies_is_zero() {
        let p = constant_policy(0.4);
        let probes = vec![vec![0.0, 0.0], vec![1.0, -1.0]];
        assert_eq!(diversity_fitness(&p, &p.clone(), &probes).unwrap(), 0.0);
    }

    #[test]
    fn diversity_of_unit_mean_gap_is_half() {
        // N(0,1) vs N(1,1) at every state: KL is 0.5 in both directions.
        let px = constant_policy(0.0);
        let py = constant_policy(1.0);
        let probes = vec![vec![0.3, 0.1], vec![-0.8, 0.9], vec![2.0, 0.0]];
        let f = diversity_fitness(&px, &py, &probes).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn diversity_matches_direct_per_state_loop() {
        let mut r = rng::derive(91, 0, 0, Stream::Select);
        let px = GaussianPolicy::init(&[2, 4, 1], &mut r);
        let py = GaussianPolicy::init(&[2, 4, 1], &mut r);
        let probes: Vec<Vec<f64>> = (0..16)
            .map(|_| vec![r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)])
            .collect();
        let got = diversity_fitness(&px, &py, &probes).unwrap();
        let mut want = 0.0;
        for s in &probes {
            let dx = px.dist(s).unwrap();
            let dy = py.dist(s).unwrap();
            want += 0.5 * (gauss_kl(&dx, &dy) + gauss_kl(&dy, &dx));
        }
        want /= probes.len() as f64;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn empty_probe_set_is_an_error() {
        let p = constant_policy(0.0);
        assert!(diversity_fitness(&p, &p.clone(), &[]).is_err());
    }

    #[test]
    fn three_policy_enumeration() {
        let perf = [5.0, 1.0, 3.0];
        let out = select_couples(&perf, &|_, _| 0.0, (1.0, 0.0), 3).unwrap();
        assert_eq!((out[0].i, out[0].j, out[0].score), (0, 2, 8.0));
        assert_eq!((out[1].i, out[1].j, out[1].score), (0, 1, 6.0));
        assert_eq!((out[2].i, out[2].j, out[2].score), (1, 2, 4.0));
    }

    #[test]
    fn top_couple_is_the_two_best_policies() {
        let perf = [0.3, 2.0, -1.0, 1.4];
        let out = select_couples(&perf, &|_, _| 0.0, (1.0, 0.0), 1).unwrap();
        assert_eq!((out[0].i, out[0].j), (1, 3));
    }

    #[test]
    fn count_above_pair_count_is_an_error() {
        let perf = [0.0, 1.0];
        assert!(select_couples(&perf, &|_, _| 0.0, (1.0, 0.0), 2).is_err());
    }

    #[test]
    fn identical_scores_fall_back_to_lexicographic_order() {
        let perf = [1.0, 1.0, 1.0];
        let out = select_couples(&perf, &|_, _| 0.0, (0.0, 0.0), 3).unwrap();
        let order: Vec<(usize, usize)> = out.iter().map(|c| (c.i, c.j)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn selection_is_invariant_to_positive_rescaling() {
        let mut r = rng::derive(92, 0, 0, Stream::Select);
        for _ in 0..20 {
            let m = 6;
            let perf: Vec<f64> = (0..m).map(|_| r.random_range(-5.0..=5.0)).collect();
            let mut div = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in 0..m {
                    if i < j {
                        div[i][j] = r.random_range(0.0..=2.0);
                    }
                }
            }
            let c: f64 = r.random_range(0.1..=10.0);
            let base = select_couples(&perf, &|i, j| div[i][j], (1.0, 0.7), 4).unwrap();
            let scaled_perf: Vec<f64> = perf.iter().map(|p| c * p).collect();
            let scaled =
                select_couples(&scaled_perf, &|i, j| c * div[i][j], (1.0, 0.7), 4).unwrap();
            let a: Vec<(usize, usize)> = base.iter().map(|x| (x.i, x.j)).collect();
            let b: Vec<(usize, usize)> = scaled.iter().map(|x| (x.i, x.j)).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn output_pairs_are_distinct() {
        let perf = [1.0, 2.0, 3.0, 4.0, 5.0];
        let out = select_couples(&perf, &|_, _| 0.0, (1.0, 0.0), 10).unwrap();
        let mut seen = std::collections::HashSet::new();
        for c in &out {
            assert!(c.i < c.j);
            assert!(seen.insert((c.i, c.j)));
        }
    }

    #[test]
    fn random_couples_are_distinct_and_reproducible() {
        let a = random_couples(5, 5, &mut rng::derive(93, 0, 0, Stream::Select)).unwrap();
        let b = random_couples(5, 5, &mut rng::derive(93, 0, 0, Stream::Select)).unwrap();
        assert_eq!(a, b);
        let mut seen = std::collections::HashSet::new();
        for c in &a {
            assert!(seen.insert((c.i, c.j)));
        }
        assert!(random_couples(3, 4, &mut rng::derive(93, 0, 0, Stream::Select)).is_err());
    }
}
