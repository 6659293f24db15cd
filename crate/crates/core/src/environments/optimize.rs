//! Certified maximization of the group total utility over the per-good
//! simplex constraints, via multi-start projected gradient ascent with
//! step halving.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::economy::{Allocation, CobbDouglasUtility, UtilitySetPreset, GOOD_QUANTITY};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 32,
            max_iterations: 10_000,
            tolerance: 1e-10,
            seed: 0x5eed_0001,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UMaxResult {
    pub value: f64,
    pub argmax: Allocation,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum UMaxError {
    #[error("optimizer failed to converge on every start; best value found {best}")]
    NonConvergence { best: f64 },
}

/// Largest achievable `U = sum_i u_i` for a preset, with the argmax
/// allocation. Errors only when no start converges, carrying the best
/// value found.
pub fn u_max(
    preset: UtilitySetPreset,
    agents: usize,
    cfg: &OptimizerConfig,
) -> Result<UMaxResult, UMaxError> {
    let utilities = preset.utilities(agents);
    maximize_group_total(&utilities, agents, cfg)
}

/// Same as [`u_max`] but for an explicit utility set.
pub fn maximize_group_total(
    utilities: &[CobbDouglasUtility],
    agents: usize,
    cfg: &OptimizerConfig,
) -> Result<UMaxResult, UMaxError> {
    let goods = utilities
        .first()
        .map(|u| u.theta.len())
        .expect("nonempty utility set");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, Vec<Vec<f64>>, bool)> = None;

    for start in 0..cfg.starts.max(1) {
        let rows = if start == 0 {
            even_rows(agents, goods)
        } else {
            random_rows(agents, goods, &mut rng)
        };
        let (value, rows, converged) = ascend(rows, utilities, cfg);
        let better = best
            .as_ref()
            .map(|(v, _, _)| value > *v)
            .unwrap_or(true);
        if better {
            best = Some((value, rows, converged));
        }
    }

    let (value, rows, converged) = best.expect("at least one start");
    let argmax = Allocation::new(rows).expect("projection keeps feasibility");
    if !converged {
        return Err(UMaxError::NonConvergence { best: value });
    }
    Ok(UMaxResult {
        value,
        argmax,
        converged,
    })
}

fn even_rows(agents: usize, goods: usize) -> Vec<Vec<f64>> {
    vec![vec![GOOD_QUANTITY / agents as f64; goods]; agents]
}

fn random_rows(agents: usize, goods: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; goods]; agents];
    for good in 0..goods {
        // Exponential spacings give a uniform point on the simplex.
        let draws: Vec<f64> = (0..agents)
            .map(|_| -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        for (agent, draw) in draws.iter().enumerate() {
            rows[agent][good] = GOOD_QUANTITY * draw / total;
        }
    }
    rows
}

fn ascend(
    mut rows: Vec<Vec<f64>>,
    utilities: &[CobbDouglasUtility],
    cfg: &OptimizerConfig,
) -> (f64, Vec<Vec<f64>>, bool) {
    let agents = rows.len();
    let goods = rows[0].len();
    let mut value = objective(&rows, utilities);
    let mut step = GOOD_QUANTITY;
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let grad = gradient(&rows, utilities);
        let mut improved = false;
        // Step halving: retreat until the projected step ascends.
        while step > 1e-16 {
            let mut trial = rows.clone();
            for agent in 0..agents {
                for good in 0..goods {
                    trial[agent][good] += step * grad[agent][good];
                }
            }
            project_columns(&mut trial);
            let trial_value = objective(&trial, utilities);
            if trial_value > value {
                let gain = trial_value - value;
                rows = trial;
                value = trial_value;
                improved = true;
                if gain < cfg.tolerance * value.abs().max(1.0) {
                    converged = true;
                }
                // Allow the step to grow back after a success.
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    (value, rows, converged)
}

fn objective(rows: &[Vec<f64>], utilities: &[CobbDouglasUtility]) -> f64 {
    rows.iter()
        .zip(utilities)
        .map(|(row, u)| u.eval(row))
        .sum()
}

fn gradient(rows: &[Vec<f64>], utilities: &[CobbDouglasUtility]) -> Vec<Vec<f64>> {
    rows.iter()
        .zip(utilities)
        .map(|(row, u)| {
            let value = u.eval(row);
            row.iter()
                .zip(&u.theta)
                .map(|(a, t)| {
                    if *t == 0.0 {
                        0.0
                    } else if *a <= 0.0 {
                        // Dead face for this agent; multi-start recovers.
                        0.0
                    } else {
                        t * value / a
                    }
                })
                .collect()
        })
        .collect()
}

/// Euclidean projection of every good column onto the scaled simplex
/// `{x >= 0, sum x = 100}`.
fn project_columns(rows: &mut [Vec<f64>]) {
    let agents = rows.len();
    let goods = rows[0].len();
    for good in 0..goods {
        let column: Vec<f64> = (0..agents).map(|a| rows[a][good]).collect();
        let projected = project_simplex(&column, GOOD_QUANTITY);
        for (agent, value) in projected.into_iter().enumerate() {
            rows[agent][good] = value;
        }
    }
}

fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - total) / (i + 1) as f64;
        if value - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|x| (x - threshold).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_preserves_sum_and_sign() {
        let p = project_simplex(&[80.0, 90.0, -30.0], 100.0);
        assert!((p.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!(p.iter().all(|x| *x >= 0.0));
        // Already-feasible points are fixed.
        let q = project_simplex(&[20.0, 30.0, 50.0], 100.0);
        for (a, b) in q.iter().zip([20.0, 30.0, 50.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_preset_reaches_analytic_bound() {
        // AM-GM: sum of geometric means is at most 100, attained at even split.
        let result = u_max(UtilitySetPreset::Uniform, 3, &OptimizerConfig::default()).unwrap();
        assert!((result.value - 100.0).abs() <= 1e-6, "got {}", result.value);
    }

    #[test]
    fn optimizer_dominates_random_allocations() {
        use rand::SeedableRng;

        use crate::environments::economy::group_total;
        let cfg = OptimizerConfig::default();
        for preset in UtilitySetPreset::ALL {
            let result = u_max(preset, 3, &cfg).unwrap();
            let utilities = preset.utilities(3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for _ in 0..1000 {
                let rows = super::random_rows(3, 3, &mut rng);
                let alloc = Allocation::new(rows).unwrap();
                let total = group_total(&alloc, &utilities);
                assert!(
                    result.value + 1e-7 >= total,
                    "{preset:?}: optimizer {} beaten by sample {total}",
                    result.value
                );
            }
        }
    }
}
