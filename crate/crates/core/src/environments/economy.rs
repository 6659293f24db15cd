//! The exchange economy: K goods, K agents, 100 units of each good, and
//! Cobb-Douglas preferences `u_i = prod a_k^theta_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BodyError, Environment, EnvironmentId, ProposalBody};
use crate::engine::{Roster, Transcript};

/// Total quantity of every good in the market.
pub const GOOD_QUANTITY: f64 = 100.0;

/// Tolerance for per-good conservation checks.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

/// A full goods allocation: `rows[agent][good]` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    rows: Vec<Vec<f64>>,
}

impl Allocation {
    /// Builds a validated allocation: rectangular, nonnegative, and with
    /// every good column summing to 100 within tolerance.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, BodyError> {
        let alloc = Self::from_rows_unchecked(rows)?;
        alloc.check_conservation()?;
        Ok(alloc)
    }

    /// Shape and sign checks only; conservation left to the caller.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Result<Self, BodyError> {
        let agents = rows.len();
        let goods = rows.first().map(Vec::len).unwrap_or(0);
        if agents == 0 || goods == 0 || rows.iter().any(|r| r.len() != goods) {
            return Err(BodyError::BadShape { agents, goods });
        }
        for (i, row) in rows.iter().enumerate() {
            for (k, amount) in row.iter().enumerate() {
                if !amount.is_finite() || *amount < 0.0 {
                    return Err(BodyError::NegativeAmount { agent: i, good: k });
                }
            }
        }
        Ok(Allocation { rows })
    }

    pub fn check_conservation(&self) -> Result<(), BodyError> {
        for good in 0..self.goods() {
            let sum: f64 = self.rows.iter().map(|r| r[good]).sum();
            if (sum - GOOD_QUANTITY).abs() > CONSERVATION_TOLERANCE {
                return Err(BodyError::NotConserved {
                    good,
                    sum,
                    expected: GOOD_QUANTITY,
                });
            }
        }
        Ok(())
    }

    /// Every agent holds `100/K` of each good.
    pub fn even_split(agents: usize, goods: usize) -> Self {
        let share = GOOD_QUANTITY / agents as f64;
        Allocation {
            rows: vec![vec![share; goods]; agents],
        }
    }

    /// One agent holds everything.
    pub fn all_to(agent: usize, agents: usize, goods: usize) -> Self {
        let mut rows = vec![vec![0.0; goods]; agents];
        rows[agent] = vec![GOOD_QUANTITY; goods];
        Allocation { rows }
    }

    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    pub fn goods(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.rows[agent]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_body(self) -> ProposalBody {
        ProposalBody::Allocation { rows: self.rows }
    }
}

/// Exponent vector of one agent's Cobb-Douglas utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CobbDouglasUtility {
    pub theta: Vec<f64>,
}

impl CobbDouglasUtility {
    pub fn new(theta: Vec<f64>) -> Self {
        assert!(theta.iter().all(|t| *t >= 0.0), "exponents must be >= 0");
        CobbDouglasUtility { theta }
    }

    pub fn eval(&self, amounts: &[f64]) -> f64 {
        cobb_douglas(amounts, &self.theta)
    }

    /// Rendering like `u = a_Good1^0.8000 * a_Good2^0.0667 * ...`.
    pub fn describe(&self, good_names: &[String]) -> String {
        let terms: Vec<String> = self
            .theta
            .iter()
            .zip(good_names)
            .map(|(t, g)| format!("a_{g}^{t:.4}"))
            .collect();
        format!("u = {}", terms.join(" * "))
    }
}

/// `prod a_k^theta_k` with `0^0 = 1` and zero whenever some `a_k = 0`
/// has positive exponent.
pub fn cobb_douglas(amounts: &[f64], theta: &[f64]) -> f64 {
    assert_eq!(amounts.len(), theta.len(), "dimension mismatch");
    assert!(
        amounts.iter().all(|a| *a >= 0.0),
        "amounts must be nonnegative"
    );
    let mut product = 1.0;
    for (a, t) in amounts.iter().zip(theta) {
        if *t == 0.0 {
            continue;
        }
        if *a == 0.0 {
            return 0.0;
        }
        product *= a.powf(*t);
    }
    product
}

/// Group total utility `U = sum_i u_i`.
pub fn group_total(alloc: &Allocation, utilities: &[CobbDouglasUtility]) -> f64 {
    assert_eq!(alloc.agents(), utilities.len(), "one utility per agent");
    utilities
        .iter()
        .enumerate()
        .map(|(i, u)| u.eval(alloc.row(i)))
        .sum()
}

/// The four utility-set presets.
///
/// The literal asymmetric preset keeps the off-diagonal exponent
/// `(1 - 0.8) / K`, so exponents sum to less than one; the normalized
/// variant divides by `K - 1` instead so they sum to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilitySetPreset {
    AsymmetricLiteral,
    AsymmetricNormalized,
    Symmetric,
    Uniform,
}

pub const SELF_WEIGHT: f64 = 0.8;

impl UtilitySetPreset {
    pub const ALL: [UtilitySetPreset; 4] = [
        UtilitySetPreset::AsymmetricLiteral,
        UtilitySetPreset::AsymmetricNormalized,
        UtilitySetPreset::Symmetric,
        UtilitySetPreset::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UtilitySetPreset::AsymmetricLiteral => "asymmetric-literal",
            UtilitySetPreset::AsymmetricNormalized => "asymmetric-normalized",
            UtilitySetPreset::Symmetric => "symmetric",
            UtilitySetPreset::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Exponent vectors for `k` agents over `k` goods.
    pub fn utilities(self, k: usize) -> Vec<CobbDouglasUtility> {
        assert!(k >= 2, "need at least two agents");
        (0..k)
            .map(|agent| {
                let theta = match self {
                    UtilitySetPreset::AsymmetricLiteral => {
                        weighted_theta(k, agent, (1.0 - SELF_WEIGHT) / k as f64)
                    }
                    UtilitySetPreset::AsymmetricNormalized => {
                        weighted_theta(k, agent, (1.0 - SELF_WEIGHT) / (k - 1) as f64)
                    }
                    UtilitySetPreset::Symmetric => {
                        weighted_theta(k, 0, (1.0 - SELF_WEIGHT) / k as f64)
                    }
                    UtilitySetPreset::Uniform => vec![1.0 / k as f64; k],
                };
                CobbDouglasUtility::new(theta)
            })
            .collect()
    }
}

fn weighted_theta(k: usize, favored: usize, other: f64) -> Vec<f64> {
    (0..k)
        .map(|good| if good == favored { SELF_WEIGHT } else { other })
        .collect()
}

/// Starting state of the market before any acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endowment {
    EvenSplit,
}

/// The exchange-economy environment.
#[derive(Debug, Clone)]
pub struct EconomyEnv {
    pub agents: usize,
    pub goods: usize,
    pub preset: UtilitySetPreset,
    pub utilities: Vec<CobbDouglasUtility>,
    pub endowment: Allocation,
}

impl EconomyEnv {
    pub fn new(agents: usize, preset: UtilitySetPreset) -> Self {
        let goods = agents;
        EconomyEnv {
            agents,
            goods,
            preset,
            utilities: preset.utilities(agents),
            endowment: Allocation::even_split(agents, goods),
        }
    }

    pub fn good_names(&self) -> Vec<String> {
        (1..=self.goods).map(|k| format!("Good{k}")).collect()
    }

    pub fn utility_of(&self, agent: u32, body: &ProposalBody) -> Result<f64, BodyError> {
        let alloc = body.as_allocation().ok_or(BodyError::WrongKind {
            expected: "allocation",
        })?;
        if alloc.agents() != self.agents || alloc.goods() != self.goods {
            return Err(BodyError::BadShape {
                agents: alloc.agents(),
                goods: alloc.goods(),
            });
        }
        Ok(self.utilities[agent as usize].eval(alloc.row(agent as usize)))
    }

    /// The allocation standing at the end of each round: the latest
    /// accepted allocation, or the endowment before any acceptance.
    pub fn standing_allocations(&self, transcript: &Transcript) -> Vec<Allocation> {
        let mut standing = self.endowment.clone();
        let mut out = Vec::with_capacity(transcript.rounds.len());
        for record in &transcript.rounds {
            if let Some(entry) = transcript
                .accepted_history
                .iter()
                .find(|e| e.round == record.round && record.outcome.selected().is_some())
            {
                if let Some(alloc) = entry.proposal.body.as_allocation() {
                    standing = alloc;
                }
            }
            out.push(standing.clone());
        }
        out
    }
}

impl Environment for EconomyEnv {
    fn id(&self) -> EnvironmentId {
        EnvironmentId::Economy
    }

    fn agent_count(&self) -> usize {
        self.agents
    }

    fn task_description(&self, roster: &Roster) -> String {
        let agent_list = roster.names().join(", ");
        let goods = self.good_names();
        let good_list = goods.join(", ");
        let quantities: Vec<String> = goods
            .iter()
            .map(|g| format!("{g}: {GOOD_QUANTITY}"))
            .collect();
        format!(
            "You will collaborate with other agents in a recurring exchange market game.\n\
             There are {} agents in this market: {agent_list}.\n\
             There are {} goods in the market: {good_list}. Total quantity of each good is as follows: {}.\n\
             In this game, you will collaboratively decide how to distribute the goods among the agents. Your goal is to maximize your own utility function.",
            self.agents,
            self.goods,
            quantities.join(", "),
        )
    }

    fn agent_background(&self, agent: u32, _roster: &Roster) -> String {
        let util = self.utilities[agent as usize].describe(&self.good_names());
        format!(
            "Your goal is to maximize your individual utility function by communicating, proposing, and voting with other agents. Your utility function is {util}"
        )
    }

    fn agent_utility_text(&self, agent: u32) -> Option<String> {
        Some(self.utilities[agent as usize].describe(&self.good_names()))
    }

    fn proposal_format_text(&self, roster: &Roster) -> String {
        let goods = self.good_names();
        let per_agent: Vec<String> = roster
            .names()
            .iter()
            .map(|name| {
                let fields: Vec<String> =
                    goods.iter().map(|g| format!("\"{g}\": <number>")).collect();
                format!("\"{name}\": {{{}}}", fields.join(", "))
            })
            .collect();
        format!("{{{}}}", per_agent.join(", "))
    }

    fn validate_body(&self, body: &ProposalBody) -> Result<(), BodyError> {
        let rows = match body {
            ProposalBody::Allocation { rows } => rows,
            ProposalBody::Rating { .. } => {
                return Err(BodyError::WrongKind {
                    expected: "allocation",
                })
            }
        };
        if rows.len() != self.agents || rows.iter().any(|r| r.len() != self.goods) {
            return Err(BodyError::BadShape {
                agents: rows.len(),
                goods: rows.first().map(Vec::len).unwrap_or(0),
            });
        }
        Allocation::new(rows.clone()).map(|_| ())
    }

    fn parse_proposal_payload(
        &self,
        value: &serde_json::Value,
        roster: &Roster,
    ) -> Result<ProposalBody, BodyError> {
        let object = value
            .as_object()
            .ok_or_else(|| BodyError::Malformed("expected an allocation object".into()))?;
        let goods = self.good_names();
        let mut rows = Vec::with_capacity(self.agents);
        for name in roster.names() {
            let row_value = object
                .get(name)
                .ok_or_else(|| BodyError::Malformed(format!("missing agent {name}")))?;
            let row_object = row_value
                .as_object()
                .ok_or_else(|| BodyError::Malformed(format!("agent {name} is not an object")))?;
            let mut row = Vec::with_capacity(self.goods);
            for good in &goods {
                let amount = row_object
                    .get(good)
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| {
                        BodyError::Malformed(format!("missing amount for {name}/{good}"))
                    })?;
                row.push(amount);
            }
            rows.push(row);
        }
        let body = ProposalBody::Allocation { rows };
        self.validate_body(&body)?;
        Ok(body)
    }

    fn render_body(&self, body: &ProposalBody, roster: &Roster) -> String {
        match body {
            ProposalBody::Allocation { rows } => {
                let goods = self.good_names();
                let lines: Vec<String> = rows
                    .iter()
                    .zip(roster.names())
                    .map(|(row, name)| {
                        let parts: Vec<String> = row
                            .iter()
                            .zip(&goods)
                            .map(|(amount, good)| format!("{good}: {amount:.2}"))
                            .collect();
                        format!("{name} receives {}", parts.join(", "))
                    })
                    .collect();
                lines.join("; ")
            }
            ProposalBody::Rating { value } => format!("rating {value:.2}"),
        }
    }
}

/// Quality, efficiency, and fairness metrics over one economy transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconMetrics {
    /// Normalized group utility at the end of each round, `U_r / U_max`.
    pub u_series: Vec<f64>,
    /// `AUC@n = sum_{r=1..n} U_r` for n in {3, 5, 10} (those <= R).
    pub auc: BTreeMap<u32, f64>,
    /// Smallest over largest individual utility of the final standing allocation.
    pub minmax: f64,
    /// Fraction of proposal events whose body strictly improves the
    /// proposer's utility over the standing allocation.
    pub rationality: f64,
    /// Fraction of rounds with `U_r` unchanged from `U_{r-1}`.
    pub rigidity: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("u_max must be positive and finite, got {0}")]
    BadUMax(f64),
    #[error("transcript is not from the economy environment")]
    WrongEnvironment,
}

/// Computes the five paper metrics from a transcript.
///
/// `u_max` normalizes the utility series and must come from the certified
/// optimizer (or an analytic bound).
pub fn econ_metrics(
    transcript: &Transcript,
    env: &EconomyEnv,
    u_max: f64,
) -> Result<EconMetrics, MetricsError> {
    if !(u_max.is_finite() && u_max > 0.0) {
        return Err(MetricsError::BadUMax(u_max));
    }
    let standing = env.standing_allocations(transcript);
    if standing.is_empty() {
        return Err(MetricsError::WrongEnvironment);
    }
    let rounds = standing.len();
    let u_series: Vec<f64> = standing
        .iter()
        .map(|alloc| group_total(alloc, &env.utilities) / u_max)
        .collect();

    let mut auc = BTreeMap::new();
    for n in [3u32, 5, 10] {
        if (n as usize) <= rounds {
            auc.insert(n, u_series[..n as usize].iter().sum());
        }
    }

    let final_alloc = standing.last().expect("nonempty");
    let individual: Vec<f64> = env
        .utilities
        .iter()
        .enumerate()
        .map(|(i, u)| u.eval(final_alloc.row(i)))
        .collect();
    let u_min = individual.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_peak = individual.iter().cloned().fold(0.0, f64::max);
    let minmax = if u_peak > 0.0 { u_min / u_peak } else { 0.0 };

    // Rationality walks proposal events against the allocation standing
    // when the proposal was made (the previous round's end state).
    let mut events = 0usize;
    let mut rational = 0usize;
    let mut standing_before = env.endowment.clone();
    for (idx, record) in transcript.rounds.iter().enumerate() {
        for (agent, action) in &record.new_proposals {
            if let Some(proposal) = action {
                events += 1;
                if let Some(alloc) = proposal.body.as_allocation() {
                    let index = agent.index();
                    let proposed = env.utilities[index].eval(alloc.row(index));
                    let current = env.utilities[index].eval(standing_before.row(index));
                    if proposed > current {
                        rational += 1;
                    }
                }
            }
        }
        standing_before = standing[idx].clone();
    }
    let rationality = if events > 0 {
        rational as f64 / events as f64
    } else {
        0.0
    };

    let u0 = group_total(&env.endowment, &env.utilities) / u_max;
    let mut unchanged = 0usize;
    let mut prev = u0;
    for u in &u_series {
        if *u == prev {
            unchanged += 1;
        }
        prev = *u;
    }
    let rigidity = unchanged as f64 / rounds as f64;

    Ok(EconMetrics {
        u_series,
        auc,
        minmax,
        rationality,
        rigidity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cobb_douglas_geometric_mean_of_equal_values() {
        let third = 100.0 / 3.0;
        let u = cobb_douglas(&[third, third, third], &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!((u - third).abs() < 1e-9);
    }

    #[test]
    fn cobb_douglas_zero_factor_with_positive_exponent() {
        assert_eq!(cobb_douglas(&[100.0, 0.0, 0.0], &[0.8, 0.1, 0.1]), 0.0);
    }

    #[test]
    fn cobb_douglas_zero_exponent_ignores_amount() {
        assert_eq!(cobb_douglas(&[0.0, 50.0], &[0.0, 1.0]), 50.0);
    }

    #[test]
    fn group_total_uniform_even_split_is_100() {
        let alloc = Allocation::even_split(3, 3);
        let utilities = UtilitySetPreset::Uniform.utilities(3);
        assert!((group_total(&alloc, &utilities) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn group_total_all_goods_to_one_agent_uniform() {
        let alloc = Allocation::all_to(0, 3, 3);
        let utilities = UtilitySetPreset::Uniform.utilities(3);
        assert!((group_total(&alloc, &utilities) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn presets_match_their_formulas() {
        let other = (1.0 - SELF_WEIGHT) / 3.0;
        let literal = UtilitySetPreset::AsymmetricLiteral.utilities(3);
        assert_eq!(literal[1].theta, vec![other, 0.8, other]);
        let normalized = UtilitySetPreset::AsymmetricNormalized.utilities(3);
        assert!((normalized[0].theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let symmetric = UtilitySetPreset::Symmetric.utilities(3);
        assert!(symmetric.iter().all(|u| u.theta[0] == 0.8));
        let uniform = UtilitySetPreset::Uniform.utilities(4);
        assert!(uniform.iter().all(|u| u.theta == vec![0.25; 4]));
    }

    #[test]
    fn allocation_conservation_enforced() {
        let bad = Allocation::new(vec![vec![60.0, 50.0], vec![50.0, 50.0]]);
        assert!(matches!(bad, Err(BodyError::NotConserved { good: 0, .. })));
        let good = Allocation::new(vec![vec![60.0, 50.0], vec![40.0, 50.0]]);
        assert!(good.is_ok());
    }

    #[test]
    fn scale_covariance_of_cobb_douglas() {
        // u(c*a) = c^(sum theta) * u(a)
        let theta = [0.8, 0.2 / 3.0, 0.2 / 3.0];
        let a = [60.0, 20.0, 20.0];
        let c = 1.7;
        let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
        let lhs = cobb_douglas(&scaled, &theta);
        let rhs = c.powf(theta.iter().sum()) * cobb_douglas(&a, &theta);
        assert!((lhs - rhs).abs() / rhs.abs() < 1e-9);
    }
}
