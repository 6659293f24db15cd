//! The dialogue-act transition graph: `p_{A->B} = |A->B| / |A|` over
//! consecutive rounds and distinct agents, with virtual `Start` at round
//! 0 and `End` at round R+1 for every agent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DialogueAct;

/// How the numerator counts a source-act occurrence followed by `B`.
///
/// The default counts each (simulation, round, agent, A) occurrence once
/// when at least one other agent shows `B` next round, which keeps every
/// probability in [0, 1]. The literal pair-tuple reading counts each
/// (i, j) pair separately and can exceed 1 with three or more agents; it
/// stays available behind this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumeratorMode {
    #[default]
    ExistencePerSource,
    PairTuples,
}

/// Per-simulation act labels: `labels[round][agent]`, rounds 1..=R.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLabels {
    pub labels: Vec<Vec<BTreeSet<DialogueAct>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TransitionError {
    #[error("simulation {simulation}: round {round}, agent {agent} has no labels")]
    Unlabeled {
        simulation: usize,
        round: u32,
        agent: u32,
    },
    #[error("simulation {simulation}: expected {expected} rounds, found {found}")]
    WrongRounds {
        simulation: usize,
        expected: u32,
        found: usize,
    },
}

/// Directed edge probabilities with the underlying counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    pub pair_counts: BTreeMap<(DialogueAct, DialogueAct), u64>,
    pub source_counts: BTreeMap<DialogueAct, u64>,
    pub mode: NumeratorMode,
}

impl TransitionGraph {
    /// `p_{A->B}`, defined only where the source act was observed.
    pub fn probability(&self, source: DialogueAct, target: DialogueAct) -> Option<f64> {
        let denominator = *self.source_counts.get(&source)?;
        if denominator == 0 {
            return None;
        }
        let numerator = self.pair_counts.get(&(source, target)).copied().unwrap_or(0);
        Some(numerator as f64 / denominator as f64)
    }

    /// All defined edges with nonzero numerators.
    pub fn edges(&self) -> Vec<(DialogueAct, DialogueAct, f64)> {
        self.pair_counts
            .iter()
            .filter_map(|((a, b), _)| self.probability(*a, *b).map(|p| (*a, *b, p)))
            .collect()
    }

    /// CSV edge list: `source,target,pair_count,source_count,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,target,pair_count,source_count,probability\n");
        for (source, target, probability) in self.edges() {
            let pair = self.pair_counts[&(source, target)];
            let denom = self.source_counts[&source];
            out.push_str(&format!(
                "{source},{target},{pair},{denom},{probability}\n"
            ));
        }
        out
    }

    /// DOT rendering. With `top_only`, only the most probable outgoing
    /// edge per act is shown and self-loops are excluded.
    pub fn to_dot(&self, top_only: bool) -> String {
        let edges: Vec<(DialogueAct, DialogueAct, f64)> = if top_only {
            most_probable_edges(self)
        } else {
            self.edges()
        };
        let mut out = String::from("digraph dialogue_acts {\n");
        for (source, target, probability) in edges {
            out.push_str(&format!(
                "    \"{source}\" -> \"{target}\" [label=\"{probability:.2}\"];\n"
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the transition graph from labeled simulations, all of length
/// `rounds`.
pub fn transition_graph(
    simulations: &[SimulationLabels],
    rounds: u32,
    mode: NumeratorMode,
) -> Result<TransitionGraph, TransitionError> {
    let mut pair_counts: BTreeMap<(DialogueAct, DialogueAct), u64> = BTreeMap::new();
    let mut source_counts: BTreeMap<DialogueAct, u64> = BTreeMap::new();
    let start: BTreeSet<DialogueAct> = BTreeSet::from([DialogueAct::Start]);
    let end: BTreeSet<DialogueAct> = BTreeSet::from([DialogueAct::End]);

    for (simulation, sim) in simulations.iter().enumerate() {
        if sim.labels.len() != rounds as usize {
            return Err(TransitionError::WrongRounds {
                simulation,
                expected: rounds,
                found: sim.labels.len(),
            });
        }
        let agents = sim.labels.first().map(Vec::len).unwrap_or(0);
        for (round_index, per_agent) in sim.labels.iter().enumerate() {
            for (agent, acts) in per_agent.iter().enumerate() {
                if acts.is_empty() {
                    return Err(TransitionError::Unlabeled {
                        simulation,
                        round: round_index as u32 + 1,
                        agent: agent as u32,
                    });
                }
            }
        }
        // Rounds 1..=R+1; round 0 is virtual Start, round R+1 virtual End.
        for round in 1..=rounds + 1 {
            let prev_of = |agent: usize| -> &BTreeSet<DialogueAct> {
                if round == 1 {
                    &start
                } else {
                    &sim.labels[round as usize - 2][agent]
                }
            };
            let curr_of = |agent: usize| -> &BTreeSet<DialogueAct> {
                if round == rounds + 1 {
                    &end
                } else {
                    &sim.labels[round as usize - 1][agent]
                }
            };
            for source_agent in 0..agents {
                for act in prev_of(source_agent) {
                    *source_counts.entry(*act).or_insert(0) += 1;
                }
                match mode {
                    NumeratorMode::ExistencePerSource => {
                        let mut next_acts: BTreeSet<DialogueAct> = BTreeSet::new();
                        for other in (0..agents).filter(|j| *j != source_agent) {
                            next_acts.extend(curr_of(other).iter().copied());
                        }
                        for act in prev_of(source_agent) {
                            for next in &next_acts {
                                *pair_counts.entry((*act, *next)).or_insert(0) += 1;
                            }
                        }
                    }
                    NumeratorMode::PairTuples => {
                        for other in (0..agents).filter(|j| *j != source_agent) {
                            for act in prev_of(source_agent) {
                                for next in curr_of(other) {
                                    *pair_counts.entry((*act, *next)).or_insert(0) += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(TransitionGraph {
        pair_counts,
        source_counts,
        mode,
    })
}

/// For each act with at least one outgoing non-self edge, the
/// maximum-probability non-self edge; ties break to the lexicographically
/// smaller target name.
pub fn most_probable_edges(graph: &TransitionGraph) -> Vec<(DialogueAct, DialogueAct, f64)> {
    let mut out = Vec::new();
    for source in graph.source_counts.keys() {
        let mut best: Option<(DialogueAct, f64)> = None;
        for ((a, b), _) in graph.pair_counts.iter() {
            if a != source || b == a {
                continue;
            }
            let probability = graph.probability(*a, *b).unwrap_or(0.0);
            let better = match best {
                None => true,
                Some((current_target, current_p)) => {
                    probability > current_p
                        || (probability == current_p && b.name() < current_target.name())
                }
            };
            if better {
                best = Some((*b, probability));
            }
        }
        if let Some((target, probability)) = best {
            out.push((*source, target, probability));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acts(list: &[DialogueAct]) -> BTreeSet<DialogueAct> {
        list.iter().copied().collect()
    }

    #[test]
    fn two_agents_one_round_start_to_inform_is_one() {
        let sim = SimulationLabels {
            labels: vec![vec![
                acts(&[DialogueAct::Inform]),
                acts(&[DialogueAct::Inform]),
            ]],
        };
        let graph = transition_graph(&[sim], 1, NumeratorMode::ExistencePerSource).unwrap();
        assert_eq!(
            graph.probability(DialogueAct::Start, DialogueAct::Inform),
            Some(1.0)
        );
        // Inform -> End is certain too: both agents' acts precede End.
        assert_eq!(
            graph.probability(DialogueAct::Inform, DialogueAct::End),
            Some(1.0)
        );
    }

    #[test]
    fn unobserved_act_has_no_edges() {
        let sim = SimulationLabels {
            labels: vec![vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Inform])]],
        };
        let graph = transition_graph(&[sim], 1, NumeratorMode::ExistencePerSource).unwrap();
        assert_eq!(graph.probability(DialogueAct::Propose, DialogueAct::Inform), None);
    }

    #[test]
    fn start_has_no_incoming_and_end_no_outgoing() {
        let sim = SimulationLabels {
            labels: vec![
                vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Request])],
                vec![acts(&[DialogueAct::Propose]), acts(&[DialogueAct::Accept])],
            ],
        };
        let graph = transition_graph(&[sim], 2, NumeratorMode::ExistencePerSource).unwrap();
        for ((a, b), _) in &graph.pair_counts {
            assert_ne!(*b, DialogueAct::Start, "Start must have no incoming edges");
            assert_ne!(*a, DialogueAct::End, "End must have no outgoing edges");
        }
    }

    #[test]
    fn probabilities_stay_within_unit_interval_with_three_agents() {
        let round = vec![
            acts(&[DialogueAct::Inform]),
            acts(&[DialogueAct::Inform, DialogueAct::Request]),
            acts(&[DialogueAct::Inform]),
        ];
        let sim = SimulationLabels {
            labels: vec![round.clone(), round],
        };
        let graph = transition_graph(&[sim], 2, NumeratorMode::ExistencePerSource).unwrap();
        for (_, _, p) in graph.edges() {
            assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
        }
    }

    #[test]
    fn pair_tuple_mode_counts_each_pair() {
        // Agent 0 shows Inform; both others show Request next round.
        let sim = SimulationLabels {
            labels: vec![
                vec![
                    acts(&[DialogueAct::Inform]),
                    acts(&[DialogueAct::Others]),
                    acts(&[DialogueAct::Others]),
                ],
                vec![
                    acts(&[DialogueAct::Others]),
                    acts(&[DialogueAct::Request]),
                    acts(&[DialogueAct::Request]),
                ],
            ],
        };
        let tuples = transition_graph(&[sim.clone()], 2, NumeratorMode::PairTuples).unwrap();
        assert_eq!(
            tuples.pair_counts[&(DialogueAct::Inform, DialogueAct::Request)],
            2
        );
        let existence =
            transition_graph(&[sim], 2, NumeratorMode::ExistencePerSource).unwrap();
        assert_eq!(
            existence.pair_counts[&(DialogueAct::Inform, DialogueAct::Request)],
            1
        );
    }

    #[test]
    fn most_probable_edge_excludes_self_loops_and_breaks_ties_lexically() {
        let mut graph = TransitionGraph {
            pair_counts: BTreeMap::new(),
            source_counts: BTreeMap::new(),
            mode: NumeratorMode::ExistencePerSource,
        };
        graph.source_counts.insert(DialogueAct::Inform, 20);
        graph
            .pair_counts
            .insert((DialogueAct::Inform, DialogueAct::Inform), 19);
        graph
            .pair_counts
            .insert((DialogueAct::Inform, DialogueAct::Request), 18);
        graph
            .pair_counts
            .insert((DialogueAct::Inform, DialogueAct::Confirm), 2);
        let top = most_probable_edges(&graph);
        assert_eq!(top, vec![(DialogueAct::Inform, DialogueAct::Request, 0.9)]);

        // Tie between Confirm and Request at 0.5 goes to Confirm.
        graph
            .pair_counts
            .insert((DialogueAct::Inform, DialogueAct::Request), 10);
        graph
            .pair_counts
            .insert((DialogueAct::Inform, DialogueAct::Confirm), 10);
        let top = most_probable_edges(&graph);
        assert_eq!(top, vec![(DialogueAct::Inform, DialogueAct::Confirm, 0.5)]);
    }

    #[test]
    fn unlabeled_message_is_an_error() {
        let sim = SimulationLabels {
            labels: vec![vec![BTreeSet::new(), acts(&[DialogueAct::Inform])]],
        };
        assert!(matches!(
            transition_graph(&[sim], 1, NumeratorMode::ExistencePerSource),
            Err(TransitionError::Unlabeled { .. })
        ));
    }
}
