//! Dataset evaluation with any grounder backend.

use std::fmt::Display;
use std::thread;

use navground_core::grounding::{run_dialogue, DialogueItem, DialogueType, Grounder, PerturbedGrounder, ScriptedGrounder};
use navground_core::metrics::{score_item, ItemScores, MetricsReport};
use navground_core::pipeline::ObserveConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, GrounderConfig};
use crate::dataset::PreparedDataset;
use crate::error::CliError;
use crate::remote::{CannedTransport, HttpTransport, RemoteError, RemoteGrounder, Transport};

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Items cut short because the remote grounder was unreachable.
    pub transport_failures: Vec<String>,
    /// Type-B items whose predicted sets grew at some step.
    pub non_monotone: Vec<String>,
}

struct Outcome {
    scores: ItemScores,
    transport_failure: bool,
    monotone: bool,
}

fn run_scored<G: Grounder>(
    item: &DialogueItem,
    mut grounder: G,
    config: &Config,
    is_transport: impl Fn(&G::Error) -> bool,
) -> Result<Outcome, CliError>
where
    G::Error: Display,
{
    let (trace, diagnostics, transport_failure) = match run_dialogue(item, &mut grounder, config.k_max) {
        Ok(t) => (t, None, false),
        Err(aborted) => {
            let transport = is_transport(&aborted.error);
            (aborted.trace, Some(aborted.error.to_string()), transport)
        }
    };
    let monotone = item.dialogue_type == DialogueType::A || trace.is_monotone();
    let scores = score_item(item, &trace, &config.weights, diagnostics).map_err(CliError::data)?;
    Ok(Outcome { scores, transport_failure, monotone })
}

fn is_transport(e: &RemoteError) -> bool {
    matches!(e, RemoteError::Transport(_))
}

fn run_remote<T: Transport>(
    prepared: &PreparedDataset,
    item: &DialogueItem,
    transport: T,
    config: &Config,
) -> Result<Outcome, CliError> {
    let tag_offset = ObserveConfig::default().tag_offset;
    let g = RemoteGrounder::for_observation(transport, &item.id, prepared.observation(item), tag_offset, config.max_turns);
    run_scored(item, g, config, is_transport)
}

fn run_item(
    prepared: &PreparedDataset,
    index: usize,
    item: &DialogueItem,
    config: &Config,
    canned: Option<&mut CannedTransport>,
) -> Result<Outcome, CliError> {
    match (&config.grounder, canned) {
        (GrounderConfig::Scripted, _) => run_scored(item, ScriptedGrounder::new(prepared.context(item)), config, |_| false),
        (GrounderConfig::Perturbed, _) => {
            let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(index as u64));
            run_scored(item, PerturbedGrounder::new(prepared.context(item), rng), config, |_| false)
        }
        (GrounderConfig::Remote { endpoint, token_env, timeout }, _) => {
            let token = std::env::var(token_env).ok().filter(|t| !t.is_empty());
            run_remote(prepared, item, HttpTransport::new(endpoint, token, *timeout), config)
        }
        (GrounderConfig::Canned { .. }, Some(t)) => run_remote(prepared, item, t, config),
        (GrounderConfig::Canned { .. }, None) => unreachable!("canned runs always carry their transport"),
    }
}

/// Runs every item and aggregates the scores in dataset order.
///
/// Items are spread over `config.jobs` threads, except with a canned
/// transcript, whose replies are consumed in dataset order on one thread.
pub fn evaluate(prepared: &PreparedDataset, config: &Config) -> Result<Evaluation, CliError> {
    let items = &prepared.dataset.items;
    let outcomes: Vec<Outcome> = match &config.grounder {
        GrounderConfig::Canned { transcript } => {
            let mut t = CannedTransport::load(transcript).map_err(CliError::config)?;
            items
                .iter()
                .enumerate()
                .map(|(i, item)| run_item(prepared, i, item, config, Some(&mut t)))
                .collect::<Result<_, _>>()?
        }
        _ if config.jobs <= 1 => items
            .iter()
            .enumerate()
            .map(|(i, item)| run_item(prepared, i, item, config, None))
            .collect::<Result<_, _>>()?,
        _ => {
            let jobs = config.jobs.min(items.len()).max(1);
            let mut slots: Vec<Option<Result<Outcome, CliError>>> = (0..items.len()).map(|_| None).collect();
            thread::scope(|s| {
                let handles: Vec<_> = (0..jobs)
                    .map(|w| {
                        s.spawn(move || {
                            (w..items.len())
                                .step_by(jobs)
                                .map(|i| (i, run_item(prepared, i, &items[i], config, None)))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (i, r) in h.join().expect("evaluation worker panicked") {
                        slots[i] = Some(r);
                    }
                }
            });
            slots.into_iter().map(|r| r.expect("every item was run")).collect::<Result<_, _>>()?
        }
    };
    let mut transport_failures = Vec::new();
    let mut non_monotone = Vec::new();
    let mut scores = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if o.transport_failure {
            transport_failures.push(o.scores.item_id.clone());
        }
        if !o.monotone {
            non_monotone.push(o.scores.item_id.clone());
        }
        scores.push(o.scores);
    }
    let report = MetricsReport::from_items(scores, config.weights).map_err(CliError::data)?;
    Ok(Evaluation { report, transport_failures, non_monotone })
}
