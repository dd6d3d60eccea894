//! Episode orchestration: a FIFO queue of parts still to be split, a policy
//! choosing cut sites, and the reward bookkeeping shared by training and
//! deployment.

mod train;

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::datagen::GenError;
use crate::geom::{
    cut, is_quad, triangulate, CutAction, Direction, GeomError, Point, RectilinearPolygon, ShapeFile, ShapeGraph,
};
use crate::nn::NnError;
use crate::obs::{observe, LocalObservation};
use crate::reward::{reward_for_cut, RewardBreakdown};
use crate::sac::{select_action, select_vertex, Agent, Losses, NextState, SelectionMode, Transition};

pub use train::{
    checkpoint_name, evaluate, evaluate_policy, train, EvalRow, ResumeState, TrainRow, TrainSummary, CONFIG_FILE, EVAL_LOG,
    RESUME_FILE, TRAIN_LOG,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] GenError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("log error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Which state a transition bootstraps from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapRule {
    /// The first non-rectangular child of the cut, else the queue head.
    #[default]
    FirstChild,
    /// Whatever part the queue hands out next.
    QueueOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Triangulation target edge as a fraction of the part's bounding-box
    /// diagonal.
    pub target_edge_factor: f64,
    pub step_cap: usize,
    pub bonus: f64,
    pub bootstrap: BootstrapRule,
    pub vertex_temperature: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            target_edge_factor: 0.2,
            step_cap: 64,
            bonus: crate::reward::DEFAULT_BONUS,
            bootstrap: BootstrapRule::FirstChild,
            vertex_temperature: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Running,
    Complete,
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub part_id: String,
    pub part: Vec<Point>,
    pub action: CutAction,
    pub reward: RewardBreakdown,
    /// Completion bonus credited to this cut (zero except on the last cut of
    /// a complete episode).
    pub bonus: f64,
    pub children: Vec<String>,
}

impl CutRecord {
    pub fn total(&self) -> f64 {
        self.reward.total + self.bonus
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub source_id: String,
    pub source_area: f64,
    pub queue: VecDeque<RectilinearPolygon>,
    pub finished_quads: Vec<RectilinearPolygon>,
    pub cut_log: Vec<CutRecord>,
    pub status: EpisodeStatus,
}

impl Episode {
    pub fn new(shape: &RectilinearPolygon) -> Self {
        let mut ep = Self {
            source_id: shape.id().to_string(),
            source_area: shape.area(),
            queue: VecDeque::new(),
            finished_quads: Vec::new(),
            cut_log: Vec::new(),
            status: EpisodeStatus::Running,
        };
        if is_quad(shape) {
            ep.finished_quads.push(shape.clone());
            ep.status = EpisodeStatus::Complete;
        } else {
            ep.queue.push_back(shape.clone());
        }
        ep
    }

    pub fn total_reward(&self) -> f64 {
        // Start from +0.0: an empty float sum is -0.0.
        self.cut_log.iter().map(CutRecord::total).fold(0.0, |a, b| a + b)
    }

    pub fn is_complete(&self) -> bool {
        self.status == EpisodeStatus::Complete
    }

    /// Relative gap between the source area and the summed area of all
    /// finished and pending parts.
    pub fn area_error(&self) -> f64 {
        let total: f64 = self.finished_quads.iter().chain(&self.queue).map(|p| p.area()).sum();
        (total - self.source_area).abs() / self.source_area
    }

    pub fn record(&self) -> EpisodeRecord {
        EpisodeRecord {
            source_id: self.source_id.clone(),
            status: self.status,
            total_reward: self.total_reward(),
            cuts: self.cut_log.clone(),
            blocks: self.finished_quads.iter().map(ShapeFile::from).collect(),
            pending: self.queue.iter().map(ShapeFile::from).collect(),
        }
    }
}

/// Serializable summary of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub source_id: String,
    pub status: EpisodeStatus,
    pub total_reward: f64,
    pub cuts: Vec<CutRecord>,
    pub blocks: Vec<ShapeFile>,
    pub pending: Vec<ShapeFile>,
}

/// A cut site and direction picked by a policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub vertex: usize,
    pub node: usize,
    pub direction: Direction,
    pub obs: LocalObservation,
}

/// Everything that happened in one cut, handed to the policy afterwards.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state_graph: Arc<ShapeGraph>,
    pub choice: Choice,
    pub reward: RewardBreakdown,
    pub bonus: f64,
    /// Bootstrap state, `None` when the episode just completed.
    pub next: Option<(RectilinearPolygon, Arc<ShapeGraph>)>,
}

impl StepOutcome {
    pub fn total(&self) -> f64 {
        self.reward.total + self.bonus
    }
}

pub trait Policy {
    fn choose(
        &mut self,
        part: &RectilinearPolygon,
        graph: &ShapeGraph,
        mode: SelectionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Choice, EngineError>;

    /// Hook run after every cut.
    fn after_step(&mut self, _outcome: &StepOutcome, _rng: &mut ChaCha8Rng) -> Result<(), EngineError> {
        Ok(())
    }
}

fn choice_at(part: &RectilinearPolygon, graph: &ShapeGraph, vertex: usize, direction: Direction) -> Result<Choice, EngineError> {
    let node = graph.model_nodes()[vertex];
    Ok(Choice {
        vertex,
        node,
        direction,
        obs: observe(part, vertex)?,
    })
}

/// Uniformly random vertex and direction.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn choose(
        &mut self,
        part: &RectilinearPolygon,
        graph: &ShapeGraph,
        _mode: SelectionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Choice, EngineError> {
        let vertex = rng.gen_range(0..part.len());
        let direction = Direction::from_index(rng.gen_range(0..2));
        choice_at(part, graph, vertex, direction)
    }
}

impl Policy for Agent {
    fn choose(
        &mut self,
        part: &RectilinearPolygon,
        graph: &ShapeGraph,
        mode: SelectionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Choice, EngineError> {
        (&*self).choose(part, graph, mode, rng)
    }
}

impl Policy for &Agent {
    fn choose(
        &mut self,
        part: &RectilinearPolygon,
        graph: &ShapeGraph,
        mode: SelectionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Choice, EngineError> {
        let values = self.vertex_values(graph)?;
        let vertex = select_vertex(&values, mode, self.config.vertex_temperature, rng);
        let obs = observe(part, vertex)?;
        let direction = select_action(self.action_probs(&obs)?, mode, rng);
        choice_at(part, graph, vertex, direction)
    }
}

/// Wraps an agent so that every cut is stored and followed by gradient
/// steps.
pub struct Learner<'a> {
    pub agent: &'a mut Agent,
    /// Losses of the last gradient step after each cut.
    pub losses: Vec<Option<Losses>>,
}

impl<'a> Learner<'a> {
    pub fn new(agent: &'a mut Agent) -> Self {
        Self {
            agent,
            losses: Vec::new(),
        }
    }
}

impl Policy for Learner<'_> {
    fn choose(
        &mut self,
        part: &RectilinearPolygon,
        graph: &ShapeGraph,
        mode: SelectionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Choice, EngineError> {
        (&*self.agent).choose(part, graph, mode, rng)
    }

    fn after_step(&mut self, outcome: &StepOutcome, rng: &mut ChaCha8Rng) -> Result<(), EngineError> {
        let next = match &outcome.next {
            Some((poly, graph)) => Some(NextState {
                graph: graph.clone(),
                candidate_obs: (0..poly.len()).map(|i| observe(poly, i)).collect::<Result<_, _>>()?,
                target_value: self.agent.target_state_value(graph)?,
            }),
            None => None,
        };
        self.agent.remember(Transition {
            state_graph: outcome.state_graph.clone(),
            chosen_vertex: outcome.choice.vertex,
            chosen_node: outcome.choice.node,
            local_obs: outcome.choice.obs,
            action: outcome.choice.direction,
            reward: outcome.total(),
            next,
        });
        let mut last = None;
        for _ in 0..self.agent.config.gradient_steps {
            last = self.agent.update(rng)?;
        }
        self.losses.push(last);
        Ok(())
    }
}

/// Triangulations of the parts seen in one episode, keyed by part id.
#[derive(Default)]
struct GraphCache {
    graphs: HashMap<String, Arc<ShapeGraph>>,
}

impl GraphCache {
    fn get(&mut self, part: &RectilinearPolygon, factor: f64) -> Result<Arc<ShapeGraph>, GeomError> {
        if let Some(g) = self.graphs.get(part.id()) {
            return Ok(g.clone());
        }
        let g = Arc::new(triangulate(part, factor * part.bbox().diagonal())?);
        self.graphs.insert(part.id().to_string(), g.clone());
        Ok(g)
    }
}

/// Decomposes `shape` with `policy`, cutting queue parts until every part
/// is a rectangle or the step cap is reached.
pub fn run_episode<P: Policy>(
    shape: &RectilinearPolygon,
    policy: &mut P,
    mode: SelectionMode,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, EngineError> {
    let mut ep = Episode::new(shape);
    let mut cache = GraphCache::default();
    while let Some(part) = ep.queue.pop_front() {
        if ep.cut_log.len() >= cfg.step_cap {
            ep.queue.push_front(part);
            break;
        }
        let graph = cache.get(&part, cfg.target_edge_factor)?;
        let choice = policy.choose(&part, &graph, mode, rng)?;
        let action = CutAction::new(choice.vertex, choice.direction);
        let parts = match cut(&part, action) {
            Ok(parts) => parts,
            // A sliver thinner than the tolerance counts as missing the shape.
            Err(GeomError::DegenerateShape(_)) => vec![part.clone()],
            Err(e) => return Err(e.into()),
        };
        let reward = reward_for_cut(&parts)?;
        let children: Vec<String> = parts.iter().map(|p| p.id().to_string()).collect();
        let mut first_open = None;
        for child in parts {
            if is_quad(&child) {
                ep.finished_quads.push(child);
            } else {
                first_open.get_or_insert_with(|| child.clone());
                ep.queue.push_back(child);
            }
        }
        let err = ep.area_error();
        if err > 1e-9 {
            return Err(EngineError::Invariant(format!("area drifted by {err:e} (relative)")));
        }
        let complete = ep.queue.is_empty();
        let bonus = if complete { cfg.bonus } else { 0.0 };
        let next_part = match cfg.bootstrap {
            BootstrapRule::FirstChild => first_open.or_else(|| ep.queue.front().cloned()),
            BootstrapRule::QueueOrder => ep.queue.front().cloned(),
        };
        let next = match next_part {
            Some(p) => {
                let g = cache.get(&p, cfg.target_edge_factor)?;
                Some((p, g))
            }
            None => None,
        };
        ep.cut_log.push(CutRecord {
            part_id: part.id().to_string(),
            part: part.vertices().to_vec(),
            action,
            reward,
            bonus,
            children,
        });
        let outcome = StepOutcome {
            state_graph: graph,
            choice,
            reward,
            bonus,
            next,
        };
        policy.after_step(&outcome, rng)?;
    }
    ep.status = if ep.queue.is_empty() {
        EpisodeStatus::Complete
    } else {
        EpisodeStatus::Truncated
    };
    Ok(ep)
}

/// One training episode: stochastic selections, every cut stored in the
/// replay buffer and followed by gradient steps.
pub fn run_training_episode(
    shape: &RectilinearPolygon,
    agent: &mut Agent,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Episode, Vec<Option<Losses>>), EngineError> {
    let mut learner = Learner::new(agent);
    let ep = run_episode(shape, &mut learner, SelectionMode::Stochastic, cfg, rng)?;
    Ok((ep, learner.losses))
}

/// Deterministic deployment: highest-value vertex, most probable direction.
pub fn decompose(shape: &RectilinearPolygon, agent: &Agent, cfg: &EpisodeConfig) -> Result<Episode, EngineError> {
    // Deterministic selection never draws from the generator.
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    run_episode(shape, &mut &*agent, SelectionMode::Deterministic, cfg, &mut rng)
}
