use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decompose, io_err, run_training_episode, Episode, EngineError, EpisodeConfig, Policy};
use crate::checkpoint;
use crate::config::RunConfig;
use crate::datagen::{load_split, Manifest};
use crate::geom::{Direction, RectilinearPolygon};
use crate::io_util::write_atomic;
use crate::sac::{Agent, AgentState, SelectionMode};

pub const CONFIG_FILE: &str = "config.json";
pub const TRAIN_LOG: &str = "logs/train.csv";
pub const EVAL_LOG: &str = "logs/eval.csv";
pub const RESUME_FILE: &str = "checkpoints/resume.bin";

/// One row of `logs/train.csv`: a single cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub episode: usize,
    pub step: usize,
    pub part_id: String,
    pub vertex: usize,
    pub direction: Direction,
    pub reward: f64,
    pub n: usize,
    pub n_q: usize,
    pub aspect_term: f64,
    pub variance_term: f64,
    pub quad_term: f64,
    pub noop_penalty: f64,
    pub bonus: f64,
    pub actor_loss: Option<f64>,
    pub critic1_loss: Option<f64>,
    pub critic2_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub buffer_size: usize,
    pub alpha: f64,
    pub elapsed_s: f64,
}

/// One row of `logs/eval.csv`: deterministic evaluation over the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub episode: usize,
    pub mean_reward: f64,
    /// Mean of the last `moving_average_window` evaluation rewards.
    pub moving_average: f64,
    pub complete_fraction: f64,
    pub mean_cuts: f64,
}

impl EvalRow {
    pub fn from_episodes(episode: usize, eps: &[Episode], history: &[f64], window: usize) -> Self {
        let n = eps.len().max(1) as f64;
        let mean_reward = eps.iter().map(Episode::total_reward).sum::<f64>() / n;
        let mut recent: Vec<f64> = history.iter().rev().take(window.saturating_sub(1)).copied().collect();
        recent.push(mean_reward);
        Self {
            episode,
            mean_reward,
            moving_average: recent.iter().sum::<f64>() / recent.len() as f64,
            complete_fraction: eps.iter().filter(|e| e.is_complete()).count() as f64 / n,
            mean_cuts: eps.iter().map(|e| e.cut_log.len()).sum::<usize>() as f64 / n,
        }
    }
}

/// Training state beyond network parameters, saved next to each periodic
/// checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResumeState {
    pub episode: usize,
    pub checkpoint: String,
    pub rng: ChaCha8Rng,
    pub agent: AgentState,
    pub eval_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub episodes: usize,
    pub checkpoint: PathBuf,
    pub last_eval: Option<EvalRow>,
}

pub fn evaluate(agent: &Agent, shapes: &[RectilinearPolygon], cfg: &EpisodeConfig) -> Result<Vec<Episode>, EngineError> {
    shapes.iter().map(|s| decompose(s, agent, cfg)).collect()
}

pub fn evaluate_policy<P: Policy>(
    policy: &mut P,
    shapes: &[RectilinearPolygon],
    mode: SelectionMode,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Episode>, EngineError> {
    shapes
        .iter()
        .map(|s| super::run_episode(s, policy, mode, cfg, rng))
        .collect()
}

pub fn checkpoint_name(episode: usize) -> String {
    format!("checkpoint-{episode}.ckpt")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EngineError> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

fn csv_appender(path: &Path, fresh: bool) -> Result<csv::Writer<fs::File>, EngineError> {
    let file = fs::OpenOptions::new()
        .create(true)
        .append(!fresh)
        .write(true)
        .truncate(fresh)
        .open(path)
        .map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(fresh).from_writer(file))
}

fn write_header_only<T: Serialize + Default>(path: &Path) -> Result<(), EngineError> {
    // csv only emits headers alongside the first record.
    let mut buf = csv::Writer::from_writer(Vec::new());
    buf.serialize(T::default())?;
    let bytes = buf.into_inner().map_err(|e| EngineError::Invariant(e.to_string()))?;
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let mut line = header.to_vec();
    line.push(b'\n');
    fs::write(path, line).map_err(io_err(path))
}

impl Default for TrainRow {
    fn default() -> Self {
        Self {
            episode: 0,
            step: 0,
            part_id: String::new(),
            vertex: 0,
            direction: Direction::XAxis,
            reward: 0.0,
            n: 0,
            n_q: 0,
            aspect_term: 0.0,
            variance_term: 0.0,
            quad_term: 0.0,
            noop_penalty: 0.0,
            bonus: 0.0,
            actor_loss: None,
            critic1_loss: None,
            critic2_loss: None,
            value_loss: None,
            buffer_size: 0,
            alpha: 0.0,
            elapsed_s: 0.0,
        }
    }
}

impl Default for EvalRow {
    fn default() -> Self {
        Self {
            episode: 0,
            mean_reward: 0.0,
            moving_average: 0.0,
            complete_fraction: 0.0,
            mean_cuts: 0.0,
        }
    }
}

/// Drops rows logged after `episode` (left behind by an interrupted run).
fn truncate_log<T: Serialize + for<'de> Deserialize<'de> + Default>(
    path: &Path,
    episode: usize,
    key: impl Fn(&T) -> usize,
) -> Result<(), EngineError> {
    let rows: Vec<T> = csv::Reader::from_path(path)?.deserialize().collect::<Result<_, _>>()?;
    write_header_only::<T>(path)?;
    let mut w = csv_appender(path, false)?;
    for r in rows.into_iter().filter(|r| key(r) <= episode) {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn save_progress(
    run_dir: &Path,
    agent: &Agent,
    episode: usize,
    rng: &ChaCha8Rng,
    eval_history: &[f64],
) -> Result<PathBuf, EngineError> {
    let dir = run_dir.join("checkpoints");
    let name = checkpoint_name(episode);
    let path = dir.join(&name);
    checkpoint::save(&path, agent, episode)?;
    let state = ResumeState {
        episode,
        checkpoint: name.clone(),
        rng: rng.clone(),
        agent: agent.state(),
        eval_history: eval_history.to_vec(),
    };
    let bytes = bincode::serialize(&state).map_err(|e| EngineError::Invariant(format!("resume state: {e}")))?;
    let resume = run_dir.join(RESUME_FILE);
    write_atomic(&resume, &bytes).map_err(io_err(&resume))?;
    // Keep the initial checkpoint and the newest one.
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let entry = entry.map_err(io_err(&dir))?;
        let file = entry.file_name().to_string_lossy().to_string();
        if file.starts_with("checkpoint-") && file != name && file != checkpoint_name(0) {
            fs::remove_file(entry.path()).map_err(io_err(&entry.path()))?;
        }
    }
    Ok(path)
}

/// Trains on the training split of the dataset in `data_dir`, writing the
/// run directory layout under `run_dir`. With `resume`, continues from the
/// last periodic checkpoint in `run_dir` using its stored configuration,
/// only taking `cfg.episodes` from the caller.
pub fn train(data_dir: &Path, run_dir: &Path, cfg: &RunConfig, resume: bool) -> Result<TrainSummary, EngineError> {
    let start = Instant::now();
    let manifest_path = data_dir.join(Manifest::FILE_NAME);
    if !manifest_path.is_file() {
        return Err(EngineError::Io {
            path: manifest_path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset manifest not found"),
        });
    }
    let manifest = Manifest::load(data_dir)?;
    let train_shapes = load_split(data_dir, &manifest.train)?;
    let test_shapes = load_split(data_dir, &manifest.test)?;
    if train_shapes.is_empty() {
        return Err(EngineError::Config("training split is empty".into()));
    }
    let resume_path = run_dir.join(RESUME_FILE);
    let (cfg, mut agent, mut rng, first, mut history) = if resume {
        let text = fs::read_to_string(run_dir.join(CONFIG_FILE)).map_err(io_err(&run_dir.join(CONFIG_FILE)))?;
        let mut stored: RunConfig = serde_json::from_str(&text)?;
        stored.episodes = cfg.episodes;
        let bytes = fs::read(&resume_path).map_err(io_err(&resume_path))?;
        let state: ResumeState =
            bincode::deserialize(&bytes).map_err(|e| EngineError::Invariant(format!("resume state: {e}")))?;
        let (_, mut agent) = checkpoint::load(&run_dir.join("checkpoints").join(&state.checkpoint))?;
        agent.restore(state.agent);
        truncate_log::<TrainRow>(&run_dir.join(TRAIN_LOG), state.episode, |r| r.episode)?;
        truncate_log::<EvalRow>(&run_dir.join(EVAL_LOG), state.episode, |r| r.episode)?;
        log::info!("resuming after episode {}", state.episode);
        (stored, agent, state.rng, state.episode + 1, state.eval_history)
    } else {
        cfg.validate().map_err(EngineError::Config)?;
        for sub in ["checkpoints", "logs", "episodes"] {
            let d = run_dir.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        write_atomic(&run_dir.join(CONFIG_FILE), cfg.to_json().as_bytes()).map_err(io_err(run_dir))?;
        write_header_only::<TrainRow>(&run_dir.join(TRAIN_LOG))?;
        write_header_only::<EvalRow>(&run_dir.join(EVAL_LOG))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agent = Agent::new(cfg.sac.clone(), cfg.arch.clone(), &mut rng);
        save_progress(run_dir, &agent, 0, &rng, &[])?;
        (cfg.clone(), agent, rng, 1, Vec::new())
    };

    let ep_cfg = cfg.episode_config();
    let mut train_log = csv_appender(&run_dir.join(TRAIN_LOG), false)?;
    let mut eval_log = csv_appender(&run_dir.join(EVAL_LOG), false)?;
    let mut last_eval = None;
    let mut last_checkpoint = run_dir.join("checkpoints").join(checkpoint_name(first - 1));

    for episode in first..=cfg.episodes {
        let shape = &train_shapes[(episode - 1) % train_shapes.len()];
        let (ep, losses) = run_training_episode(shape, &mut agent, &ep_cfg, &mut rng)?;
        let elapsed_s = start.elapsed().as_secs_f64();
        for (step, (cut, loss)) in ep.cut_log.iter().zip(&losses).enumerate() {
            train_log.serialize(TrainRow {
                episode,
                step,
                part_id: cut.part_id.clone(),
                vertex: cut.action.vertex_index,
                direction: cut.action.direction,
                reward: cut.total(),
                n: cut.reward.n,
                n_q: cut.reward.n_q,
                aspect_term: cut.reward.aspect_term,
                variance_term: cut.reward.variance_term,
                quad_term: cut.reward.quad_term,
                noop_penalty: cut.reward.noop_penalty,
                bonus: cut.bonus,
                actor_loss: loss.map(|l| l.actor),
                critic1_loss: loss.map(|l| l.critic1),
                critic2_loss: loss.map(|l| l.critic2),
                value_loss: loss.map(|l| l.value),
                buffer_size: agent.buffer.len(),
                alpha: cfg.sac.alpha,
                elapsed_s,
            })?;
        }
        train_log.flush().map_err(io_err(run_dir))?;
        write_json(&run_dir.join(format!("episodes/train-{episode:05}.json")), &ep.record())?;
        log::debug!(
            "episode {episode}: {} cuts, reward {:.3}, {:?}",
            ep.cut_log.len(),
            ep.total_reward(),
            ep.status
        );

        if episode % cfg.eval_every == 0 {
            let eps = evaluate(&agent, &test_shapes, &ep_cfg)?;
            let row = EvalRow::from_episodes(episode, &eps, &history, cfg.moving_average_window);
            history.push(row.mean_reward);
            eval_log.serialize(&row)?;
            eval_log.flush().map_err(io_err(run_dir))?;
            let records: Vec<_> = eps.iter().map(Episode::record).collect();
            write_json(&run_dir.join(format!("episodes/eval-{episode:05}.json")), &records)?;
            log::info!(
                "episode {episode}: eval mean reward {:.3} (moving {:.3}), complete {:.0}%",
                row.mean_reward,
                row.moving_average,
                100.0 * row.complete_fraction
            );
            last_eval = Some(row);
        }
        if episode % cfg.checkpoint_every == 0 || episode == cfg.episodes {
            last_checkpoint = save_progress(run_dir, &agent, episode, &rng, &history)?;
        }
    }
    Ok(TrainSummary {
        episodes: cfg.episodes,
        checkpoint: last_checkpoint,
        last_eval,
    })
}
