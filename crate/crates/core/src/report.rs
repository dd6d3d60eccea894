//! Reward curves from a run's training and evaluation logs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{io_err, EngineError, EvalRow, TrainRow, EVAL_LOG, TRAIN_LOG};

pub const DEFAULT_WINDOW: usize = 10;

/// Trailing mean over the last `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: String,
    pub episode: usize,
    pub reward: f64,
    pub moving_average: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curves {
    pub train: Vec<CurvePoint>,
    pub eval: Vec<CurvePoint>,
}

/// Total reward (cut rewards plus bonus) of each logged training episode.
pub fn episode_totals(rows: &[TrainRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((ep, total)) if *ep == r.episode => *total += r.reward + r.bonus,
            _ => out.push((r.episode, r.reward + r.bonus)),
        }
    }
    out
}

fn curve(series: &str, points: &[(usize, f64)], window: usize) -> Vec<CurvePoint> {
    let rewards: Vec<f64> = points.iter().map(|p| p.1).collect();
    points
        .iter()
        .zip(moving_average(&rewards, window))
        .map(|(&(episode, reward), moving_average)| CurvePoint {
            series: series.to_string(),
            episode,
            reward,
            moving_average,
        })
        .collect()
}

pub fn curves(train: &[TrainRow], eval: &[EvalRow], window: usize) -> Curves {
    let eval_points: Vec<(usize, f64)> = eval.iter().map(|r| (r.episode, r.mean_reward)).collect();
    Curves {
        train: curve("train", &episode_totals(train), window),
        eval: curve("eval", &eval_points, window),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EngineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().collect::<Result<_, _>>().map_err(EngineError::from)
}

/// Reads `logs/train.csv` and `logs/eval.csv` under `run_dir`.
pub fn load_curves(run_dir: &Path, window: usize) -> Result<Curves, EngineError> {
    let train: Vec<TrainRow> = read_rows(&run_dir.join(TRAIN_LOG))?;
    let eval: Vec<EvalRow> = read_rows(&run_dir.join(EVAL_LOG))?;
    Ok(curves(&train, &eval, window))
}

pub fn curves_csv(c: &Curves) -> String {
    let mut out = String::from("series,episode,reward,moving_average\n");
    for p in c.train.iter().chain(&c.eval) {
        let _ = writeln!(out, "{},{},{:?},{:?}", p.series, p.episode, p.reward, p.moving_average);
    }
    out
}

/// Two moving-average polylines (train, eval) on shared axes.
pub fn curves_svg(c: &Curves) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    let all: Vec<&CurvePoint> = c.train.iter().chain(&c.eval).collect();
    let max_ep = all.iter().map(|p| p.episode).max().unwrap_or(1).max(1) as f64;
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.moving_average), hi.max(p.moving_average)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let map = |p: &CurvePoint| {
        (
            PAD + p.episode as f64 / max_ep * (W - 2.0 * PAD),
            H - PAD - (p.moving_average - lo) / (hi - lo) * (H - 2.0 * PAD),
        )
    };
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888888\"/>\n\
         <text x=\"{PAD}\" y=\"{}\" font-size=\"12\">{lo:.3}</text>\n\
         <text x=\"{PAD}\" y=\"{}\" font-size=\"12\">{hi:.3}</text>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD,
        H - PAD + 14.0,
        PAD - 4.0,
    );
    for (series, pts, colour) in [("train", &c.train, "#1f77b4"), ("eval", &c.eval, "#d62728")] {
        if pts.is_empty() {
            continue;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline id=\"{series}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>",
            coords.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `report.csv` and `report.svg` into `out_dir`.
pub fn write_report(c: &Curves, out_dir: &Path) -> Result<(), EngineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (name, text) in [("report.csv", curves_csv(c)), ("report.svg", curves_svg(c))] {
        let path = out_dir.join(name);
        crate::io_util::write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_window_average() {
        let values: Vec<f64> = (1..=12).map(f64::from).collect();
        let ma = moving_average(&values, 10);
        assert_eq!(ma[0], 1.0);
        assert_eq!(ma[3], 2.5);
        assert_eq!(ma[9], 5.5);
        assert_eq!(ma[10], 6.5);
        assert_eq!(ma[11], 7.5);
    }

    #[test]
    fn constant_reward_is_flat() {
        assert!(moving_average(&[4.25; 30], 10).iter().all(|&v| v == 4.25));
    }

    #[test]
    fn totals_group_by_episode() {
        let row = |episode, reward, bonus| TrainRow {
            episode,
            reward,
            bonus,
            ..TrainRow::default()
        };
        let rows = [row(1, 2.0, 0.0), row(1, 3.0, 10.0), row(2, -3.0, 0.0)];
        assert_eq!(episode_totals(&rows), vec![(1, 15.0), (2, -3.0)]);
    }

    #[test]
    fn empty_logs_render() {
        let c = Curves::default();
        assert_eq!(curves_csv(&c), "series,episode,reward,moving_average\n");
        let svg = curves_svg(&c);
        assert!(svg.ends_with("</svg>\n") && !svg.contains("<polyline"));
    }
}
