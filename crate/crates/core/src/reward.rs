//! Per-cut reward and the episode completion bonus.
//!
//! For `N` parts with areas `A_i`, bounding-box aspect ratios `R_i` and
//! `N_q` rectangles:
//!
//! ```text
//! R = 3 [ sqrt(N / Σ R_i²) − sqrt(Σ (A_i − Ā)² / Σ A_i) ] + 10 N_q / N − 5 p(N) − 1
//! ```
//!
//! where `p(N) = 1` exactly when the cut produced a single part.

use serde::{Deserialize, Serialize};

use crate::geom::{is_quad, metrics, GeomError, RectilinearPolygon};

pub const SHAPE_WEIGHT: f64 = 3.0;
pub const QUAD_WEIGHT: f64 = 10.0;
pub const NOOP_WEIGHT: f64 = 5.0;
pub const CONSTANT: f64 = -1.0;
pub const DEFAULT_BONUS: f64 = 10.0;

/// Unweighted terms of the cut reward and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub n: usize,
    pub n_q: usize,
    /// `sqrt(N / Σ R_i²)`, in `(0, 1]`.
    pub aspect_term: f64,
    /// `sqrt(Σ (A_i − Ā)² / Σ A_i)`.
    pub variance_term: f64,
    /// `N_q / N`.
    pub quad_term: f64,
    /// `p(N)`, 1 for a cut that changed nothing.
    pub noop_penalty: f64,
    pub constant: f64,
    pub total: f64,
}

pub fn reward_for_cut(parts: &[RectilinearPolygon]) -> Result<RewardBreakdown, GeomError> {
    assert!(!parts.is_empty(), "a cut always yields at least one part");
    let stats = parts
        .iter()
        .map(|p| metrics(p).map(|m| (m.area, m.aspect_ratio)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = parts.len();
    let nf = n as f64;
    let n_q = parts.iter().filter(|p| is_quad(p)).count();
    let sum_r2: f64 = stats.iter().map(|(_, r)| r * r).sum();
    let sum_a: f64 = stats.iter().map(|(a, _)| a).sum();
    let mean_a = sum_a / nf;
    let sq_dev: f64 = stats.iter().map(|(a, _)| (a - mean_a).powi(2)).sum();
    let aspect_term = (nf / sum_r2).sqrt();
    let variance_term = (sq_dev / sum_a).sqrt();
    let quad_term = n_q as f64 / nf;
    let noop_penalty = if n == 1 { 1.0 } else { 0.0 };
    let total = SHAPE_WEIGHT * (aspect_term - variance_term) + QUAD_WEIGHT * quad_term
        - NOOP_WEIGHT * noop_penalty
        + CONSTANT;
    Ok(RewardBreakdown {
        n,
        n_q,
        aspect_term,
        variance_term,
        quad_term,
        noop_penalty,
        constant: CONSTANT,
        total,
    })
}

/// Bonus added to the final transition of an episode that ended with every
/// part a rectangle. Truncated episodes never receive it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeBonus(pub f64);

impl Default for EpisodeBonus {
    fn default() -> Self {
        Self(DEFAULT_BONUS)
    }
}

impl EpisodeBonus {
    pub fn episode_bonus(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> RectilinearPolygon {
        RectilinearPolygon::rectangle("r", Point::new(x0, y0), Point::new(x1, y1)).unwrap()
    }

    #[test]
    fn two_equal_squares_hit_the_maximum() {
        let r = reward_for_cut(&[rect(0., 0., 1., 1.), rect(1., 0., 2., 1.)]).unwrap();
        assert_eq!(r.total, 12.0);
        assert_eq!((r.n, r.n_q), (2, 2));
    }

    #[test]
    fn rectangle_plus_square() {
        let r = reward_for_cut(&[rect(0., 0., 2., 1.), rect(0., 1., 1., 2.)]).unwrap();
        assert!((r.aspect_term - (0.4f64).sqrt()).abs() < 1e-15);
        assert!((r.variance_term - (0.5f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r.total - 9.6726).abs() < 1e-4);
    }

    #[test]
    fn noop_on_l_shape() {
        let l = RectilinearPolygon::new(
            "L",
            [(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)]
                .iter()
                .map(|&(x, y)| Point::new(x, y))
                .collect(),
        )
        .unwrap();
        let r = reward_for_cut(&[l]).unwrap();
        assert_eq!(r.total, -3.0);
        assert_eq!(r.noop_penalty, 1.0);
    }

    #[test]
    fn bonus_defaults() {
        assert_eq!(EpisodeBonus::default().episode_bonus(), 10.0);
        assert_eq!(EpisodeBonus(0.0).episode_bonus(), 0.0);
    }

    #[test]
    fn order_does_not_matter() {
        let parts = [rect(0., 0., 2., 1.), rect(0., 1., 1., 2.), rect(5., 5., 5.5, 9.)];
        let a = reward_for_cut(&parts).unwrap();
        let mut rev = parts.to_vec();
        rev.reverse();
        let b = reward_for_cut(&rev).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
    }
}
