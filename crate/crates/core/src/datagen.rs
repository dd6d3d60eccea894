//! Procedural corpora of rectilinear shapes built as unions of random
//! integer-cornered rectangles.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{save_shape, CellGrid, GeomError, Point, RectilinearPolygon, ShapeFileError};

pub const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    /// Inclusive range of rectangle counts per shape.
    pub rect_count_range: (usize, usize),
    pub grid_extent: u32,
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            rect_count_range: (2, 10),
            grid_extent: 10,
            seed: 0,
            train_count: 37,
            test_count: 12,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("no acceptable shape after {0} rejections")]
    GenerationExhausted(usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    ShapeFile(#[from] ShapeFileError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Train/test split of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self, GenError> {
        let text = fs::read_to_string(dir.join(Self::FILE_NAME))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn shape_path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let (lo, hi) = self.rect_count_range;
        if lo == 0 || lo > hi {
            return Err(GenError::InvalidSpec(format!("rect_count_range ({lo}, {hi})")));
        }
        if self.grid_extent < 2 {
            return Err(GenError::InvalidSpec("grid_extent must be at least 2".into()));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return Err(GenError::InvalidSpec("train and test counts must be positive".into()));
        }
        Ok(())
    }

    pub fn shape_id(index: usize) -> String {
        format!("shape-{index:04}")
    }
}

type Rect = (Point, Point);

/// Draws `k` rectangles with integer corners inside `[0, extent]^2`.
pub fn sample_rects(rng: &mut impl Rng, k: usize, extent: u32) -> Vec<Rect> {
    let max_side = (extent / 2).max(1);
    (0..k)
        .map(|_| {
            let w = rng.gen_range(1..=max_side);
            let h = rng.gen_range(1..=max_side);
            let x = rng.gen_range(0..=extent - w);
            let y = rng.gen_range(0..=extent - h);
            (
                Point::new(x as f64, y as f64),
                Point::new((x + w) as f64, (y + h) as f64),
            )
        })
        .collect()
}

/// Outline of the union of `rects`, or `None` if the union is disconnected,
/// has a hole or touches itself at a corner.
pub fn union_outline(rects: &[Rect]) -> Option<Vec<Point>> {
    let grid = CellGrid::from_rects(rects);
    let comps = grid.components(None);
    if comps.len() != 1 {
        return None;
    }
    let region = &comps[0];
    if grid.has_pinch(region) || grid.has_hole(region) {
        return None;
    }
    grid.trace(region).ok()
}

/// Shape `index` of the corpus described by `spec`, translated to the
/// origin and scaled to a unit bounding-box diagonal.
pub fn generate_shape(spec: &GenSpec, index: usize) -> Result<RectilinearPolygon, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let (lo, hi) = spec.rect_count_range;
    for _ in 0..MAX_REJECTIONS {
        let k = rng.gen_range(lo..=hi);
        let rects = sample_rects(&mut rng, k, spec.grid_extent);
        let Some(outline) = union_outline(&rects) else {
            continue;
        };
        if k >= 2 && outline.len() == 4 {
            // Union collapsed to a single rectangle.
            continue;
        }
        return Ok(normalize(RectilinearPolygon::new(GenSpec::shape_id(index), outline)?));
    }
    Err(GenError::GenerationExhausted(MAX_REJECTIONS))
}

pub fn normalize(poly: RectilinearPolygon) -> RectilinearPolygon {
    let bbox = poly.bbox();
    poly.translate(bbox.min.scale(-1.0)).scale(1.0 / bbox.diagonal())
}

/// Writes every shape plus `manifest.json` into `out_dir`. Shapes
/// `0..train_count` form the training split, the rest the test split.
pub fn generate_dataset(spec: &GenSpec, out_dir: &Path) -> Result<Manifest, GenError> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let total = spec.train_count + spec.test_count;
    let mut ids = Vec::with_capacity(total);
    for index in 0..total {
        let shape = generate_shape(spec, index)?;
        save_shape(&Manifest::shape_path(out_dir, shape.id()), &shape)?;
        ids.push(shape.id().to_string());
    }
    let test = ids.split_off(spec.train_count);
    let manifest = Manifest {
        seed: spec.seed,
        train: ids,
        test,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    crate::io_util::write_atomic(&out_dir.join(Manifest::FILE_NAME), json.as_bytes())?;
    Ok(manifest)
}

/// Loads the shapes named in a manifest split.
pub fn load_split(dir: &Path, ids: &[String]) -> Result<Vec<RectilinearPolygon>, GenError> {
    ids.iter()
        .map(|id| Ok(crate::geom::load_shape(&Manifest::shape_path(dir, id))?))
        .collect()
}
