use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GeomError, Point, RectilinearPolygon};

/// On-disk shape: `{"id": "...", "vertices": [[x, y], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeFile {
    pub id: String,
    pub vertices: Vec<Point>,
}

#[derive(Debug, Error)]
pub enum ShapeFileError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed shape JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid shape: {0}")]
    Geom(#[from] GeomError),
}

impl From<&RectilinearPolygon> for ShapeFile {
    fn from(p: &RectilinearPolygon) -> Self {
        Self {
            id: p.id().to_string(),
            vertices: p.vertices().to_vec(),
        }
    }
}

impl TryFrom<ShapeFile> for RectilinearPolygon {
    type Error = GeomError;

    fn try_from(f: ShapeFile) -> Result<Self, GeomError> {
        RectilinearPolygon::new(f.id, f.vertices)
    }
}

pub fn load_shape(path: &Path) -> Result<RectilinearPolygon, ShapeFileError> {
    let text = fs::read_to_string(path).map_err(|source| ShapeFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ShapeFile = serde_json::from_str(&text)?;
    Ok(RectilinearPolygon::try_from(file)?)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_shape(path: &Path, poly: &RectilinearPolygon) -> Result<(), ShapeFileError> {
    let json = serde_json::to_string_pretty(&ShapeFile::from(poly))?;
    crate::io_util::write_atomic(path, json.as_bytes()).map_err(|source| ShapeFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
