//! Shape datasets on disk: JSON `{"shapes": [[[x, y], ...], ...]}` or CSV
//! with one shape per row (`x1,y1,...,xn,yn`).

use crate::error::{GeoError, Result};
use crate::kernel::Point2;
use crate::manifold::LandmarkPoint;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Json,
    Csv,
}

impl DatasetFormat {
    /// Guess from the file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDataset {
    pub name: Option<String>,
    pub shapes: Vec<LandmarkPoint>,
}

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    shapes: Vec<Vec<Point2>>,
}

impl ShapeDataset {
    pub fn new(shapes: Vec<LandmarkPoint>, name: Option<String>) -> Result<Self> {
        let first = shapes.first().ok_or(GeoError::EmptyDataset)?;
        let n = first.n_landmarks();
        if let Some((i, s)) = shapes.iter().enumerate().find(|(_, s)| s.n_landmarks() != n) {
            return Err(GeoError::DimensionMismatch(format!(
                "shape {i} has {} landmarks, shape 0 has {n}",
                s.n_landmarks()
            )));
        }
        Ok(Self { name, shapes })
    }

    pub fn n_landmarks(&self) -> usize {
        self.shapes[0].n_landmarks()
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: JsonDataset = serde_json::from_str(text).map_err(|e| GeoError::Parse(e.to_string()))?;
        let shapes = raw
            .shapes
            .iter()
            .map(|s| {
                if s.is_empty() {
                    return Err(GeoError::Parse("shape without landmarks".into()));
                }
                LandmarkPoint::from_landmarks(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(shapes, raw.name)
    }

    pub fn from_csv_str(text: &str, header: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut shapes = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| GeoError::Parse(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| GeoError::Parse(format!("row {row}: '{f}' is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.is_empty() || vals.len() % 2 != 0 {
                return Err(GeoError::Parse(format!("row {row} has {} values, expected x,y pairs", vals.len())));
            }
            shapes.push(LandmarkPoint::new(vals)?);
        }
        Self::new(shapes, None)
    }

    pub fn load(path: &Path, format: DatasetFormat, header: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match format {
            DatasetFormat::Json => Self::from_json_str(&text),
            DatasetFormat::Csv => Self::from_csv_str(&text, header),
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = JsonDataset { name: self.name.clone(), shapes: self.shapes.iter().map(|s| s.landmarks()).collect() };
        serde_json::to_value(raw).expect("dataset serializes")
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.shapes {
            w.write_record(s.coords().iter().map(|v| v.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
    }
}
