use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{BlockRecord, CorpusError, PageRecord, Payload};
use crate::format::{PageDims, SemanticClass};

/// Case-, hyphen- and space-insensitive lookup from dataset category names
/// to [`SemanticClass`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassNameMap {
    entries: BTreeMap<String, SemanticClass>,
}

fn fold(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl Default for ClassNameMap {
    fn default() -> Self {
        let entries = SemanticClass::ALL.iter().map(|c| (fold(c.name()), *c)).collect();
        Self { entries }.with_alias("Sec-header", SemanticClass::SectionHeader)
    }
}

impl ClassNameMap {
    pub fn with_alias(mut self, name: &str, class: SemanticClass) -> Self {
        self.entries.insert(fold(name), class);
        self
    }

    pub fn resolve(&self, name: &str) -> Option<SemanticClass> {
        self.entries.get(&fold(name)).copied()
    }
}

#[derive(Deserialize)]
struct CocoImage {
    id: Value,
    #[serde(default)]
    file_name: Option<String>,
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: Value,
    name: String,
}

#[derive(Deserialize)]
struct CocoDetection {
    image_id: Value,
    category_id: Value,
    bbox: [f64; 4],
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    categories: Vec<CocoCategory>,
    #[serde(default, alias = "detections")]
    annotations: Vec<CocoDetection>,
}

fn id_key(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn round_half_up(v: f64) -> Result<u64, CorpusError> {
    if !v.is_finite() {
        return Err(CorpusError::Detection(format!("non-finite coordinate {v}")));
    }
    Ok((v + 0.5).floor().max(0.0) as u64)
}

/// `[x, y, w, h]` to integer corners `[x1, y1, x2, y2]`, rounding half up.
pub(crate) fn xywh_to_corners(b: [f64; 4]) -> Result<[u64; 4], CorpusError> {
    let [x, y, w, h] = b;
    Ok([round_half_up(x)?, round_half_up(y)?, round_half_up(x + w)?, round_half_up(y + h)?])
}

/// Parses a detection file held in memory. One record per image, in image
/// order, with `doc_id` = file name (or image id) and page index 0.
pub fn import_coco_str(src: &str, names: &ClassNameMap) -> Result<Vec<PageRecord>, CorpusError> {
    let file: CocoFile = serde_json::from_str(src).map_err(|e| CorpusError::Detection(e.to_string()))?;
    let categories: HashMap<String, &str> =
        file.categories.iter().map(|c| (id_key(&c.id), c.name.as_str())).collect();

    let mut order = Vec::with_capacity(file.images.len());
    let mut pages: HashMap<String, (String, Option<PageDims>, Vec<BlockRecord>)> = HashMap::new();
    for img in &file.images {
        let key = id_key(&img.id);
        let dims = match (img.width, img.height) {
            (Some(w), Some(h)) => PageDims::new(w, h).ok(),
            _ => None,
        };
        let doc_id = img.file_name.clone().unwrap_or_else(|| key.clone());
        order.push(key.clone());
        pages.insert(key, (doc_id, dims, Vec::new()));
    }

    for det in &file.annotations {
        let image_id = id_key(&det.image_id);
        let page = pages
            .get_mut(&image_id)
            .ok_or_else(|| CorpusError::MissingImageDims { image_id: image_id.clone() })?;
        let cat = id_key(&det.category_id);
        let name = categories.get(&cat).ok_or_else(|| CorpusError::UnknownCategory(format!("id {cat}")))?;
        let class = names.resolve(name).ok_or_else(|| CorpusError::UnknownCategory(name.to_string()))?;
        if let Some(s) = det.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(CorpusError::Detection(format!("score {s} outside [0, 1]")));
            }
        }
        page.2.push(BlockRecord {
            bbox: Some(xywh_to_corners(det.bbox)?),
            class: Some(class.name().to_string()),
            text: None,
            score: det.score,
        });
    }

    order
        .into_iter()
        .map(|key| {
            let (doc_id, dims, blocks) = pages.remove(&key).expect("image key registered above");
            let dims = dims.ok_or(CorpusError::MissingImageDims { image_id: key })?;
            Ok(PageRecord::blocks(doc_id, 0, dims, blocks))
        })
        .collect()
}

pub fn import_coco_detections(path: impl AsRef<Path>, names: &ClassNameMap) -> Result<Vec<PageRecord>, CorpusError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    import_coco_str(&src, names)
}

/// Inverse of the import for block records: images numbered from 1 in
/// input order, categories numbered by class index + 1.
pub fn export_coco_detections(records: &[PageRecord]) -> Value {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let id = i + 1;
        images.push(json!({"id": id, "file_name": r.doc_id, "width": r.dims.width(), "height": r.dims.height()}));
        let Payload::Blocks(blocks) = &r.payload else { continue };
        for b in blocks {
            let (Some([x1, y1, x2, y2]), Some(class)) = (b.bbox, b.class.as_deref()) else { continue };
            let Ok(class) = class.parse::<SemanticClass>() else { continue };
            let mut a = json!({
                "image_id": id,
                "category_id": class.index() + 1,
                "bbox": [x1, y1, x2.saturating_sub(x1), y2.saturating_sub(y1)],
            });
            if let Some(s) = b.score {
                a["score"] = json!(s);
            }
            annotations.push(a);
        }
    }
    let categories: Vec<Value> =
        SemanticClass::ALL.iter().map(|c| json!({"id": c.index() + 1, "name": c.name()})).collect();
    json!({"images": images, "categories": categories, "annotations": annotations})
}
