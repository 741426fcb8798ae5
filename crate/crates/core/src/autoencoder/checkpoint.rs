use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AutoencoderModel;
use crate::tabular::TabularSchema;
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    model: AutoencoderModel,
}

/// Writes `model` as a versioned JSON document.
pub fn save_checkpoint(model: &AutoencoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(
        &mut w,
        &Checkpoint {
            format_version: FORMAT_VERSION,
            model: model.clone(),
        },
    )?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint and checks it against `schema`.
pub fn load_checkpoint(path: impl AsRef<Path>, schema: &TabularSchema) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
    if ck.format_version != FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "checkpoint format {} is not supported",
            ck.format_version
        )));
    }
    if ck.model.schema_hash != schema.hash() {
        return Err(Error::Schema("checkpoint was trained on a different schema".into()));
    }
    ck.model.validate()?;
    Ok(ck.model)
}
