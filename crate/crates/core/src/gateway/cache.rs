use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{DecodeConfig, GatewayError};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    model: String,
    decode: DecodeConfig,
    response: String,
}

/// Content-addressed response store: `<dir>/<key[..2]>/<key>.json`.
/// Writes go through a temp file and a rename, one at a time.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self, GatewayError> {
        fs::create_dir_all(dir).map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
            write_lock: Mutex::new(()),
        })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2.min(key.len())]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, GatewayError> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        };
        match serde_json::from_str::<Entry>(&text) {
            Ok(entry) if entry.key == key => Ok(Some(entry.response)),
            _ => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                Ok(None)
            }
        }
    }

    pub fn put(&self, key: &str, model: &str, decode: &DecodeConfig, response: &str) -> Result<(), GatewayError> {
        let entry = Entry {
            key: key.to_string(),
            model: model.to_string(),
            decode: *decode,
            response: response.to_string(),
        };
        let path = self.path(key);
        let err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        let _guard = self.write_lock.lock().expect("cache lock");
        fs::create_dir_all(path.parent().expect("cache path has a parent")).map_err(err)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("entry serializes")).map_err(err)?;
        fs::rename(&tmp, &path).map_err(err)
    }
}
