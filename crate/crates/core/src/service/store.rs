//! Files under the data directory: `corpora/{id}.jsonl` and
//! `sessions/{id}.json`. Writes go to a temporary sibling and are renamed
//! into place, so a crash leaves either the old file or the new one.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

/// Content-derived corpus id; identical bytes always give the same id.
pub fn corpus_id(body: &[u8]) -> String {
    format!("corpus-{}", &hex::encode(Sha256::digest(body))[..16])
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let name = path.file_name().expect("store paths have a name").to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(tmp, path)
}

fn list(dir: &Path, ext: &str) -> io::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if !stem.starts_with('.') {
                out.push((stem.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("corpora"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    pub fn corpus_path(&self, id: &str) -> PathBuf {
        self.root.join("corpora").join(format!("{id}.jsonl"))
    }

    pub fn put_corpus(&self, id: &str, body: &[u8]) -> io::Result<()> {
        write_atomic(&self.corpus_path(id), body)
    }

    pub fn put_session(&self, id: &str, export_json: &str) -> io::Result<()> {
        write_atomic(&self.session_path(id), export_json.as_bytes())
    }

    pub fn corpora(&self) -> io::Result<Vec<(String, PathBuf)>> {
        list(&self.root.join("corpora"), "jsonl")
    }

    pub fn sessions(&self) -> io::Result<Vec<(String, PathBuf)>> {
        list(&self.root.join("sessions"), "json")
    }
}
