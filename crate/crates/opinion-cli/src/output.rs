use crate::Failure;
use opinion::ModelSpec;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Files written by one command, each checked against its schema before the
/// manifest is written.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(PathBuf, Schema)>,
    started: Instant,
    started_unix: u64,
}

pub enum Schema {
    Csv(&'static [&'static str]),
    Json(&'static [&'static str]),
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    spec: Option<&'a ModelSpec>,
    seed: Option<u64>,
    workers: usize,
    opinion_version: &'static str,
    cli_version: &'static str,
    started_unix: u64,
    wall_seconds: f64,
    outputs: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_unix,
        })
    }

    /// Open `name` for writing and register its schema.
    pub fn create(&mut self, name: &str, schema: Schema) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))?;
        self.files.push((path, schema));
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        keys: &'static [&'static str],
        value: &T,
    ) -> Result<(), Failure> {
        let mut w = self.create(name, Schema::Json(keys))?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::io(e.to_string()))?;
        std::io::Write::write_all(&mut w, b"\n").map_err(|e| Failure::io(e.to_string()))
    }

    /// Validate every file, then write `<command>.manifest.json`.
    pub fn finish(
        self,
        command: &str,
        spec: Option<&ModelSpec>,
        seed: Option<u64>,
    ) -> Result<(), Failure> {
        for (path, schema) in &self.files {
            validate(path, schema)?;
        }
        let manifest = Manifest {
            command,
            spec,
            seed,
            workers: rayon::current_num_threads(),
            opinion_version: opinion::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self
                .files
                .iter()
                .map(|(p, _)| {
                    p.file_name()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned()
                })
                .collect(),
        };
        let path = self.dir.join(format!("{command}.manifest.json"));
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Failure::io(e.to_string()))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
    }
}

fn validate(path: &Path, schema: &Schema) -> Result<(), Failure> {
    let bad = |why: String| Failure::io(format!("{} fails its schema: {why}", path.display()));
    match schema {
        Schema::Csv(header) => {
            let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
            let found: Vec<String> = r
                .headers()
                .map_err(|e| bad(e.to_string()))?
                .iter()
                .map(String::from)
                .collect();
            if found != header.iter().map(|s| s.to_string()).collect::<Vec<_>>() {
                return Err(bad(format!("header {found:?}, expected {header:?}")));
            }
            for (i, rec) in r.records().enumerate() {
                let rec = rec.map_err(|e| bad(e.to_string()))?;
                if rec.len() != header.len() {
                    return Err(bad(format!("row {} has {} fields", i + 1, rec.len())));
                }
            }
        }
        Schema::Json(keys) => {
            let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if let Some(k) = keys.iter().find(|k| v.get(**k).is_none()) {
                return Err(bad(format!("missing key {k}")));
            }
        }
    }
    Ok(())
}
