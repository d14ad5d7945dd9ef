use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hypersat_core::wcnf::parse_dimacs;
use hypersat_core::WcnfInstance;

fn is_instance_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("cnf" | "wcnf")
    )
}

/// Instance files in `dir`, sorted by name.
pub fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_instance_file(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Expands files, directories and glob patterns, keeping argument order.
pub fn expand(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for pattern in patterns {
        let path = Path::new(pattern);
        if path.is_dir() {
            out.extend(list_dir(path)?);
        } else if path.exists() {
            out.push(path.to_path_buf());
        } else {
            let mut matched: Vec<PathBuf> = glob::glob(pattern)
                .with_context(|| format!("bad pattern `{pattern}`"))?
                .collect::<Result<_, _>>()?;
            if matched.is_empty() {
                bail!("no files match `{pattern}`");
            }
            matched.sort();
            out.extend(matched);
        }
    }
    Ok(out)
}

/// Parses a DIMACS file; the instance is named after the file stem.
pub fn load(path: &Path) -> Result<WcnfInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_dimacs(&text)
        .with_context(|| format!("parsing {}", path.display()))?
        .with_name(name))
}

pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    Ok(builder.build()?)
}
