//! Atomic file output.

use crate::config::OutputFormat;
use crate::record::ResultRecord;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Write `contents` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Write a record as `<dir>/<name>.json`, plus `<dir>/<name>.<series>.csv`
/// per series in CSV mode. The JSON file is written last.
pub fn write_record(record: &ResultRecord, dir: &Path, format: OutputFormat) -> io::Result<Vec<PathBuf>> {
    let name = &record.config.name;
    let mut written = Vec::new();
    let json = match format {
        OutputFormat::Json => record.to_json(),
        OutputFormat::Csv => {
            let mut stripped = record.clone();
            let mut files = Vec::new();
            for s in &record.series {
                let path = dir.join(format!("{name}.{}.csv", s.name));
                let text = s.to_csv().map_err(io::Error::other)?;
                write_atomic(&path, text.as_bytes())?;
                files.push(path.file_name().unwrap().to_string_lossy().into_owned());
                written.push(path);
            }
            stripped.series.clear();
            let mut v = serde_json::to_value(&stripped).expect("record serializes");
            v["series_files"] = serde_json::json!(files);
            serde_json::to_string_pretty(&v).expect("value serializes")
        }
    };
    let path = dir.join(format!("{name}.json"));
    write_atomic(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}
