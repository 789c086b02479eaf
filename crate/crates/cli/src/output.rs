//! Schema-tagged CSV output, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// CSV text with a leading `# schema: <tag>` comment and a header row.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        let mut buf = Vec::new();
        writeln!(buf, "# schema: {schema}").expect("write to memory");
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        writer.write_record(header).expect("write to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("write to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flush to memory")
    }

    pub fn write(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.into_bytes())
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let tmp = partial_path(path);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", tmp.display()))
}

fn partial_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial"))
}

/// Shortest round-trip formatting, so equal values print identically.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Rows of a schema-tagged CSV, addressed by column name.
pub struct CsvRows {
    origin: String,
    headers: csv::StringRecord,
    pub rows: Vec<csv::StringRecord>,
}

impl CsvRows {
    pub fn read(path: &Path, schema: &str) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let first = text.lines().next().unwrap_or_default();
        let expected = format!("# schema: {schema}");
        if first.trim_end() != expected {
            anyhow::bail!("{}: expected schema line {expected:?}, found {first:?}", path.display());
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let rows = reader
            .records()
            .enumerate()
            .map(|(i, r)| r.with_context(|| format!("{}: malformed data row {}", path.display(), i + 1)))
            .collect::<Result<_>>()?;
        Ok(Self { origin: path.display().to_string(), headers, rows })
    }

    pub fn get<'a>(&self, row: &'a csv::StringRecord, column: &str) -> Result<&'a str> {
        let i = self
            .headers
            .iter()
            .position(|h| h == column)
            .with_context(|| format!("{}: missing column {column}", self.origin))?;
        row.get(i).with_context(|| format!("{}: short row", self.origin))
    }

    pub fn parse<T: std::str::FromStr>(&self, row: &csv::StringRecord, column: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(row, column)?;
        v.parse().map_err(|e| anyhow::anyhow!("{}: column {column}: cannot parse {v:?}: {e}", self.origin))
    }
}
