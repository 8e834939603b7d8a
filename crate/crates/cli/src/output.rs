use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Full round-trip precision (17 significant digits).
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path).map_err(|e| {
            CliError::Config(format!("cannot create output directory {}: {e}", path.display()))
        })?;
        Ok(Self(path.to_path_buf()))
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.0.join(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut w = self.open(name)?;
        let io = |e: std::io::Error| CliError::Config(format!("writing {name}: {e}"));
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for row in rows {
            let line: Vec<String> = row.into_iter().map(num).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        let io = |e: std::io::Error| CliError::Config(format!("writing {name}: {e}"));
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Config(e.to_string()))?;
        writeln!(w).map_err(io)?;
        w.flush().map_err(io)
    }
}
