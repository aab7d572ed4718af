//! Output files with a reproducibility header block.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug)]
pub struct Header<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub seed: Option<u64>,
}

impl Header<'_> {
    /// The resolved config without the output location, so that runs writing
    /// to different places stay byte-identical.
    fn recorded(&self) -> ExperimentConfig {
        ExperimentConfig { output: None, ..self.config.clone() }
    }

    /// `#`-prefixed lines: tool version, command, seed and the resolved config.
    pub fn csv(&self, body: &str) -> String {
        let mut out = format!("# qinf {VERSION}\n# command: {}\n", self.command);
        match self.seed {
            Some(s) => out.push_str(&format!("# seed: {s}\n")),
            None => out.push_str("# seed: none\n"),
        }
        out.push_str("# config:\n");
        for line in self.recorded().to_toml().lines() {
            out.push_str(&format!("#   {line}\n"));
        }
        out.push_str(body);
        out
    }

    pub fn json<T: Serialize>(&self, report: &T) -> String {
        let doc = json!({
            "header": {
                "tool": "qinf",
                "version": VERSION,
                "command": self.command,
                "seed": self.seed,
                "config": self.recorded(),
            },
            "report": report,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn svg_comment(&self, svg: String) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        let note = format!("<!-- qinf {VERSION}; command: {}; seed: {seed} -->\n", self.command);
        match svg.find("?>") {
            Some(i) => format!("{}\n{note}{}", &svg[..i + 2], svg[i + 2..].trim_start()),
            None => note + &svg,
        }
    }
}

/// A named output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutFile {
    pub name: String,
    pub contents: String,
}

pub fn write_all(dir: &Path, files: &[OutFile]) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for f in files {
        std::fs::write(dir.join(&f.name), &f.contents)?;
    }
    Ok(())
}
