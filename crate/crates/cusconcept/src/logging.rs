//! Human progress lines on stderr plus an optional JSON-lines mirror.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::stage1::StepEvent;

pub struct RunLogger {
    every: usize,
    jsonl: Option<std::fs::File>,
}

impl RunLogger {
    pub fn new(every: usize, jsonl_path: Option<&Path>) -> Result<Self> {
        let jsonl = match jsonl_path {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                Some(std::fs::OpenOptions::new().create(true).append(true).open(path)?)
            }
            None => None,
        };
        Ok(RunLogger { every, jsonl })
    }

    pub fn silent() -> Self {
        RunLogger { every: 0, jsonl: None }
    }

    pub fn event(&mut self, message: &str) {
        eprintln!("{message}");
        if let Some(file) = &mut self.jsonl {
            let _ = writeln!(file, "{}", serde_json::json!({ "event": message }));
        }
    }

    pub fn step(&mut self, stage: &str, event: &StepEvent) {
        if self.every > 0 && event.step.is_multiple_of(self.every) {
            eprintln!(
                "[{stage}] step {:>5}  loss {:.6}  norms {}",
                event.step,
                event.loss,
                event
                    .centroid_norms
                    .iter()
                    .map(|n| format!("{n:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        if let Some(file) = &mut self.jsonl {
            let _ = writeln!(
                file,
                "{}",
                serde_json::json!({
                    "stage": stage,
                    "step": event.step,
                    "loss": event.loss,
                    "norms": event.centroid_norms,
                })
            );
        }
    }
}
