//! Line-delimited JSON training logs: one `{step, loss, lr, wall_ms}` record
//! per optimizer step, flushed as written so partial runs stay readable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

pub struct TrainLogger {
    out: Box<dyn Write + Send>,
    started: Instant,
}

impl TrainLogger {
    pub fn to_file(path: &Path) -> Result<TrainLogger, NeuralError> {
        let file = File::create(path)?;
        Ok(TrainLogger {
            out: Box::new(BufWriter::new(file)),
            started: Instant::now(),
        })
    }

    /// Discards records; for callers that do not want a log file.
    pub fn sink() -> TrainLogger {
        TrainLogger {
            out: Box::new(std::io::sink()),
            started: Instant::now(),
        }
    }

    pub fn log(&mut self, step: u64, loss: f64, lr: f64) -> Result<(), NeuralError> {
        let record = TrainRecord {
            step,
            loss,
            lr,
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        serde_json::to_writer(&mut self.out, &record)
            .map_err(|e| NeuralError::Io(std::io::Error::other(e)))?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainRecord>, NeuralError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| NeuralError::CorruptCheckpoint(format!("train log: {e}")))?,
        );
    }
    Ok(out)
}
