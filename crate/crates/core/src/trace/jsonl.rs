use std::io::{BufRead, Write};

use super::TraceStep;
use crate::error::{Error, Result};

/// Writes one JSON object per line. An empty slice writes nothing.
pub fn write_trace<W: Write>(steps: &[TraceStep], mut sink: W) -> Result<()> {
    for step in steps {
        serde_json::to_writer(&mut sink, step).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads and validates a JSONL trace. Blank lines are skipped; every other
/// line must hold the next step.
pub fn read_trace<R: BufRead>(source: R) -> Result<Vec<TraceStep>> {
    let mut steps: Vec<TraceStep> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let step: TraceStep = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let expected = steps.last().map_or(1, |s| s.step + 1);
        if step.step != expected {
            return Err(err(format!(
                "non-contiguous step (expected {expected}, found {})",
                step.step
            )));
        }
        if let Some(prev) = steps.last() {
            if prev.action.dim() != step.action.dim() {
                return Err(err(format!(
                    "action dimension changed from {} to {}",
                    prev.action.dim(),
                    step.action.dim()
                )));
            }
        }
        steps.push(step);
    }
    Ok(steps)
}
