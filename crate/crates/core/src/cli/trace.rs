//! Line-delimited JSON traces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::executive::ExecutionTrace;

pub fn write_trace<W: Write>(trace: &ExecutionTrace, mut out: W) -> std::io::Result<()> {
    for r in &trace.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// One record per line; an empty trace gives an empty file.
pub fn emit_trace(trace: &ExecutionTrace, path: &Path) -> std::io::Result<()> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn trace_to_string(trace: &ExecutionTrace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
