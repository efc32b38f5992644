//! Checkpoint layout: `key=value` header lines, one blank line, then the
//! `(n+1)^2` nodal values as little-endian `f64`, row-major in `eta`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::field::Field;
use crate::geometry::BoundaryLayout;

pub const CHECKPOINT_VERSION: &str = "fbflow-checkpoint-1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub theta: f64,
    pub n: usize,
    pub h: f64,
    pub epsilon: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub amplitude: f64,
    pub x0: f64,
    pub delta: f64,
    pub step: usize,
    pub time: f64,
    pub layout: BoundaryLayout,
}

fn layout_name(l: BoundaryLayout) -> &'static str {
    match l {
        BoundaryLayout::NeumannCorner => "neumann_corner",
        BoundaryLayout::Channel => "channel",
    }
}

/// Serializes into any writer.
pub fn write_checkpoint(mut w: impl Write, f: &Field<f64>, meta: &CheckpointMeta) -> std::io::Result<()> {
    assert_eq!(f.n(), meta.n, "field and header disagree on n");
    // `{}` on f64 prints the shortest string that parses back to the same bits
    let header = format!(
        "format={CHECKPOINT_VERSION}\ntheta={}\nn={}\nh={}\nepsilon={}\nlambda1={}\nlambda2={}\nA={}\nx0={}\ndelta={}\nstep={}\ntime={}\nlayout={}\n\n",
        meta.theta,
        meta.n,
        meta.h,
        meta.epsilon,
        meta.lambda1,
        meta.lambda2,
        meta.amplitude,
        meta.x0,
        meta.delta,
        meta.step,
        meta.time,
        layout_name(meta.layout)
    );
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(f.values().len() * 8);
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn save_checkpoint(path: &Path, f: &Field<f64>, meta: &CheckpointMeta) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, f, meta).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses a checkpoint from bytes; `origin` is only used in messages.
pub fn read_checkpoint(bytes: &[u8], origin: &Path) -> Result<(Field<f64>, CheckpointMeta), Error> {
    let fail = |m: String| Error::Checkpoint { path: origin.to_path_buf(), message: m };
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| fail("header is not terminated by a blank line".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| fail("header is not UTF-8".into()))?;
    let payload = &bytes[split + 2..];
    let mut pairs = std::collections::HashMap::new();
    for line in header.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| fail(format!("malformed header line `{line}`")))?;
        pairs.insert(k.trim(), v.trim());
    }
    let get = |k: &str| pairs.get(k).copied().ok_or_else(|| fail(format!("missing header key `{k}`")));
    let version = get("format")?;
    if version != CHECKPOINT_VERSION {
        return Err(fail(format!("format `{version}` is not supported (expected `{CHECKPOINT_VERSION}`)")));
    }
    let float = |k: &str| -> Result<f64, Error> { get(k)?.parse::<f64>().map_err(|_| fail(format!("bad value for `{k}`"))) };
    let int = |k: &str| -> Result<usize, Error> { get(k)?.parse::<usize>().map_err(|_| fail(format!("bad value for `{k}`"))) };
    let layout = match get("layout")? {
        "neumann_corner" => BoundaryLayout::NeumannCorner,
        "channel" => BoundaryLayout::Channel,
        other => return Err(fail(format!("unknown layout `{other}`"))),
    };
    let meta = CheckpointMeta {
        theta: float("theta")?,
        n: int("n")?,
        h: float("h")?,
        epsilon: float("epsilon")?,
        lambda1: float("lambda1")?,
        lambda2: float("lambda2")?,
        amplitude: float("A")?,
        x0: float("x0")?,
        delta: float("delta")?,
        step: int("step")?,
        time: float("time")?,
        layout,
    };
    let expected = (meta.n + 1) * (meta.n + 1);
    if payload.len() != expected * 8 {
        return Err(fail(format!(
            "size mismatch: header n = {} needs {} values, payload holds {} bytes",
            meta.n,
            expected,
            payload.len()
        )));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((Field::from_values(meta.n, values)?, meta))
}

pub fn load_checkpoint(path: &Path) -> Result<(Field<f64>, CheckpointMeta), Error> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, path)
}
