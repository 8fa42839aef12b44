//! Binary parameter checkpoint.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "TAMP"
//! version    u8       CHECKPOINT_VERSION
//! hidden     u8       activation code (0 identity, 1 tanh, 2 relu)
//! output     u8       activation code
//! n_sizes    u32
//! sizes      n_sizes x u32
//! per layer: weights out*in f64 (row-major), then bias out f64
//! ```

use std::io::{Read, Write};

use super::mlp::{Activation, MlpParams, MlpSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TAMP";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn write_params<W: Write>(out: &mut W, params: &MlpParams) -> Result<()> {
    let spec = params.spec();
    out.write_all(MAGIC)?;
    out.write_all(&[CHECKPOINT_VERSION, spec.hidden.code(), spec.output.code()])?;
    out.write_all(&(spec.layer_sizes.len() as u32).to_le_bytes())?;
    for &n in &spec.layer_sizes {
        out.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in params.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(input: &mut R) -> Result<MlpParams> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut head = [0u8; 3];
    input.read_exact(&mut head)?;
    if head[0] != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", head[0])));
    }
    let act = |c| Activation::from_code(c).ok_or_else(|| Error::Checkpoint(format!("bad activation code {c}")));
    let (hidden, output) = (act(head[1])?, act(head[2])?);
    let n_sizes = read_u32(input)? as usize;
    if n_sizes > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| read_u32(input).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let spec = MlpSpec::new(sizes, hidden, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut flat = Vec::with_capacity(spec.param_count());
    let mut buf = [0u8; 8];
    for _ in 0..spec.param_count() {
        input.read_exact(&mut buf)?;
        flat.push(f64::from_le_bytes(buf));
    }
    MlpParams::from_flat(&spec, &flat)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
