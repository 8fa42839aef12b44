//! Agent checkpoint: an agent header followed by the network in the
//! numerics parameter format.
//!
//! ```text
//! magic    4 bytes "TAAG"
//! version  u8
//! kind     u8   0 = dqn, 1 = actor-critic
//! table    u8   0 = discrete (u32 d) | 1 = grid (u32 action_dim, u32 n_axes,
//!               per axis: u32 slot, u32 n, n x f64)
//! head     u8   actor-critic only: 0 = discrete | 1 = gaussian (u32 dim, f64 stddev)
//! params   numerics checkpoint (DQN: online network)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::a3c::{A3cAgent, A3cConfig, PolicyHead};
use super::dqn::{DqnAgent, DqnConfig};
use super::grid::{ActionGrid, ActionTable};
use super::TrainedVictim;
use crate::error::{Error, Result};
use crate::numerics::{read_params, write_params};

const MAGIC: &[u8; 4] = b"TAAG";
const VERSION: u8 = 1;

fn write_table<W: Write>(out: &mut W, table: &ActionTable) -> Result<()> {
    match table {
        ActionTable::Discrete(d) => {
            out.write_all(&[0])?;
            out.write_all(&(*d as u32).to_le_bytes())?;
        }
        ActionTable::Grid(g) => {
            out.write_all(&[1])?;
            out.write_all(&(g.action_dim as u32).to_le_bytes())?;
            out.write_all(&(g.axes.len() as u32).to_le_bytes())?;
            for (axis, &slot) in g.axes.iter().zip(&g.slots) {
                out.write_all(&(slot as u32).to_le_bytes())?;
                out.write_all(&(axis.len() as u32).to_le_bytes())?;
                for v in axis {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_table<R: Read>(r: &mut R) -> Result<ActionTable> {
    match read_u8(r)? {
        0 => Ok(ActionTable::Discrete(read_u32(r)?)),
        1 => {
            let action_dim = read_u32(r)?;
            let n_axes = read_u32(r)?;
            if n_axes > 16 {
                return Err(Error::Checkpoint(format!("implausible axis count {n_axes}")));
            }
            let mut axes = Vec::new();
            let mut slots = Vec::new();
            for _ in 0..n_axes {
                slots.push(read_u32(r)?);
                let n = read_u32(r)?;
                if n > 1024 {
                    return Err(Error::Checkpoint(format!("implausible axis length {n}")));
                }
                axes.push((0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?);
            }
            Ok(ActionTable::Grid(
                ActionGrid::new(action_dim, axes, slots).map_err(|e| Error::Checkpoint(e.to_string()))?,
            ))
        }
        t => Err(Error::Checkpoint(format!("unknown action table tag {t}"))),
    }
}

pub fn write_victim<W: Write>(out: &mut W, victim: &TrainedVictim) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION])?;
    match victim {
        TrainedVictim::Dqn(agent) => {
            out.write_all(&[0])?;
            write_table(out, &agent.table)?;
            write_params(out, &agent.online)
        }
        TrainedVictim::A3c(agent) => {
            out.write_all(&[1])?;
            match &agent.head {
                PolicyHead::Discrete(table) => {
                    write_table(out, table)?;
                    out.write_all(&[0])?;
                }
                PolicyHead::Gaussian { action_dim, stddev } => {
                    write_table(out, &ActionTable::Discrete(0))?;
                    out.write_all(&[1])?;
                    out.write_all(&(*action_dim as u32).to_le_bytes())?;
                    out.write_all(&stddev.to_le_bytes())?;
                }
            }
            write_params(out, &agent.net)
        }
    }
}

/// Restores a frozen victim; training hyperparameters come back as defaults.
pub fn read_victim<R: Read>(input: &mut R) -> Result<TrainedVictim> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not an agent checkpoint".into()));
    }
    let version = read_u8(input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported agent checkpoint version {version}")));
    }
    match read_u8(input)? {
        0 => {
            let table = read_table(input)?;
            let params = read_params(input)?;
            Ok(TrainedVictim::Dqn(DqnAgent::from_params(params, table, DqnConfig::default())))
        }
        1 => {
            let table = read_table(input)?;
            let head = match read_u8(input)? {
                0 => PolicyHead::Discrete(table),
                1 => PolicyHead::Gaussian {
                    action_dim: read_u32(input)?,
                    stddev: read_f64(input)?,
                },
                t => return Err(Error::Checkpoint(format!("unknown policy head tag {t}"))),
            };
            let params = read_params(input)?;
            Ok(TrainedVictim::A3c(A3cAgent::from_params(params, head, A3cConfig::default())))
        }
        k => Err(Error::Checkpoint(format!("unknown agent kind {k}"))),
    }
}

pub fn save_victim(path: &Path, victim: &TrainedVictim) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_victim(&mut out, victim)?;
    out.flush()?;
    Ok(())
}

pub fn load_victim(path: &Path) -> Result<TrainedVictim> {
    let file = File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    read_victim(&mut BufReader::new(file))
}
