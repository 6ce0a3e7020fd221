//! Binary trajectory dump.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  b"DDBHTRJ1"
//! hash       u64      caller-supplied configuration hash
//! n_sites    u32
//! n_times    u32
//! n_traj     u32
//! indices    n_traj x u64       trajectory indices
//! records    n_times x { t: f64, n_traj x n_sites x f64 }
//! ```
//!
//! Records are time-major: for each recorded time, the per-site raw Wigner
//! populations `|alpha_j|^2` of every dumped trajectory, trajectory-major
//! within a time.

use std::io::{self, Read, Write};

use super::ensemble::TrajectoryRecord;

const MAGIC: &[u8; 8] = b"DDBHTRJ1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub config_hash: u64,
    pub n_sites: usize,
    pub indices: Vec<u64>,
    pub times: Vec<f64>,
    /// `[time][trajectory][site]`
    pub populations: Vec<Vec<Vec<f64>>>,
}

pub fn write_trajectory_dump<W: Write>(mut w: W, config_hash: u64, records: &[TrajectoryRecord]) -> io::Result<()> {
    let n_sites = records.first().map_or(0, |r| r.final_state.amplitudes.len());
    let n_times = records.first().map_or(0, |r| r.times.len());
    if records.iter().any(|r| r.times.len() != n_times || r.final_state.amplitudes.len() != n_sites) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "records have inconsistent shapes"));
    }
    w.write_all(MAGIC)?;
    w.write_all(&config_hash.to_le_bytes())?;
    for v in [n_sites, n_times, records.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for r in records {
        w.write_all(&(r.index as u64).to_le_bytes())?;
    }
    for t in 0..n_times {
        w.write_all(&records.first().map_or(0.0, |r| r.times[t]).to_le_bytes())?;
        for r in records {
            for v in &r.site_population_w[t] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_trajectory_dump<R: Read>(mut r: R) -> io::Result<TrajectoryDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a trajectory dump"));
    }
    let config_hash = read_u64(&mut r)?;
    let n_sites = read_u32(&mut r)? as usize;
    let n_times = read_u32(&mut r)? as usize;
    let n_traj = read_u32(&mut r)? as usize;
    let indices = (0..n_traj).map(|_| read_u64(&mut r)).collect::<io::Result<Vec<_>>>()?;
    let mut times = Vec::with_capacity(n_times);
    let mut populations = Vec::with_capacity(n_times);
    for _ in 0..n_times {
        times.push(read_f64(&mut r)?);
        let mut at_t = Vec::with_capacity(n_traj);
        for _ in 0..n_traj {
            at_t.push((0..n_sites).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?);
        }
        populations.push(at_t);
    }
    Ok(TrajectoryDump { config_hash, n_sites, indices, times, populations })
}
