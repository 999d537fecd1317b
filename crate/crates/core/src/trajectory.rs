//! Recorded frames, per-frame metrics, CSV/binary export and the trajectory hash.
//!
//! The binary stream is little-endian:
//!
//! ```text
//! "MWTR" | version u32 (=1) | frame count u64 | frames...
//! frame: t f64 | node count u64 | positions (3 f64 each) | velocities |
//!        magnet position (3 f64) | magnet axis (3 f64) |
//!        cargo count u64 | cargo (position, velocity)
//! ```
//!
//! The trajectory hash is the SHA-256 digest of that stream.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::MagnetPose;
use crate::error::{Error, Result};
use crate::units::Vec3;

pub const MAGIC: &[u8; 4] = b"MWTR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CargoState {
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub magnet: MagnetPose,
    pub cargo: Vec<CargoState>,
}

/// Scalar series, one entry per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    /// Largest nodal curvature, 1/m.
    pub kappa_max: Vec<f64>,
    /// Head node speed, m/s.
    pub head_speed: Vec<f64>,
    /// Head to magnet distance projected on the x-y plane, m.
    pub gap: Vec<f64>,
    /// Field magnitude at the head, T.
    pub b_at_head: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub metrics: Metrics,
}

fn put_vec(out: &mut Vec<u8>, v: &Vec3) {
    for c in v.iter() {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

impl Frame {
    pub fn write_canonical(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.positions.len() as u64).to_le_bytes());
        for p in &self.positions {
            put_vec(out, p);
        }
        for v in &self.velocities {
            put_vec(out, v);
        }
        put_vec(out, &self.magnet.position);
        put_vec(out, &self.magnet.axis);
        out.extend_from_slice(&(self.cargo.len() as u64).to_le_bytes());
        for c in &self.cargo {
            put_vec(out, &c.position);
            put_vec(out, &c.velocity);
        }
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u64).to_le_bytes());
        for f in &self.frames {
            f.write_canonical(&mut out);
        }
        out
    }

    /// Lowercase hex SHA-256 of [`Trajectory::to_binary`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_binary()))
    }

    /// Frames only; metrics are not part of the stream.
    pub fn read_binary(mut input: impl Read) -> Result<Vec<Frame>> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Invalid("not a trajectory stream (bad magic)".into()));
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(Error::Invalid(format!("unsupported trajectory stream version {version}")));
        }
        let count = read_u64(&mut input)?;
        let mut frames = Vec::new();
        for _ in 0..count {
            let t = read_f64(&mut input)?;
            let n = read_u64(&mut input)? as usize;
            let positions = (0..n).map(|_| read_vec(&mut input)).collect::<Result<_>>()?;
            let velocities = (0..n).map(|_| read_vec(&mut input)).collect::<Result<_>>()?;
            let magnet = MagnetPose { position: read_vec(&mut input)?, axis: read_vec(&mut input)? };
            let nc = read_u64(&mut input)? as usize;
            let cargo = (0..nc)
                .map(|_| Ok(CargoState { position: read_vec(&mut input)?, velocity: read_vec(&mut input)? }))
                .collect::<Result<_>>()?;
            frames.push(Frame { t, positions, velocities, magnet, cargo });
        }
        Ok(frames)
    }

    pub const NODES_HEADER: &'static str = "frame,t_s,node,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s";
    pub const METRICS_HEADER: &'static str =
        "frame,t_s,kappa_max_1_m,head_speed_m_s,gap_m,b_at_head_T,magnet_x_m,magnet_y_m,magnet_z_m,axis_x,axis_y,axis_z";

    /// One row per frame per node.
    pub fn write_nodes_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", Self::NODES_HEADER)?;
        for (k, f) in self.frames.iter().enumerate() {
            for (i, (p, v)) in f.positions.iter().zip(&f.velocities).enumerate() {
                writeln!(out, "{k},{:?},{i},{:?},{:?},{:?},{:?},{:?},{:?}", f.t, p.x, p.y, p.z, v.x, v.y, v.z)?;
            }
        }
        Ok(())
    }

    /// One row per frame.
    pub fn write_metrics_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", Self::METRICS_HEADER)?;
        for (k, f) in self.frames.iter().enumerate() {
            let m = &self.metrics;
            let (p, a) = (f.magnet.position, f.magnet.axis);
            writeln!(
                out,
                "{k},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                f.t, m.kappa_max[k], m.head_speed[k], m.gap[k], m.b_at_head[k], p.x, p.y, p.z, a.x, a.y, a.z
            )?;
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_vec(r: &mut impl Read) -> Result<Vec3> {
    Ok(Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?))
}
