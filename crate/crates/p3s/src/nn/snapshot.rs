//! Versioned flat binary snapshot format for network parameters.
//!
//! Byte layout (all multi-byte values little-endian):
//!
//! ```text
//! offset  size             field
//! 0       4                magic bytes "P3SN"
//! 4       4                format version (u32, currently 1)
//! 8       1                output activation (0 = linear, 1 = tanh)
//! 9       4                number of layer sizes L (u32)
//! 13      4 * L            layer sizes (u32 each)
//! ...     per layer l = 0..L-1:
//!             8 * sizes[l+1] * sizes[l]   weights, row-major (out x in), f64
//!             8 * sizes[l+1]              biases, f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Mlp, OutputActivation};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"P3SN";
const VERSION: u32 = 1;

pub fn save_network(net: &Mlp, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let act = match net.output_activation() {
        OutputActivation::Linear => 0u8,
        OutputActivation::Tanh => 1u8,
    };
    out.write_all(&[act])?;
    let sizes = net.sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    let (weights, biases) = net.weights_raw();
    for l in 0..weights.len() {
        for &w in &weights[l] {
            out.write_all(&w.to_le_bytes())?;
        }
        for &b in &biases[l] {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Mlp> {
    let mut inp = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    inp.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let version = read_u32(&mut inp)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let mut act_byte = [0u8; 1];
    inp.read_exact(&mut act_byte)?;
    let activation = match act_byte[0] {
        0 => OutputActivation::Linear,
        1 => OutputActivation::Tanh,
        other => return Err(Error::Snapshot(format!("unknown activation tag {other}"))),
    };
    let n_sizes = read_u32(&mut inp)? as usize;
    if n_sizes < 2 {
        return Err(Error::Snapshot(format!("need >= 2 layer sizes, got {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        let s = read_u32(&mut inp)? as usize;
        if s == 0 {
            return Err(Error::Snapshot("zero layer size".into()));
        }
        sizes.push(s);
    }
    let mut weights = Vec::with_capacity(n_sizes - 1);
    let mut biases = Vec::with_capacity(n_sizes - 1);
    for l in 0..n_sizes - 1 {
        let w = read_f64_vec(&mut inp, sizes[l + 1] * sizes[l])?;
        let b = read_f64_vec(&mut inp, sizes[l + 1])?;
        weights.push(w);
        biases.push(b);
    }
    Ok(Mlp::from_raw(sizes, weights, biases, activation))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
