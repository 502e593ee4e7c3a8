//! Binary parameter files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `PINNMLP1`                          |
//! | 4     | u32 `n_inputs`                            |
//! | 4     | u32 `n_outputs`                           |
//! | 4     | u32 `hidden_layers`                       |
//! | 4     | u32 `hidden_width`                        |
//! | 4     | u32 activation code (order of `Activation::ALL`) |
//! | 8     | u64 seed                                  |
//! | 8     | u64 parameter count `n`                   |
//! | 8·n   | f64 parameters in flat order              |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, Mlp, MlpConfig, MlpParams, NetworkError};

pub const PARAMS_MAGIC: &[u8; 8] = b"PINNMLP1";

pub fn write_params<W: Write>(mut w: W, net: &Mlp) -> Result<(), NetworkError> {
    let c = &net.config;
    w.write_all(PARAMS_MAGIC)?;
    for v in [c.n_inputs, c.n_outputs, c.hidden_layers, c.hidden_width] {
        let v = u32::try_from(v).map_err(|_| NetworkError::Format(format!("{v} does not fit u32")))?;
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&c.activation.code().to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&(net.params.len() as u64).to_le_bytes())?;
    for p in &net.params.flat {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<Mlp, NetworkError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(NetworkError::Format("bad magic".into()));
    }
    let mut u32s = [0usize; 5];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b) as usize;
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let activation = Activation::from_code(u32s[4] as u32)
        .ok_or_else(|| NetworkError::Format(format!("unknown activation code {}", u32s[4])))?;
    let config = MlpConfig {
        n_inputs: u32s[0],
        n_outputs: u32s[1],
        hidden_layers: u32s[2],
        hidden_width: u32s[3],
        activation,
        seed,
    };
    config.validate()?;
    if n != config.param_count() {
        return Err(NetworkError::ParamCount { expected: config.param_count(), got: n });
    }
    let mut flat = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        flat.push(f64::from_le_bytes(b8));
    }
    let params = MlpParams::from_flat(&config, flat)?;
    Mlp::with_params(config, params)
}

pub fn save_params(path: impl AsRef<Path>, net: &Mlp) -> Result<(), NetworkError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_params(&mut w, net)?;
    w.flush()?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<Mlp, NetworkError> {
    read_params(BufReader::new(File::open(path)?))
}
