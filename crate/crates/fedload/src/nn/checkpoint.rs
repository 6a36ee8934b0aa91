//! Model checkpoint container: magic "FLSM", version, layer widths, then the
//! canonical flat parameter vector as little-endian f64. Bit-exact round trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::params::ModelParams;

const MAGIC: &[u8; 4] = b"FLSM";
const VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let widths = params.widths();
    w.write_all(&(widths.len() as u32).to_le_bytes())?;
    for width in &widths {
        w.write_all(&(*width as u32).to_le_bytes())?;
    }
    let flat = params.flatten();
    w.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in &flat {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!(
            "{}: not a model checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            version
        )));
    }
    let n_widths = read_u32(&mut r)? as usize;
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(read_u32(&mut r)? as usize);
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let n_values = u64::from_le_bytes(len_bytes) as usize;
    if n_values != ModelParams::param_count(&widths) {
        return Err(Error::Data(format!(
            "{}: vector length {} does not match widths {:?}",
            path.display(),
            n_values,
            widths
        )));
    }
    let mut flat = Vec::with_capacity(n_values);
    let mut buf = [0u8; 8];
    for _ in 0..n_values {
        r.read_exact(&mut buf)?;
        flat.push(f64::from_le_bytes(buf));
    }
    ModelParams::unflatten(&widths, &flat)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.flsm");
        let p = init_params(&[1, 5, 3], 21).unwrap();
        save_checkpoint(&path, &p).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(
            p.flatten()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            q.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_non_checkpoint_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
