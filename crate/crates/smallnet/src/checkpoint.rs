//! Versioned flat binary checkpoints: header, widths, gate constants, then
//! parameters and log-alphas as little-endian f64.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use lagrangekit::scalar::Scalar;
use lagrangekit::{Error, Result};
use nalgebra::DVector;

use crate::gates::GateParams;
use crate::net::{DenseNet, DenseNetSpec};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LKNT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(mut w: W, net: &DenseNet<T>, gates: &GateParams<T>) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    let widths = &net.spec.layer_widths;
    w.write_u32::<LittleEndian>(widths.len() as u32)?;
    for &k in widths {
        w.write_u64::<LittleEndian>(k as u64)?;
    }
    for v in [gates.beta, gates.gamma, gates.zeta] {
        w.write_f64::<LittleEndian>(v.to_f64_lossy())?;
    }
    for block in [&net.params, &gates.log_alpha] {
        w.write_u64::<LittleEndian>(block.len() as u64)?;
        for v in block.iter() {
            w.write_f64::<LittleEndian>(v.to_f64_lossy())?;
        }
    }
    Ok(())
}

fn read_block<T: Scalar, R: Read>(r: &mut R, expected: usize, what: &str) -> Result<DVector<T>> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    if n != expected {
        return Err(Error::Parse(format!("{what}: expected {expected} values, header says {n}")));
    }
    let mut out = DVector::zeros(n);
    for v in out.iter_mut() {
        *v = T::lit(r.read_f64::<LittleEndian>()?);
    }
    Ok(out)
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<(DenseNet<T>, GateParams<T>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse("not a network checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let nw = r.read_u32::<LittleEndian>()? as usize;
    if nw > 1024 {
        return Err(Error::Parse(format!("implausible layer count {nw}")));
    }
    let widths = (0..nw)
        .map(|_| r.read_u64::<LittleEndian>().map(|k| k as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let spec = DenseNetSpec::new(widths).map_err(|e| Error::Parse(e.to_string()))?;
    let beta = T::lit(r.read_f64::<LittleEndian>()?);
    let gamma = T::lit(r.read_f64::<LittleEndian>()?);
    let zeta = T::lit(r.read_f64::<LittleEndian>()?);
    let params = read_block(&mut r, spec.num_params(), "parameters")?;
    let log_alpha = read_block(&mut r, spec.num_gates(), "gates")?;
    let gates = GateParams::new(log_alpha, beta, gamma, zeta).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((DenseNet::from_params(spec, params)?, gates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact_for_f64() {
        let spec = DenseNetSpec::new(vec![3, 4, 2]).unwrap();
        let net = DenseNet::<f64>::init(spec.clone(), &mut ChaCha8Rng::seed_from_u64(5));
        let mut gates = GateParams::with_droprate(spec.num_gates(), 0.01).unwrap();
        gates.log_alpha[2] = -1.25;
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net, &gates).unwrap();
        let (n2, g2) = read_checkpoint::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(n2, net);
        assert_eq!(g2, gates);
    }

    #[test]
    fn corrupted_headers_rejected() {
        let spec = DenseNetSpec::new(vec![2, 2]).unwrap();
        let net = DenseNet::<f64>::zeros(spec.clone());
        let gates = GateParams::with_droprate(spec.num_gates(), 0.01).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net, &gates).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint::<f64, _>(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(read_checkpoint::<f64, _>(bad.as_slice()).is_err());
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint::<f64, _>(buf.as_slice()).is_err());
    }
}
