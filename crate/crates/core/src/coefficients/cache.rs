//! Binary cache for coefficient tensors.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "TFLC"  u32 version
//! f64 alpha, lambda, sigma, nu, h   u32 dim, p, N_G
//! u64 N_1, N_f
//! f64 × N_1^d   row-major data
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, TflError};
use crate::params::{SchemeOrder, TflParams};

use super::{compute_coefficients, CoefficientTensor};

pub const CACHE_MAGIC: &[u8; 4] = b"TFLC";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache(tensor: &CoefficientTensor, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let p = tensor.params();
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    for v in [p.alpha, p.lambda, p.sigma, p.nu, p.h] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [p.dim as u32, p.order.as_u32(), tensor.quadrature_order() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [tensor.n_per_dim() as u64, tensor.fft_resolution() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub fn read_cache(path: &Path) -> Result<CoefficientTensor> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != CACHE_MAGIC {
        return Err(TflError::Format("not a coefficient cache (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(TflError::Format(format!("unsupported cache version {version}")));
    }
    let alpha = read_f64(&mut r)?;
    let lambda = read_f64(&mut r)?;
    let sigma = read_f64(&mut r)?;
    let nu = read_f64(&mut r)?;
    let h = read_f64(&mut r)?;
    let dim = read_u32(&mut r)? as usize;
    let order = SchemeOrder::from_u32(read_u32(&mut r)?)?;
    let ng = read_u32(&mut r)? as usize;
    let n1 = read_u64(&mut r)? as usize;
    let nf = read_u64(&mut r)? as usize;
    let params = TflParams::new(alpha, lambda, dim, order, h)?
        .with_sigma(sigma)?
        .with_nu(nu)?;
    let count = n1
        .checked_pow(dim as u32)
        .ok_or_else(|| TflError::Format("cache dimensions overflow".into()))?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(TflError::Format("trailing bytes after coefficient data".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    CoefficientTensor::from_parts(params, n1, nf, ng, data)
}

/// File name encoding everything the generators depend on. `σ` and `ν` do
/// not enter the generators, so they are left out of the key.
fn cache_name(params: &TflParams, n1: usize, nf: usize, ng: usize) -> String {
    format!(
        "tflc_d{}_p{}_a{:016x}_l{:016x}_h{:016x}_n{}_nf{}_ng{}.bin",
        params.dim,
        params.order,
        params.alpha.to_bits(),
        params.lambda.to_bits(),
        params.h.to_bits(),
        n1,
        nf,
        ng
    )
}

/// Reads the tensor from `dir` if a matching cache exists, otherwise
/// computes it and writes the cache.
pub fn load_or_compute(
    dir: &Path,
    params: &TflParams,
    n1: usize,
    nf: usize,
    ng: usize,
) -> Result<CoefficientTensor> {
    let path: PathBuf = dir.join(cache_name(params, n1, nf, ng));
    if path.exists() {
        if let Ok(t) = read_cache(&path) {
            let mut t = t;
            // the cached σ, ν may differ from the request
            t.params = *params;
            return Ok(t);
        }
    }
    let t = compute_coefficients(params, n1, nf, ng)?;
    fs::create_dir_all(dir)?;
    write_cache(&t, &path)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = TflParams::new(1.3, 0.5, 2, SchemeOrder::P6, 1.0 / 16.0)
            .unwrap()
            .with_nu(1.0)
            .unwrap();
        let t = compute_coefficients(&p, 6, 32, 10).unwrap();
        let path = dir.path().join("c.bin");
        write_cache(&t, &path).unwrap();
        assert_eq!(&fs::read(&path).unwrap()[..4], b"TFLC");
        assert_eq!(read_cache(&path).unwrap(), t);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(read_cache(&path), Err(TflError::Format(_))));
    }

    #[test]
    fn load_or_compute_reuses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = TflParams::new(0.6, 0.5, 1, SchemeOrder::P4, 0.05).unwrap();
        let a = load_or_compute(dir.path(), &p, 8, 64, 20).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = load_or_compute(dir.path(), &p, 8, 64, 20).unwrap();
        assert_eq!(a, b);
    }
}
