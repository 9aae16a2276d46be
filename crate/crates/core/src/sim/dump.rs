//! Raw binary dump of simulated paths.
//!
//! Layout, all little-endian: a header of three `u64` (`n_steps`, `n_paths`,
//! `seed`), then per path `n` values `ΔB`, `n` values `X(t_1..t_n)`, `n` values
//! `V(t_0..t_{n−1})`, `n + 1` values `log S(t_0..t_n)` and one `I_T`, as `f64`.

use std::io::{Read, Write};

use super::PathBundle;
use crate::error::{Result, SsrError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathDumpHeader {
    pub n_steps: u64,
    pub n_paths: u64,
    pub seed: u64,
}

pub fn write_path_dump<W: Write>(
    mut w: W,
    header: PathDumpHeader,
    paths: impl IntoIterator<Item = PathBundle>,
) -> Result<()> {
    for v in [header.n_steps, header.n_paths, header.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    let n = header.n_steps as usize;
    let mut written = 0u64;
    for p in paths {
        if p.brownian_increments.len() != n || p.log_spot.len() != n + 1 {
            return Err(SsrError::Validation(format!(
                "path has {} steps, dump header says {n}",
                p.brownian_increments.len()
            )));
        }
        let values = p
            .brownian_increments
            .iter()
            .chain(&p.volterra)
            .chain(&p.variance)
            .chain(&p.log_spot)
            .chain(std::iter::once(&p.integral));
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        written += 1;
    }
    if written != header.n_paths {
        return Err(SsrError::Validation(format!(
            "dump header announces {} paths, {written} were written",
            header.n_paths
        )));
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_dump<R: Read>(mut r: R) -> Result<(PathDumpHeader, Vec<PathBundle>)> {
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let header = PathDumpHeader {
        n_steps: next_u64(&mut r)?,
        n_paths: next_u64(&mut r)?,
        seed: next_u64(&mut r)?,
    };
    let n = header.n_steps as usize;
    let mut buf = vec![0u8; 8 * (4 * n + 2)];
    let mut paths = Vec::new();
    for _ in 0..header.n_paths {
        r.read_exact(&mut buf)?;
        let vals: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        paths.push(PathBundle {
            brownian_increments: vals[..n].to_vec(),
            volterra: vals[n..2 * n].to_vec(),
            variance: vals[2 * n..3 * n].to_vec(),
            log_spot: vals[3 * n..4 * n + 1].to_vec(),
            integral: vals[4 * n + 1],
        });
    }
    Ok((header, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = PathBundle {
            brownian_increments: vec![0.1, -0.2],
            volterra: vec![0.3, 0.4],
            variance: vec![0.04, 0.05],
            log_spot: vec![0.0, 0.01, -0.02],
            integral: 0.125,
        };
        let header = PathDumpHeader {
            n_steps: 2,
            n_paths: 2,
            seed: 42,
        };
        let mut bytes = Vec::new();
        write_path_dump(&mut bytes, header, vec![p.clone(), p.clone()]).unwrap();
        assert_eq!(bytes.len(), 24 + 2 * 8 * 10);
        let (h, paths) = read_path_dump(bytes.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(paths, vec![p.clone(), p]);
    }

    #[test]
    fn path_count_mismatch_is_reported() {
        let header = PathDumpHeader {
            n_steps: 1,
            n_paths: 3,
            seed: 0,
        };
        let p = PathBundle {
            brownian_increments: vec![0.0],
            volterra: vec![0.0],
            variance: vec![0.04],
            log_spot: vec![0.0, 0.0],
            integral: 0.0,
        };
        assert!(write_path_dump(Vec::new(), header, vec![p]).is_err());
    }
}
