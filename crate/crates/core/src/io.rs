//! Binary ensemble files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | size            |
//! |------------------|-----------------|
//! | magic `FSPDEENS` | 8               |
//! | version          | u32             |
//! | config SHA-256   | 32              |
//! | base seed        | u64             |
//! | level (NaN: none)| f64             |
//! | replicas         | u64             |
//! | rows (`nt + 1`)  | u64             |
//! | nx               | u64             |
//! | per replica      | seed u64, then `rows * nx` f64 |

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FSPDEENS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleHeader {
    pub config_hash: [u8; 32],
    pub base_seed: u64,
    pub level: Option<f64>,
    pub replicas: u64,
    pub rows: u64,
    pub nx: u64,
}

impl EnsembleHeader {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&self.base_seed.to_le_bytes())?;
        w.write_all(&self.level.unwrap_or(f64::NAN).to_le_bytes())?;
        for v in [self.replicas, self.rows, self.nx] {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an ensemble file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_array(r)?);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported ensemble version {version}"
            )));
        }
        let config_hash = read_array(r)?;
        let base_seed = u64::from_le_bytes(read_array(r)?);
        let level = f64::from_le_bytes(read_array(r)?);
        let replicas = u64::from_le_bytes(read_array(r)?);
        let rows = u64::from_le_bytes(read_array(r)?);
        let nx = u64::from_le_bytes(read_array(r)?);
        Ok(Self {
            config_hash,
            base_seed,
            level: (!level.is_nan()).then_some(level),
            replicas,
            rows,
            nx,
        })
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Append one replica.
pub fn write_replica<W: Write>(w: &mut W, seed: u64, values: &[Vec<f64>]) -> Result<()> {
    w.write_all(&seed.to_le_bytes())?;
    for row in values {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// One replica as `(seed, rows)`.
pub fn read_replica<R: Read>(r: &mut R, header: &EnsembleHeader) -> Result<Replica> {
    let seed = u64::from_le_bytes(read_array(r)?);
    let nx = header.nx as usize;
    let mut buf = vec![0u8; nx * 8];
    let mut rows = Vec::with_capacity(header.rows as usize);
    for _ in 0..header.rows {
        r.read_exact(&mut buf)?;
        rows.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        );
    }
    Ok((seed, rows))
}

/// One replica: its seed and `rows × nx` values.
pub type Replica = (u64, Vec<Vec<f64>>);

/// Whole file: header and every replica.
pub fn read_ensemble<R: Read>(r: &mut R) -> Result<(EnsembleHeader, Vec<Replica>)> {
    let header = EnsembleHeader::read(r)?;
    let reps = (0..header.replicas)
        .map(|_| read_replica(r, &header))
        .collect::<Result<_>>()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format(
            "trailing bytes after the last replica".into(),
        ));
    }
    Ok((header, reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let header = EnsembleHeader {
            config_hash: [7; 32],
            base_seed: 42,
            level: Some(3.5),
            replicas: 2,
            rows: 2,
            nx: 3,
        };
        let mut buf = Vec::new();
        header.write(&mut buf).unwrap();
        write_replica(&mut buf, 1, &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        write_replica(&mut buf, 2, &[vec![0.0; 3], vec![-1.0; 3]]).unwrap();
        let (h, reps) = read_ensemble(&mut buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(reps[1], (2, vec![vec![0.0; 3], vec![-1.0; 3]]));

        let untruncated = EnsembleHeader {
            level: None,
            ..header
        };
        let mut b2 = Vec::new();
        untruncated.write(&mut b2).unwrap();
        assert_eq!(
            EnsembleHeader::read(&mut b2.as_slice()).unwrap().level,
            None
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            EnsembleHeader::read(&mut b"NOTMAGIC0000".as_slice()),
            Err(Error::Format(_))
        ));
        let header = EnsembleHeader {
            config_hash: [0; 32],
            base_seed: 0,
            level: None,
            replicas: 1,
            rows: 1,
            nx: 1,
        };
        let mut buf = Vec::new();
        header.write(&mut buf).unwrap();
        assert!(read_ensemble(&mut buf.as_slice()).is_err());
        write_replica(&mut buf, 0, &[vec![1.0]]).unwrap();
        buf.push(0);
        assert!(matches!(
            read_ensemble(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
