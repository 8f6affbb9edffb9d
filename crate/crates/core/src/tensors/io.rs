//! Weight container: a small binary format and a JSON export of the same
//! content.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "QTNW"
//! version    u16      1
//! kind       u8       0 = CPD, 1 = TT, 2 = TR
//! reserved   u8       0
//! modes      u32
//! mode_dims  modes x u32
//! num_ranks  u32      1 for CPD, modes + 1 for TT/TR
//! ranks      num_ranks x u32
//! data       per factor/core, row-major, each entry (re: f64, im: f64)
//! ```
//!
//! A CPD factor is written as an `n_p x R` row-major matrix; a TT/TR core as
//! `r_p x n_p x r_(p+1)` row-major.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cpd::CpdWeights;
use super::tt::{ChainKind, TtWeights};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QTNW";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Cpd(CpdWeights),
    Tt(TtWeights),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ContainerKind {
    Cpd,
    Tt,
    Tr,
}

impl ContainerKind {
    fn code(self) -> u8 {
        match self {
            ContainerKind::Cpd => 0,
            ContainerKind::Tt => 1,
            ContainerKind::Tr => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ContainerKind::Cpd),
            1 => Ok(ContainerKind::Tt),
            2 => Ok(ContainerKind::Tr),
            other => Err(Error::Format(format!("unknown kind code {other}"))),
        }
    }
}

/// Layout-independent view used by both encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsExport {
    pub kind: ContainerKind,
    pub mode_dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// One row-major array per factor/core, entries as `[re, im]`.
    pub factors: Vec<Vec<[f64; 2]>>,
}

impl Weights {
    pub fn kind(&self) -> ContainerKind {
        match self {
            Weights::Cpd(_) => ContainerKind::Cpd,
            Weights::Tt(t) if t.kind() == ChainKind::Train => ContainerKind::Tt,
            Weights::Tt(_) => ContainerKind::Tr,
        }
    }

    pub fn export(&self) -> WeightsExport {
        let pair = |v: &Complex64| [v.re, v.im];
        match self {
            Weights::Cpd(w) => {
                let rank = w.rank();
                let factors = (0..w.num_modes())
                    .map(|p| {
                        let n = w.mode_dims()[p];
                        let mut rows = Vec::with_capacity(n * rank);
                        for q in 0..n {
                            for r in 0..rank {
                                rows.push(pair(&w.entry(p, q, r)));
                            }
                        }
                        rows
                    })
                    .collect();
                WeightsExport {
                    kind: ContainerKind::Cpd,
                    mode_dims: w.mode_dims().to_vec(),
                    ranks: vec![rank],
                    factors,
                }
            }
            Weights::Tt(t) => WeightsExport {
                kind: self.kind(),
                mode_dims: t.mode_dims().to_vec(),
                ranks: t.ranks().to_vec(),
                factors: (0..t.num_modes()).map(|p| t.core(p).iter().map(pair).collect()).collect(),
            },
        }
    }

    pub fn import(export: WeightsExport) -> Result<Self> {
        let to_c = |v: &[f64; 2]| Complex64::new(v[0], v[1]);
        match export.kind {
            ContainerKind::Cpd => {
                let &[rank] = export.ranks.as_slice() else {
                    return Err(Error::Format(format!("CPD needs one rank, got {:?}", export.ranks)));
                };
                if export.factors.len() != export.mode_dims.len() {
                    return Err(Error::Format("factor count does not match mode count".into()));
                }
                let mut factors = Vec::with_capacity(export.factors.len());
                for (p, (rows, &n)) in export.factors.iter().zip(&export.mode_dims).enumerate() {
                    if rows.len() != n * rank {
                        return Err(Error::Format(format!("factor {p} has {} entries", rows.len())));
                    }
                    let mut f = vec![Complex64::default(); n * rank];
                    for q in 0..n {
                        for r in 0..rank {
                            f[r * n + q] = to_c(&rows[q * rank + r]);
                        }
                    }
                    factors.push(f);
                }
                Ok(Weights::Cpd(CpdWeights::new(export.mode_dims, rank, factors)?))
            }
            ContainerKind::Tt | ContainerKind::Tr => {
                let kind = if export.kind == ContainerKind::Tt { ChainKind::Train } else { ChainKind::Ring };
                let cores = export.factors.iter().map(|c| c.iter().map(to_c).collect()).collect();
                Ok(Weights::Tt(TtWeights::new(kind, export.mode_dims, export.ranks, cores)?))
            }
        }
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let export = self.export();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(export.kind.code());
        buf.push(0);
        push_u32(&mut buf, export.mode_dims.len())?;
        for &n in &export.mode_dims {
            push_u32(&mut buf, n)?;
        }
        push_u32(&mut buf, export.ranks.len())?;
        for &r in &export.ranks {
            push_u32(&mut buf, r)?;
        }
        for factor in &export.factors {
            for [re, im] in factor {
                buf.extend_from_slice(&re.to_le_bytes());
                buf.extend_from_slice(&im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut head = [0u8; 4];
        input.read_exact(&mut head)?;
        let version = u16::from_le_bytes([head[0], head[1]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = ContainerKind::from_code(head[2])?;
        let modes = read_u32(&mut input)?;
        let mode_dims = (0..modes).map(|_| read_u32(&mut input)).collect::<Result<Vec<_>>>()?;
        let num_ranks = read_u32(&mut input)?;
        let expected_ranks = if kind == ContainerKind::Cpd { 1 } else { modes + 1 };
        if num_ranks != expected_ranks {
            return Err(Error::Format(format!("expected {expected_ranks} ranks, found {num_ranks}")));
        }
        let ranks = (0..num_ranks).map(|_| read_u32(&mut input)).collect::<Result<Vec<_>>>()?;
        let sizes: Vec<usize> = match kind {
            ContainerKind::Cpd => mode_dims.iter().map(|&n| n * ranks[0]).collect(),
            _ => (0..modes).map(|p| ranks[p] * mode_dims[p] * ranks[p + 1]).collect(),
        };
        let mut factors = Vec::with_capacity(modes);
        let mut word = [0u8; 8];
        for size in sizes {
            let mut f = Vec::with_capacity(size);
            for _ in 0..size {
                input.read_exact(&mut word)?;
                let re = f64::from_le_bytes(word);
                input.read_exact(&mut word)?;
                let im = f64::from_le_bytes(word);
                f.push([re, im]);
            }
            factors.push(f);
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after weight data".into()));
        }
        Self::import(WeightsExport {
            kind,
            mode_dims,
            ranks,
            factors,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("export is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::import(serde_json::from_str(text)?)
    }
}

fn push_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_cpd() -> impl Strategy<Value = CpdWeights> {
        (prop::collection::vec(1usize..4, 1..4), 1usize..4).prop_flat_map(|(dims, rank)| {
            let total: usize = dims.iter().sum::<usize>() * rank;
            prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), total).prop_map(move |vals| {
                let mut it = vals.into_iter();
                CpdWeights::from_fn(dims.clone(), rank, |_, _, _| {
                    let (re, im) = it.next().unwrap();
                    Complex64::new(re, im)
                })
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn binary_and_json_round_trip(w in arb_cpd()) {
            let weights = Weights::Cpd(w);
            let bytes = weights.to_bytes();
            prop_assert_eq!(&Weights::read_binary(bytes.as_slice()).unwrap(), &weights);
            prop_assert_eq!(&Weights::from_json(&weights.to_json()).unwrap(), &weights);
        }
    }

    #[test]
    fn cpd_layout_is_row_major() {
        let w = CpdWeights::new(
            vec![2],
            2,
            vec![vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)]],
        )
        .unwrap();
        let bytes = Weights::Cpd(w).to_bytes();
        let header = 4 + 2 + 1 + 1 + 4 + 4 + 4 + 4;
        assert_eq!(&bytes[..4], b"QTNW");
        let first_re = f64::from_le_bytes(bytes[header..header + 8].try_into().unwrap());
        let second_re = f64::from_le_bytes(bytes[header + 16..header + 24].try_into().unwrap());
        // entry (q=0, r=0) then (q=0, r=1)
        assert_eq!((first_re, second_re), (1.0, 3.0));
        assert_eq!(bytes.len(), header + 4 * 16);
    }

    #[test]
    fn ring_round_trip_and_corruption() {
        let tr = TtWeights::from_fn(ChainKind::Ring, vec![2, 3], vec![2, 1, 2], |p, a, m, b| {
            Complex64::new((p + a) as f64, (m + b) as f64)
        })
        .unwrap();
        let weights = Weights::Tt(tr);
        assert_eq!(weights.kind(), ContainerKind::Tr);
        let mut bytes = weights.to_bytes();
        assert_eq!(Weights::read_binary(bytes.as_slice()).unwrap(), weights);
        assert_eq!(Weights::from_json(&weights.to_json()).unwrap(), weights);
        bytes.push(0);
        assert!(Weights::read_binary(bytes.as_slice()).is_err());
        bytes[0] = b'X';
        assert!(matches!(Weights::read_binary(bytes.as_slice()), Err(Error::Format(_))));
        assert!(Weights::read_binary(&b"QTNW\x01"[..]).is_err());
    }
}
