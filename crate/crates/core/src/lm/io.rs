//! Binary model format, little-endian:
//!
//! ```text
//! "NGLM1" u32:version u32:order u32:vocab_len
//! vocab_len x (u32:byte_len bytes)            ids in order
//! order x level:
//!   3 x f64 discounts, u64:context_count
//!   context_count x (k-1 x u32 ids, u32:n, n x (u32 id, u64 count))
//! ```
//!
//! Contexts and followers are written sorted, so equal models serialize to
//! identical bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{ContextEntry, Level, LmError, NgramModel, BOS, EOS, UNK};

pub const MAGIC: &[u8; 5] = b"NGLM1";
const VERSION: u32 = 1;

impl NgramModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LmError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u32::<LE>(self.order as u32)?;
        w.write_u32::<LE>(self.words.len() as u32)?;
        for word in &self.words {
            w.write_u32::<LE>(word.len() as u32)?;
            w.write_all(word.as_bytes())?;
        }
        for level in &self.levels {
            for d in level.discounts {
                w.write_f64::<LE>(d)?;
            }
            let mut contexts: Vec<_> = level.contexts.iter().collect();
            contexts.sort_by(|a, b| a.0.cmp(b.0));
            w.write_u64::<LE>(contexts.len() as u64)?;
            for (ctx, entry) in contexts {
                for &id in ctx.iter() {
                    w.write_u32::<LE>(id)?;
                }
                let mut followers: Vec<_> = entry.followers.iter().collect();
                followers.sort();
                w.write_u32::<LE>(followers.len() as u32)?;
                for (&id, &c) in followers {
                    w.write_u32::<LE>(id)?;
                    w.write_u64::<LE>(c)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, LmError> {
        let bad = |m: &str| LmError::Format(m.to_string());
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(LmError::Format(format!("unsupported version {version}")));
        }
        let order = r.read_u32::<LE>()? as usize;
        if order == 0 {
            return Err(bad("order 0"));
        }
        let vocab_len = r.read_u32::<LE>()? as usize;
        if vocab_len < 3 {
            return Err(bad("vocabulary lacks reserved tokens"));
        }
        let mut words = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = r.read_u32::<LE>()? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            words.push(String::from_utf8(bytes).map_err(|_| bad("vocabulary entry is not UTF-8"))?);
        }
        if words[..3] != [BOS, EOS, UNK] {
            return Err(bad("reserved tokens out of place"));
        }
        let check_id = |id: u32| {
            if (id as usize) < vocab_len {
                Ok(id)
            } else {
                Err(LmError::Format(format!("token id {id} out of range")))
            }
        };

        let mut levels = Vec::with_capacity(order);
        for k in 1..=order {
            let mut discounts = [0.0; 3];
            for d in &mut discounts {
                *d = r.read_f64::<LE>()?;
            }
            let n_ctx = r.read_u64::<LE>()?;
            let mut contexts = HashMap::new();
            for _ in 0..n_ctx {
                let ctx = (0..k - 1)
                    .map(|_| check_id(r.read_u32::<LE>()?))
                    .collect::<Result<Vec<u32>, LmError>>()?;
                let n = r.read_u32::<LE>()?;
                if n == 0 {
                    return Err(bad("context without followers"));
                }
                let mut entry = ContextEntry::default();
                for _ in 0..n {
                    let id = check_id(r.read_u32::<LE>()?)?;
                    let c = r.read_u64::<LE>()?;
                    if c == 0 {
                        return Err(bad("zero count"));
                    }
                    entry.add(id, c);
                }
                entry.finish();
                contexts.insert(ctx.into_boxed_slice(), entry);
            }
            levels.push(Level { discounts, contexts });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(bad("trailing bytes"));
        }

        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Ok(Self {
            order,
            words,
            index,
            levels,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
