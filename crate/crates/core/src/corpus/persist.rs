//! Binary index file: `ASYX` magic, one version byte, then little-endian
//! length-prefixed records. Words are written in sorted order so identical
//! stores produce identical files.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{IndexError, IndexStats, Paragraph, ParagraphStore, Posting};

pub const INDEX_MAGIC: &[u8; 4] = b"ASYX";
pub const INDEX_VERSION: u8 = b'1';

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, IndexError> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| IndexError::Corrupt(e.to_string()))
}

impl ParagraphStore {
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_u8(INDEX_VERSION)?;
        w.write_u64::<LittleEndian>(self.stats.documents)?;
        w.write_u64::<LittleEndian>(self.stats.skipped_documents)?;
        w.write_u64::<LittleEndian>(self.stats.truncated_paragraphs)?;
        w.write_u64::<LittleEndian>(self.paragraphs.len() as u64)?;
        for p in &self.paragraphs {
            write_str(&mut w, &p.doc_id)?;
            w.write_u32::<LittleEndian>(p.para_index)?;
            write_str(&mut w, &p.text)?;
        }
        let mut words: Vec<&String> = self.postings.keys().collect();
        words.sort();
        w.write_u64::<LittleEndian>(words.len() as u64)?;
        for word in words {
            let list = &self.postings[word];
            write_str(&mut w, word)?;
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for posting in list {
                w.write_u32::<LittleEndian>(posting.paragraph)?;
                w.write_u32::<LittleEndian>(posting.offsets.len() as u32)?;
                for &o in &posting.offsets {
                    w.write_u32::<LittleEndian>(o)?;
                }
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| IndexError::BadMagic)?;
        if &magic != INDEX_MAGIC {
            return Err(IndexError::BadMagic);
        }
        let version = r.read_u8()?;
        if version != INDEX_VERSION {
            return Err(IndexError::VersionMismatch { found: version as char, expected: INDEX_VERSION as char });
        }
        let stats = IndexStats {
            documents: r.read_u64::<LittleEndian>()?,
            skipped_documents: r.read_u64::<LittleEndian>()?,
            truncated_paragraphs: r.read_u64::<LittleEndian>()?,
        };
        let n_par = r.read_u64::<LittleEndian>()? as usize;
        let mut paragraphs = Vec::with_capacity(n_par.min(1 << 20));
        for _ in 0..n_par {
            let doc_id = read_str(&mut r)?;
            let para_index = r.read_u32::<LittleEndian>()?;
            let text = read_str(&mut r)?;
            paragraphs.push(Paragraph { doc_id, para_index, text });
        }
        let n_words = r.read_u64::<LittleEndian>()? as usize;
        let mut postings = HashMap::with_capacity(n_words.min(1 << 20));
        for _ in 0..n_words {
            let word = read_str(&mut r)?;
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                let paragraph = r.read_u32::<LittleEndian>()?;
                if paragraph as usize >= paragraphs.len() {
                    return Err(IndexError::Corrupt(format!("posting for {word:?} points past the last paragraph")));
                }
                let k = r.read_u32::<LittleEndian>()? as usize;
                let offsets = (0..k).map(|_| r.read_u32::<LittleEndian>()).collect::<io::Result<Vec<_>>>()?;
                list.push(Posting { paragraph, offsets });
            }
            postings.insert(word, list);
        }
        Ok(ParagraphStore { paragraphs, postings, stats })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        self.write_to(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}
