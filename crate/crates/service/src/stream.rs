//! Binary frame messages pushed on the stream.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RFRM"
//! 4       1     version (1)
//! 5       4     width, u32 little-endian
//! 9       4     height, u32 little-endian
//! 13      4     step index, u32 little-endian
//! 17      2     session id length n, u16 little-endian
//! 19      n     session id, UTF-8
//! 19+n    w*h*3 RGB pixels, row-major, top row first
//! ```

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"RFRM";
pub const VERSION: u8 = 1;
const FIXED: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMessage {
    pub width: u32,
    pub height: u32,
    pub step_index: u32,
    pub session_id: String,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameDecodeError {
    #[error("message is {0} bytes, shorter than its header")]
    Short(usize),
    #[error("bad magic")]
    Magic,
    #[error("unsupported frame version {0}")]
    Version(u8),
    #[error("session id is not UTF-8")]
    Id,
    #[error("expected {expected} pixel bytes, found {found}")]
    Pixels { expected: usize, found: usize },
}

impl FrameMessage {
    pub fn encode(&self) -> Vec<u8> {
        let id = self.session_id.as_bytes();
        let mut out = Vec::with_capacity(FIXED + id.len() + self.pixels.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.step_index.to_le_bytes());
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameDecodeError> {
        if bytes.len() < FIXED {
            return Err(FrameDecodeError::Short(bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err(FrameDecodeError::Magic);
        }
        if bytes[4] != VERSION {
            return Err(FrameDecodeError::Version(bytes[4]));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let (width, height, step_index) = (u32_at(5), u32_at(9), u32_at(13));
        let n = u16::from_le_bytes([bytes[17], bytes[18]]) as usize;
        if bytes.len() < FIXED + n {
            return Err(FrameDecodeError::Short(bytes.len()));
        }
        let session_id = std::str::from_utf8(&bytes[FIXED..FIXED + n])
            .map_err(|_| FrameDecodeError::Id)?
            .to_string();
        let pixels = bytes[FIXED + n..].to_vec();
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(FrameDecodeError::Pixels {
                expected,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            step_index,
            session_id,
            pixels,
        })
    }
}
