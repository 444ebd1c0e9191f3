//! Versioned JSON envelope for model files.
//!
//! Both trainers persist models as pretty-printed JSON wrapped in a header
//! carrying a kind tag and a format version, so a wrong or truncated file
//! fails loudly instead of deserializing into garbage. Serialization is
//! deterministic: struct fields keep declaration order and floats use the
//! shortest round-trip form, so identical models produce identical bytes.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("model kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },
    #[error("unsupported model format version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    kind: String,
    version: u32,
    payload: T,
}

/// Serialize `payload` under a versioned header.
pub fn to_bytes<T: Serialize>(kind: &str, payload: &T) -> Result<Vec<u8>, ModelFileError> {
    let env = Envelope {
        format: "greencast-model".to_string(),
        kind: kind.to_string(),
        version: FORMAT_VERSION,
        payload,
    };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parse bytes produced by [`to_bytes`], checking kind and version.
pub fn from_bytes<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<T, ModelFileError> {
    let env: Envelope<T> = serde_json::from_slice(bytes)?;
    if env.kind != kind || env.format != "greencast-model" {
        return Err(ModelFileError::KindMismatch {
            expected: kind.to_string(),
            found: format!("{}/{}", env.format, env.kind),
        });
    }
    if env.version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: env.version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(env.payload)
}

/// Read just the kind tag, so callers can dispatch before deserializing
/// the full payload.
pub fn peek_kind(bytes: &[u8]) -> Result<String, ModelFileError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        kind: String,
        version: u32,
    }
    let header: Header = serde_json::from_slice(bytes)?;
    if header.format != "greencast-model" {
        return Err(ModelFileError::KindMismatch {
            expected: "greencast-model".to_string(),
            found: header.format,
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: header.version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(header.kind)
}

pub fn save<T: Serialize>(
    path: &std::path::Path,
    kind: &str,
    payload: &T,
) -> Result<(), ModelFileError> {
    std::fs::write(path, to_bytes(kind, payload)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &std::path::Path, kind: &str) -> Result<T, ModelFileError> {
    let bytes = std::fs::read(path)?;
    from_bytes(kind, &bytes)
}
