//! Private site-to-mixer channel.
//!
//! Each site shares a symmetric key with the mixer. Uploads are sealed with
//! ChaCha20-Poly1305 under a per-direction message counter; the receiver only
//! accepts the next counter value, so replayed, reordered or tampered frames
//! fail authentication. Mixer broadcasts travel on the public channel in the
//! clear.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CHANNEL_KEY_BYTES: usize = 32;
const TAG_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("frame rejected by the private channel (tampered, replayed or out of order)")]
    Rejected,
    #[error("channel key must be {CHANNEL_KEY_BYTES} bytes of hex: {0}")]
    BadKey(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct ChannelKey([u8; CHANNEL_KEY_BYTES]);

impl ChannelKey {
    pub fn new(bytes: [u8; CHANNEL_KEY_BYTES]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self, ChannelError> {
        let bytes = hex::decode(s.trim()).map_err(|e| ChannelError::BadKey(e.to_string()))?;
        let arr: [u8; CHANNEL_KEY_BYTES] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| ChannelError::BadKey(format!("{} bytes", b.len())))?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Per-site key from a deployment master key.
    pub fn derive_for_site(&self, site_index: u16) -> ChannelKey {
        let mut h = Sha256::new();
        h.update(b"mixmine/site-channel/v1");
        h.update(self.0);
        h.update(site_index.to_be_bytes());
        Self(h.finalize().into())
    }
}

impl std::fmt::Debug for ChannelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ChannelKey(<redacted>)")
    }
}

pub trait SecureChannel: Send {
    fn seal(&mut self, frame: &[u8]) -> Vec<u8>;

    fn open(&mut self, sealed: &[u8]) -> Result<Vec<u8>, ChannelError>;

    /// Bytes added by `seal`.
    fn overhead(&self) -> usize;
}

/// Identity channel, for transports that are already private or for
/// measuring inner frames directly.
#[derive(Debug, Default, Clone, Copy)]
pub struct PlainChannel;

impl SecureChannel for PlainChannel {
    fn seal(&mut self, frame: &[u8]) -> Vec<u8> {
        frame.to_vec()
    }

    fn open(&mut self, sealed: &[u8]) -> Result<Vec<u8>, ChannelError> {
        Ok(sealed.to_vec())
    }

    fn overhead(&self) -> usize {
        0
    }
}

pub struct AeadChannel {
    cipher: ChaCha20Poly1305,
    site_index: u16,
    sent: u64,
    received: u64,
}

impl AeadChannel {
    pub fn new(key: &ChannelKey, site_index: u16) -> Self {
        Self {
            cipher: ChaCha20Poly1305::new(Key::from_slice(&key.0)),
            site_index,
            sent: 0,
            received: 0,
        }
    }

    fn nonce(counter: u64) -> [u8; 12] {
        let mut n = [0u8; 12];
        n[4..].copy_from_slice(&counter.to_be_bytes());
        n
    }
}

impl SecureChannel for AeadChannel {
    fn seal(&mut self, frame: &[u8]) -> Vec<u8> {
        let nonce = Self::nonce(self.sent);
        self.sent += 1;
        let aad = self.site_index.to_be_bytes();
        self.cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: frame,
                    aad: &aad,
                },
            )
            .expect("in-memory encryption cannot fail")
    }

    fn open(&mut self, sealed: &[u8]) -> Result<Vec<u8>, ChannelError> {
        let nonce = Self::nonce(self.received);
        let aad = self.site_index.to_be_bytes();
        let frame = self
            .cipher
            .decrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: sealed,
                    aad: &aad,
                },
            )
            .map_err(|_| ChannelError::Rejected)?;
        self.received += 1;
        Ok(frame)
    }

    fn overhead(&self) -> usize {
        TAG_BYTES
    }
}

/// How the site-to-mixer channels of a session are keyed.
#[derive(Debug, Clone)]
pub enum ChannelSetup {
    Plain,
    /// Master key; site `i` uses `master.derive_for_site(i)`.
    Aead(ChannelKey),
}

impl ChannelSetup {
    pub fn site_channel(&self, site_index: u16) -> Box<dyn SecureChannel> {
        match self {
            ChannelSetup::Plain => Box::new(PlainChannel),
            ChannelSetup::Aead(master) => Box::new(AeadChannel::new(
                &master.derive_for_site(site_index),
                site_index,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (AeadChannel, AeadChannel) {
        let key = ChannelKey::new([7; 32]).derive_for_site(2);
        (AeadChannel::new(&key, 2), AeadChannel::new(&key, 2))
    }

    #[test]
    fn seals_and_opens_in_order() {
        let (mut tx, mut rx) = pair();
        let a = tx.seal(b"first");
        let b = tx.seal(b"second");
        assert_eq!(a.len(), 5 + TAG_BYTES);
        assert_ne!(&a[..5], b"first");
        assert_eq!(rx.open(&a).unwrap(), b"first");
        assert_eq!(rx.open(&b).unwrap(), b"second");
    }

    #[test]
    fn replay_and_tamper_rejected() {
        let (mut tx, mut rx) = pair();
        let a = tx.seal(b"frame");
        rx.open(&a).unwrap();
        assert_eq!(rx.open(&a), Err(ChannelError::Rejected));
        let mut b = tx.seal(b"frame");
        b[0] ^= 1;
        assert_eq!(rx.open(&b), Err(ChannelError::Rejected));
    }

    #[test]
    fn other_sites_key_rejected() {
        let master = ChannelKey::new([1; 32]);
        let mut site1 = AeadChannel::new(&master.derive_for_site(1), 1);
        let mut mixer_for_2 = AeadChannel::new(&master.derive_for_site(2), 2);
        assert_eq!(
            mixer_for_2.open(&site1.seal(b"x")),
            Err(ChannelError::Rejected)
        );
    }

    #[test]
    fn key_hex() {
        let k = ChannelKey::new([0xab; 32]);
        assert_eq!(ChannelKey::from_hex(&k.to_hex()).unwrap(), k);
        assert!(ChannelKey::from_hex("abcd").is_err());
        assert!(!format!("{k:?}").contains("ab"));
        assert_ne!(k.derive_for_site(1), k.derive_for_site(2));
    }
}
