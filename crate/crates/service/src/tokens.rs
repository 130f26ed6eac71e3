//! Bearer tokens. Only SHA-256 digests of secrets are kept.

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use maia_core::io::canonical::sha256_hex;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Facilitator,
    Respondent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenRecord {
    pub digest: String,
    pub role: Role,
    pub study_id: String,
    pub respondent_id: Option<String>,
    pub expires_at: DateTime<Utc>,
}

/// A freshly issued secret; the only time it is visible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedToken {
    pub token: String,
    pub role: Role,
    pub expires_at: DateTime<Utc>,
}

pub fn new_secret() -> String {
    let bytes: [u8; 32] = rand::rng().random();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default)]
pub struct TokenTable {
    by_digest: HashMap<String, TokenRecord>,
}

impl TokenTable {
    pub fn issue(
        &mut self,
        role: Role,
        study_id: &str,
        respondent_id: Option<&str>,
        now: DateTime<Utc>,
        ttl_seconds: i64,
    ) -> (IssuedToken, TokenRecord) {
        let token = new_secret();
        let record = TokenRecord {
            digest: sha256_hex(token.as_bytes()),
            role,
            study_id: study_id.to_string(),
            respondent_id: respondent_id.map(str::to_string),
            expires_at: now + Duration::seconds(ttl_seconds),
        };
        self.insert(record.clone());
        (
            IssuedToken {
                token,
                role,
                expires_at: record.expires_at,
            },
            record,
        )
    }

    pub fn insert(&mut self, record: TokenRecord) {
        self.by_digest.insert(record.digest.clone(), record);
    }

    pub fn lookup(&self, secret: &str) -> Option<&TokenRecord> {
        self.by_digest.get(&sha256_hex(secret.as_bytes()))
    }
}
