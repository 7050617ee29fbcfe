//! The bulletin board: an append-only, hash-chained, totally ordered log of
//! every posted protocol message.
//!
//! Each record's hash covers its sequence number, the previous record's
//! hash, its author, round, and full body in canonical JSON, so any edit to
//! a stored transcript breaks the chain at the edited line. The file format
//! is line-delimited JSON, one record per line, starting with a header
//! record and ending with a summary record.

use crate::auction::ScanTarget;
use crate::group_crypto::proofs::SigmaProof;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("transcript is empty")]
    Empty,
}

/// Who posted a record: the board itself (header/summary) or a player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Author {
    Board,
    /// 0-based internally; rendered 1-based ("P1") on the wire.
    Player(usize),
}

impl Author {
    pub fn label(&self) -> String {
        match self {
            Author::Board => "board".to_string(),
            Author::Player(i) => format!("P{}", i + 1),
        }
    }

    pub fn parse(s: &str) -> Option<Author> {
        if s == "board" {
            return Some(Author::Board);
        }
        let idx: usize = s.strip_prefix('P')?.parse().ok()?;
        if idx == 0 {
            return None;
        }
        Some(Author::Player(idx - 1))
    }
}

impl Serialize for Author {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Author {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Author::parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("bad author {raw:?}")))
    }
}

/// Ciphertext on the wire: `[A, B]` as canonical hex.
pub type CipherHex = [String; 2];

/// Scan target on the wire; `candidate` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetJson {
    pub kind: String,
    pub level: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<u32>,
}

impl TargetJson {
    pub fn from_target(t: &ScanTarget) -> Self {
        match t {
            ScanTarget::Tally { level } => {
                TargetJson { kind: "tally".into(), level: *level, candidate: None }
            }
            ScanTarget::WinnerCell { level, candidate } => TargetJson {
                kind: "winner".into(),
                level: *level,
                candidate: Some(*candidate as u32 + 1),
            },
        }
    }

    pub fn to_target(&self) -> Option<ScanTarget> {
        match (self.kind.as_str(), self.candidate) {
            ("tally", None) => Some(ScanTarget::Tally { level: self.level }),
            ("winner", Some(c)) if c >= 1 => {
                Some(ScanTarget::WinnerCell { level: self.level, candidate: c as usize - 1 })
            }
            _ => None,
        }
    }
}

/// One player's marked piece in the closing summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryPiece {
    pub player: String,
    pub lo: String,
    pub hi: String,
    pub withheld: bool,
}

/// Portable evidence that a named message fails a named verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisbehaviorJson {
    pub player: String,
    pub round: u32,
    pub step: String,
    pub seq: u64,
    pub tag: String,
}

/// Message payloads, tagged by protocol step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum Body {
    Header {
        version: u32,
        protocol: String,
        backend: String,
        group: String,
        n: u32,
        k_levels: u64,
        seed_commitment: String,
    },
    KeyShare {
        public: String,
        proof: SigmaProof,
    },
    Bid {
        cells: Vec<CipherHex>,
        bit_proofs: Vec<SigmaProof>,
        sum_proof: SigmaProof,
    },
    /// Plaintext-backend declaration: an exact rational cut point.
    Declare {
        point: String,
    },
    Blind {
        target: TargetJson,
        position: u32,
        input: CipherHex,
        output: CipherHex,
        public_exp: String,
        proof: SigmaProof,
    },
    Share {
        target: TargetJson,
        source: CipherHex,
        share: String,
        proof: SigmaProof,
    },
    Summary {
        allocation: Vec<SummaryPiece>,
        cuts: Vec<String>,
        misbehavior: Vec<MisbehaviorJson>,
        #[serde(skip_serializing_if = "Option::is_none")]
        halted_round: Option<u32>,
    },
}

/// Step kinds, used for ordering rules and the dependency DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Header,
    KeyShare,
    Bid,
    Declare,
    Blind,
    Share,
    Summary,
}

impl Body {
    pub fn kind(&self) -> StepKind {
        match self {
            Body::Header { .. } => StepKind::Header,
            Body::KeyShare { .. } => StepKind::KeyShare,
            Body::Bid { .. } => StepKind::Bid,
            Body::Declare { .. } => StepKind::Declare,
            Body::Blind { .. } => StepKind::Blind,
            Body::Share { .. } => StepKind::Share,
            Body::Summary { .. } => StepKind::Summary,
        }
    }

    pub fn step_name(&self) -> &'static str {
        match self.kind() {
            StepKind::Header => "header",
            StepKind::KeyShare => "key-share",
            StepKind::Bid => "bid",
            StepKind::Declare => "declare",
            StepKind::Blind => "blind",
            StepKind::Share => "share",
            StepKind::Summary => "summary",
        }
    }
}

/// Direct prerequisites of each step kind. Every step waits only on
/// messages posted strictly earlier: the relation is a DAG, so no two
/// events ever need to happen at the same instant.
pub fn prerequisites(kind: StepKind) -> &'static [StepKind] {
    match kind {
        StepKind::Header => &[],
        StepKind::KeyShare => &[StepKind::Header],
        StepKind::Bid => &[StepKind::KeyShare],
        StepKind::Declare => &[StepKind::Header],
        StepKind::Blind => &[StepKind::Bid],
        StepKind::Share => &[StepKind::Blind],
        StepKind::Summary => &[StepKind::Header],
    }
}

/// One bulletin-board record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub prev: String,
    pub author: Author,
    pub round: u32,
    #[serde(flatten)]
    pub body: Body,
    pub hash: String,
}

#[derive(Serialize)]
struct RecordCore<'a> {
    seq: u64,
    prev: &'a str,
    author: &'a Author,
    round: u32,
    #[serde(flatten)]
    body: &'a Body,
}

/// Hash of a record's canonical content (which includes `prev`, chaining).
pub fn record_hash(seq: u64, prev: &str, author: &Author, round: u32, body: &Body) -> String {
    let core = RecordCore { seq, prev, author, round, body };
    let bytes = serde_json::to_vec(&core).expect("record serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Hash that seeds the chain.
pub fn genesis_hash() -> String {
    hex::encode(Sha256::digest(b"cakecut-transcript-v1"))
}

/// A fault found while checking the hash chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFault {
    pub seq: u64,
    pub reason: String,
}

/// Append-only ordered log with hash chaining.
#[derive(Debug, Clone, Default)]
pub struct BulletinBoard {
    records: Vec<Record>,
}

impl BulletinBoard {
    pub fn new() -> Self {
        BulletinBoard { records: Vec::new() }
    }

    pub fn from_records(records: Vec<Record>) -> Self {
        BulletinBoard { records }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_hash(&self) -> String {
        self.records.last().map(|r| r.hash.clone()).unwrap_or_else(genesis_hash)
    }

    /// Appends a record, assigning the next sequence number and chaining it
    /// to the current head.
    pub fn post(&mut self, author: Author, round: u32, body: Body) -> &Record {
        let seq = self.records.len() as u64;
        let prev = self.last_hash();
        let hash = record_hash(seq, &prev, &author, round, &body);
        self.records.push(Record { seq, prev, author, round, body, hash });
        self.records.last().expect("just pushed")
    }

    /// Checks sequence density, prev links, and every record hash. Returns
    /// all faults; an empty vector means the chain is intact.
    pub fn check_chain(&self) -> Vec<ChainFault> {
        let mut faults = Vec::new();
        let mut prev = genesis_hash();
        for (i, r) in self.records.iter().enumerate() {
            if r.seq != i as u64 {
                faults.push(ChainFault {
                    seq: r.seq,
                    reason: format!("sequence gap: expected {i}, found {}", r.seq),
                });
            }
            if r.prev != prev {
                faults.push(ChainFault { seq: r.seq, reason: "previous-hash link broken".into() });
            }
            let expect = record_hash(r.seq, &r.prev, &r.author, r.round, &r.body);
            if expect != r.hash {
                faults.push(ChainFault { seq: r.seq, reason: "record hash mismatch".into() });
            }
            prev = r.hash.clone();
        }
        faults
    }

    /// Line-delimited JSON rendering, one record per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, TranscriptError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line)
                .map_err(|e| TranscriptError::Parse { line: i + 1, message: e.to_string() })?;
            records.push(record);
        }
        if records.is_empty() {
            return Err(TranscriptError::Empty);
        }
        Ok(BulletinBoard { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_body() -> Body {
        Body::Header {
            version: TRANSCRIPT_VERSION,
            protocol: "moving-knife".into(),
            backend: "plaintext".into(),
            group: "none".into(),
            n: 2,
            k_levels: 4,
            seed_commitment: "00".into(),
        }
    }

    #[test]
    fn chain_round_trips_and_verifies() {
        let mut board = BulletinBoard::new();
        board.post(Author::Board, 0, header_body());
        board.post(Author::Player(0), 1, Body::Declare { point: "1/2".into() });
        board.post(Author::Player(1), 1, Body::Declare { point: "1/3".into() });
        assert!(board.check_chain().is_empty());

        let text = board.to_lines();
        let parsed = BulletinBoard::from_lines(&text).unwrap();
        assert_eq!(parsed.records(), board.records());
        assert!(parsed.check_chain().is_empty());
    }

    #[test]
    fn any_single_byte_edit_breaks_the_chain() {
        let mut board = BulletinBoard::new();
        board.post(Author::Board, 0, header_body());
        board.post(Author::Player(0), 1, Body::Declare { point: "1/2".into() });
        board.post(Author::Player(1), 1, Body::Declare { point: "1/3".into() });

        let mut tampered = board.clone();
        if let Body::Declare { point } = &mut tampered.records[1].body {
            *point = "2/3".into();
        }
        let faults = tampered.check_chain();
        assert!(faults.iter().any(|f| f.seq == 1 && f.reason.contains("hash mismatch")));

        // Swapping two records breaks both links.
        let mut swapped = board.clone();
        swapped.records.swap(1, 2);
        assert!(!swapped.check_chain().is_empty());
    }

    #[test]
    fn author_labels_round_trip() {
        for a in [Author::Board, Author::Player(0), Author::Player(12)] {
            assert_eq!(Author::parse(&a.label()), Some(a));
        }
        assert_eq!(Author::parse("P0"), None);
        assert_eq!(Author::parse("nobody"), None);
    }

    #[test]
    fn step_dependencies_form_a_dag() {
        // Kahn-style elimination must consume every step kind: then no step
        // can require another message to appear simultaneously with it.
        let mut kinds = vec![
            StepKind::Header,
            StepKind::KeyShare,
            StepKind::Bid,
            StepKind::Declare,
            StepKind::Blind,
            StepKind::Share,
            StepKind::Summary,
        ];
        let mut resolved: Vec<StepKind> = Vec::new();
        while !kinds.is_empty() {
            let ready: Vec<StepKind> = kinds
                .iter()
                .copied()
                .filter(|k| prerequisites(*k).iter().all(|p| resolved.contains(p)))
                .collect();
            assert!(!ready.is_empty(), "cycle in step dependencies");
            kinds.retain(|k| !ready.contains(k));
            resolved.extend(ready);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = BulletinBoard::from_lines("not json\n").unwrap_err();
        assert!(matches!(err, TranscriptError::Parse { line: 1, .. }));
        assert_eq!(BulletinBoard::from_lines("\n\n").unwrap_err(), TranscriptError::Empty);
    }
}
