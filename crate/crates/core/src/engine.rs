//! The round-loop protocol engine.
//!
//! Each round, every still-eligible player bids the grid level of its honest
//! cut point on the remaining cake `[0,x]`; the sealed-bid auction resolves
//! the maximum level and the winning player; the piece `[cut, x]` is marked
//! for the winner, who stays in the protocol (keeping the (n,n) key usable)
//! but cannot win again. After `n-1` rounds the last eligible player is
//! marked with `[0,x]`. Pieces are assigned only at the end; a player whose
//! posted message fails a public verification is recorded and its marked
//! piece is withheld.
//!
//! Two backends exist behind the same state machine: `plaintext` (exact
//! rational declarations resolved by a trusted maximum, the reference for
//! logic tests) and `crypto` (the real auction). The whole run is a
//! deterministic fold over bulletin-board records, so [`verify_transcript`]
//! replays every check — hash chain, sigma proofs, step order, auction
//! resolution — without any secret and reproduces the allocation.

use crate::auction::{
    self, blind_step_ctx, share_step_ctx, BidVector, ScanState, ScanTarget,
};
use crate::group_crypto::{
    blind_exponentiate, combine_decrypt, decrypt_share, is_identity, keygen_share_from_secret,
    proofs::SigmaProof, verify_blind_step, verify_decryption_share, verify_key_share, Ciphertext,
    GroupParams, KeyShare, PublicKeyShare,
};
use crate::measure::{parse_rational, rational_string, Density, Interval, Rational};
use crate::refproto::{Allocation, PlayerId, Profile, RoundTrace};
use crate::transcript::{
    genesis_hash, Author, Body, BulletinBoard, MisbehaviorJson, Record, SummaryPiece, TargetJson,
    TranscriptError, TRANSCRIPT_VERSION,
};
use num::bigint::{BigInt, BigUint};
use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("grid must have at least 2 levels")]
    BadGrid,
    #[error("tampering requires the crypto backend")]
    TamperUnsupported,
    #[error("protocol integrity failure: {0}")]
    Integrity(String),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Exact rational declarations, trusted maximum. Stands in for the
    /// third party the real protocol exists to remove; used as the oracle.
    Plaintext,
    /// Encrypted unary bids resolved by the sealed-bid auction.
    Crypto,
}

impl BackendKind {
    pub fn label(&self) -> &'static str {
        match self {
            BackendKind::Plaintext => "plaintext",
            BackendKind::Crypto => "crypto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plaintext" => Some(BackendKind::Plaintext),
            "crypto" => Some(BackendKind::Crypto),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub group: GroupParams,
    pub k_levels: u64,
    pub seed: u64,
    pub backend: BackendKind,
}

/// Delivery order of ready messages in the simulated asynchronous network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleSpec {
    /// Deliver in production order.
    Fifo,
    /// Always deliver the newest pending message first.
    Reverse,
    /// Seeded random interleaving of whatever is pending.
    Random { seed: u64 },
    /// Rotate the pending queue by a fixed offset before each delivery.
    Rotate { offset: usize },
}

enum Picker {
    Fifo,
    Reverse,
    Random(ChaCha20Rng),
    Rotate(usize),
}

impl Picker {
    fn new(spec: &ScheduleSpec) -> Self {
        match spec {
            ScheduleSpec::Fifo => Picker::Fifo,
            ScheduleSpec::Reverse => Picker::Reverse,
            ScheduleSpec::Random { seed } => Picker::Random(ChaCha20Rng::seed_from_u64(*seed)),
            ScheduleSpec::Rotate { offset } => Picker::Rotate(*offset),
        }
    }

    fn pick(&mut self, len: usize) -> usize {
        match self {
            Picker::Fifo => 0,
            Picker::Reverse => len - 1,
            Picker::Random(rng) => rng.gen_range(0..len),
            Picker::Rotate(offset) => *offset % len,
        }
    }
}

/// Which field of a delivered message to corrupt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperField {
    /// Bump a response scalar inside the message's proof.
    Proof,
    /// Multiply a payload group element by g.
    Payload,
}

/// Corrupts the `delivery_index`-th delivered player message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperSpec {
    pub delivery_index: u64,
    pub field: TamperField,
}

/// Verifiable evidence that one posted message fails one public check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisbehaviorRecord {
    pub author: Author,
    pub round: u32,
    pub step: String,
    pub seq: u64,
    pub tag: String,
}

impl MisbehaviorRecord {
    pub fn to_json(&self) -> MisbehaviorJson {
        MisbehaviorJson {
            player: self.author.label(),
            round: self.round,
            step: self.step.clone(),
            seq: self.seq,
            tag: self.tag.clone(),
        }
    }

    pub fn from_json(j: &MisbehaviorJson) -> Option<Self> {
        Some(MisbehaviorRecord {
            author: Author::parse(&j.player)?,
            round: j.round,
            step: j.step.clone(),
            seq: j.seq,
            tag: j.tag.clone(),
        })
    }
}

/// Per-round outcome (winner and cut in cake coordinates).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineRound {
    pub round: u32,
    pub right_end: Rational,
    pub k_remaining: usize,
    pub winner: PlayerId,
    /// Winning grid level (crypto backend only).
    pub level: Option<u64>,
    pub cut: Rational,
}

/// Result of one protocol execution.
#[derive(Debug)]
pub struct RunOutcome {
    pub allocation: Allocation,
    pub board: BulletinBoard,
    pub misbehavior: Vec<MisbehaviorRecord>,
    pub rounds: Vec<EngineRound>,
    /// Exact declarations per round (plaintext backend only).
    pub traces: Vec<RoundTrace>,
    pub halted_round: Option<u32>,
}

/// The honest bid: quantize the cut point giving `1/k` of the remaining
/// cake onto the round grid, rounding down (the paper's floor rule).
pub fn honest_bid(
    density: &Density,
    right_end: &Rational,
    k_remaining: usize,
    k_levels: u64,
) -> u64 {
    if right_end.is_zero() {
        return 0;
    }
    let cut = honest_cut_point(density, right_end, k_remaining);
    let scaled = &cut * Rational::from_integer(BigInt::from(k_levels)) / right_end;
    scaled.floor().to_integer().to_u64().expect("level below k_levels")
}

/// The exact honest cut point on `[0, right_end]` among `k` players.
pub fn honest_cut_point(density: &Density, right_end: &Rational, k_remaining: usize) -> Rational {
    let cake = Interval::prefix(right_end.clone()).expect("remaining cake stays in [0,1]");
    let total = density.measure(&cake);
    let target = total / Rational::from_integer(k_remaining.into());
    density.cut_point(&cake, &target).expect("1/k of the available mass is reachable")
}

/// Cake coordinate of a round-grid level on `[0, right_end]`.
pub fn level_to_point(right_end: &Rational, level: u64, k_levels: u64) -> Rational {
    right_end * Rational::new(BigInt::from(level), BigInt::from(k_levels))
}

fn seed_commitment(seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(b"cakecut-seed-v1");
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

fn player_master(seed: u64, player: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"cakecut-player-v1");
    h.update(seed.to_le_bytes());
    h.update((player as u64).to_le_bytes());
    h.finalize().into()
}

fn derived_rng(master: &[u8; 32], label: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(master);
    h.update(b"\x00");
    h.update(label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitHeader,
    Keygen,
    Bids,
    Scan,
    Done,
}

/// The deterministic protocol state machine: folds bulletin-board records
/// into protocol state, verifying everything on the way. Used by the live
/// run (each posted record is applied immediately) and by transcript
/// verification (no secrets required).
struct Replay {
    backend: BackendKind,
    params: GroupParams,
    n: usize,
    k_levels: u64,
    phase: Phase,
    key_publics: Vec<Option<PublicKeyShare>>,
    pk: Option<BigUint>,
    round: u32,
    x: Rational,
    eligible: Vec<bool>,
    bids: Vec<Option<BidVector>>,
    declares: Vec<Option<Rational>>,
    tallies: Vec<Ciphertext>,
    scan: Option<ScanState>,
    chain: Option<Ciphertext>,
    blind_count: usize,
    shares: Vec<Option<crate::group_crypto::DecryptionShare>>,
    pieces: Vec<Option<(Rational, Rational)>>,
    cuts: Vec<Rational>,
    rounds: Vec<EngineRound>,
    traces: Vec<RoundTrace>,
    misbehavior: Vec<MisbehaviorRecord>,
    halted_round: Option<u32>,
    finished: bool,
    summary_seen: bool,
}

impl Replay {
    fn new(backend: BackendKind, params: GroupParams, n: usize, k_levels: u64) -> Self {
        Replay {
            backend,
            params,
            n,
            k_levels,
            phase: Phase::AwaitHeader,
            key_publics: vec![None; n],
            pk: None,
            round: 0,
            x: Rational::one(),
            eligible: vec![true; n],
            bids: (0..n).map(|_| None).collect(),
            declares: vec![None; n],
            tallies: Vec::new(),
            scan: None,
            chain: None,
            blind_count: 0,
            shares: (0..n).map(|_| None).collect(),
            pieces: vec![None; n],
            cuts: Vec::new(),
            rounds: Vec::new(),
            traces: Vec::new(),
            misbehavior: Vec::new(),
            halted_round: None,
            finished: false,
            summary_seen: false,
        }
    }

    fn halted(&self) -> bool {
        self.halted_round.is_some()
    }

    fn remaining(&self) -> usize {
        self.eligible.iter().filter(|e| **e).count()
    }

    fn candidates(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.eligible[i]).collect()
    }

    fn fault(&mut self, record: &Record, tag: &str) {
        self.misbehavior.push(MisbehaviorRecord {
            author: record.author,
            round: record.round,
            step: record.body.step_name().to_string(),
            seq: record.seq,
            tag: tag.to_string(),
        });
        self.halted_round = Some(record.round);
    }

    /// Applies one record; on failure the caller must treat the author as
    /// the attributed offender (via [`Replay::fault`]).
    fn apply(&mut self, record: &Record) -> Result<(), &'static str> {
        match (&record.body, record.author) {
            (Body::Header { .. }, Author::Board) => self.apply_header(record),
            (Body::Summary { .. }, Author::Board) => self.apply_summary(record),
            (_, Author::Board) => Err("step-order"),
            (Body::KeyShare { .. }, Author::Player(i)) => self.apply_key_share(record, i),
            (Body::Bid { .. }, Author::Player(i)) => self.apply_bid(record, i),
            (Body::Declare { .. }, Author::Player(i)) => self.apply_declare(record, i),
            (Body::Blind { .. }, Author::Player(i)) => self.apply_blind(record, i),
            (Body::Share { .. }, Author::Player(i)) => self.apply_share(record, i),
            (Body::Header { .. } | Body::Summary { .. }, Author::Player(_)) => Err("step-order"),
        }
    }

    fn apply_header(&mut self, record: &Record) -> Result<(), &'static str> {
        let Body::Header { version, backend, group, n, k_levels, .. } = &record.body else {
            unreachable!()
        };
        if self.phase != Phase::AwaitHeader {
            return Err("duplicate-header");
        }
        if *version != TRANSCRIPT_VERSION
            || *n as usize != self.n
            || *k_levels != self.k_levels
            || BackendKind::parse(backend) != Some(self.backend)
        {
            return Err("header-mismatch");
        }
        match self.backend {
            BackendKind::Crypto => {
                if group != self.params.name() {
                    return Err("header-mismatch");
                }
                self.phase = Phase::Keygen;
            }
            BackendKind::Plaintext => {
                self.start_round(1);
            }
        }
        Ok(())
    }

    fn start_round(&mut self, round: u32) {
        self.round = round;
        self.phase = Phase::Bids;
        self.bids = (0..self.n).map(|_| None).collect();
        self.declares = vec![None; self.n];
        self.tallies.clear();
        self.scan = None;
        self.chain = None;
        self.blind_count = 0;
        self.shares = (0..self.n).map(|_| None).collect();
    }

    fn apply_key_share(&mut self, record: &Record, i: usize) -> Result<(), &'static str> {
        if self.phase != Phase::Keygen || self.backend != BackendKind::Crypto {
            return Err("step-order");
        }
        if record.round != 0 {
            return Err("bad-round");
        }
        if i >= self.n {
            return Err("bad-player");
        }
        if self.key_publics[i].is_some() {
            return Err("duplicate-message");
        }
        let Body::KeyShare { public, proof } = &record.body else { unreachable!() };
        let Ok(public) = self.params.decode_element(public) else {
            return Err("bad-encoding");
        };
        let share = PublicKeyShare { index: i, public, proof: proof.clone() };
        if !verify_key_share(&self.params, &share) {
            return Err("key-share-proof");
        }
        self.key_publics[i] = Some(share);
        if self.key_publics.iter().all(Option::is_some) {
            let mut pk = BigUint::one();
            for s in self.key_publics.iter().flatten() {
                pk = self.params.mul(&pk, &s.public);
            }
            self.pk = Some(pk);
            self.start_round(1);
        }
        Ok(())
    }

    fn decode_cipher(&self, c: &[String; 2]) -> Result<Ciphertext, &'static str> {
        let a = self.params.decode_element(&c[0]).map_err(|_| "bad-encoding")?;
        let b = self.params.decode_element(&c[1]).map_err(|_| "bad-encoding")?;
        Ok(Ciphertext { a, b })
    }

    fn apply_bid(&mut self, record: &Record, i: usize) -> Result<(), &'static str> {
        if self.phase != Phase::Bids || self.backend != BackendKind::Crypto {
            return Err("step-order");
        }
        if record.round != self.round {
            return Err("bad-round");
        }
        if i >= self.n {
            return Err("bad-player");
        }
        if self.bids[i].is_some() {
            return Err("duplicate-message");
        }
        let Body::Bid { cells, bit_proofs, sum_proof } = &record.body else { unreachable!() };
        if cells.len() as u64 != self.k_levels || bit_proofs.len() != cells.len() {
            return Err("bid-shape");
        }
        let mut decoded = Vec::with_capacity(cells.len());
        for c in cells {
            decoded.push(self.decode_cipher(c)?);
        }
        let bv = BidVector {
            owner: i,
            cells: decoded,
            bit_proofs: bit_proofs.clone(),
            sum_proof: sum_proof.clone(),
        };
        let pk = self.pk.as_ref().ok_or("step-order")?;
        if !auction::verify_bid_vector(&self.params, pk, self.round, &bv, self.k_levels) {
            return Err("bid-proof");
        }
        self.bids[i] = Some(bv);
        if self.bids.iter().all(Option::is_some) {
            let refs: Vec<&BidVector> = self.bids.iter().map(|b| b.as_ref().unwrap()).collect();
            self.tallies =
                auction::suffix_tallies(&self.params, &refs).map_err(|_| "bid-shape")?;
            let scan = ScanState::new(self.k_levels, self.candidates())
                .map_err(|_| "protocol-integrity")?;
            self.phase = Phase::Scan;
            self.begin_opening(&scan.next_target().expect("fresh scan has a target"));
            self.scan = Some(scan);
        }
        Ok(())
    }

    fn apply_declare(&mut self, record: &Record, i: usize) -> Result<(), &'static str> {
        if self.phase != Phase::Bids || self.backend != BackendKind::Plaintext {
            return Err("step-order");
        }
        if record.round != self.round {
            return Err("bad-round");
        }
        if i >= self.n || !self.eligible[i] {
            return Err("step-order");
        }
        if self.declares[i].is_some() {
            return Err("duplicate-message");
        }
        let Body::Declare { point } = &record.body else { unreachable!() };
        let Ok(point) = parse_rational(point) else {
            return Err("bad-encoding");
        };
        if point < Rational::zero() || point > self.x {
            return Err("bad-declaration");
        }
        self.declares[i] = Some(point);
        let all_in = self.candidates().iter().all(|&c| self.declares[c].is_some());
        if all_in {
            let declarations: Vec<(PlayerId, Rational)> = self
                .candidates()
                .into_iter()
                .map(|c| (c, self.declares[c].clone().unwrap()))
                .collect();
            let (winner, point) = declarations
                .iter()
                .fold(None::<(PlayerId, Rational)>, |best, (p, v)| match best {
                    Some((_, ref bv)) if v > bv => Some((*p, v.clone())),
                    None => Some((*p, v.clone())),
                    other => other,
                })
                .expect("at least one declaration");
            self.traces.push(RoundTrace {
                round: self.round as usize,
                right_end: self.x.clone(),
                declarations,
                winner,
                winning_point: point.clone(),
            });
            self.finish_round(winner, None, point);
        }
        Ok(())
    }

    /// Sets up the blind chain for the next opening target.
    fn begin_opening(&mut self, target: &ScanTarget) {
        let ct = match target {
            ScanTarget::Tally { level } => self.tallies[*level as usize].clone(),
            ScanTarget::WinnerCell { level, candidate } => {
                self.bids[*candidate].as_ref().expect("bids complete").cells[*level as usize].clone()
            }
        };
        self.chain = Some(ct);
        self.blind_count = 0;
        self.shares = (0..self.n).map(|_| None).collect();
    }

    fn current_target(&self) -> Option<ScanTarget> {
        self.scan.as_ref().and_then(|s| s.next_target())
    }

    fn apply_blind(&mut self, record: &Record, i: usize) -> Result<(), &'static str> {
        if self.phase != Phase::Scan {
            return Err("step-order");
        }
        if record.round != self.round {
            return Err("bad-round");
        }
        let Body::Blind { target, position, input, output, public_exp, proof } = &record.body
        else {
            unreachable!()
        };
        let expected = self.current_target().ok_or("step-order")?;
        if target.to_target() != Some(expected) {
            return Err("target-mismatch");
        }
        if self.blind_count >= self.n {
            return Err("step-order");
        }
        if *position as usize != self.blind_count + 1 || i != self.blind_count {
            return Err("blind-position");
        }
        let input = self.decode_cipher(input)?;
        let output = self.decode_cipher(output)?;
        let public_exp = self.params.decode_element(public_exp).map_err(|_| "bad-encoding")?;
        if Some(&input) != self.chain.as_ref() {
            return Err("blind-input-mismatch");
        }
        let step = crate::group_crypto::BlindStep {
            input,
            output: output.clone(),
            public_exp,
            proof: proof.clone(),
        };
        let ctx = blind_step_ctx(self.round, &expected, i);
        if !verify_blind_step(&self.params, &ctx, &step) {
            return Err("blind-proof");
        }
        self.chain = Some(output);
        self.blind_count += 1;
        Ok(())
    }

    fn apply_share(&mut self, record: &Record, i: usize) -> Result<(), &'static str> {
        if self.phase != Phase::Scan || self.blind_count != self.n {
            return Err("step-order");
        }
        if record.round != self.round {
            return Err("bad-round");
        }
        if i >= self.n {
            return Err("bad-player");
        }
        if self.shares[i].is_some() {
            return Err("duplicate-message");
        }
        let Body::Share { target, source, share, proof } = &record.body else { unreachable!() };
        let expected = self.current_target().ok_or("step-order")?;
        if target.to_target() != Some(expected) {
            return Err("target-mismatch");
        }
        let source = self.decode_cipher(source)?;
        if Some(&source) != self.chain.as_ref() {
            return Err("share-source-mismatch");
        }
        let share_value = self.params.decode_element(share).map_err(|_| "bad-encoding")?;
        let ds = crate::group_crypto::DecryptionShare {
            owner: i,
            share: share_value,
            proof: proof.clone(),
        };
        let ctx = share_step_ctx(self.round, &expected);
        let key_public = &self.key_publics[i].as_ref().ok_or("step-order")?.public;
        if !verify_decryption_share(&self.params, &ctx, key_public, &source, &ds) {
            return Err("share-proof");
        }
        self.shares[i] = Some(ds);
        if self.shares.iter().all(Option::is_some) {
            self.resolve_indicator(&expected)?;
        }
        Ok(())
    }

    fn resolve_indicator(&mut self, target: &ScanTarget) -> Result<(), &'static str> {
        let ctx = share_step_ctx(self.round, target);
        let chain = self.chain.clone().expect("chain set");
        let publics: Vec<BigUint> =
            self.key_publics.iter().map(|s| s.as_ref().unwrap().public.clone()).collect();
        let shares: Vec<crate::group_crypto::DecryptionShare> =
            self.shares.iter().map(|s| s.clone().unwrap()).collect();
        let opened = combine_decrypt(&self.params, &ctx, &chain, &publics, &shares)
            .map_err(|_| "protocol-integrity")?;
        let nonzero = !is_identity(&opened);
        let scan = self.scan.as_mut().expect("scan active");
        scan.feed(nonzero).map_err(|_| "protocol-integrity")?;
        if scan.is_done() {
            let level = scan.max_level().expect("done scan has a level");
            let winner = scan.winner().expect("done scan has a winner");
            let cut = level_to_point(&self.x, level, self.k_levels);
            self.finish_round(winner, Some(level), cut);
        } else {
            let next = scan.next_target().expect("scan continues");
            self.begin_opening(&next);
        }
        Ok(())
    }

    fn finish_round(&mut self, winner: usize, level: Option<u64>, cut: Rational) {
        self.rounds.push(EngineRound {
            round: self.round,
            right_end: self.x.clone(),
            k_remaining: self.remaining(),
            winner,
            level,
            cut: cut.clone(),
        });
        self.pieces[winner] = Some((cut.clone(), self.x.clone()));
        self.cuts.push(cut.clone());
        self.eligible[winner] = false;
        self.x = cut;
        if self.remaining() == 1 {
            let last = self.candidates()[0];
            self.pieces[last] = Some((Rational::zero(), self.x.clone()));
            self.finished = true;
            self.phase = Phase::Done;
        } else {
            let next = self.round + 1;
            self.start_round(next);
        }
    }

    fn apply_summary(&mut self, record: &Record) -> Result<(), &'static str> {
        let Body::Summary { allocation, cuts, misbehavior, halted_round } = &record.body else {
            unreachable!()
        };
        if self.summary_seen {
            return Err("duplicate-message");
        }
        self.summary_seen = true;
        let expected_pieces = self.summary_pieces();
        let expected_cuts: Vec<String> = self.cuts.iter().map(rational_string).collect();
        let expected_misbehavior: Vec<MisbehaviorJson> =
            self.misbehavior.iter().map(|m| m.to_json()).collect();
        if *allocation != expected_pieces
            || *cuts != expected_cuts
            || *misbehavior != expected_misbehavior
            || *halted_round != self.halted_round
        {
            return Err("summary-mismatch");
        }
        Ok(())
    }

    fn withheld_players(&self) -> HashSet<usize> {
        self.misbehavior
            .iter()
            .filter_map(|m| match m.author {
                Author::Player(i) => Some(i),
                Author::Board => None,
            })
            .collect()
    }

    fn summary_pieces(&self) -> Vec<SummaryPiece> {
        let withheld = self.withheld_players();
        (0..self.n)
            .filter_map(|i| {
                self.pieces[i].as_ref().map(|(lo, hi)| SummaryPiece {
                    player: Author::Player(i).label(),
                    lo: rational_string(lo),
                    hi: rational_string(hi),
                    withheld: withheld.contains(&i),
                })
            })
            .collect()
    }

    fn allocation(&self) -> Allocation {
        let mut pieces: Vec<Vec<Interval>> = vec![Vec::new(); self.n];
        for (i, piece) in self.pieces.iter().enumerate() {
            if let Some((lo, hi)) = piece {
                pieces[i].push(Interval::new(lo.clone(), hi.clone()).expect("cuts stay in [0,1]"));
            }
        }
        let mut allocation = Allocation::new(pieces);
        for i in self.withheld_players() {
            allocation.set_withheld(i);
        }
        allocation
    }
}

/// One player's live agent: density, key material, derived randomness.
struct Agent {
    index: usize,
    density: Density,
    key: Option<KeyShare>,
    master: [u8; 32],
}

impl Agent {
    fn rng(&self, label: &str) -> ChaCha20Rng {
        derived_rng(&self.master, label)
    }
}

struct PendingMessage {
    author: Author,
    round: u32,
    body: Body,
    key: (usize, String),
}

fn encode_cipher(params: &GroupParams, c: &Ciphertext) -> [String; 2] {
    [params.encode_element(&c.a), params.encode_element(&c.b)]
}

/// Messages every agent can currently produce, in deterministic order.
fn produce_ready(
    replay: &Replay,
    agents: &[Agent],
    produced: &HashSet<(usize, String)>,
    config: &EngineConfig,
) -> Vec<PendingMessage> {
    let params = &config.group;
    let mut out = Vec::new();
    match replay.phase {
        Phase::AwaitHeader | Phase::Done => {}
        Phase::Keygen => {
            for agent in agents {
                let key = (agent.index, "keyshare".to_string());
                if produced.contains(&key) {
                    continue;
                }
                let ks = agent.key.as_ref().expect("crypto agents carry keys");
                out.push(PendingMessage {
                    author: Author::Player(agent.index),
                    round: 0,
                    body: Body::KeyShare {
                        public: params.encode_element(&ks.public),
                        proof: ks.proof.clone(),
                    },
                    key,
                });
            }
        }
        Phase::Bids => match replay.backend {
            BackendKind::Plaintext => {
                for agent in agents {
                    if !replay.eligible[agent.index] {
                        continue;
                    }
                    let key = (agent.index, format!("declare;{}", replay.round));
                    if produced.contains(&key) {
                        continue;
                    }
                    let point =
                        honest_cut_point(&agent.density, &replay.x, replay.remaining());
                    out.push(PendingMessage {
                        author: Author::Player(agent.index),
                        round: replay.round,
                        body: Body::Declare { point: rational_string(&point) },
                        key,
                    });
                }
            }
            BackendKind::Crypto => {
                for agent in agents {
                    let key = (agent.index, format!("bid;{}", replay.round));
                    if produced.contains(&key) {
                        continue;
                    }
                    let level = if replay.eligible[agent.index] {
                        honest_bid(&agent.density, &replay.x, replay.remaining(), replay.k_levels)
                    } else {
                        0
                    };
                    let mut rng = agent.rng(&format!("bid;round={}", replay.round));
                    let pk = replay.pk.as_ref().expect("keygen done");
                    let bv = auction::make_bid_vector(
                        params,
                        pk,
                        replay.round,
                        agent.index,
                        level,
                        replay.k_levels,
                        &mut rng,
                    )
                    .expect("honest level is in range");
                    out.push(PendingMessage {
                        author: Author::Player(agent.index),
                        round: replay.round,
                        body: Body::Bid {
                            cells: bv.cells.iter().map(|c| encode_cipher(params, c)).collect(),
                            bit_proofs: bv.bit_proofs,
                            sum_proof: bv.sum_proof,
                        },
                        key,
                    });
                }
            }
        },
        Phase::Scan => {
            let target = replay.current_target().expect("scan active");
            let tctx = target.ctx(replay.round);
            if replay.blind_count < replay.n {
                // Strictly sequential: only the next player in the chain
                // can act.
                let i = replay.blind_count;
                let key = (i, format!("blind;{tctx};pos={i}"));
                if !produced.contains(&key) {
                    let agent = &agents[i];
                    let ctx = blind_step_ctx(replay.round, &target, i);
                    let mut rng = agent.rng(&ctx);
                    let rho = params.random_nonzero_scalar(&mut rng);
                    let input = replay.chain.clone().expect("chain set");
                    let step = blind_exponentiate(params, &ctx, &input, &rho, &mut rng)
                        .expect("rho is nonzero");
                    out.push(PendingMessage {
                        author: Author::Player(i),
                        round: replay.round,
                        body: Body::Blind {
                            target: TargetJson::from_target(&target),
                            position: (i + 1) as u32,
                            input: encode_cipher(params, &step.input),
                            output: encode_cipher(params, &step.output),
                            public_exp: params.encode_element(&step.public_exp),
                            proof: step.proof,
                        },
                        key,
                    });
                }
            } else {
                for agent in agents {
                    if replay.shares[agent.index].is_some() {
                        continue;
                    }
                    let key = (agent.index, format!("share;{tctx}"));
                    if produced.contains(&key) {
                        continue;
                    }
                    let ctx = share_step_ctx(replay.round, &target);
                    let mut rng = agent.rng(&ctx);
                    let source = replay.chain.clone().expect("chain set");
                    let ds = decrypt_share(
                        params,
                        &ctx,
                        &source,
                        agent.key.as_ref().expect("crypto agents carry keys"),
                        &mut rng,
                    );
                    out.push(PendingMessage {
                        author: Author::Player(agent.index),
                        round: replay.round,
                        body: Body::Share {
                            target: TargetJson::from_target(&target),
                            source: encode_cipher(params, &source),
                            share: params.encode_element(&ds.share),
                            proof: ds.proof,
                        },
                        key,
                    });
                }
            }
        }
    }
    out
}

fn tamper_body(params: &GroupParams, body: &mut Body, field: TamperField) {
    let bump_scalar = |s: &mut String| {
        if let Ok(v) = params.decode_scalar(s) {
            *s = params.encode_scalar(&params.scalar_add(&v, &BigUint::one()));
        }
    };
    let bump_element = |s: &mut String| {
        if let Ok(v) = params.decode_element(s) {
            *s = params.encode_element(&params.mul(&v, params.generator()));
        }
    };
    let bump_proof = |p: &mut SigmaProof| match p {
        SigmaProof::DlogKnowledge { response, .. }
        | SigmaProof::ChaumPedersenEquality { response, .. }
        | SigmaProof::CorrectDecryptionShare { response, .. }
        | SigmaProof::CorrectExponentiation { response, .. } => bump_scalar(response),
        SigmaProof::OrOfTwo { response0, .. } => bump_scalar(response0),
    };
    match (body, field) {
        (Body::KeyShare { proof, .. }, TamperField::Proof) => bump_proof(proof),
        (Body::KeyShare { public, .. }, TamperField::Payload) => bump_element(public),
        (Body::Bid { sum_proof, .. }, TamperField::Proof) => bump_proof(sum_proof),
        (Body::Bid { cells, .. }, TamperField::Payload) => bump_element(&mut cells[0][0]),
        (Body::Blind { proof, .. }, TamperField::Proof) => bump_proof(proof),
        (Body::Blind { output, .. }, TamperField::Payload) => bump_element(&mut output[0]),
        (Body::Share { proof, .. }, TamperField::Proof) => bump_proof(proof),
        (Body::Share { share, .. }, TamperField::Payload) => bump_element(share),
        _ => {}
    }
}

/// Runs the protocol: `n-1` auction rounds over the simulated asynchronous
/// network, followed by the closing summary. Misbehavior (only possible via
/// `tamper`) halts the protocol with the offender attributed.
pub fn run_protocol(
    profile: &Profile,
    config: &EngineConfig,
    schedule: &ScheduleSpec,
    tamper: Option<&TamperSpec>,
) -> Result<RunOutcome, EngineError> {
    let n = profile.len();
    if config.backend == BackendKind::Crypto && config.k_levels < 2 {
        return Err(EngineError::BadGrid);
    }
    if tamper.is_some() && config.backend != BackendKind::Crypto {
        return Err(EngineError::TamperUnsupported);
    }
    let agents: Vec<Agent> = (0..n)
        .map(|i| {
            let master = player_master(config.seed, i);
            let key = match config.backend {
                BackendKind::Crypto => {
                    let mut rng = derived_rng(&master, "keygen");
                    let secret = config.group.random_nonzero_scalar(&mut rng);
                    Some(
                        keygen_share_from_secret(&config.group, i, secret, &mut rng)
                            .expect("nonzero secret"),
                    )
                }
                BackendKind::Plaintext => None,
            };
            Agent { index: i, density: profile.density(i).clone(), key, master }
        })
        .collect();

    let mut board = BulletinBoard::new();
    let mut replay = Replay::new(config.backend, config.group.clone(), n, config.k_levels);
    let header = Body::Header {
        version: TRANSCRIPT_VERSION,
        protocol: "moving-knife".to_string(),
        backend: config.backend.label().to_string(),
        group: match config.backend {
            BackendKind::Crypto => config.group.name().to_string(),
            BackendKind::Plaintext => "none".to_string(),
        },
        n: n as u32,
        k_levels: config.k_levels,
        seed_commitment: seed_commitment(config.seed),
    };
    let record = board.post(Author::Board, 0, header).clone();
    replay
        .apply(&record)
        .map_err(|t| EngineError::Integrity(format!("header rejected: {t}")))?;

    let mut picker = Picker::new(schedule);
    let mut pending: Vec<PendingMessage> = Vec::new();
    let mut produced: HashSet<(usize, String)> = HashSet::new();
    let mut delivered: u64 = 0;

    while !replay.halted() && !replay.finished {
        for msg in produce_ready(&replay, &agents, &produced, config) {
            produced.insert(msg.key.clone());
            pending.push(msg);
        }
        if pending.is_empty() {
            return Err(EngineError::Integrity("no deliverable messages".into()));
        }
        let idx = picker.pick(pending.len());
        let mut msg = pending.remove(idx);
        if let Some(t) = tamper {
            if t.delivery_index == delivered {
                tamper_body(&config.group, &mut msg.body, t.field);
            }
        }
        delivered += 1;
        let record = board.post(msg.author, msg.round, msg.body).clone();
        if let Err(tag) = replay.apply(&record) {
            replay.fault(&record, tag);
        }
    }

    let summary = Body::Summary {
        allocation: replay.summary_pieces(),
        cuts: replay.cuts.iter().map(rational_string).collect(),
        misbehavior: replay.misbehavior.iter().map(|m| m.to_json()).collect(),
        halted_round: replay.halted_round,
    };
    let record = board.post(Author::Board, 0, summary).clone();
    replay
        .apply(&record)
        .map_err(|t| EngineError::Integrity(format!("summary rejected: {t}")))?;

    Ok(RunOutcome {
        allocation: replay.allocation(),
        board,
        misbehavior: replay.misbehavior.clone(),
        rounds: replay.rounds.clone(),
        traces: replay.traces.clone(),
        halted_round: replay.halted_round,
    })
}

/// Result of checking a transcript without any secret key.
#[derive(Debug)]
pub struct VerifyOutcome {
    pub ok: bool,
    pub misbehavior: Vec<MisbehaviorRecord>,
    pub allocation: Option<Allocation>,
}

/// Replays a transcript end to end: hash chain, step order, every sigma
/// proof, the auction resolution, and the closing summary. Verification is
/// total over the chain; semantic replay stops at the first offending
/// record (everything after it was produced relative to corrupt state).
pub fn verify_transcript(text: &str) -> VerifyOutcome {
    let board = match BulletinBoard::from_lines(text) {
        Ok(b) => b,
        Err(e) => {
            return VerifyOutcome {
                ok: false,
                misbehavior: vec![MisbehaviorRecord {
                    author: Author::Board,
                    round: 0,
                    step: "parse".into(),
                    seq: 0,
                    tag: e.to_string(),
                }],
                allocation: None,
            }
        }
    };
    verify_board(&board)
}

/// Same as [`verify_transcript`] on an in-memory board.
pub fn verify_board(board: &BulletinBoard) -> VerifyOutcome {
    let mut misbehavior: Vec<MisbehaviorRecord> = Vec::new();
    for fault in board.check_chain() {
        let author =
            board.records().get(fault.seq as usize).map(|r| r.author).unwrap_or(Author::Board);
        misbehavior.push(MisbehaviorRecord {
            author,
            round: 0,
            step: "chain".into(),
            seq: fault.seq,
            tag: format!("hash-chain: {}", fault.reason),
        });
    }

    let records = board.records();
    let first = &records[0];
    let Body::Header { backend, group, n, k_levels, version, .. } = &first.body else {
        misbehavior.push(MisbehaviorRecord {
            author: first.author,
            round: 0,
            step: first.body.step_name().into(),
            seq: first.seq,
            tag: "missing-header".into(),
        });
        return VerifyOutcome { ok: false, misbehavior, allocation: None };
    };
    let bad_header = |misbehavior: &mut Vec<MisbehaviorRecord>| {
        misbehavior.push(MisbehaviorRecord {
            author: first.author,
            round: 0,
            step: "header".into(),
            seq: first.seq,
            tag: "bad-header".into(),
        });
    };
    let Some(backend) = BackendKind::parse(backend) else {
        bad_header(&mut misbehavior);
        return VerifyOutcome { ok: false, misbehavior, allocation: None };
    };
    let params = match backend {
        BackendKind::Plaintext => GroupParams::tiny_test(),
        BackendKind::Crypto => match GroupParams::by_name(group) {
            Ok(p) => p,
            Err(_) => {
                bad_header(&mut misbehavior);
                return VerifyOutcome { ok: false, misbehavior, allocation: None };
            }
        },
    };
    if *version != TRANSCRIPT_VERSION || *n < 2 {
        bad_header(&mut misbehavior);
        return VerifyOutcome { ok: false, misbehavior, allocation: None };
    }

    let mut replay = Replay::new(backend, params, *n as usize, *k_levels);
    if let Err(tag) = replay.apply(first) {
        replay.fault(first, tag);
    }
    let mut summary_matched = false;
    for record in &records[1..] {
        if replay.halted() {
            // After a fault only the board's closing summary is legitimate.
            if matches!(record.body, Body::Summary { .. }) && record.author == Author::Board {
                summary_matched = replay.apply_summary(record).is_ok();
            } else {
                misbehavior.push(MisbehaviorRecord {
                    author: record.author,
                    round: record.round,
                    step: record.body.step_name().into(),
                    seq: record.seq,
                    tag: "trailing-record".into(),
                });
            }
            continue;
        }
        if let Err(tag) = replay.apply(record) {
            if matches!(record.body, Body::Summary { .. }) {
                // A wrong summary is transcript corruption, not a player
                // fault that halts the protocol.
                misbehavior.push(MisbehaviorRecord {
                    author: record.author,
                    round: record.round,
                    step: "summary".into(),
                    seq: record.seq,
                    tag: tag.to_string(),
                });
            } else {
                replay.fault(record, tag);
            }
        } else if matches!(record.body, Body::Summary { .. }) {
            summary_matched = true;
        }
    }
    if !replay.summary_seen {
        misbehavior.push(MisbehaviorRecord {
            author: Author::Board,
            round: 0,
            step: "summary".into(),
            seq: records.len() as u64,
            tag: "missing-summary".into(),
        });
    } else if replay.halted() && !summary_matched {
        misbehavior.push(MisbehaviorRecord {
            author: Author::Board,
            round: 0,
            step: "summary".into(),
            seq: records.len() as u64 - 1,
            tag: "summary-mismatch".into(),
        });
    }
    if !replay.finished && !replay.halted() {
        misbehavior.push(MisbehaviorRecord {
            author: Author::Board,
            round: replay.round,
            step: "summary".into(),
            seq: records.len() as u64,
            tag: "incomplete-protocol".into(),
        });
    }

    misbehavior.extend(replay.misbehavior.iter().cloned());
    let allocation = Some(replay.allocation());
    VerifyOutcome { ok: misbehavior.is_empty(), misbehavior, allocation }
}

/// `(round, target)` of every jointly opened indicator, in transcript
/// order: the observable leakage of a run.
pub fn opened_targets(board: &BulletinBoard) -> Vec<(u32, ScanTarget)> {
    let mut seen = Vec::new();
    for record in board.records() {
        if let Body::Share { target, .. } = &record.body {
            if let Some(t) = target.to_target() {
                if seen.last() != Some(&(record.round, t)) {
                    seen.push((record.round, t));
                }
            }
        }
    }
    seen.dedup();
    seen
}

/// Convenience: the genesis hash, re-exported for harness reports.
pub fn chain_genesis() -> String {
    genesis_hash()
}
