//! Secure sealed-bid maximum auction.
//!
//! Bids are unary: a bid at level `j` out of `K` is a vector of `K`
//! ciphertexts encrypting 1 at position `j` and 0 elsewhere, proved
//! well-formed cell by cell plus a sum-one proof. The joint maximum is found
//! without opening any bid: suffix tallies `T_j` count (encrypted) how many
//! bids are at least `j`; scanning `j` downward, each tally is blinded by
//! every player in turn and jointly decrypted to a zero/nonzero indicator.
//! The first nonzero `j` is the maximum. The winner is found the same way,
//! opening candidate cells at the winning level in ascending player order
//! and stopping at the first hit, so losing bids below the maximum are never
//! opened at all and equal bids beyond the winner stay sealed.

use crate::group_crypto::{
    blind_exponentiate, combine_decrypt, encrypt, hom_add, is_identity, keygen_share,
    proofs::{self, SigmaProof},
    verify_blind_step, BlindStep, Ciphertext, CryptoError, DecryptionShare, GroupParams, KeyShare,
};
use num::bigint::BigUint;
use num::Zero;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuctionError {
    #[error("bid level {level} out of range 0..{k}")]
    LevelOutOfRange { level: u64, k: u64 },
    #[error("no bid vectors supplied")]
    Empty,
    #[error("no candidates to scan")]
    NoCandidates,
    #[error("bid vector of player {player} has {got} cells, expected {expected}")]
    LengthMismatch { player: usize, got: usize, expected: usize },
    #[error("bid vector of player {player} failed verification")]
    BadBidVector { player: usize },
    #[error("blind step by player {player} failed verification")]
    BadBlind { player: usize },
    #[error("crypto failure: {0}")]
    Crypto(#[from] CryptoError),
    #[error("protocol integrity violated: {0}")]
    Integrity(String),
}

/// Encrypted unary bid: exactly one cell encrypts 1.
#[derive(Debug, Clone)]
pub struct BidVector {
    pub owner: usize,
    pub cells: Vec<Ciphertext>,
    pub bit_proofs: Vec<SigmaProof>,
    pub sum_proof: SigmaProof,
}

/// Context string binding a cell proof to (round, owner, level).
pub fn bid_cell_ctx(round: u32, owner: usize, level: u64) -> String {
    format!("bid;round={round};player={owner};level={level}")
}

/// Context string binding the sum-one proof to (round, owner).
pub fn bid_sum_ctx(round: u32, owner: usize) -> String {
    format!("bid-sum;round={round};player={owner}")
}

/// Builds a well-formed bid vector for `level` out of `k_levels`.
pub fn make_bid_vector<R: Rng>(
    params: &GroupParams,
    pk: &BigUint,
    round: u32,
    owner: usize,
    level: u64,
    k_levels: u64,
    rng: &mut R,
) -> Result<BidVector, AuctionError> {
    if level >= k_levels {
        return Err(AuctionError::LevelOutOfRange { level, k: k_levels });
    }
    let mut cells = Vec::with_capacity(k_levels as usize);
    let mut bit_proofs = Vec::with_capacity(k_levels as usize);
    let mut rand_sum = BigUint::zero();
    for j in 0..k_levels {
        let bit = u8::from(j == level);
        let r = params.random_scalar(rng);
        let cell = encrypt(params, pk, bit, &r);
        let proof = proofs::prove_bit(params, &bid_cell_ctx(round, owner, j), pk, &cell, bit, &r, rng);
        rand_sum = params.scalar_add(&rand_sum, &r);
        cells.push(cell);
        bit_proofs.push(proof);
    }
    let sum = hom_sum(params, &cells);
    let sum_proof =
        proofs::prove_sum_one(params, &bid_sum_ctx(round, owner), pk, &sum, &rand_sum, rng);
    Ok(BidVector { owner, cells, bit_proofs, sum_proof })
}

/// Homomorphic sum of a cell slice.
pub fn hom_sum(params: &GroupParams, cells: &[Ciphertext]) -> Ciphertext {
    let mut acc = cells[0].clone();
    for c in &cells[1..] {
        acc = hom_add(params, &acc, c);
    }
    acc
}

/// True iff every cell is a canonical group member with a verifying bit
/// proof and the vector carries a verifying sum-one proof.
pub fn verify_bid_vector(
    params: &GroupParams,
    pk: &BigUint,
    round: u32,
    bv: &BidVector,
    k_levels: u64,
) -> bool {
    if bv.cells.len() as u64 != k_levels || bv.bit_proofs.len() != bv.cells.len() {
        return false;
    }
    for (j, (cell, proof)) in bv.cells.iter().zip(bv.bit_proofs.iter()).enumerate() {
        if !params.in_group(&cell.a) || !params.in_group(&cell.b) {
            return false;
        }
        if !proofs::verify_bit(params, &bid_cell_ctx(round, bv.owner, j as u64), pk, cell, proof) {
            return false;
        }
    }
    let sum = hom_sum(params, &bv.cells);
    proofs::verify_sum_one(params, &bid_sum_ctx(round, bv.owner), pk, &sum, &bv.sum_proof)
}

/// Suffix tallies: `T_j` encrypts the number of vectors bidding at least
/// `j`, computed purely homomorphically from verified vectors.
pub fn suffix_tallies(
    params: &GroupParams,
    vectors: &[&BidVector],
) -> Result<Vec<Ciphertext>, AuctionError> {
    let first = vectors.first().ok_or(AuctionError::Empty)?;
    let k = first.cells.len();
    for v in vectors {
        if v.cells.len() != k {
            return Err(AuctionError::LengthMismatch {
                player: v.owner,
                got: v.cells.len(),
                expected: k,
            });
        }
    }
    // T_{K-1} = sum of top cells; T_j = T_{j+1} + sum of cells at level j.
    let mut tallies = vec![Ciphertext { a: BigUint::zero(), b: BigUint::zero() }; k];
    let mut acc: Option<Ciphertext> = None;
    for j in (0..k).rev() {
        let level_sum = hom_sum(
            params,
            &vectors.iter().map(|v| v.cells[j].clone()).collect::<Vec<_>>(),
        );
        let t = match acc {
            Some(prev) => hom_add(params, &prev, &level_sum),
            None => level_sum,
        };
        tallies[j] = t.clone();
        acc = Some(t);
    }
    Ok(tallies)
}

/// What a single joint opening refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanTarget {
    /// Suffix tally at `level`.
    Tally { level: u64 },
    /// `candidate`'s cell at the winning `level`.
    WinnerCell { level: u64, candidate: usize },
}

impl ScanTarget {
    pub fn ctx(&self, round: u32) -> String {
        match self {
            ScanTarget::Tally { level } => format!("open;round={round};tally;level={level}"),
            ScanTarget::WinnerCell { level, candidate } => {
                format!("open;round={round};winner;level={level};candidate={candidate}")
            }
        }
    }
}

/// Context for the blind step a given player contributes to an opening.
pub fn blind_step_ctx(round: u32, target: &ScanTarget, player: usize) -> String {
    format!("{};blind;pos={player}", target.ctx(round))
}

/// Context for the decryption shares of an opening.
pub fn share_step_ctx(round: u32, target: &ScanTarget) -> String {
    format!("{};share", target.ctx(round))
}

enum Cursor {
    Max { level: u64 },
    Winner { position: usize },
    Done,
}

/// Drives the downward max scan and the ascending winner scan; the caller
/// supplies zero/nonzero indicator outcomes one opening at a time.
pub struct ScanState {
    k_levels: u64,
    candidates: Vec<usize>,
    cursor: Cursor,
    opened: Vec<(ScanTarget, bool)>,
    max_level: Option<u64>,
    winner: Option<usize>,
}

impl ScanState {
    pub fn new(k_levels: u64, candidates: Vec<usize>) -> Result<Self, AuctionError> {
        if k_levels == 0 {
            return Err(AuctionError::LevelOutOfRange { level: 0, k: 0 });
        }
        if candidates.is_empty() {
            return Err(AuctionError::NoCandidates);
        }
        Ok(ScanState {
            k_levels,
            candidates,
            cursor: Cursor::Max { level: k_levels - 1 },
            opened: Vec::new(),
            max_level: None,
            winner: None,
        })
    }

    /// The next indicator the protocol must jointly open, if any.
    pub fn next_target(&self) -> Option<ScanTarget> {
        match &self.cursor {
            Cursor::Max { level } => Some(ScanTarget::Tally { level: *level }),
            Cursor::Winner { position } => Some(ScanTarget::WinnerCell {
                level: self.max_level.expect("set when entering winner scan"),
                candidate: self.candidates[*position],
            }),
            Cursor::Done => None,
        }
    }

    /// Records the outcome of opening the current target.
    pub fn feed(&mut self, nonzero: bool) -> Result<(), AuctionError> {
        let target = self
            .next_target()
            .ok_or_else(|| AuctionError::Integrity("feed after scan completed".into()))?;
        self.opened.push((target, nonzero));
        match &mut self.cursor {
            Cursor::Done => unreachable!("next_target returned None above"),
            Cursor::Max { level } => {
                if nonzero {
                    self.max_level = Some(*level);
                    self.cursor = Cursor::Winner { position: 0 };
                } else if *level == 0 {
                    return Err(AuctionError::Integrity(
                        "bottom tally opened to zero although bids exist".into(),
                    ));
                } else {
                    *level -= 1;
                }
            }
            Cursor::Winner { position } => {
                if nonzero {
                    self.winner = Some(self.candidates[*position]);
                    self.cursor = Cursor::Done;
                } else if *position + 1 == self.candidates.len() {
                    return Err(AuctionError::Integrity(
                        "no candidate cell matched the resolved maximum".into(),
                    ));
                } else {
                    *position += 1;
                }
            }
        }
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        matches!(self.cursor, Cursor::Done)
    }

    pub fn max_level(&self) -> Option<u64> {
        self.max_level
    }

    pub fn winner(&self) -> Option<usize> {
        self.winner
    }

    /// Every opening performed so far, in order, with its outcome.
    pub fn opened(&self) -> &[(ScanTarget, bool)] {
        &self.opened
    }

    pub fn k_levels(&self) -> u64 {
        self.k_levels
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }
}

/// All key shares held in one place: the in-process stand-in for the player
/// set, used by the auction unit oracle and the trusted-backend tests.
pub struct PartyPool {
    params: GroupParams,
    keys: Vec<KeyShare>,
    publics: Vec<BigUint>,
    pk: BigUint,
}

/// Evidence for one jointly opened indicator: the blind chain, every
/// decryption share, and the resulting group element.
#[derive(Debug, Clone)]
pub struct IndicatorOpening {
    pub blinds: Vec<BlindStep>,
    pub shares: Vec<DecryptionShare>,
    pub opened: BigUint,
    pub nonzero: bool,
}

impl PartyPool {
    pub fn new<R: Rng>(params: GroupParams, n: usize, rng: &mut R) -> Self {
        let keys: Vec<KeyShare> = (0..n).map(|i| keygen_share(&params, i, rng)).collect();
        let publics: Vec<BigUint> = keys.iter().map(|k| k.public.clone()).collect();
        let mut pk = BigUint::from(1u32);
        for h in &publics {
            pk = params.mul(&pk, h);
        }
        PartyPool { params, keys, publics, pk }
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn pk(&self) -> &BigUint {
        &self.pk
    }

    pub fn publics(&self) -> &[BigUint] {
        &self.publics
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Blind-then-jointly-decrypt `c`: every player raises the running
    /// ciphertext to a fresh nonzero exponent (so the product exponent is a
    /// unit mod q), then every player contributes a verified decryption
    /// share of the final value.
    pub fn open_indicator<R: Rng>(
        &self,
        round: u32,
        target: &ScanTarget,
        c: &Ciphertext,
        rng: &mut R,
    ) -> Result<IndicatorOpening, AuctionError> {
        let mut blinds = Vec::with_capacity(self.keys.len());
        let mut current = c.clone();
        for key in &self.keys {
            let rho = self.params.random_nonzero_scalar(rng);
            let step_ctx = blind_step_ctx(round, target, key.index);
            let step = blind_exponentiate(&self.params, &step_ctx, &current, &rho, rng)?;
            if !verify_blind_step(&self.params, &step_ctx, &step) {
                return Err(AuctionError::BadBlind { player: key.index });
            }
            current = step.output.clone();
            blinds.push(step);
        }
        let share_ctx = share_step_ctx(round, target);
        let shares: Vec<DecryptionShare> = self
            .keys
            .iter()
            .map(|k| crate::group_crypto::decrypt_share(&self.params, &share_ctx, &current, k, rng))
            .collect();
        let opened = combine_decrypt(&self.params, &share_ctx, &current, &self.publics, &shares)?;
        let nonzero = !is_identity(&opened);
        Ok(IndicatorOpening { blinds, shares, opened, nonzero })
    }
}

/// One opened indicator together with what it was.
#[derive(Debug, Clone)]
pub struct OpenedIndicator {
    pub target: ScanTarget,
    pub ciphertext: Ciphertext,
    pub opening: IndicatorOpening,
}

/// Outcome of a resolved auction with re-checkable evidence.
#[derive(Debug, Clone)]
pub struct AuctionResult {
    pub max_level: u64,
    pub winner: usize,
    pub evidence: Vec<OpenedIndicator>,
}

/// Scans tallies downward, opening one blinded indicator per level, until
/// the first nonzero count: that level is the maximum bid.
pub fn resolve_max<R: Rng>(
    pool: &PartyPool,
    round: u32,
    tallies: &[Ciphertext],
    candidates: &[usize],
    rng: &mut R,
) -> Result<(u64, Vec<OpenedIndicator>, ScanState), AuctionError> {
    let mut scan = ScanState::new(tallies.len() as u64, candidates.to_vec())?;
    let mut evidence = Vec::new();
    while let Some(target @ ScanTarget::Tally { level }) = scan.next_target() {
        let c = &tallies[level as usize];
        let opening = pool.open_indicator(round, &target, c, rng)?;
        let nonzero = opening.nonzero;
        evidence.push(OpenedIndicator { target, ciphertext: c.clone(), opening });
        scan.feed(nonzero)?;
        if nonzero {
            break;
        }
    }
    let max_level = scan
        .max_level()
        .ok_or_else(|| AuctionError::Integrity("max scan ended without a level".into()))?;
    Ok((max_level, evidence, scan))
}

/// Opens candidate cells at the winning level in ascending order until the
/// first nonzero; cells of later candidates stay sealed.
pub fn resolve_winner<R: Rng>(
    pool: &PartyPool,
    round: u32,
    vectors: &[&BidVector],
    scan: &mut ScanState,
    rng: &mut R,
) -> Result<(usize, Vec<OpenedIndicator>), AuctionError> {
    let mut evidence = Vec::new();
    while let Some(target @ ScanTarget::WinnerCell { level, candidate }) = scan.next_target() {
        let vector = vectors
            .iter()
            .find(|v| v.owner == candidate)
            .ok_or_else(|| AuctionError::Integrity(format!("no vector for candidate {candidate}")))?;
        let c = &vector.cells[level as usize];
        let opening = pool.open_indicator(round, &target, c, rng)?;
        let nonzero = opening.nonzero;
        evidence.push(OpenedIndicator { target, ciphertext: c.clone(), opening });
        scan.feed(nonzero)?;
        if nonzero {
            break;
        }
    }
    let winner = scan
        .winner()
        .ok_or_else(|| AuctionError::Integrity("winner scan ended without a hit".into()))?;
    Ok((winner, evidence))
}

/// Full auction: verify every vector (attributing failures), tally, resolve
/// the maximum, resolve the winner.
pub fn run_auction<R: Rng>(
    pool: &PartyPool,
    round: u32,
    vectors: &[&BidVector],
    candidates: &[usize],
    rng: &mut R,
) -> Result<AuctionResult, AuctionError> {
    if vectors.is_empty() {
        return Err(AuctionError::Empty);
    }
    let k = vectors[0].cells.len() as u64;
    for v in vectors {
        if !verify_bid_vector(pool.params(), pool.pk(), round, v, k) {
            return Err(AuctionError::BadBidVector { player: v.owner });
        }
    }
    let tallies = suffix_tallies(pool.params(), vectors)?;
    let (max_level, mut evidence, mut scan) = resolve_max(pool, round, &tallies, candidates, rng)?;
    let (winner, winner_evidence) = resolve_winner(pool, round, vectors, &mut scan, rng)?;
    evidence.extend(winner_evidence);
    Ok(AuctionResult { max_level, winner, evidence })
}
