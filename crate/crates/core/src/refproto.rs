//! Plaintext reference protocols: the round-based maximum-declaration
//! protocol (the discrete one-knife assignment), the simultaneous
//! declaration protocol, and the information-leak attack on the former.
//!
//! These run on exact rationals with no cryptography and serve as the
//! oracle the encrypted engine is checked against.

use crate::measure::{rational_string, Density, Interval, MeasureError, Rational};
use num::{One, Zero};
use thiserror::Error;

/// Player indices are 0-based throughout the library; serialized artifacts
/// and the CLI render them 1-based.
pub type PlayerId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefProtoError {
    #[error("a profile needs at least {min} players, got {got}")]
    TooFewPlayers { min: usize, got: usize },
    #[error("player {player}: {source}")]
    BadDensity { player: usize, source: MeasureError },
    #[error("attacker index {0} out of range")]
    BadAttacker(usize),
}

/// The tuple of utility densities, one per player.
#[derive(Debug, Clone)]
pub struct Profile {
    densities: Vec<Density>,
}

impl Profile {
    pub fn new(densities: Vec<Density>) -> Result<Self, RefProtoError> {
        if densities.len() < 2 {
            return Err(RefProtoError::TooFewPlayers { min: 2, got: densities.len() });
        }
        Ok(Profile { densities })
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn density(&self, player: PlayerId) -> &Density {
        &self.densities[player]
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }
}

/// Pieces assigned to every player. `withheld` marks players whose marked
/// pieces are not handed over because verifiable misbehavior was recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pieces: Vec<Vec<Interval>>,
    withheld: Vec<bool>,
}

impl Allocation {
    pub fn new(pieces: Vec<Vec<Interval>>) -> Self {
        let withheld = vec![false; pieces.len()];
        Allocation { pieces, withheld }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self, player: PlayerId) -> &[Interval] {
        &self.pieces[player]
    }

    pub fn withheld(&self, player: PlayerId) -> bool {
        self.withheld[player]
    }

    pub fn set_withheld(&mut self, player: PlayerId) {
        self.withheld[player] = true;
    }

    /// Utility recomputed from the density; never read from protocol state.
    pub fn utility(&self, profile: &Profile, player: PlayerId) -> Rational {
        self.pieces[player].iter().map(|iv| profile.density(player).measure(iv)).sum()
    }

    /// Sum of every player's utility for their own pieces.
    pub fn social_surplus(&self, profile: &Profile) -> Rational {
        (0..self.pieces.len()).map(|i| self.utility(profile, i)).sum()
    }

    /// True iff the pieces are pairwise disjoint (up to shared endpoints)
    /// and cover `[0,1]` exactly.
    pub fn tiles_unit_interval(&self) -> bool {
        let mut all: Vec<&Interval> = self.pieces.iter().flatten().filter(|iv| !iv.is_empty()).collect();
        all.sort_by(|a, b| a.lo().cmp(b.lo()));
        let mut edge = Rational::zero();
        for iv in all {
            if iv.lo() != &edge {
                return false;
            }
            edge = iv.hi().clone();
        }
        edge == Rational::one()
    }
}

/// One round of the maximum-declaration protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    /// 1-based round number.
    pub round: usize,
    /// Right end `x` of the remaining cake `[0,x]` at the start of the round.
    pub right_end: Rational,
    /// `(player, declared cut point)` for every remaining player.
    pub declarations: Vec<(PlayerId, Rational)>,
    pub winner: PlayerId,
    pub winning_point: Rational,
}

fn honest_cut(d: &Density, right_end: &Rational, k: usize) -> Rational {
    let cake = Interval::prefix(right_end.clone()).expect("remaining cake stays in [0,1]");
    let total = d.measure(&cake);
    let target = total / Rational::from_integer(k.into());
    d.cut_point(&cake, &target).expect("target is 1/k of the available mass")
}

/// Highest declaration wins; ties go to the lowest player index.
fn max_declaration(declarations: &[(PlayerId, Rational)]) -> (PlayerId, Rational) {
    let mut best = declarations[0].clone();
    for (player, point) in &declarations[1..] {
        if *point > best.1 {
            best = (*player, point.clone());
        }
    }
    best
}

/// Runs the round-based maximum-declaration protocol: in each round every
/// remaining player declares the point giving it `1/k` of the remaining
/// cake, the highest declaration wins the piece up to the current right
/// end, and the last player takes what is left.
pub fn run_endriss(profile: &Profile) -> (Allocation, Vec<RoundTrace>) {
    let n = profile.len();
    let mut remaining: Vec<PlayerId> = (0..n).collect();
    let mut x = Rational::one();
    let mut pieces: Vec<Vec<Interval>> = vec![Vec::new(); n];
    let mut traces = Vec::new();
    let mut round = 1;
    while remaining.len() > 1 {
        let k = remaining.len();
        let declarations: Vec<(PlayerId, Rational)> = remaining
            .iter()
            .map(|&i| (i, honest_cut(profile.density(i), &x, k)))
            .collect();
        let (winner, point) = max_declaration(&declarations);
        pieces[winner].push(Interval::new(point.clone(), x.clone()).expect("cut inside cake"));
        traces.push(RoundTrace {
            round,
            right_end: x.clone(),
            declarations,
            winner,
            winning_point: point.clone(),
        });
        x = point;
        remaining.retain(|&i| i != winner);
        round += 1;
    }
    pieces[remaining[0]].push(Interval::prefix(x).expect("valid"));
    (Allocation::new(pieces), traces)
}

/// Runs the simultaneous-declaration protocol: every player publishes its
/// `n-1` equal-share cut points up front; rounds then assign `[y, z]` where
/// `z` is the minimum relevant declaration among remaining players.
///
/// Returns the allocation and the full declarations matrix (row `i` holds
/// player `i`'s `n-1` points).
pub fn run_sgall_woeginger(profile: &Profile) -> (Allocation, Vec<Vec<Rational>>) {
    let n = profile.len();
    let matrix: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (1..n)
                .map(|j| {
                    let mass = Rational::new(j.into(), n.into());
                    profile.density(i).prefix_cut(&mass).expect("mass below 1")
                })
                .collect()
        })
        .collect();

    let mut remaining: Vec<PlayerId> = (0..n).collect();
    let mut pieces: Vec<Vec<Interval>> = vec![Vec::new(); n];
    let mut y = Rational::zero();
    for k in 1..n {
        let (winner, z) = remaining
            .iter()
            .map(|&i| (i, matrix[i][k - 1].clone()))
            .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("remaining players exist");
        pieces[winner].push(Interval::new(y.clone(), z.clone()).expect("declarations ascend"));
        remaining.retain(|&i| i != winner);
        y = z;
    }
    pieces[remaining[0]].push(Interval::new(y, Rational::one()).expect("valid"));
    (Allocation::new(pieces), matrix)
}

/// Outcome of [`endriss_leak_attack`].
#[derive(Debug, Clone)]
pub struct LeakAttackOutcome {
    pub allocation: Allocation,
    /// Attacker's utility when everyone (attacker included) plays honestly.
    pub honest_utility: Rational,
    /// Attacker's utility under the undercut strategy.
    pub attack_utility: Rational,
    /// `(round, bid)` actually declared by the attacker.
    pub attack_bids: Vec<(usize, Rational)>,
}

/// Replays the maximum-declaration protocol with one player exploiting the
/// public declarations: from the second round on, the attacker undercuts to
/// the highest previous-round declaration among the other remaining players
/// whenever that value lies below its honest point. Such a bid still wins
/// every time (cut points strictly shrink with the cake), so the attacker
/// banks the extra slice risk-free.
pub fn endriss_leak_attack(
    profile: &Profile,
    attacker: PlayerId,
) -> Result<LeakAttackOutcome, RefProtoError> {
    let n = profile.len();
    if n < 3 {
        return Err(RefProtoError::TooFewPlayers { min: 3, got: n });
    }
    if attacker >= n {
        return Err(RefProtoError::BadAttacker(attacker));
    }
    let (honest_allocation, _) = run_endriss(profile);
    let honest_utility = honest_allocation.utility(profile, attacker);

    let mut remaining: Vec<PlayerId> = (0..n).collect();
    let mut x = Rational::one();
    let mut pieces: Vec<Vec<Interval>> = vec![Vec::new(); n];
    let mut previous: Vec<(PlayerId, Rational)> = Vec::new();
    let mut attack_bids = Vec::new();
    let mut round = 1;
    while remaining.len() > 1 {
        let k = remaining.len();
        let declarations: Vec<(PlayerId, Rational)> = remaining
            .iter()
            .map(|&i| {
                let honest = honest_cut(profile.density(i), &x, k);
                if i != attacker || round == 1 {
                    return (i, honest);
                }
                let observed = previous
                    .iter()
                    .filter(|(j, _)| *j != attacker && remaining.contains(j))
                    .map(|(_, p)| p.clone())
                    .max();
                let bid = match observed {
                    Some(ceiling) if ceiling < honest => ceiling,
                    _ => honest,
                };
                attack_bids.push((round, bid.clone()));
                (i, bid)
            })
            .collect();
        let (winner, point) = max_declaration(&declarations);
        pieces[winner].push(Interval::new(point.clone(), x.clone()).expect("cut inside cake"));
        previous = declarations;
        x = point;
        remaining.retain(|&i| i != winner);
        round += 1;
    }
    pieces[remaining[0]].push(Interval::prefix(x).expect("valid"));
    let allocation = Allocation::new(pieces);
    let attack_utility = allocation.utility(profile, attacker);
    Ok(LeakAttackOutcome { allocation, honest_utility, attack_utility, attack_bids })
}

/// Renders an allocation as `player -> [lo, hi] ...` for error messages.
pub fn allocation_string(a: &Allocation) -> String {
    (0..a.len())
        .map(|i| {
            let pieces = a
                .pieces(i)
                .iter()
                .map(|iv| format!("[{}, {}]", rational_string(iv.lo()), rational_string(iv.hi())))
                .collect::<Vec<_>>()
                .join(" ");
            format!("P{} -> {pieces}", i + 1)
        })
        .collect::<Vec<_>>()
        .join("; ")
}
