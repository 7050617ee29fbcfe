//! Non-interactive sigma proofs over the Schnorr group.
//!
//! Every proof is made non-interactive with a strong Fiat-Shamir transform:
//! the challenge is SHA-256 over a domain tag, a caller-supplied context
//! string (round/player/level binding), the group parameters, and the full
//! statement and commitments, all in canonical fixed-width hex. Proofs store
//! the full challenge hash; verifiers recompute it and compare the whole
//! digest before checking the group equations, so any single-field tamper of
//! a proof or its statement fails verification deterministically.

use super::{Ciphertext, GroupParams};
use num::bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A non-interactive sigma proof. Field values are canonical hex strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum SigmaProof {
    /// Knowledge of `x` with `h = g^x`.
    DlogKnowledge { commit: String, challenge: String, response: String },
    /// Equal discrete logs: `h1 = g1^x` and `h2 = g2^x` (used for the
    /// sum-one statement on a bid vector).
    ChaumPedersenEquality { commit1: String, commit2: String, challenge: String, response: String },
    /// The ciphertext encrypts 0 or 1 (disjunctive Chaum-Pedersen).
    OrOfTwo {
        commit_a0: String,
        commit_b0: String,
        commit_a1: String,
        commit_b1: String,
        challenge0: String,
        challenge1: String,
        challenge: String,
        response0: String,
        response1: String,
    },
    /// Decryption share `d = A^x` matches the key part `h = g^x`.
    CorrectDecryptionShare { commit1: String, commit2: String, challenge: String, response: String },
    /// `(A', B') = (A^rho, B^rho)` with published `R = g^rho`.
    CorrectExponentiation {
        commit_g: String,
        commit_a: String,
        commit_b: String,
        challenge: String,
        response: String,
    },
}

/// Fiat-Shamir challenge: full digest plus its reduction mod q.
struct Challenge {
    full: String,
    scalar: BigUint,
}

fn fs_challenge(params: &GroupParams, tag: &str, ctx: &str, fields: &[(&str, &str)]) -> Challenge {
    let mut h = Sha256::new();
    h.update(b"cakecut/fs/v1\x00");
    h.update(tag.as_bytes());
    h.update(b"\x00");
    h.update(ctx.as_bytes());
    h.update(b"\x00");
    h.update(params.name().as_bytes());
    h.update(b"|p:");
    h.update(params.encode_element(params.modulus()).as_bytes());
    h.update(b"|q:");
    h.update(params.encode_element(params.order()).as_bytes());
    h.update(b"|g:");
    h.update(params.encode_element(params.generator()).as_bytes());
    for (label, value) in fields {
        h.update(b"|");
        h.update(label.as_bytes());
        h.update(b":");
        h.update(value.as_bytes());
    }
    let digest = h.finalize();
    let scalar = BigUint::from_bytes_be(&digest) % params.order();
    Challenge { full: hex::encode(digest), scalar }
}

pub fn prove_dlog<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    h: &BigUint,
    x: &BigUint,
    rng: &mut R,
) -> SigmaProof {
    let w = params.random_scalar(rng);
    let t = params.g_pow(&w);
    let ch = fs_challenge(
        params,
        "dlog",
        ctx,
        &[("h", &params.encode_element(h)), ("t", &params.encode_element(&t))],
    );
    let s = params.scalar_add(&w, &params.scalar_mul(&ch.scalar, x));
    SigmaProof::DlogKnowledge {
        commit: params.encode_element(&t),
        challenge: ch.full,
        response: params.encode_scalar(&s),
    }
}

pub fn verify_dlog(params: &GroupParams, ctx: &str, h: &BigUint, proof: &SigmaProof) -> bool {
    let SigmaProof::DlogKnowledge { commit, challenge, response } = proof else {
        return false;
    };
    let (Ok(t), Ok(s)) = (params.decode_element(commit), params.decode_scalar(response)) else {
        return false;
    };
    let ch = fs_challenge(
        params,
        "dlog",
        ctx,
        &[("h", &params.encode_element(h)), ("t", commit)],
    );
    if ch.full != *challenge {
        return false;
    }
    params.g_pow(&s) == params.mul(&t, &params.pow(h, &ch.scalar))
}

/// Chaum-Pedersen equality of discrete logs for `(g1, h1)` and `(g2, h2)`.
fn prove_equal_dlogs<R: Rng>(
    params: &GroupParams,
    tag: &str,
    ctx: &str,
    bases: (&BigUint, &BigUint),
    images: (&BigUint, &BigUint),
    witness: &BigUint,
    rng: &mut R,
) -> (String, String, Challenge, String) {
    let w = params.random_scalar(rng);
    let t1 = params.pow(bases.0, &w);
    let t2 = params.pow(bases.1, &w);
    let ch = fs_challenge(
        params,
        tag,
        ctx,
        &[
            ("g1", &params.encode_element(bases.0)),
            ("h1", &params.encode_element(images.0)),
            ("g2", &params.encode_element(bases.1)),
            ("h2", &params.encode_element(images.1)),
            ("t1", &params.encode_element(&t1)),
            ("t2", &params.encode_element(&t2)),
        ],
    );
    let s = params.scalar_add(&w, &params.scalar_mul(&ch.scalar, witness));
    (params.encode_element(&t1), params.encode_element(&t2), ch, params.encode_scalar(&s))
}

fn verify_equal_dlogs(
    params: &GroupParams,
    tag: &str,
    ctx: &str,
    bases: (&BigUint, &BigUint),
    images: (&BigUint, &BigUint),
    commit1: &str,
    commit2: &str,
    challenge: &str,
    response: &str,
) -> bool {
    let (Ok(t1), Ok(t2), Ok(s)) = (
        params.decode_element(commit1),
        params.decode_element(commit2),
        params.decode_scalar(response),
    ) else {
        return false;
    };
    let ch = fs_challenge(
        params,
        tag,
        ctx,
        &[
            ("g1", &params.encode_element(bases.0)),
            ("h1", &params.encode_element(images.0)),
            ("g2", &params.encode_element(bases.1)),
            ("h2", &params.encode_element(images.1)),
            ("t1", commit1),
            ("t2", commit2),
        ],
    );
    if ch.full != *challenge {
        return false;
    }
    params.pow(bases.0, &s) == params.mul(&t1, &params.pow(images.0, &ch.scalar))
        && params.pow(bases.1, &s) == params.mul(&t2, &params.pow(images.1, &ch.scalar))
}

/// Proves that the homomorphic sum `(sa, sb)` of a bid vector encrypts
/// exactly 1, i.e. `(sa, sb/g)` encrypts 0: both are powers of the summed
/// randomness.
pub fn prove_sum_one<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    pk: &BigUint,
    sum: &Ciphertext,
    randomness_sum: &BigUint,
    rng: &mut R,
) -> SigmaProof {
    let shifted = params.mul(&sum.b, &params.inv(params.generator()));
    let (commit1, commit2, ch, response) = prove_equal_dlogs(
        params,
        "sum-one",
        ctx,
        (params.generator(), pk),
        (&sum.a, &shifted),
        randomness_sum,
        rng,
    );
    SigmaProof::ChaumPedersenEquality { commit1, commit2, challenge: ch.full, response }
}

pub fn verify_sum_one(
    params: &GroupParams,
    ctx: &str,
    pk: &BigUint,
    sum: &Ciphertext,
    proof: &SigmaProof,
) -> bool {
    let SigmaProof::ChaumPedersenEquality { commit1, commit2, challenge, response } = proof else {
        return false;
    };
    let shifted = params.mul(&sum.b, &params.inv(params.generator()));
    verify_equal_dlogs(
        params,
        "sum-one",
        ctx,
        (params.generator(), pk),
        (&sum.a, &shifted),
        commit1,
        commit2,
        challenge,
        response,
    )
}

pub fn prove_decrypt_share<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    key_public: &BigUint,
    c: &Ciphertext,
    share: &BigUint,
    secret: &BigUint,
    rng: &mut R,
) -> SigmaProof {
    let ctx = format!("{ctx};b={}", params.encode_element(&c.b));
    let (commit1, commit2, ch, response) = prove_equal_dlogs(
        params,
        "decrypt-share",
        &ctx,
        (params.generator(), &c.a),
        (key_public, share),
        secret,
        rng,
    );
    SigmaProof::CorrectDecryptionShare { commit1, commit2, challenge: ch.full, response }
}

pub fn verify_decrypt_share(
    params: &GroupParams,
    ctx: &str,
    key_public: &BigUint,
    c: &Ciphertext,
    share: &BigUint,
    proof: &SigmaProof,
) -> bool {
    let SigmaProof::CorrectDecryptionShare { commit1, commit2, challenge, response } = proof else {
        return false;
    };
    let ctx = format!("{ctx};b={}", params.encode_element(&c.b));
    verify_equal_dlogs(
        params,
        "decrypt-share",
        &ctx,
        (params.generator(), &c.a),
        (key_public, share),
        commit1,
        commit2,
        challenge,
        response,
    )
}

pub fn prove_blind<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    input: &Ciphertext,
    output: &Ciphertext,
    public_exp: &BigUint,
    rho: &BigUint,
    rng: &mut R,
) -> SigmaProof {
    let w = params.random_scalar(rng);
    let tg = params.g_pow(&w);
    let ta = params.pow(&input.a, &w);
    let tb = params.pow(&input.b, &w);
    let ch = fs_challenge(
        params,
        "blind",
        ctx,
        &[
            ("a", &params.encode_element(&input.a)),
            ("b", &params.encode_element(&input.b)),
            ("a2", &params.encode_element(&output.a)),
            ("b2", &params.encode_element(&output.b)),
            ("r", &params.encode_element(public_exp)),
            ("tg", &params.encode_element(&tg)),
            ("ta", &params.encode_element(&ta)),
            ("tb", &params.encode_element(&tb)),
        ],
    );
    let s = params.scalar_add(&w, &params.scalar_mul(&ch.scalar, rho));
    SigmaProof::CorrectExponentiation {
        commit_g: params.encode_element(&tg),
        commit_a: params.encode_element(&ta),
        commit_b: params.encode_element(&tb),
        challenge: ch.full,
        response: params.encode_scalar(&s),
    }
}

pub fn verify_blind(
    params: &GroupParams,
    ctx: &str,
    input: &Ciphertext,
    output: &Ciphertext,
    public_exp: &BigUint,
    proof: &SigmaProof,
) -> bool {
    let SigmaProof::CorrectExponentiation { commit_g, commit_a, commit_b, challenge, response } =
        proof
    else {
        return false;
    };
    let (Ok(tg), Ok(ta), Ok(tb), Ok(s)) = (
        params.decode_element(commit_g),
        params.decode_element(commit_a),
        params.decode_element(commit_b),
        params.decode_scalar(response),
    ) else {
        return false;
    };
    let ch = fs_challenge(
        params,
        "blind",
        ctx,
        &[
            ("a", &params.encode_element(&input.a)),
            ("b", &params.encode_element(&input.b)),
            ("a2", &params.encode_element(&output.a)),
            ("b2", &params.encode_element(&output.b)),
            ("r", &params.encode_element(public_exp)),
            ("tg", commit_g),
            ("ta", commit_a),
            ("tb", commit_b),
        ],
    );
    if ch.full != *challenge {
        return false;
    }
    params.g_pow(&s) == params.mul(&tg, &params.pow(public_exp, &ch.scalar))
        && params.pow(&input.a, &s) == params.mul(&ta, &params.pow(&output.a, &ch.scalar))
        && params.pow(&input.b, &s) == params.mul(&tb, &params.pow(&output.b, &ch.scalar))
}

/// Disjunctive proof that `c` encrypts 0 or 1 under `pk`: the branch for
/// the true bit is played honestly, the other is simulated, and the two
/// sub-challenges must add up to the Fiat-Shamir challenge mod q.
pub fn prove_bit<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    pk: &BigUint,
    c: &Ciphertext,
    bit: u8,
    randomness: &BigUint,
    rng: &mut R,
) -> SigmaProof {
    debug_assert!(bit <= 1);
    // Branch images: branch 0 proves (A, B) is (g^r, pk^r); branch 1 proves
    // (A, B/g) is. The honest branch is `bit`.
    let b_for = |branch: u8| -> BigUint {
        if branch == 0 {
            c.b.clone()
        } else {
            params.mul(&c.b, &params.inv(params.generator()))
        }
    };
    let fake: u8 = 1 - bit;
    let c_fake = params.random_scalar(rng);
    let s_fake = params.random_scalar(rng);
    let neg_c_fake = |x: &BigUint| params.inv(&params.pow(x, &c_fake));
    let ta_fake = params.mul(&params.g_pow(&s_fake), &neg_c_fake(&c.a));
    let tb_fake = params.mul(&params.pow(pk, &s_fake), &neg_c_fake(&b_for(fake)));
    let w = params.random_scalar(rng);
    let ta_real = params.g_pow(&w);
    let tb_real = params.pow(pk, &w);
    let (ta0, tb0, ta1, tb1) = if bit == 0 {
        (ta_real, tb_real, ta_fake, tb_fake)
    } else {
        (ta_fake, tb_fake, ta_real, tb_real)
    };
    let ch = fs_challenge(
        params,
        "bit-or",
        ctx,
        &[
            ("pk", &params.encode_element(pk)),
            ("a", &params.encode_element(&c.a)),
            ("b", &params.encode_element(&c.b)),
            ("ta0", &params.encode_element(&ta0)),
            ("tb0", &params.encode_element(&tb0)),
            ("ta1", &params.encode_element(&ta1)),
            ("tb1", &params.encode_element(&tb1)),
        ],
    );
    let c_real = params.scalar_sub(&ch.scalar, &c_fake);
    let s_real = params.scalar_add(&w, &params.scalar_mul(&c_real, randomness));
    let (c0, c1, s0, s1) = if bit == 0 {
        (c_real, c_fake, s_real, s_fake)
    } else {
        (c_fake, c_real, s_fake, s_real)
    };
    SigmaProof::OrOfTwo {
        commit_a0: params.encode_element(&ta0),
        commit_b0: params.encode_element(&tb0),
        commit_a1: params.encode_element(&ta1),
        commit_b1: params.encode_element(&tb1),
        challenge0: params.encode_scalar(&c0),
        challenge1: params.encode_scalar(&c1),
        challenge: ch.full,
        response0: params.encode_scalar(&s0),
        response1: params.encode_scalar(&s1),
    }
}

pub fn verify_bit(
    params: &GroupParams,
    ctx: &str,
    pk: &BigUint,
    c: &Ciphertext,
    proof: &SigmaProof,
) -> bool {
    let SigmaProof::OrOfTwo {
        commit_a0,
        commit_b0,
        commit_a1,
        commit_b1,
        challenge0,
        challenge1,
        challenge,
        response0,
        response1,
    } = proof
    else {
        return false;
    };
    let decoded = (
        params.decode_element(commit_a0),
        params.decode_element(commit_b0),
        params.decode_element(commit_a1),
        params.decode_element(commit_b1),
        params.decode_scalar(challenge0),
        params.decode_scalar(challenge1),
        params.decode_scalar(response0),
        params.decode_scalar(response1),
    );
    let (Ok(ta0), Ok(tb0), Ok(ta1), Ok(tb1), Ok(c0), Ok(c1), Ok(s0), Ok(s1)) = decoded else {
        return false;
    };
    let ch = fs_challenge(
        params,
        "bit-or",
        ctx,
        &[
            ("pk", &params.encode_element(pk)),
            ("a", &params.encode_element(&c.a)),
            ("b", &params.encode_element(&c.b)),
            ("ta0", commit_a0),
            ("tb0", commit_b0),
            ("ta1", commit_a1),
            ("tb1", commit_b1),
        ],
    );
    if ch.full != *challenge {
        return false;
    }
    if params.scalar_add(&c0, &c1) != ch.scalar {
        return false;
    }
    let b_shifted = params.mul(&c.b, &params.inv(params.generator()));
    params.g_pow(&s0) == params.mul(&ta0, &params.pow(&c.a, &c0))
        && params.pow(pk, &s0) == params.mul(&tb0, &params.pow(&c.b, &c0))
        && params.g_pow(&s1) == params.mul(&ta1, &params.pow(&c.a, &c1))
        && params.pow(pk, &s1) == params.mul(&tb1, &params.pow(&b_shifted, &c1))
}

/// The full challenge digest of a proof, used by binding tests.
pub fn proof_challenge(proof: &SigmaProof) -> &str {
    match proof {
        SigmaProof::DlogKnowledge { challenge, .. }
        | SigmaProof::ChaumPedersenEquality { challenge, .. }
        | SigmaProof::OrOfTwo { challenge, .. }
        | SigmaProof::CorrectDecryptionShare { challenge, .. }
        | SigmaProof::CorrectExponentiation { challenge, .. } => challenge,
    }
}

/// Human tag for misbehavior records.
pub fn proof_variant(proof: &SigmaProof) -> &'static str {
    match proof {
        SigmaProof::DlogKnowledge { .. } => "dlog-knowledge",
        SigmaProof::ChaumPedersenEquality { .. } => "chaum-pedersen-equality",
        SigmaProof::OrOfTwo { .. } => "or-of-two",
        SigmaProof::CorrectDecryptionShare { .. } => "correct-decryption-share",
        SigmaProof::CorrectExponentiation { .. } => "correct-exponentiation",
    }
}
