//! Prime-order-group arithmetic and (n,n)-threshold exponential ElGamal.
//!
//! The scheme lives in the order-`q` subgroup of `Z_p*` for a safe-ish prime
//! `p`. A ciphertext for exponent `m` under joint key `PK = prod h_i` is
//! `(g^r, g^m * PK^r)`; componentwise multiplication adds plaintexts and
//! componentwise inversion negates them. Decryption needs one share `A^{x_i}`
//! from every key holder, so any smaller coalition learns nothing.
//!
//! Plaintexts are never recovered by discrete log: the protocol only ever
//! asks whether a (blinded) plaintext is zero, or compares against `g^b` for
//! a known bit `b`.

pub mod proofs;

use num::bigint::{BigUint, RandBigInt};
use num::{Integer, One, Zero};
use proofs::SigmaProof;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid group parameters: {0}")]
    BadParams(String),
    #[error("secret key share must lie in [1, q-1]")]
    BadSecret,
    #[error("key share proof for player {player} failed verification")]
    BadKeyShareProof { player: usize },
    #[error("decryption share from player {player} failed verification")]
    BadDecryptionShare { player: usize },
    #[error("missing decryption share for player {player}")]
    MissingShare { player: usize },
    #[error("blinding exponent must be nonzero mod q")]
    ZeroBlind,
    #[error("unknown group parameter set {0:?}")]
    UnknownGroup(String),
    #[error("value is not a canonical group element")]
    BadElement,
}

/// A Schnorr group: the order-`q` subgroup of `Z_p*` generated by `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    name: String,
    p: BigUint,
    q: BigUint,
    g: BigUint,
    element_hex: usize,
    scalar_hex: usize,
}

/// 2048-bit safe prime from the well-known MODP group 14 (generator 2 has
/// order q = (p-1)/2 because p = 7 mod 8).
const MODP2048_P_HEX: &str = concat!(
    "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74",
    "020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f1437",
    "4fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7ed",
    "ee386bfb5a899fa5ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf05",
    "98da48361c55d39a69163fa8fd24cf5f83655d23dca3ad961c62f356208552bb",
    "9ed529077096966d670c354e4abc9804f1746c08ca18217c32905e462e36ce3b",
    "e39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf695581718",
    "3995497cea956ae515d2261898fa051015728e5a8aacaa68ffffffffffffffff",
);

impl GroupParams {
    fn build(name: &str, p: BigUint, q: BigUint, g: BigUint) -> Self {
        let element_hex = ((p.bits() as usize) + 7) / 8 * 2;
        let scalar_hex = ((q.bits() as usize) + 7) / 8 * 2;
        GroupParams { name: name.to_string(), p, q, g, element_hex, scalar_hex }
    }

    /// Deterministic toy group p=23, q=11, g=2. Insecure; test vectors only.
    pub fn tiny_test() -> Self {
        GroupParams::build("test23", BigUint::from(23u32), BigUint::from(11u32), BigUint::from(2u32))
    }

    /// The 2048-bit production group.
    pub fn modp2048() -> Self {
        let p = BigUint::parse_bytes(MODP2048_P_HEX.as_bytes(), 16).expect("constant parses");
        let q = (&p - BigUint::one()) >> 1;
        GroupParams::build("modp2048", p, q, BigUint::from(2u32))
    }

    pub fn by_name(name: &str) -> Result<Self, CryptoError> {
        match name {
            "test23" => Ok(GroupParams::tiny_test()),
            "modp2048" => Ok(GroupParams::modp2048()),
            other => Err(CryptoError::UnknownGroup(other.to_string())),
        }
    }

    /// Structural checks, plus primality for parameter sets small enough to
    /// test exhaustively fast. The named 2048-bit constants are standardised;
    /// we verify the subgroup relations, not their primality.
    pub fn validate(&self) -> Result<(), CryptoError> {
        if !(&self.p - BigUint::one()).mod_floor(&self.q).is_zero() {
            return Err(CryptoError::BadParams("q does not divide p-1".into()));
        }
        if self.g <= BigUint::one() || self.g >= self.p {
            return Err(CryptoError::BadParams("generator out of range".into()));
        }
        if self.g.modpow(&self.q, &self.p) != BigUint::one() {
            return Err(CryptoError::BadParams("generator order does not divide q".into()));
        }
        if self.p.bits() <= 64 {
            if !is_probable_prime_small(&self.p) {
                return Err(CryptoError::BadParams("p is not prime".into()));
            }
            if !is_probable_prime_small(&self.q) {
                return Err(CryptoError::BadParams("q is not prime".into()));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        base.modpow(exp, &self.p)
    }

    pub fn g_pow(&self, exp: &BigUint) -> BigUint {
        self.pow(&self.g, exp)
    }

    /// Inverse of a subgroup element (`a^(q-1)`).
    pub fn inv(&self, a: &BigUint) -> BigUint {
        self.pow(a, &(&self.q - BigUint::one()))
    }

    /// Canonical membership: `0 < a < p` and `a^q = 1`.
    pub fn in_group(&self, a: &BigUint) -> bool {
        !a.is_zero() && a < &self.p && self.pow(a, &self.q).is_one()
    }

    pub fn scalar_add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.q
    }

    pub fn scalar_sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.q) - (b % &self.q)) % &self.q
    }

    pub fn scalar_mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.q
    }

    /// Uniform scalar in `[0, q)`.
    pub fn random_scalar<R: Rng>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_below(&self.q)
    }

    /// Uniform scalar in `[1, q)`.
    pub fn random_nonzero_scalar<R: Rng>(&self, rng: &mut R) -> BigUint {
        loop {
            let s = self.random_scalar(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    /// Fixed-width lowercase hex; unique per value, so challenge hashes of
    /// serialized statements are canonical.
    pub fn encode_element(&self, a: &BigUint) -> String {
        format!("{:0>width$x}", a, width = self.element_hex)
    }

    pub fn encode_scalar(&self, s: &BigUint) -> String {
        format!("{:0>width$x}", s, width = self.scalar_hex)
    }

    pub fn decode_element(&self, s: &str) -> Result<BigUint, CryptoError> {
        if s.len() != self.element_hex || !s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
            return Err(CryptoError::BadElement);
        }
        let v = BigUint::parse_bytes(s.as_bytes(), 16).ok_or(CryptoError::BadElement)?;
        if v >= self.p {
            return Err(CryptoError::BadElement);
        }
        Ok(v)
    }

    pub fn decode_scalar(&self, s: &str) -> Result<BigUint, CryptoError> {
        if s.len() != self.scalar_hex || !s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
            return Err(CryptoError::BadElement);
        }
        let v = BigUint::parse_bytes(s.as_bytes(), 16).ok_or(CryptoError::BadElement)?;
        if v >= self.q {
            return Err(CryptoError::BadElement);
        }
        Ok(v)
    }
}

/// Miller-Rabin with the witness set that is deterministic below 3.3e24.
fn is_probable_prime_small(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    let small: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for w in small {
        let wb = BigUint::from(w);
        if *n == wb {
            return true;
        }
        if n.mod_floor(&wb).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - BigUint::one();
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for w in small {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// One player's threshold key material. The joint public key is the product
/// of all `public` parts; the joint secret (never materialized) is the sum
/// of all `secret` parts mod q.
#[derive(Debug, Clone)]
pub struct KeyShare {
    pub index: usize,
    secret: BigUint,
    pub public: BigUint,
    pub proof: SigmaProof,
}

impl KeyShare {
    pub fn secret(&self) -> &BigUint {
        &self.secret
    }

    pub fn public_part(&self) -> PublicKeyShare {
        PublicKeyShare { index: self.index, public: self.public.clone(), proof: self.proof.clone() }
    }
}

/// The broadcastable part of a key share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKeyShare {
    pub index: usize,
    pub public: BigUint,
    pub proof: SigmaProof,
}

fn key_share_context(index: usize) -> String {
    format!("keygen;player={index}")
}

/// Generates a key share with a proof of knowledge of the secret exponent.
pub fn keygen_share<R: Rng>(params: &GroupParams, index: usize, rng: &mut R) -> KeyShare {
    let secret = params.random_nonzero_scalar(rng);
    keygen_share_from_secret(params, index, secret, rng).expect("nonzero secret")
}

/// Builds a key share from a caller-chosen secret (test vectors).
pub fn keygen_share_from_secret<R: Rng>(
    params: &GroupParams,
    index: usize,
    secret: BigUint,
    rng: &mut R,
) -> Result<KeyShare, CryptoError> {
    if secret.is_zero() || secret >= *params.order() {
        return Err(CryptoError::BadSecret);
    }
    let public = params.g_pow(&secret);
    let proof = proofs::prove_dlog(params, &key_share_context(index), &public, &secret, rng);
    Ok(KeyShare { index, secret, public, proof })
}

pub fn verify_key_share(params: &GroupParams, share: &PublicKeyShare) -> bool {
    params.in_group(&share.public)
        && proofs::verify_dlog(params, &key_share_context(share.index), &share.public, &share.proof)
}

/// Joint public key `PK = prod h_i`; fails naming the first player whose
/// proof does not verify.
pub fn combine_pk(params: &GroupParams, shares: &[PublicKeyShare]) -> Result<BigUint, CryptoError> {
    let mut pk = BigUint::one();
    for share in shares {
        if !verify_key_share(params, share) {
            return Err(CryptoError::BadKeyShareProof { player: share.index });
        }
        pk = params.mul(&pk, &share.public);
    }
    Ok(pk)
}

/// Exponential-ElGamal ciphertext `(g^r, g^m * PK^r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub a: BigUint,
    pub b: BigUint,
}

/// Encrypts an arbitrary exponent. The protocol itself only encrypts bits;
/// the general form exists for homomorphism checks.
pub fn encrypt_exponent(params: &GroupParams, pk: &BigUint, m: &BigUint, r: &BigUint) -> Ciphertext {
    Ciphertext { a: params.g_pow(r), b: params.mul(&params.g_pow(m), &params.pow(pk, r)) }
}

/// Encrypts a bit with explicit randomness.
pub fn encrypt(params: &GroupParams, pk: &BigUint, bit: u8, r: &BigUint) -> Ciphertext {
    debug_assert!(bit <= 1);
    encrypt_exponent(params, pk, &BigUint::from(bit), r)
}

/// Componentwise product: adds plaintexts.
pub fn hom_add(params: &GroupParams, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
    Ciphertext { a: params.mul(&c1.a, &c2.a), b: params.mul(&c1.b, &c2.b) }
}

/// Componentwise inverse: negates the plaintext.
pub fn hom_neg(params: &GroupParams, c: &Ciphertext) -> Ciphertext {
    Ciphertext { a: params.inv(&c.a), b: params.inv(&c.b) }
}

/// One player's decryption share `A^{x_i}` with its correctness proof.
#[derive(Debug, Clone)]
pub struct DecryptionShare {
    pub owner: usize,
    pub share: BigUint,
    pub proof: SigmaProof,
}

/// Produces this player's decryption share for `c`, proving the exponent
/// equals the one behind its public key part.
pub fn decrypt_share<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    c: &Ciphertext,
    key: &KeyShare,
    rng: &mut R,
) -> DecryptionShare {
    let share = params.pow(&c.a, &key.secret);
    let proof =
        proofs::prove_decrypt_share(params, ctx, &key.public, c, &share, &key.secret, rng);
    DecryptionShare { owner: key.index, share, proof }
}

pub fn verify_decryption_share(
    params: &GroupParams,
    ctx: &str,
    key_public: &BigUint,
    c: &Ciphertext,
    ds: &DecryptionShare,
) -> bool {
    params.in_group(&ds.share)
        && proofs::verify_decrypt_share(params, ctx, key_public, c, &ds.share, &ds.proof)
}

/// Combines one verified share per player into `g^plaintext`.
///
/// `key_publics[i]` must be player `i`'s public part and `shares` must hold
/// exactly one entry per player; the first offender (missing or failing) is
/// named in the error.
pub fn combine_decrypt(
    params: &GroupParams,
    ctx: &str,
    c: &Ciphertext,
    key_publics: &[BigUint],
    shares: &[DecryptionShare],
) -> Result<BigUint, CryptoError> {
    let mut denominator = BigUint::one();
    for (player, key_public) in key_publics.iter().enumerate() {
        let ds = shares
            .iter()
            .find(|s| s.owner == player)
            .ok_or(CryptoError::MissingShare { player })?;
        if !verify_decryption_share(params, ctx, key_public, c, ds) {
            return Err(CryptoError::BadDecryptionShare { player });
        }
        denominator = params.mul(&denominator, &ds.share);
    }
    Ok(params.mul(&c.b, &params.inv(&denominator)))
}

/// True iff a combined decryption encodes plaintext zero.
pub fn is_identity(x: &BigUint) -> bool {
    *x == BigUint::one()
}

/// One multiplicative blinding step: raises a ciphertext to a secret
/// nonzero exponent, publishing `g^exponent` so verifiers can reject a
/// zeroing exponent outright.
#[derive(Debug, Clone)]
pub struct BlindStep {
    pub input: Ciphertext,
    pub output: Ciphertext,
    pub public_exp: BigUint,
    pub proof: SigmaProof,
}

/// Raises `(A, B)` to `rho`: plaintext 0 stays 0, any nonzero plaintext
/// stays nonzero because `rho` is invertible mod q.
pub fn blind_exponentiate<R: Rng>(
    params: &GroupParams,
    ctx: &str,
    c: &Ciphertext,
    rho: &BigUint,
    rng: &mut R,
) -> Result<BlindStep, CryptoError> {
    if rho.is_zero() || rho >= params.order() {
        return Err(CryptoError::ZeroBlind);
    }
    let output = Ciphertext { a: params.pow(&c.a, rho), b: params.pow(&c.b, rho) };
    let public_exp = params.g_pow(rho);
    let proof = proofs::prove_blind(params, ctx, c, &output, &public_exp, rho, rng);
    Ok(BlindStep { input: c.clone(), output, public_exp, proof })
}

pub fn verify_blind_step(params: &GroupParams, ctx: &str, step: &BlindStep) -> bool {
    !step.public_exp.is_one()
        && params.in_group(&step.public_exp)
        && params.in_group(&step.output.a)
        && params.in_group(&step.output.b)
        && proofs::verify_blind(params, ctx, &step.input, &step.output, &step.public_exp, &step.proof)
}

#[cfg(test)]
mod tests;
