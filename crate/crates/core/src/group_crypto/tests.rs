use super::proofs::{self, SigmaProof};
use super::*;
use num::bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn u(n: u32) -> BigUint {
    BigUint::from(n)
}

#[test]
fn both_parameter_sets_validate() {
    GroupParams::tiny_test().validate().unwrap();
    GroupParams::modp2048().validate().unwrap();
    assert!(GroupParams::by_name("nope").is_err());
}

#[test]
fn broken_parameters_are_rejected() {
    let bad = GroupParams::build("bad", u(24), u(11), u(2));
    assert!(bad.validate().is_err());
    let composite_q = GroupParams::build("bad", u(23), u(22), u(5));
    assert!(composite_q.validate().is_err());
}

#[test]
fn keygen_vector_in_tiny_group() {
    let params = GroupParams::tiny_test();
    let share = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    assert_eq!(share.public, u(8));
    assert!(verify_key_share(&params, &share.public_part()));
}

#[test]
fn zero_secret_is_rejected() {
    let params = GroupParams::tiny_test();
    assert!(matches!(
        keygen_share_from_secret(&params, 0, u(0), &mut rng(1)),
        Err(CryptoError::BadSecret)
    ));
}

#[test]
fn combined_public_key_vector() {
    let params = GroupParams::tiny_test();
    let s1 = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let s2 = keygen_share_from_secret(&params, 1, u(5), &mut rng(2)).unwrap();
    assert_eq!(s2.public, u(9));
    let pk = combine_pk(&params, &[s1.public_part(), s2.public_part()]).unwrap();
    // g^8 = 256 mod 23 = 3, equivalently 8 * 9 mod 23.
    assert_eq!(pk, u(3));
    let single = combine_pk(&params, &[s1.public_part()]).unwrap();
    assert_eq!(single, u(8));
}

#[test]
fn tampered_key_share_proof_names_the_player() {
    let params = GroupParams::tiny_test();
    let s1 = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let mut s2 = keygen_share_from_secret(&params, 1, u(5), &mut rng(2)).unwrap().public_part();
    s2.public = u(10); // no longer matches the proof statement
    let err = combine_pk(&params, &[s1.public_part(), s2]).unwrap_err();
    assert_eq!(err, CryptoError::BadKeyShareProof { player: 1 });
}

#[test]
fn encryption_vector_in_tiny_group() {
    let params = GroupParams::tiny_test();
    let pk = u(8); // secret 3
    let c = encrypt(&params, &pk, 1, &u(4));
    assert_eq!((c.a.clone(), c.b.clone()), (u(16), u(4)));
    let zero = encrypt(&params, &pk, 0, &u(0));
    assert_eq!((zero.a, zero.b), (u(1), u(1)));
}

#[test]
fn decryption_share_vector_and_joint_decryption() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let c = Ciphertext { a: u(16), b: u(4) };
    let ds = decrypt_share(&params, "t", &c, &key, &mut rng(2));
    assert_eq!(ds.share, u(2)); // 16^3 mod 23
    assert!(verify_decryption_share(&params, "t", &key.public, &c, &ds));
    let m = combine_decrypt(&params, "t", &c, &[key.public.clone()], &[ds]).unwrap();
    assert_eq!(m, u(2)); // g^1
}

#[test]
fn tampered_decryption_share_fails() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let c = Ciphertext { a: u(16), b: u(4) };
    let mut ds = decrypt_share(&params, "t", &c, &key, &mut rng(2));
    ds.share = u(3);
    assert!(!verify_decryption_share(&params, "t", &key.public, &c, &ds));
    let err = combine_decrypt(&params, "t", &c, &[key.public.clone()], &[ds]).unwrap_err();
    assert_eq!(err, CryptoError::BadDecryptionShare { player: 0 });
}

#[test]
fn share_for_trivial_randomness_is_identity() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let c = Ciphertext { a: u(1), b: u(2) };
    let ds = decrypt_share(&params, "t", &c, &key, &mut rng(2));
    assert_eq!(ds.share, u(1));
}

#[test]
fn missing_share_is_reported() {
    let params = GroupParams::tiny_test();
    let k0 = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let k1 = keygen_share_from_secret(&params, 1, u(5), &mut rng(2)).unwrap();
    let pk = combine_pk(&params, &[k0.public_part(), k1.public_part()]).unwrap();
    let c = encrypt(&params, &pk, 1, &u(4));
    let ds0 = decrypt_share(&params, "t", &c, &k0, &mut rng(3));
    let err = combine_decrypt(
        &params,
        "t",
        &c,
        &[k0.public.clone(), k1.public.clone()],
        &[ds0],
    )
    .unwrap_err();
    assert_eq!(err, CryptoError::MissingShare { player: 1 });
}

fn roundtrip(params: &GroupParams, n: usize, bit: u8, seed: u64) {
    let mut r = rng(seed);
    let keys: Vec<KeyShare> = (0..n).map(|i| keygen_share(params, i, &mut r)).collect();
    let publics: Vec<BigUint> = keys.iter().map(|k| k.public.clone()).collect();
    let pk = combine_pk(params, &keys.iter().map(|k| k.public_part()).collect::<Vec<_>>()).unwrap();
    let c = encrypt(params, &pk, bit, &params.random_scalar(&mut r));
    let shares: Vec<DecryptionShare> =
        keys.iter().map(|k| decrypt_share(params, "rt", &c, k, &mut r)).collect();
    let m = combine_decrypt(params, "rt", &c, &publics, &shares).unwrap();
    assert_eq!(m, params.g_pow(&BigUint::from(bit)));
}

#[test]
fn threshold_round_trip_tiny_group() {
    let params = GroupParams::tiny_test();
    for n in 1..=3 {
        for bit in 0..=1u8 {
            for seed in 0..4 {
                roundtrip(&params, n, bit, 100 * n as u64 + 10 * bit as u64 + seed);
            }
        }
    }
}

#[test]
fn threshold_round_trip_production_group() {
    let params = GroupParams::modp2048();
    for n in 1..=3 {
        for bit in 0..=1u8 {
            roundtrip(&params, n, bit, 7 + n as u64 + bit as u64);
        }
    }
}

#[test]
fn homomorphic_addition_and_negation() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let pk = key.public.clone();
    let mut r = rng(9);
    for (a, b) in [(0u32, 1u32), (1, 1), (2, 3), (0, 0), (4, 1)] {
        let ca = encrypt_exponent(&params, &pk, &u(a), &params.random_scalar(&mut r));
        let cb = encrypt_exponent(&params, &pk, &u(b), &params.random_scalar(&mut r));
        let sum = hom_add(&params, &ca, &cb);
        let ds = decrypt_share(&params, "h", &sum, &key, &mut r);
        let m = combine_decrypt(&params, "h", &sum, &[pk.clone()], &[ds]).unwrap();
        assert_eq!(m, params.g_pow(&((u(a) + u(b)) % params.order())));
        // commutativity on plaintexts
        let sum_rev = hom_add(&params, &cb, &ca);
        let ds2 = decrypt_share(&params, "h", &sum_rev, &key, &mut r);
        let m2 = combine_decrypt(&params, "h", &sum_rev, &[pk.clone()], &[ds2]).unwrap();
        assert_eq!(m, m2);
        // c * c^-1 encrypts zero
        let cancel = hom_add(&params, &ca, &hom_neg(&params, &ca));
        let ds3 = decrypt_share(&params, "h", &cancel, &key, &mut r);
        let m3 = combine_decrypt(&params, "h", &cancel, &[pk.clone()], &[ds3]).unwrap();
        assert!(is_identity(&m3));
    }
}

#[test]
fn bit_proofs_complete_and_sound() {
    let params = GroupParams::tiny_test();
    let pk = u(8);
    let mut r = rng(5);
    for bit in 0..=1u8 {
        let rand = params.random_scalar(&mut r);
        let c = encrypt(&params, &pk, bit, &rand);
        let proof = proofs::prove_bit(&params, "bp", &pk, &c, bit, &rand, &mut r);
        assert!(proofs::verify_bit(&params, "bp", &pk, &c, &proof));
        // Perturbing one response scalar breaks the group equations.
        if let SigmaProof::OrOfTwo { response0, .. } = &proof {
            let bumped = params.encode_scalar(
                &params.scalar_add(&params.decode_scalar(response0).unwrap(), &u(1)),
            );
            let mut bad = proof.clone();
            if let SigmaProof::OrOfTwo { response0, .. } = &mut bad {
                *response0 = bumped;
            }
            assert!(!proofs::verify_bit(&params, "bp", &pk, &c, &bad));
        }
        // Binding: the proof does not verify against a different ciphertext.
        let other = encrypt(&params, &pk, bit, &params.scalar_add(&rand, &u(1)));
        assert!(!proofs::verify_bit(&params, "bp", &pk, &other, &proof));
        // Context binding.
        assert!(!proofs::verify_bit(&params, "elsewhere", &pk, &c, &proof));
    }
}

#[test]
fn no_bit_proof_for_plaintext_two() {
    let params = GroupParams::tiny_test();
    let pk = u(8);
    let mut r = rng(6);
    let rand = params.random_scalar(&mut r);
    let c = encrypt_exponent(&params, &pk, &u(2), &rand);
    // Forge attempts with either claimed bit still fail.
    for claimed in 0..=1u8 {
        let forged = proofs::prove_bit(&params, "bp", &pk, &c, claimed, &rand, &mut r);
        assert!(!proofs::verify_bit(&params, "bp", &pk, &c, &forged));
    }
}

fn sum_vector(
    params: &GroupParams,
    pk: &BigUint,
    bits: &[u8],
    r: &mut ChaCha20Rng,
) -> (Vec<Ciphertext>, Ciphertext, BigUint) {
    let mut cells = Vec::new();
    let mut rand_sum = BigUint::ZERO;
    for &bit in bits {
        let rand = params.random_scalar(r);
        cells.push(encrypt(params, pk, bit, &rand));
        rand_sum = params.scalar_add(&rand_sum, &rand);
    }
    let mut sum = cells[0].clone();
    for c in &cells[1..] {
        sum = hom_add(params, &sum, c);
    }
    (cells, sum, rand_sum)
}

#[test]
fn sum_one_proof_completeness_and_soundness() {
    let params = GroupParams::tiny_test();
    let pk = u(8);
    let mut r = rng(7);
    let (_, sum, rand_sum) = sum_vector(&params, &pk, &[0, 1, 0, 0], &mut r);
    let proof = proofs::prove_sum_one(&params, "sv", &pk, &sum, &rand_sum, &mut r);
    assert!(proofs::verify_sum_one(&params, "sv", &pk, &sum, &proof));

    let (_, single, rand_single) = sum_vector(&params, &pk, &[1], &mut r);
    let p1 = proofs::prove_sum_one(&params, "sv", &pk, &single, &rand_single, &mut r);
    assert!(proofs::verify_sum_one(&params, "sv", &pk, &single, &p1));

    // A vector summing to 2 admits no honest proof; running the prover with
    // the true randomness still fails the verifier.
    let (_, two, rand_two) = sum_vector(&params, &pk, &[1, 1, 0, 0], &mut r);
    let forged = proofs::prove_sum_one(&params, "sv", &pk, &two, &rand_two, &mut r);
    assert!(!proofs::verify_sum_one(&params, "sv", &pk, &two, &forged));
}

#[test]
fn blinding_preserves_zero_and_only_zero() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(3), &mut rng(1)).unwrap();
    let pk = key.public.clone();
    let mut r = rng(8);

    let zero = encrypt(&params, &pk, 0, &params.random_scalar(&mut r));
    let step = blind_exponentiate(&params, "bl", &zero, &u(7), &mut r).unwrap();
    assert!(verify_blind_step(&params, "bl", &step));
    let ds = decrypt_share(&params, "bl", &step.output, &key, &mut r);
    let m = combine_decrypt(&params, "bl", &step.output, &[pk.clone()], &[ds]).unwrap();
    assert!(is_identity(&m));

    let one = encrypt(&params, &pk, 1, &params.random_scalar(&mut r));
    let step = blind_exponentiate(&params, "bl", &one, &u(5), &mut r).unwrap();
    let ds = decrypt_share(&params, "bl", &step.output, &key, &mut r);
    let m = combine_decrypt(&params, "bl", &step.output, &[pk.clone()], &[ds]).unwrap();
    assert_eq!(m, params.g_pow(&u(5)));

    // Composition multiplies the exponents.
    let s1 = blind_exponentiate(&params, "bl", &one, &u(2), &mut r).unwrap();
    let s2 = blind_exponentiate(&params, "bl", &s1.output, &u(3), &mut r).unwrap();
    let ds = decrypt_share(&params, "bl", &s2.output, &key, &mut r);
    let m = combine_decrypt(&params, "bl", &s2.output, &[pk.clone()], &[ds]).unwrap();
    assert_eq!(m, params.g_pow(&u(6)));

    assert!(matches!(
        blind_exponentiate(&params, "bl", &one, &u(0), &mut r),
        Err(CryptoError::ZeroBlind)
    ));
}

#[test]
fn zero_indicator_is_exact_for_small_plaintexts() {
    let params = GroupParams::tiny_test();
    let key = keygen_share_from_secret(&params, 0, u(4), &mut rng(2)).unwrap();
    let pk = key.public.clone();
    let mut r = rng(11);
    for m in 0..=5u32 {
        let c = encrypt_exponent(&params, &pk, &u(m), &params.random_scalar(&mut r));
        let rho = params.random_nonzero_scalar(&mut r);
        let step = blind_exponentiate(&params, "zi", &c, &rho, &mut r).unwrap();
        assert!(verify_blind_step(&params, "zi", &step));
        let ds = decrypt_share(&params, "zi", &step.output, &key, &mut r);
        let opened = combine_decrypt(&params, "zi", &step.output, &[pk.clone()], &[ds]).unwrap();
        assert_eq!(is_identity(&opened), m == 0);
    }
}

#[test]
fn fiat_shamir_challenge_binds_the_statement() {
    let params = GroupParams::tiny_test();
    let mut r = rng(3);
    let x = u(6);
    let h = params.g_pow(&x);
    let p1 = proofs::prove_dlog(&params, "ctx-a", &h, &x, &mut r);
    let p2 = proofs::prove_dlog(&params, "ctx-b", &h, &x, &mut r);
    assert_ne!(proofs::proof_challenge(&p1), proofs::proof_challenge(&p2));
    // Same nonce stream, different statement element: different challenge.
    let y = u(7);
    let h2 = params.g_pow(&y);
    let p3 = proofs::prove_dlog(&params, "ctx-a", &h2, &y, &mut rng(3));
    assert_ne!(proofs::proof_challenge(&p1), proofs::proof_challenge(&p3));
    // Verifying against the wrong statement fails.
    assert!(!proofs::verify_dlog(&params, "ctx-a", &h2, &p1));
}

#[test]
fn canonical_encodings_reject_malformed_strings() {
    let params = GroupParams::tiny_test();
    assert_eq!(params.encode_element(&u(8)), "08");
    assert!(params.decode_element("08").is_ok());
    assert!(params.decode_element("8").is_err()); // wrong width
    assert!(params.decode_element("0A").is_err()); // uppercase
    assert!(params.decode_element("ff").is_err()); // >= p
    assert!(params.decode_scalar("0b").is_err()); // >= q
}

#[test]
fn production_group_proof_spot_check() {
    let params = GroupParams::modp2048();
    let mut r = rng(42);
    let key = keygen_share(&params, 0, &mut r);
    assert!(verify_key_share(&params, &key.public_part()));
    let pk = key.public.clone();
    let rand = params.random_scalar(&mut r);
    let c = encrypt(&params, &pk, 1, &rand);
    let proof = proofs::prove_bit(&params, "prod", &pk, &c, 1, &rand, &mut r);
    assert!(proofs::verify_bit(&params, "prod", &pk, &c, &proof));
}
