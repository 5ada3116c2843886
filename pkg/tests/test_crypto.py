import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swipepair import crypto
from swipepair.crypto import (
    CipherHalf,
    InterlockEndpoint,
    decrypt_blocks,
    derive_session_key,
    derive_shared_secret,
    encrypt_blocks,
    generate_keypair,
    interlock_exchange,
    join_halves,
    open_power_record,
    seal_power_record,
    split_into_halves,
)
from swipepair.errors import FramingError, KeyAgreementError, OrderingViolation, RecordFormatError
from swipepair.records import PowerRecord

# RFC 7748 section 6.1 X25519 Diffie-Hellman test vectors
ALICE_PRIV = bytes.fromhex(
    "77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a")
ALICE_PUB = bytes.fromhex(
    "8520f0098930a754748b7ddcb43ef75a0dbf3a0d26381af4eba4a98eaa9b4e6a")
BOB_PRIV = bytes.fromhex(
    "5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb")
BOB_PUB = bytes.fromhex(
    "de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f")
SHARED = bytes.fromhex(
    "4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742")

# FIPS-197 appendix C.1 AES-128 single-block vector
AES_KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
AES_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
AES_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")


class TestKeyAgreement:
    def test_known_answer_public_keys(self):
        import cryptography.hazmat.primitives.asymmetric.x25519 as x

        assert (x.X25519PrivateKey.from_private_bytes(ALICE_PRIV)
                .public_key().public_bytes_raw() == ALICE_PUB)
        assert (x.X25519PrivateKey.from_private_bytes(BOB_PRIV)
                .public_key().public_bytes_raw() == BOB_PUB)

    def test_known_answer_shared_secret(self):
        assert derive_shared_secret(ALICE_PRIV, BOB_PUB) == SHARED
        assert derive_shared_secret(BOB_PRIV, ALICE_PUB) == SHARED

    def test_same_seed_same_keypair(self):
        a = generate_keypair(np.random.default_rng(5))
        b = generate_keypair(np.random.default_rng(5))
        assert a == b

    def test_different_seeds_different_public(self):
        a = generate_keypair(np.random.default_rng(5))
        b = generate_keypair(np.random.default_rng(6))
        assert a.public_bytes != b.public_bytes

    def test_commutativity_over_random_pairs(self):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            kp1 = generate_keypair(rng)
            kp2 = generate_keypair(rng)
            s12 = derive_shared_secret(kp1.private_bytes, kp2.public_bytes)
            s21 = derive_shared_secret(kp2.private_bytes, kp1.public_bytes)
            assert s12 == s21

    def test_degenerate_point_rejected(self):
        with pytest.raises(KeyAgreementError):
            derive_shared_secret(ALICE_PRIV, b"\x00" * 32)

    def test_wrong_length_rejected(self):
        with pytest.raises(KeyAgreementError):
            derive_shared_secret(ALICE_PRIV, b"\x01" * 31)


class TestSessionKey:
    def test_deterministic_and_128_bit(self):
        k1 = derive_session_key(SHARED)
        k2 = derive_session_key(SHARED)
        assert k1 == k2
        assert len(k1) == 16

    def test_distinct_secrets_distinct_keys(self):
        assert derive_session_key(b"a" * 32) != derive_session_key(b"b" * 32)

    def test_empty_secret_rejected(self):
        with pytest.raises(KeyAgreementError):
            derive_session_key(b"")


class TestBlockCipher:
    def test_fips_known_answer_first_block(self):
        ct = encrypt_blocks(AES_KEY, AES_PT)
        assert ct[:16] == AES_CT
        assert len(ct) == 32  # plaintext fills a block, so padding adds one

    def test_round_trip(self):
        key = derive_session_key(SHARED)
        for n in (0, 1, 15, 16, 17, 100):
            data = bytes(range(256))[:n]
            assert decrypt_blocks(key, encrypt_blocks(key, data)) == data

    def test_misaligned_ciphertext_rejected(self):
        with pytest.raises(FramingError):
            decrypt_blocks(AES_KEY, b"\x00" * 17)

    def test_bit_flip_changes_that_blocks_plaintext(self):
        key = derive_session_key(SHARED)
        data = bytes(range(48))
        ct = bytearray(encrypt_blocks(key, data))
        ct[5] ^= 0x40  # inside block 0
        try:
            out = decrypt_blocks(key, bytes(ct))
        except FramingError:
            return  # padding check caught it; also acceptable
        assert out[:16] != data[:16]

    def test_seal_open_record_round_trip(self):
        key = derive_session_key(SHARED)
        rng = np.random.default_rng(3)
        rec = PowerRecord(rng.uniform(0, 30, 50), rng.uniform(-90, 0, 50))
        out = open_power_record(key, seal_power_record(key, rec), expected_n=50)
        assert out == rec.quantized()


class TestHalves:
    def test_single_block_split(self):
        halves = split_into_halves(bytes(range(16)))
        assert [(h.block_index, h.half_index) for h in halves] == [(0, 0), (0, 1)]
        assert halves[0].payload == bytes(range(8))

    def test_three_blocks_order(self):
        halves = split_into_halves(bytes(48))
        assert [(h.block_index, h.half_index) for h in halves] == [
            (0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]

    @given(st.binary(min_size=0, max_size=160).filter(lambda b: len(b) % 16 == 0))
    @settings(max_examples=40)
    def test_join_inverts_split(self, ct):
        assert join_halves(split_into_halves(ct)) == ct

    def test_misaligned_rejected(self):
        with pytest.raises(FramingError):
            split_into_halves(b"\x00" * 20)

    def test_frame_wire_format(self):
        h = CipherHalf(block_index=1, half_index=1, payload=b"\x10" * 8)
        assert h.encode() == b"\x00\x00\x00\x01\x01" + b"\x10" * 8
        assert CipherHalf.decode(h.encode()) == h

    def test_bad_frames_rejected(self):
        with pytest.raises(FramingError):
            CipherHalf.decode(b"\x00" * 12)
        with pytest.raises(FramingError):
            CipherHalf.decode(b"\x00\x00\x00\x01\x02" + b"\x00" * 8)


def _endpoints(n=20, seed=9):
    rng = np.random.default_rng(seed)
    key = derive_session_key(SHARED)
    rec_a = PowerRecord(rng.uniform(0, 30, n), rng.uniform(-90, 0, n))
    rec_b = PowerRecord(rng.uniform(0, 30, n), rng.uniform(-90, 0, n))
    ct_a = seal_power_record(key, rec_a)
    ct_b = seal_power_record(key, rec_b)
    blocks = len(ct_a) // 16
    ep_a = InterlockEndpoint("a", key, ct_a, blocks)
    ep_b = InterlockEndpoint("b", key, ct_b, blocks)
    return ep_a, ep_b, rec_a, rec_b


class TestInterlock:
    def test_honest_exchange_recovers_peer_records(self):
        ep_a, ep_b, rec_a, rec_b = _endpoints()
        got_a, got_b = interlock_exchange(ep_a, ep_b, expected_n=20)
        assert got_a == rec_b.quantized()
        assert got_b == rec_a.quantized()

    def test_premature_second_half_aborts(self):
        ep_a, ep_b, _, _ = _endpoints()
        with pytest.raises(OrderingViolation):
            interlock_exchange(ep_a, ep_b, premature_second_half_from=ep_b)

    def test_duplicate_half_rejected(self):
        ep_a, ep_b, _, _ = _endpoints()
        frame = ep_b.frames_for_phase(0)[0]
        ep_a.receive(frame)
        with pytest.raises(FramingError):
            ep_a.receive(frame)

    def test_out_of_range_block_rejected(self):
        ep_a, _, _, _ = _endpoints()
        rogue = CipherHalf(block_index=999, half_index=0, payload=b"\x00" * 8)
        with pytest.raises(FramingError):
            ep_a.receive(rogue.encode())

    def test_first_halves_alone_decrypt_nothing(self):
        # the interlock premise: with every first half (and the key) in
        # hand, not one block is reconstructible, hence none decryptable
        ep_a, ep_b, _, _ = _endpoints()
        for frame in ep_b.frames_for_phase(0):
            ep_a.receive(frame)
        with pytest.raises(FramingError):
            ep_a.reassemble(expected_n=20)
        received = [CipherHalf(b, h, p) for (b, h), p in ep_a._received.items()]
        complete_blocks = {h.block_index for h in received if h.half_index == 0} & \
                          {h.block_index for h in received if h.half_index == 1}
        assert complete_blocks == set()

    def test_replaced_half_caught_by_validation_fuzz(self):
        # corrupt one random half per trial; the decrypted record must
        # never equal the original, and format validation catches the
        # overwhelming majority outright
        rng = np.random.default_rng(77)
        key = derive_session_key(SHARED)
        rec = PowerRecord(rng.uniform(0, 30, 40), rng.uniform(-90, 0, 40))
        ct = seal_power_record(key, rec)
        halves = split_into_halves(ct)
        rejected = 0
        trials = 1000
        for _ in range(trials):
            k = int(rng.integers(len(halves)))
            tampered = list(halves)
            tampered[k] = CipherHalf(halves[k].block_index, halves[k].half_index,
                                     rng.bytes(8))
            try:
                out = open_power_record(key, join_halves(tampered), expected_n=40)
            except (RecordFormatError, FramingError):
                rejected += 1
                continue
            assert out != rec.quantized()
        assert rejected >= 0.90 * trials
