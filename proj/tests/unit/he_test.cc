/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>
#include <sys/stat.h>

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "meterguard/error.hpp"
#include "meterguard/he.hpp"
#include "meterguard/random.hpp"

namespace meterguard::he {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

// Independent small-modulus Paillier in machine integers.
std::int64_t powmod(std::int64_t b, std::int64_t e, std::int64_t m) {
  std::int64_t r = 1 % m;
  b %= m;
  while (e > 0) {
    if (e & 1) r = r * b % m;
    b = b * b % m;
    e >>= 1;
  }
  return r;
}

std::int64_t small_decrypt(std::int64_t c, std::int64_t p, std::int64_t q) {
  const std::int64_t n = p * q, n2 = n * n;
  const std::int64_t lambda = std::lcm(p - 1, q - 1);
  const auto L = [n](std::int64_t u) { return (u - 1) / n; };
  const std::int64_t l = L(powmod(n + 1, lambda, n2)) % n;
  std::int64_t mu = 1;
  while (l * mu % n != 1) ++mu;
  return L(powmod(c, lambda, n2)) * mu % n;
}

const Keypair& tiny() {
  static const Keypair k = testing::keypair_from_primes(11, 13);
  return k;
}

const Keypair& key512() {
  static const Keypair k = [] {
    SeededRng rng(512);
    return keygen(kTestKeyBits, rng);
  }();
  return k;
}

std::int64_t as_i64(const mpz_class& v) { return v.get_si(); }

TEST(Keypair, SmallPrimeParameters) {
  const auto& k = tiny();
  EXPECT_EQ(k.pub.n, 143);
  EXPECT_EQ(k.pub.n_squared, 143 * 143);
  EXPECT_EQ(k.pub.g, 144);
  EXPECT_EQ(k.sec.lambda, 60);
  EXPECT_EQ(k.pub.key_id.size(), 16u);
  EXPECT_EQ(k.pub.key_id, PublicKey::from_modulus(143).key_id);
}

TEST(Keypair, InjectedPrimesAreChecked) {
  EXPECT_THROW(testing::keypair_from_primes(11, 11), Error);
  EXPECT_THROW(testing::keypair_from_primes(11, 15), Error);
  // gcd(pq, (p-1)(q-1)) = 3 for p = 3, q = 7.
  EXPECT_THROW(testing::keypair_from_primes(3, 7), Error);
}

TEST(SmallKey, ExhaustiveRoundTripAgainstIntegerOracle) {
  const auto& k = tiny();
  for (std::int64_t r : {1, 2, 5, 27, 142}) {
    for (std::int64_t m = 0; m < 143; ++m) {
      const auto c = encrypt(m, r, k.pub);
      const std::int64_t want = powmod(144, m, 143 * 143) * powmod(r, 143, 143 * 143) % (143 * 143);
      ASSERT_EQ(as_i64(c.value), want) << m << " " << r;
      ASSERT_EQ(decrypt(c, k), m);
      ASSERT_EQ(small_decrypt(want, 11, 13), m);
    }
  }
}

TEST(SmallKey, HomomorphismExhaustive) {
  const auto& k = tiny();
  SeededRng rng(4);
  for (std::int64_t a = 0; a < 143; a += 3) {
    for (std::int64_t b = 0; b < 143; b += 5) {
      const auto ca = encrypt(a, k.pub, rng);
      const auto cb = encrypt(b, k.pub, rng);
      ASSERT_EQ(decrypt(add(ca, cb, k.pub), k), (a + b) % 143);
      ASSERT_EQ(decrypt(scalar_mul(ca, b, k.pub), k), (a * b) % 143);
    }
  }
}

TEST(SmallKey, Examples) {
  const auto& k = tiny();
  SeededRng rng(9);
  EXPECT_EQ(decrypt(add(encrypt(2, k.pub, rng), encrypt(3, k.pub, rng), k.pub), k), 5);
  EXPECT_EQ(decrypt(add(encrypt(100, k.pub, rng), encrypt(50, k.pub, rng), k.pub), k), 7);
  EXPECT_EQ(decrypt(scalar_mul(encrypt(3, k.pub, rng), 4, k.pub), k), 12);
  const auto c = encrypt(77, k.pub, rng);
  EXPECT_EQ(decrypt(scalar_mul(c, 1, k.pub), k), 77);
  EXPECT_EQ(decrypt(scalar_mul(c, 0, k.pub), k), 0);
  EXPECT_EQ(decrypt(add(c, encrypt(0, k.pub, rng), k.pub), k), 77);
  EXPECT_EQ(decrypt(encrypt(0, 1, k.pub), k), 0);
  EXPECT_EQ(encrypt(0, 1, k.pub).value, 1);
  EXPECT_EQ(encrypt(0, 5, k.pub).value, powmod(5, 143, 143 * 143));
}

TEST(Encrypt, InputValidation) {
  const auto& k = tiny();
  EXPECT_EQ(code_of([&] { encrypt(143, 1, k.pub); }), ErrorCode::kPlaintextOutOfRange);
  EXPECT_EQ(code_of([&] { encrypt(-1, 1, k.pub); }), ErrorCode::kPlaintextOutOfRange);
  EXPECT_EQ(code_of([&] { encrypt(1, 0, k.pub); }), ErrorCode::kBadRandomizer);
  EXPECT_EQ(code_of([&] { encrypt(1, 143, k.pub); }), ErrorCode::kBadRandomizer);
  EXPECT_EQ(code_of([&] { encrypt(1, 11, k.pub); }), ErrorCode::kBadRandomizer);
  EXPECT_EQ(code_of([&] { scalar_mul(encrypt(1, 1, k.pub), -1, k.pub); }),
            ErrorCode::kInvalidArgument);
}

TEST(Keys, MismatchesAreRejected) {
  const auto& a = tiny();
  const auto b = testing::keypair_from_primes(17, 19);
  const auto ca = encrypt(5, 1, a.pub);
  const auto cb = encrypt(5, 1, b.pub);
  EXPECT_EQ(code_of([&] { decrypt(ca, b); }), ErrorCode::kWrongKey);
  EXPECT_EQ(code_of([&] { add(ca, cb, a.pub); }), ErrorCode::kKeyMismatch);
  EXPECT_EQ(code_of([&] { scalar_mul(cb, 2, a.pub); }), ErrorCode::kKeyMismatch);
  EXPECT_EQ(code_of([&] { encrypted_aggregate({ca, cb}, a.pub); }), ErrorCode::kKeyMismatch);
}

TEST(Keygen, ModulusSizeAndDeterminism) {
  const auto& k = key512();
  EXPECT_EQ(mpz_sizeinbase(k.pub.n.get_mpz_t(), 2), 512u);
  EXPECT_EQ(k.pub.g, k.pub.n + 1);
  SeededRng rng(512);
  EXPECT_EQ(keygen(kTestKeyBits, rng).pub.n, k.pub.n);
  EXPECT_THROW(
      [] {
        SeededRng r(1);
        keygen(32, r);
      }(),
      Error);
}

TEST(Keygen, RoundTripOnRandomPlaintexts) {
  const auto& k = key512();
  SeededRng rng(33);
  gmp_randclass gr(gmp_randinit_default);
  gr.seed(33);
  for (int i = 0; i < 1000; ++i) {
    const mpz_class m = gr.get_z_range(k.pub.n);
    const auto c = encrypt(m, k.pub, rng);
    ASSERT_EQ(decrypt(c, k), m);
    ASSERT_EQ(gcd(c.value, k.pub.n_squared), 1);
    ASSERT_GE(c.value, 1);
    ASSERT_LT(c.value, k.pub.n_squared);
  }
}

TEST(Keygen, HomomorphismOnRandomOperands) {
  const auto& k = key512();
  SeededRng rng(34);
  gmp_randclass gr(gmp_randinit_default);
  gr.seed(34);
  for (int i = 0; i < 100; ++i) {
    const mpz_class a = gr.get_z_range(k.pub.n);
    const mpz_class b = gr.get_z_range(k.pub.n);
    const mpz_class s = gr.get_z_bits(64);
    const auto ca = encrypt(a, k.pub, rng);
    EXPECT_EQ(decrypt(add(ca, encrypt(b, k.pub, rng), k.pub), k), mpz_class((a + b) % k.pub.n));
    EXPECT_EQ(decrypt(scalar_mul(ca, s, k.pub), k), mpz_class((a * s) % k.pub.n));
  }
}

TEST(Encrypt, ProbabilisticAndRerandomizable) {
  const auto& k = key512();
  SeededRng rng(5);
  const auto c1 = encrypt(42, k.pub, rng);
  const auto c2 = encrypt(42, k.pub, rng);
  EXPECT_NE(c1.value, c2.value);
  EXPECT_EQ(decrypt(c1, k), 42);
  EXPECT_EQ(decrypt(c2, k), 42);
  const auto fresh = add(c1, encrypt(0, k.pub, rng), k.pub);
  EXPECT_NE(fresh.value, c1.value);
  EXPECT_EQ(decrypt(fresh, k), 42);
}

TEST(Randomizer, CoprimeAndInRange) {
  const auto& k = tiny();
  SeededRng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const auto r = random_randomizer(k.pub, rng);
    ASSERT_GE(r, 1);
    ASSERT_LT(r, 143);
    ASSERT_EQ(gcd(r, k.pub.n), 1);
  }
}

TEST(Aggregate, Examples) {
  const auto& k = key512();
  SeededRng rng(7);
  const auto c2 = encrypt(2, k.pub, rng);
  EXPECT_EQ(decrypt(encrypted_aggregate({c2, encrypt(3, k.pub, rng), encrypt(5, k.pub, rng)},
                                        k.pub),
                    k),
            10);
  EXPECT_EQ(encrypted_aggregate({c2}, k.pub).value, c2.value);
  const auto empty = encrypted_aggregate({}, k.pub);
  EXPECT_EQ(empty.value, 1);
  EXPECT_EQ(decrypt(empty, k), 0);
}

TEST(Aggregate, FeederTotal) {
  const auto& k = key512();
  SeededRng rng(8);
  std::vector<Ciphertext> cts;
  mpz_class total = 0;
  for (int i = 0; i < 500; ++i) {
    const auto milli = rng.uniform_below(5001);
    total += milli;
    cts.push_back(encrypt(mpz_class(static_cast<unsigned long>(milli)), k.pub, rng));
  }
  EXPECT_EQ(decrypt(encrypted_aggregate(cts, k.pub), k), total);
}

TEST(Bill, Examples) {
  const auto& k = key512();
  SeededRng rng(10);
  const std::vector<Ciphertext> usage{encrypt(2, k.pub, rng), encrypt(3, k.pub, rng)};
  EXPECT_EQ(decrypt(encrypted_bill(usage, {{10, 20}}, k.pub), k), 80);
  EXPECT_EQ(decrypt(encrypted_bill(usage, {{0, 0}}, k.pub), k), 0);
  EXPECT_EQ(decrypt(encrypted_bill(usage, {{1, 1}}, k.pub), k),
            decrypt(encrypted_aggregate(usage, k.pub), k));
  EXPECT_EQ(code_of([&] { encrypted_bill(usage, {{1}}, k.pub); }), ErrorCode::kLengthMismatch);
}

TEST(Bill, MatchesPlaintextDotProduct) {
  const auto& k = key512();
  SeededRng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Ciphertext> usage;
    RateSchedule rates;
    mpz_class dot = 0;
    for (int h = 0; h < 24; ++h) {
      const auto u = rng.uniform_below(5001);
      const auto r = rng.uniform_below(400000);
      usage.push_back(encrypt(mpz_class(static_cast<unsigned long>(u)), k.pub, rng));
      rates.rates.push_back(r);
      dot += mpz_class(static_cast<unsigned long>(u)) * static_cast<unsigned long>(r);
    }
    EXPECT_EQ(decrypt(encrypted_bill(usage, rates, k.pub), k), dot);
  }
}

TEST(Bill, OverflowGuard) {
  const auto& k = tiny();
  const std::vector<Ciphertext> usage{encrypt(1, 1, k.pub), encrypt(1, 1, k.pub)};
  // 2 * (10 + 20) * 5000 far exceeds n = 143.
  EXPECT_EQ(code_of([&] { encrypted_bill(usage, {{10, 20}}, k.pub); }), ErrorCode::kOverflow);
  // Bound 4: (10 + 20) * 4 = 120 < 143 is allowed.
  EXPECT_EQ(decrypt(encrypted_bill(usage, {{10, 20}}, k.pub, 4), k), 30);
  EXPECT_EQ(code_of([&] { encrypted_bill(usage, {{10, 20}}, k.pub, 5); }), ErrorCode::kOverflow);
}

TEST(Serialization, CiphertextText) {
  const auto& k = key512();
  SeededRng rng(12);
  const auto c = encrypt(999, k.pub, rng);
  const auto text = format_ciphertext(c);
  EXPECT_EQ(text.substr(0, 17), k.pub.key_id + ":");
  const auto back = parse_ciphertext(text);
  EXPECT_EQ(back.value, c.value);
  EXPECT_EQ(back.key_id, c.key_id);
  EXPECT_THROW(parse_ciphertext("nocolon"), Error);
  EXPECT_THROW(parse_ciphertext(k.pub.key_id + ":xyz"), Error);
}

TEST(Serialization, KeyFiles) {
  const auto& k = key512();
  const auto dir = std::filesystem::temp_directory_path();
  const auto pub = (dir / "mg_he_test.pub").string();
  const auto sec = (dir / "mg_he_test.key").string();
  save_public_key(k.pub, pub);
  save_secret_key(k, sec);
  const auto p = load_public_key(pub);
  EXPECT_EQ(p.n, k.pub.n);
  EXPECT_EQ(p.key_id, k.pub.key_id);
  const auto s = load_secret_key(sec);
  EXPECT_EQ(s.sec.lambda, k.sec.lambda);
  EXPECT_EQ(s.sec.mu, k.sec.mu);
  struct stat st{};
  ASSERT_EQ(::stat(sec.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600u);
  SeededRng rng(1);
  EXPECT_EQ(decrypt(encrypt(31337, p, rng), s), 31337);
  std::remove(pub.c_str());
  std::remove(sec.c_str());
}

}  // namespace
}  // namespace meterguard::he
