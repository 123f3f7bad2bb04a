/* Copyright 2026 The dwv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <set>

#include <gtest/gtest.h>

#include "dwv/common.hpp"
#include "dwv/io.hpp"
#include "test_util.hpp"

namespace dwv {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, RangesAndMoments) {
  Rng r(7);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(5), 5u);
    const double z = r.normal();
    sum += z, sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 1; s <= 8; ++s) seen.insert(Rng::derive(9, s));
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(Rng::derive(9, 3), Rng::derive(9, 3));
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng r(1);
  r.shuffle(v);
  auto s = v;
  std::sort(s.begin(), s.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s[i], i);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(io::sha256_hex({}),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  EXPECT_EQ(io::sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  io::Sha256 h;
  h.update("a");
  h.update("bc");
  EXPECT_EQ(h.hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ByteIo, LittleEndianRoundTrip) {
  std::vector<std::uint8_t> buf;
  io::append_u16(buf, 0x1234);
  io::append_u8(buf, 7);
  const float vals[2] = {1.5f, -0.25f};
  io::append_f32(buf, vals);
  EXPECT_EQ(buf[0], 0x34);
  EXPECT_EQ(buf[1], 0x12);
  io::ByteReader r(buf);
  EXPECT_EQ(r.u16(), 0x1234);
  EXPECT_EQ(r.u8(), 7);
  float out[2];
  r.f32(out);
  EXPECT_EQ(out[0], 1.5f);
  EXPECT_EQ(out[1], -0.25f);
  EXPECT_EQ(r.remaining(), 0u);
  EXPECT_THROW(r.u8(), Error);
}

TEST(FileIo, MissingFileRaises) {
  try {
    io::read_file("/nonexistent/dwv/file.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingFile);
  }
}

}  // namespace
}  // namespace dwv
