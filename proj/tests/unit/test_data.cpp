// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <set>

#include "agat/data.hpp"
#include "agat/error.hpp"
#include "helpers.hpp"

using namespace agat;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

// Three 2×2 images with pixels 0, 255, i and labels 7, 8, 9.
void write_idx(const fs::path& dir) {
  std::vector<unsigned char> img, lab;
  put_be32(img, 0x803);
  put_be32(img, 3);
  put_be32(img, 2);
  put_be32(img, 2);
  for (unsigned char i = 0; i < 3; ++i) img.insert(img.end(), {0, 255, i, i});
  put_be32(lab, 0x801);
  put_be32(lab, 3);
  lab.insert(lab.end(), {7, 8, 9});
  write_bytes(dir / "img", img);
  write_bytes(dir / "lab", lab);
}

}  // namespace

TEST_CASE("IDX round trip and pixel scaling") {
  const auto dir = test::scratch_dir("idx");
  write_idx(dir);
  const auto d = load_idx(dir / "img", dir / "lab");
  CHECK(d.size() == 3);
  CHECK(d.height == 2);
  CHECK(d.labels == std::vector<std::size_t>{7, 8, 9});
  CHECK(d.images[1] == 1.0);
  CHECK(d.images[0] == 0.0);
  CHECK(d.images[2 * 4 + 2] == doctest::Approx(2.0 / 255.0));
  CHECK(d.num_classes() == 10);
  CHECK(d.head(2).size() == 2);
  CHECK(d.head(0).size() == 3);
}

TEST_CASE("IDX errors name the file and offset") {
  const auto dir = test::scratch_dir("idx-bad");
  write_idx(dir);
  std::vector<unsigned char> short_img{0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2};
  write_bytes(dir / "short", short_img);
  CHECK_THROWS_WITH_AS(load_idx(dir / "short", dir / "lab"), doctest::Contains("truncated payload at byte offset 18"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_idx(dir / "lab", dir / "lab"), doctest::Contains("bad magic"), DataError);
  CHECK_THROWS_WITH_AS(load_idx(dir / "missing", dir / "lab"), doctest::Contains("missing"), DataError);
}

TEST_CASE("CIFAR records") {
  const auto dir = test::scratch_dir("cifar");
  std::vector<unsigned char> rec(2 * 3073, 0);
  rec[0] = 4;
  rec[1] = 255;           // channel 0, pixel 0
  rec[3073] = 9;
  rec[3073 + 1 + 1024] = 51;  // second record, channel 1, pixel 0
  write_bytes(dir / "b1", rec);
  const auto d = load_cifar_binary({dir / "b1"});
  CHECK(d.size() == 2);
  CHECK(d.channels == 3);
  CHECK(d.labels == std::vector<std::size_t>{4, 9});
  CHECK(d.images[0] == 1.0);
  CHECK(d.images[3072 + 1024] == doctest::Approx(0.2));
  rec.pop_back();
  write_bytes(dir / "b2", rec);
  CHECK_THROWS_WITH_AS(load_cifar_binary({dir / "b2"}), doctest::Contains("byte offset 3073"), DataError);
}

TEST_CASE("synthetic blobs") {
  const auto a = synthetic_blobs(30, 3, 8, 1, 0.1);
  const auto b = synthetic_blobs(30, 3, 8, 1, 0.1);
  CHECK(a.images == b.images);
  CHECK(a.images != synthetic_blobs(30, 3, 8, 2, 0.1).images);
  for (double v : a.images) CHECK((v >= 0.0 && v <= 1.0));
  const auto clean = synthetic_blobs(6, 3, 8, 1, 0.0);
  CHECK(std::equal(clean.images.begin(), clean.images.begin() + 64, clean.images.begin() + 3 * 64));
  // Brightest pixel differs by class.
  std::set<std::size_t> peaks;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto first = clean.images.begin() + static_cast<std::ptrdiff_t>(c * 64);
    peaks.insert(static_cast<std::size_t>(std::max_element(first, first + 64) - first));
  }
  CHECK(peaks.size() == 3);
}

TEST_CASE("batches are a seeded permutation") {
  const auto e0 = batches(10, 3, 7, 0);
  REQUIRE(e0.size() == 4);
  CHECK(e0[0].size() == 3);
  CHECK(e0[3].size() == 1);
  std::vector<std::size_t> all;
  for (const auto& b : e0) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);
  CHECK(batches(10, 3, 7, 0) == e0);
  CHECK(batches(10, 3, 7, 1) != e0);
  CHECK(batches(10, 3, 8, 0) != e0);
  CHECK_THROWS_AS(batches(10, 0, 7, 0), ConfigError);
}

TEST_CASE("images_at gathers in order") {
  const auto d = synthetic_blobs(4, 2, 4, 0, 0.0);
  const std::vector<std::size_t> idx{3, 0};
  const auto t = d.images_at(idx);
  CHECK(t.shape() == ad::Shape{2, 1, 4, 4});
  CHECK(d.labels_at(idx) == std::vector<std::size_t>{1, 0});
  const std::vector<std::size_t> bad{4};
  CHECK_THROWS_AS(d.images_at(bad), IndexError);
}
