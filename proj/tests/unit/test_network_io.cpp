#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "photoread/error.hpp"
#include "photoread/network_io.hpp"

using namespace photoread;

namespace {

NetworkWeights sample_weights() {
  NetworkWeights w = gradcheck::make_problem(Activation::kAlgebraic, true, 21).weights;
  w.meta = {99, 12, 0.031, 0.029, 5000};
  return w;
}

ErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_weights(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInvariant;
}

}  // namespace

TEST_CASE("byte round trip") {
  const NetworkWeights w = sample_weights();
  const std::vector<std::uint8_t> bytes = serialize_weights(w);
  const NetworkWeights back = deserialize_weights(bytes);
  CHECK(back == w);
  CHECK(serialize_weights(back) == bytes);
  CHECK(std::memcmp(bytes.data(), "PRNW", 4) == 0);
}

TEST_CASE("file round trip gives bit-identical outputs") {
  const NetworkWeights w = sample_weights();
  const auto path = std::filesystem::temp_directory_path() / "photoread_test.weights";
  save_weights(w, path);
  CHECK(!std::filesystem::exists(path.string() + ".tmp"));
  const NetworkWeights back = load_weights(path);
  std::filesystem::remove(path);
  const std::vector<double> s{-2.0, 0.1, 0.4, 3.0};
  const AuxFeatures aux{4, {1, 1}, {9, 3}};
  CHECK(forward(back, s, aux).masses == forward(w, s, aux).masses);
}

TEST_CASE("damaged files are rejected as data errors") {
  const std::vector<std::uint8_t> good = serialize_weights(sample_weights());

  std::vector<std::uint8_t> truncated(good.begin(), good.end() - 100);
  CHECK(kind_of(truncated) == ErrorKind::kData);
  CHECK(kind_of(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)) == ErrorKind::kData);
  CHECK(kind_of({}) == ErrorKind::kData);

  std::vector<std::uint8_t> flipped = good;
  flipped[flipped.size() / 2] ^= 0x10;
  CHECK(kind_of(flipped) == ErrorKind::kData);

  std::vector<std::uint8_t> magic = good;
  magic[0] = 'X';
  CHECK(kind_of(magic) == ErrorKind::kData);

  std::vector<std::uint8_t> version = good;
  version[4] = 2;
  CHECK(kind_of(version) == ErrorKind::kData);

  std::vector<std::uint8_t> trailing = good;
  trailing.insert(trailing.end() - 8, 0);
  CHECK(kind_of(trailing) == ErrorKind::kData);

  CHECK_THROWS_AS(load_weights("/nonexistent/photoread.weights"), Error);
}

TEST_CASE("checksum is FNV-1a") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("shipped weights load") {
  const std::filesystem::path path = std::filesystem::path(PHOTOREAD_DATA_DIR) / "pi_network.weights";
  if (!std::filesystem::exists(path)) {
    MESSAGE("no shipped weights at " << path.string());
    return;
  }
  const NetworkWeights w = load_weights(path);
  CHECK(w.arch.grid_size >= 2);
  CHECK(w.meta.epochs > 0);
}
