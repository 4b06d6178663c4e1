#include "locathe/random.hpp"

#include <openssl/rand.h>

#include <stdexcept>

#include "locathe/crypto.hpp"

namespace locathe {

Bytes RandomSource::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

uint64_t RandomSource::next_u64() {
  auto b = array<8>();
  uint64_t v = 0;
  for (uint8_t x : b) v = (v << 8) | x;
  return v;
}

uint64_t RandomSource::uniform(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be nonzero");
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  for (;;) {
    uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

void SystemRandom::fill(std::span<uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) throw std::runtime_error("RAND_bytes failed");
}

DeterministicRandom::DeterministicRandom(uint64_t seed) {
  Bytes s = to_bytes("locathe-drbg");
  append_u64_be(s, seed);
  key_ = prf(PrfKey(view("locathe-seed")), s);
}

DeterministicRandom::DeterministicRandom(ByteView seed_key) { key_ = prf(PrfKey(view("locathe-seed")), seed_key); }

void DeterministicRandom::fill(std::span<uint8_t> out) {
  std::size_t written = 0;
  while (written < out.size()) {
    if (buffered_ == 0) {
      Bytes block_input = to_bytes("block");
      append_u64_be(block_input, counter_++);
      buffer_ = prf(PrfKey(key_), block_input);
      buffered_ = buffer_.size();
    }
    std::size_t take = std::min(buffered_, out.size() - written);
    std::size_t start = buffer_.size() - buffered_;
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(start), take, out.begin() + static_cast<std::ptrdiff_t>(written));
    buffered_ -= take;
    written += take;
  }
}

DeterministicRandom DeterministicRandom::fork(std::string_view label) const {
  Bytes child = to_bytes("fork:");
  append(child, label);
  return DeterministicRandom(ByteView(prf(PrfKey(key_), child)));
}

}  // namespace locathe
