#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace reckon {

// Binary per-timestep activity vector: one bit per input channel or
// recurrent neuron. Spikes are OR-ed in while the previous step's map is
// being consumed, which is what gives every spike its one-timestep delay.
class SparsityMap {
 public:
  SparsityMap() = default;
  explicit SparsityMap(int n_bits)
      : n_(n_bits), words_((n_bits + 63) / 64, 0) {}

  int size() const { return n_; }

  void clear() {
    for (auto& w : words_) w = 0;
  }

  void set(int i) { words_[i >> 6] |= uint64_t{1} << (i & 63); }

  bool test(int i) const {
    return (words_[i >> 6] >> (i & 63)) & 1;
  }

  // Buffers one event; duplicate events are idempotent.
  void buffer_event(int channel) {
    if (channel < 0 || channel >= n_) {
      throw std::out_of_range("event channel " + std::to_string(channel) +
                              " out of range [0, " + std::to_string(n_) + ")");
    }
    set(channel);
  }

  int popcount() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  bool any() const {
    for (auto w : words_) {
      if (w) return true;
    }
    return false;
  }

  template <class F>
  void for_each_set(F&& f) const {
    for (size_t k = 0; k < words_.size(); ++k) {
      uint64_t w = words_[k];
      while (w) {
        f(static_cast<int>(k * 64 + std::countr_zero(w)));
        w &= w - 1;
      }
    }
  }

  friend bool operator==(const SparsityMap& a, const SparsityMap& b) {
    return a.n_ == b.n_ && a.words_ == b.words_;
  }

 private:
  int n_ = 0;
  std::vector<uint64_t> words_;
};

inline void buffer_events(SparsityMap& map, std::span<const uint16_t> channels) {
  for (uint16_t c : channels) map.buffer_event(c);
}

}  // namespace reckon
