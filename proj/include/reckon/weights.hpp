#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "reckon/prng.hpp"

namespace reckon {

// 8-bit weight matrix, presynaptic-major storage so that one presynaptic
// event touches a contiguous column of postsynaptic accumulators.
// Raw values are kept in [-127, 127]; -128 stays unused so negation is total.
class WeightMatrix {
 public:
  static constexpr int kMaxRaw = 127;

  WeightMatrix() = default;
  WeightMatrix(int n_post, int n_pre)
      : n_post_(n_post), n_pre_(n_pre),
        w_(static_cast<size_t>(n_post) * n_pre, 0) {}

  int n_post() const { return n_post_; }
  int n_pre() const { return n_pre_; }

  int8_t get(int post, int pre) const {
    return w_[static_cast<size_t>(pre) * n_post_ + post];
  }
  void set(int post, int pre, int8_t v) {
    w_[static_cast<size_t>(pre) * n_post_ + post] = v;
  }

  const int8_t* column(int pre) const {
    return w_.data() + static_cast<size_t>(pre) * n_post_;
  }

  // w += delta (in weight LSBs), clamped to the symmetric 8-bit range.
  void add_saturating(int post, int pre, int delta) {
    int8_t& w = w_[static_cast<size_t>(pre) * n_post_ + post];
    int v = w + delta;
    if (v > kMaxRaw) v = kMaxRaw;
    if (v < -kMaxRaw) v = -kMaxRaw;
    w = static_cast<int8_t>(v);
  }

  // Seeded uniform integer init over [-max_abs, max_abs].
  void init_uniform(Xorshift32& rng, int max_abs) {
    const uint32_t span = static_cast<uint32_t>(2 * max_abs + 1);
    // Fill in (post, pre) row-major order so the draw sequence is
    // independent of the storage layout.
    for (int post = 0; post < n_post_; ++post) {
      for (int pre = 0; pre < n_pre_; ++pre) {
        set(post, pre, static_cast<int8_t>(
                           static_cast<int>(rng.next() % span) - max_abs));
      }
    }
  }

  void zero_diagonal() {
    const int n = n_post_ < n_pre_ ? n_post_ : n_pre_;
    for (int i = 0; i < n; ++i) set(i, i, 0);
  }

  std::span<const int8_t> raw() const { return w_; }
  std::span<int8_t> raw() { return w_; }

  friend bool operator==(const WeightMatrix& a, const WeightMatrix& b) {
    return a.n_post_ == b.n_post_ && a.n_pre_ == b.n_pre_ && a.w_ == b.w_;
  }

 private:
  int n_post_ = 0;
  int n_pre_ = 0;
  std::vector<int8_t> w_;
};

}  // namespace reckon
