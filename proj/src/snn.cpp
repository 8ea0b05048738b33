#include "reckon/snn.hpp"

#include "reckon/errors.hpp"

namespace reckon {

void LifParams::validate() const {
  if (n_in < 1 || n_in > kMaxInputs) {
    throw ConfigError("n_in must be in [1, 256]");
  }
  if (n_rec < 1 || n_rec > kMaxRecurrent) {
    throw ConfigError("n_rec must be in [1, 256]");
  }
  if (n_out < 1 || n_out > kMaxOutputs) {
    throw ConfigError("n_out must be in [1, 16]");
  }
  if (static_cast<int>(alpha_q15.size()) != n_pairs() ||
      static_cast<int>(theta_raw.size()) != n_pairs()) {
    throw ConfigError("per-pair parameter arrays must have ceil(n_rec/2) entries");
  }
  for (auto a : alpha_q15) {
    if (a > 32768) throw ConfigError("membrane decay must be in (0, 1]");
  }
  for (auto t : theta_raw) {
    if (t <= 0) throw ConfigError("threshold must be positive");
  }
  if (alpha_out_q15 > 32768 || alpha_out_q15 == 0) {
    throw ConfigError("readout decay must be in (0, 1]");
  }
}

LifLayer::LifLayer(const LifParams* p)
    : p_(p), v_(p->n_rec, 0), v_pre_(p->n_rec, 0) {}

void LifLayer::reset() {
  for (auto& x : v_) x = 0;
  for (auto& x : v_pre_) x = 0;
}

void LifLayer::step(const WeightMatrix& w_in, const WeightMatrix& w_rec,
                    const SparsityMap& in_map, const SparsityMap& rec_map,
                    SparsityMap& spikes_out) {
  const int n = p_->n_rec;
  constexpr int32_t kLo = -32768, kHi = 32767;
  int32_t* v = v_.data();

  // (1) weighted accumulation; only flagged map entries are visited.
  // Weight raw (Q8.7) enters the Q16.8 membrane as 2x its raw value.
  in_map.for_each_set([&](int i) {
    const int8_t* col = w_in.column(i);
    for (int j = 0; j < n; ++j) {
      v[j] = sat_add_i32(v[j], int32_t{col[j]} << 1, kLo, kHi);
    }
  });
  rec_map.for_each_set([&](int i) {
    const int8_t* col = w_rec.column(i);
    for (int j = 0; j < n; ++j) {
      v[j] = sat_add_i32(v[j], int32_t{col[j]} << 1, kLo, kHi);
    }
  });
  sop_ += static_cast<uint64_t>(in_map.popcount() + rec_map.popcount()) * n;

  // (2) threshold / reset-by-subtraction, then (3) decay.
  spikes_out.clear();
  for (int j = 0; j < n; ++j) {
    int32_t m = v[j];
    v_pre_[j] = m;
    const int32_t theta = p_->theta_of(j);
    if (m >= theta) {
      spikes_out.set(j);
      m -= theta;
    }
    v[j] = decay_q15(m, p_->alpha_of(j));
  }
}

LiReadout::LiReadout(const LifParams* p) : p_(p), y_(p->n_out, 0) {}

void LiReadout::reset() {
  for (auto& x : y_) x = 0;
}

void LiReadout::step(const WeightMatrix& w_out, const SparsityMap& rec_map) {
  const int n = p_->n_out;
  constexpr int32_t kLo = -32768, kHi = 32767;
  rec_map.for_each_set([&](int i) {
    const int8_t* col = w_out.column(i);
    for (int k = 0; k < n; ++k) {
      y_[k] = sat_add_i32(y_[k], int32_t{col[k]} << 1, kLo, kHi);
    }
  });
  sop_ += static_cast<uint64_t>(rec_map.popcount()) * n;
  for (int k = 0; k < n; ++k) {
    y_[k] = decay_q15(y_[k], p_->alpha_out_q15);
  }
}

MemoryModel memory_report(int n_in, int n_rec, int n_out,
                          const MemoryWidths& widths, bool learning_enabled) {
  MemoryModel m;
  const uint64_t wbytes = static_cast<uint64_t>(widths.weight_bits) / 8;
  m.w_in_bytes = static_cast<uint64_t>(n_rec) * n_in * wbytes;
  m.w_rec_bytes = static_cast<uint64_t>(n_rec) * n_rec * wbytes;
  m.w_out_bytes = static_cast<uint64_t>(n_out) * n_rec * wbytes;
  const uint64_t word_bytes = static_cast<uint64_t>(widths.state_bits_per_pair) / 8;
  m.neuron_state_bytes = static_cast<uint64_t>((n_rec + 1) / 2) * word_bytes;
  m.readout_state_bytes = static_cast<uint64_t>((n_out + 1) / 2) * word_bytes;
  m.et_bytes = learning_enabled
                   ? static_cast<uint64_t>(n_in + n_rec) * widths.et_bits / 8
                   : 0;
  return m;
}

}  // namespace reckon
