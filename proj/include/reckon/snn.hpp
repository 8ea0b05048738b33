#pragma once

#include <cstdint>
#include <vector>

#include "reckon/fixed_point.hpp"
#include "reckon/sparsity_map.hpp"
#include "reckon/weights.hpp"

namespace reckon {

// Hardware caps of the emulated core.
inline constexpr int kMaxInputs = 256;
inline constexpr int kMaxRecurrent = 256;
inline constexpr int kMaxOutputs = 16;

// Fixed-point network parameters, already quantized. Leakage and threshold
// are shared per pair of neurons, mirroring the two-neuron state words of
// the emulated memory layout.
struct LifParams {
  int n_in = 0;
  int n_rec = 0;
  int n_out = 0;
  std::vector<uint16_t> alpha_q15;  // per pair; 32768 encodes exactly 1.0
  std::vector<int32_t> theta_raw;   // per pair, Q16.8, > 0
  uint16_t alpha_out_q15 = 32768;
  bool hard_sigmoid = true;
  bool mask_self_recurrence = false;

  int n_pairs() const { return (n_rec + 1) / 2; }
  uint16_t alpha_of(int j) const { return alpha_q15[j >> 1]; }
  int32_t theta_of(int j) const { return theta_raw[j >> 1]; }
  void validate() const;  // throws ConfigError
};

// Multiplicative decay by a Q0.15 factor, truncating toward -inf.
inline int32_t decay_q15(int32_t v, uint16_t alpha_q15) {
  return static_cast<int32_t>((int64_t{v} * alpha_q15) >> 15);
}

// clamp(y/4 + 1/2, 0, 1) on Q16.8; knees at y = -2 and y = +2.
inline int32_t hard_sigmoid_q(int32_t y_raw) {
  const int32_t s = (y_raw >> 2) + 128;
  return s < 0 ? 0 : (s > 256 ? 256 : s);
}

// Leaky integrate-and-fire layer. One step is, in order: (1) accumulate the
// weighted input and recurrent activity flagged in the sparsity maps into
// the membrane, (2) threshold test and reset-by-subtraction, (3) membrane
// decay. The pre-reset potential of phase (2) is kept for the learning
// datapath's pseudo-derivative lookup.
class LifLayer {
 public:
  explicit LifLayer(const LifParams* p);

  void reset();

  // Consumes in_map/rec_map (previous step's activity) and fills spikes_out
  // with this step's spikes. sop_count advances by one per weight visited.
  void step(const WeightMatrix& w_in, const WeightMatrix& w_rec,
            const SparsityMap& in_map, const SparsityMap& rec_map,
            SparsityMap& spikes_out);

  const std::vector<int32_t>& v() const { return v_; }
  std::vector<int32_t>& v_mut() { return v_; }
  const std::vector<int32_t>& v_pre_reset() const { return v_pre_; }
  uint64_t sop_count() const { return sop_; }

 private:
  const LifParams* p_;
  std::vector<int32_t> v_;      // Q16.8
  std::vector<int32_t> v_pre_;  // Q16.8, post-integration / pre-reset
  uint64_t sop_ = 0;
};

// Leaky-integrator readout: processed like the LIF layer minus spike and
// reset. y <- alpha_out * (y + sum of flagged output weights).
class LiReadout {
 public:
  explicit LiReadout(const LifParams* p);

  void reset();
  void step(const WeightMatrix& w_out, const SparsityMap& rec_map);

  int32_t internal(int k) const { return y_[k]; }
  int32_t exposed(int k) const {
    return p_->hard_sigmoid ? hard_sigmoid_q(y_[k]) : y_[k];
  }
  // False when the hard sigmoid is clamped (derivative zero). Always true
  // when the hard sigmoid is disabled.
  bool gate_open(int k) const {
    return !p_->hard_sigmoid || (y_[k] > -512 && y_[k] < 512);
  }
  int n_out() const { return p_->n_out; }
  uint64_t sop_count() const { return sop_; }

 private:
  const LifParams* p_;
  std::vector<int32_t> y_;  // Q16.8
  uint64_t sop_ = 0;
};

// SRAM accounting for the emulated core.
struct MemoryWidths {
  int weight_bits = 8;
  int state_bits_per_pair = 128;  // two neuron states + shared parameters
  int et_bits = 16;
};

struct MemoryModel {
  uint64_t w_in_bytes = 0;
  uint64_t w_rec_bytes = 0;
  uint64_t w_out_bytes = 0;
  uint64_t neuron_state_bytes = 0;
  uint64_t readout_state_bytes = 0;
  uint64_t et_bytes = 0;

  uint64_t inference_bytes() const {
    return w_in_bytes + w_rec_bytes + w_out_bytes + neuron_state_bytes +
           readout_state_bytes;
  }
  uint64_t total_bytes() const { return inference_bytes() + et_bytes; }
  double et_overhead_ratio() const {
    return static_cast<double>(et_bytes) /
           static_cast<double>(inference_bytes());
  }
};

// Byte totals are pure functions of the topology and width decisions.
// Learning adds only the per-neuron eligibility-trace region.
MemoryModel memory_report(int n_in, int n_rec, int n_out,
                          const MemoryWidths& widths = {},
                          bool learning_enabled = true);

}  // namespace reckon
