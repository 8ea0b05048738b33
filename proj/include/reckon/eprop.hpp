#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "reckon/fixed_point.hpp"
#include "reckon/snn.hpp"
#include "reckon/sparsity_map.hpp"
#include "reckon/weights.hpp"

namespace reckon {

// Per-presynaptic-neuron low-pass filter of spiking activity (Q16.12).
// Learning storage scales with n_in + n_rec, never with synapse count.
struct EligibilityTraces {
  std::vector<int16_t> et_in;
  std::vector<int16_t> et_rec;
  uint16_t alpha_q15;

  EligibilityTraces(int n_in, int n_rec, uint16_t alpha)
      : et_in(n_in, 0), et_rec(n_rec, 0), alpha_q15(alpha) {}

  void reset() {
    for (auto& x : et_in) x = 0;
    for (auto& x : et_rec) x = 0;
  }

  // Each trace decays, then accumulates its neuron's binary spike.
  void update(const SparsityMap& in_map, const SparsityMap& rec_map);
};

// Programmable 5-segment pseudo-derivative of the spike nonlinearity,
// evaluated on the distance of the pre-reset membrane to the threshold.
// Outputs are 5-bit signed and interpreted as value/16; the outer segments
// are conventionally zero, which is what row skipping exploits.
struct SteLut {
  std::array<int32_t, 4> bounds{};  // Q16.8 offsets from theta, strictly increasing
  std::array<int8_t, 5> values{};   // in [-16, 15]

  // 5-step quantization of the triangle max(0, 1 - |v - theta| / theta):
  // inner boundaries at +-q and +-3q with q = theta >> 2, segment values
  // round(16 * triangle(midpoint)) clamped to 15.
  static SteLut triangular(int32_t theta_raw);

  int8_t eval(int32_t v_raw, int32_t theta_raw) const {
    const int32_t x = v_raw - theta_raw;
    if (x < bounds[0]) return values[0];
    if (x < bounds[1]) return values[1];
    if (x < bounds[2]) return values[2];
    if (x < bounds[3]) return values[3];
    return values[4];
  }

  void validate() const;  // throws ConfigError
};

enum class FeedbackMode { kSymmetric, kRandomFixed };

struct LearningParams {
  int eta_shift = 8;             // eta = 2^-eta_shift; negative disables learning
  int32_t theta_skip_raw = 64;   // ET skip threshold, Q16.12 (default 2^-6)
  int lambda_shift = -1;         // reg strength 2^-lambda_shift; negative disables
  int16_t f_target_raw = 0;      // activity target for regularization, Q16.12
  FeedbackMode feedback = FeedbackMode::kSymmetric;
  bool gate_output_updates = true;  // zero the post term when the hard sigmoid clamps

  bool enabled() const { return eta_shift >= 0; }
};

struct UpdateStats {
  uint64_t candidates = 0;
  uint64_t applied = 0;
  uint64_t skipped_et = 0;
  uint64_t skipped_ste = 0;
  uint64_t word_candidates = 0;  // 16-weight word granularity, reporting only
  uint64_t word_skipped = 0;

  UpdateStats operator-(const UpdateStats& o) const {
    return {candidates - o.candidates, applied - o.applied,
            skipped_et - o.skipped_et, skipped_ste - o.skipped_ste,
            word_candidates - o.word_candidates, word_skipped - o.word_skipped};
  }
};

// (skipped_et + skipped_ste) / candidates. Undefined without candidates.
double skip_rate(const UpdateStats& s);

// Receives every surviving update's full-precision value (the product of
// learning rate, post terms and presynaptic trace, before stochastic
// rounding). Validation hook; the engine itself stores nothing per synapse.
struct UpdateObserver {
  virtual ~UpdateObserver() = default;
  // matrix: 0 = w_in, 1 = w_rec, 2 = w_out
  virtual void on_update(int matrix, int post, int pre, double delta) = 0;
};

// LS_j = sum_k B[j][k] * e_k + lambda * (et_rec[j] - f_target), Q16.12.
// `feedback` has the output-weight shape (n_out x n_rec); B is its transpose.
void compute_learning_signals(std::span<const int32_t> error_q8,
                              const WeightMatrix& feedback,
                              const EligibilityTraces& traces,
                              const LearningParams& lp,
                              std::span<int16_t> ls_out);

// The two-phase weight-update datapath. Per supervised timestep:
//   phase 1: output weights are updated, the post-synaptic STE and LS terms
//            are buffered;
//   phase 2: input and recurrent updates are the buffered post terms times
//            the presynaptic ETs, with row skipping on zero STE and column
//            skipping on sub-threshold ETs.
// Updates are staged into a Q24.16 accumulator and applied to the 8-bit
// weights via stochastic rounding, both rescales unbiased by construction.
// Every parallelizable row draws from its own derived PRNG stream keyed by
// (master_seed, update step, row), so any schedule is bit-identical.
class EpropEngine {
 public:
  EpropEngine(const LifParams* net, const LearningParams& lp, const SteLut& lut,
              uint32_t master_seed);

  void reset_trial();

  void update_traces(const SparsityMap& in_map, const SparsityMap& rec_map) {
    traces_.update(in_map, rec_map);
  }

  void phase1(WeightMatrix& w_out, std::span<const int32_t> error_q8,
              const LifLayer& lif, const LiReadout& li);
  void phase2(WeightMatrix& w_in, WeightMatrix& w_rec);

  const EligibilityTraces& traces() const { return traces_; }
  EligibilityTraces& traces_mut() { return traces_; }
  const UpdateStats& stats() const { return stats_; }
  std::span<const int16_t> ls_buffer() const { return ls_buf_; }
  std::span<const int8_t> ste_buffer() const { return ste_buf_; }
  const LearningParams& params() const { return lp_; }
  const SteLut& lut() const { return lut_; }
  uint64_t update_steps() const { return update_steps_; }
  // Non-null only in random-fixed feedback mode.
  const WeightMatrix* fixed_feedback() const {
    return lp_.feedback == FeedbackMode::kRandomFixed ? &b_fixed_ : nullptr;
  }

  void set_observer(UpdateObserver* obs) { observer_ = obs; }

 private:
  int apply_update(int64_t neg_product, int frac_bits, Xorshift32& rng) const;

  const LifParams* net_;
  LearningParams lp_;
  SteLut lut_;
  uint32_t master_seed_;
  EligibilityTraces traces_;
  std::vector<int16_t> ls_buf_;  // Q16.12, buffered in phase 1
  std::vector<int8_t> ste_buf_;  // buffered in phase 1
  WeightMatrix b_fixed_;         // random-fixed feedback (n_out x n_rec)
  UpdateStats stats_;
  uint64_t update_steps_ = 0;
  UpdateObserver* observer_ = nullptr;

  // scratch for phase 2 column skipping
  std::vector<int32_t> active_in_, active_rec_;
  std::vector<uint8_t> word_active_in_, word_active_rec_;
  int words_live_in_ = 0, words_live_rec_ = 0;
};

}  // namespace reckon
