#include "reckon/eprop.hpp"

#include <cmath>
#include <cstdlib>

#include "reckon/errors.hpp"

namespace reckon {

namespace {
constexpr int kEtOne = 4096;  // 1.0 in Q16.12
constexpr int32_t kEtLo = -32768, kEtHi = 32767;

int n_words16(int n) { return (n + 15) / 16; }
}  // namespace

void EligibilityTraces::update(const SparsityMap& in_map,
                               const SparsityMap& rec_map) {
  for (auto& x : et_in) x = static_cast<int16_t>(decay_q15(x, alpha_q15));
  for (auto& x : et_rec) x = static_cast<int16_t>(decay_q15(x, alpha_q15));
  in_map.for_each_set([&](int i) {
    et_in[i] = static_cast<int16_t>(
        sat_add_i32(et_in[i], kEtOne, kEtLo, kEtHi));
  });
  rec_map.for_each_set([&](int i) {
    et_rec[i] = static_cast<int16_t>(
        sat_add_i32(et_rec[i], kEtOne, kEtLo, kEtHi));
  });
}

SteLut SteLut::triangular(int32_t theta_raw) {
  const int32_t q = theta_raw >> 2;
  if (q <= 0) throw ConfigError("threshold too small for the default LUT");
  SteLut lut;
  lut.bounds = {-3 * q, -q, q, 3 * q};
  const double theta = static_cast<double>(theta_raw);
  auto tri = [theta](double x) {
    const double t = 1.0 - std::abs(x) / theta;
    return t > 0.0 ? t : 0.0;
  };
  auto quant = [&](double x) {
    const long v = std::lround(16.0 * tri(x));
    return static_cast<int8_t>(v > 15 ? 15 : v);
  };
  lut.values = {0, quant(-2.0 * q), quant(0.0), quant(2.0 * q), 0};
  return lut;
}

void SteLut::validate() const {
  for (int i = 0; i + 1 < 4; ++i) {
    if (bounds[i] >= bounds[i + 1]) {
      throw ConfigError("LUT boundaries must be strictly increasing");
    }
  }
  for (auto v : values) {
    if (v < -16 || v > 15) {
      throw ConfigError("LUT values must fit 5-bit signed [-16, 15]");
    }
  }
}

double skip_rate(const UpdateStats& s) {
  if (s.candidates == 0) {
    throw ContractViolation("skip_rate: no update candidates");
  }
  return static_cast<double>(s.skipped_et + s.skipped_ste) /
         static_cast<double>(s.candidates);
}

void compute_learning_signals(std::span<const int32_t> error_q8,
                              const WeightMatrix& feedback,
                              const EligibilityTraces& traces,
                              const LearningParams& lp,
                              std::span<int16_t> ls_out) {
  const int n_out = feedback.n_post();
  const int n_rec = feedback.n_pre();
  for (int j = 0; j < n_rec; ++j) {
    const int8_t* col = feedback.column(j);  // B[j][k] = feedback[k][j]
    int64_t acc = 0;  // Q8.7 x Q16.8 -> frac 15
    for (int k = 0; k < n_out; ++k) {
      acc += int64_t{col[k]} * error_q8[k];
    }
    int64_t ls = acc >> 3;  // frac 12
    if (lp.lambda_shift >= 0) {
      ls += (int64_t{traces.et_rec[j]} - lp.f_target_raw) >> lp.lambda_shift;
    }
    ls_out[j] = static_cast<int16_t>(clamp_to(ls, QFormat{16, 12}));
  }
}

EpropEngine::EpropEngine(const LifParams* net, const LearningParams& lp,
                         const SteLut& lut, uint32_t master_seed)
    : net_(net),
      lp_(lp),
      lut_(lut),
      master_seed_(master_seed),
      traces_(net->n_in, net->n_rec, 0),
      ls_buf_(net->n_rec, 0),
      ste_buf_(net->n_rec, 0) {
  lut_.validate();
  // The trace filter shares the membrane decay; with per-pair decays the
  // first pair's constant is the one per-neuron trace storage can honor.
  traces_.alpha_q15 = net->alpha_q15.empty() ? 32768 : net->alpha_q15[0];
  if (traces_.alpha_q15 >= 32768) traces_.alpha_q15 = 32767;
  if (lp_.feedback == FeedbackMode::kRandomFixed) {
    b_fixed_ = WeightMatrix(net->n_out, net->n_rec);
    Xorshift32 rng(derive_seed(master_seed_, 0, kDomainFeedback, 0));
    b_fixed_.init_uniform(rng, WeightMatrix::kMaxRaw);
  }
}

void EpropEngine::reset_trial() {
  traces_.reset();
  for (auto& x : ls_buf_) x = 0;
  for (auto& x : ste_buf_) x = 0;
}

// Scales the full-precision product by -eta (a pure fraction-width
// reinterpretation), stages it in the Q24.16 accumulator and narrows onto
// the 8-bit weight grid. Both narrowings round stochastically, so the
// expected applied delta equals the unquantized one exactly.
int EpropEngine::apply_update(int64_t neg_product, int frac_bits,
                              Xorshift32& rng) const {
  const int f = frac_bits + lp_.eta_shift;
  int64_t acc = f > 16 ? stochastic_round_raw(neg_product, f - 16, rng)
                       : neg_product << (16 - f);
  acc = clamp_to(acc, kUpdateFormat);
  return static_cast<int>(stochastic_round_raw(acc, 16 - 7, rng));
}

void EpropEngine::phase1(WeightMatrix& w_out,
                         std::span<const int32_t> error_q8,
                         const LifLayer& lif, const LiReadout& li) {
  const int n_rec = net_->n_rec;
  const int n_in = net_->n_in;
  const int n_out = net_->n_out;
  ++update_steps_;

  // Buffer the post-synaptic terms for phase 2.
  const WeightMatrix& fb =
      lp_.feedback == FeedbackMode::kRandomFixed ? b_fixed_ : w_out;
  compute_learning_signals(error_q8, fb, traces_, lp_, ls_buf_);
  const auto& v_pre = lif.v_pre_reset();
  for (int j = 0; j < n_rec; ++j) {
    ste_buf_[j] = lut_.eval(v_pre[j], net_->theta_of(j));
  }

  // Presynaptic columns surviving the ET threshold, shared by both phases.
  active_in_.clear();
  active_rec_.clear();
  word_active_in_.assign(n_words16(n_in), 0);
  word_active_rec_.assign(n_words16(n_rec), 0);
  for (int i = 0; i < n_in; ++i) {
    if (std::abs(int32_t{traces_.et_in[i]}) >= lp_.theta_skip_raw) {
      active_in_.push_back(i);
      word_active_in_[i >> 4] = 1;
    }
  }
  for (int j = 0; j < n_rec; ++j) {
    if (std::abs(int32_t{traces_.et_rec[j]}) >= lp_.theta_skip_raw) {
      active_rec_.push_back(j);
      word_active_rec_[j >> 4] = 1;
    }
  }
  int words_live_in = 0, words_live_rec = 0;
  for (auto b : word_active_in_) words_live_in += b;
  for (auto b : word_active_rec_) words_live_rec += b;
  words_live_in_ = words_live_in;
  words_live_rec_ = words_live_rec;

  // Output weight updates: dW[k][j] = -eta * e_k * et_rec[j].
  stats_.candidates += static_cast<uint64_t>(n_out) * n_rec;
  stats_.word_candidates += static_cast<uint64_t>(n_out) * n_words16(n_rec);
  for (int k = 0; k < n_out; ++k) {
    int32_t post = error_q8[k];
    if (lp_.gate_output_updates && !li.gate_open(k)) post = 0;
    if (post == 0) {
      stats_.skipped_ste += n_rec;
      stats_.word_skipped += n_words16(n_rec);
      continue;
    }
    Xorshift32 rng(
        derive_seed(master_seed_, update_steps_, kDomainPhase1Row, k));
    for (int j : active_rec_) {
      const int64_t p = int64_t{post} * traces_.et_rec[j];  // frac 20
      const int d = apply_update(-p, 20, rng);
      w_out.add_saturating(k, j, d);
      ++stats_.applied;
      if (observer_) {
        observer_->on_update(2, k, j,
                             std::ldexp(static_cast<double>(-p),
                                        -(20 + lp_.eta_shift)));
      }
    }
    stats_.skipped_et += n_rec - active_rec_.size();
    stats_.word_skipped += n_words16(n_rec) - words_live_rec;
  }
}

void EpropEngine::phase2(WeightMatrix& w_in, WeightMatrix& w_rec) {
  const int n_rec = net_->n_rec;
  const int n_in = net_->n_in;
  const bool mask_self = net_->mask_self_recurrence;
  const uint64_t row_candidates =
      static_cast<uint64_t>(n_in) + n_rec - (mask_self ? 1 : 0);
  const int row_words = n_words16(n_in) + n_words16(n_rec);

  for (int j = 0; j < n_rec; ++j) {
    stats_.candidates += row_candidates;
    stats_.word_candidates += row_words;
    const int8_t ste = ste_buf_[j];
    if (ste == 0) {
      stats_.skipped_ste += row_candidates;
      stats_.word_skipped += row_words;
      continue;
    }
    Xorshift32 rng(
        derive_seed(master_seed_, update_steps_, kDomainPhase2Row, j));
    const int64_t post = int64_t{ls_buf_[j]} * ste;  // frac 16
    uint64_t applied_row = 0;
    for (int i : active_in_) {
      const int64_t p = post * traces_.et_in[i];  // frac 28
      const int d = apply_update(-p, 28, rng);
      w_in.add_saturating(j, i, d);
      ++applied_row;
      if (observer_) {
        observer_->on_update(0, j, i,
                             std::ldexp(static_cast<double>(-p),
                                        -(28 + lp_.eta_shift)));
      }
    }
    for (int i : active_rec_) {
      if (mask_self && i == j) continue;
      const int64_t p = post * traces_.et_rec[i];
      const int d = apply_update(-p, 28, rng);
      w_rec.add_saturating(j, i, d);
      ++applied_row;
      if (observer_) {
        observer_->on_update(1, j, i,
                             std::ldexp(static_cast<double>(-p),
                                        -(28 + lp_.eta_shift)));
      }
    }
    stats_.applied += applied_row;
    stats_.skipped_et += row_candidates - applied_row;
    stats_.word_skipped +=
        row_words - (words_live_in_ + words_live_rec_);
  }
}

}  // namespace reckon
