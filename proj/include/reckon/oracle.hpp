#pragma once

#include <cstdint>
#include <vector>

#include "reckon/eprop.hpp"
#include "reckon/snn.hpp"
#include "reckon/task.hpp"
#include "reckon/weights.hpp"

namespace reckon {

// Small-scale double-precision reference network. Same topology and step
// ordering semantics as the quantized engine, scalar shared parameters.
struct FloatNet {
  int n_in = 0, n_rec = 0, n_out = 0;
  double alpha = 1.0;      // membrane and trace decay
  double alpha_out = 1.0;  // readout decay
  double theta = 0.5;
  bool hard_sigmoid = true;
  std::vector<double> w_in;   // [post * n_in + pre]
  std::vector<double> w_rec;  // [post * n_rec + pre]
  std::vector<double> w_out;  // [k * n_rec + j]

  FloatNet(int n_in, int n_rec, int n_out);

  // Mirrors quantized weights and constants exactly (raw / scale), taking
  // the shared parameters from the first neuron pair.
  static FloatNet mirror(const WeightMatrix& w_in, const WeightMatrix& w_rec,
                         const WeightMatrix& w_out, const LifParams& p);

  void init_uniform(Xorshift32& rng, double w_max);
};

// Dense trial view with the one-step input delay already applied:
// x[t] is the input map consumed at step t.
struct FloatTrial {
  int n_in = 0, n_out = 0, n_steps = 0;
  std::vector<uint8_t> x;       // [t * n_in + i]
  std::vector<uint8_t> mask;    // [t]
  std::vector<double> target;   // [t * n_out + k]

  static FloatTrial from_trial(const SupervisedTrial& trial);
};

struct Grads {
  std::vector<double> w_in, w_rec, w_out;
};

struct FloatEpropOptions {
  // Exact formulation: per-synapse readout-filtered eligibility, which makes
  // the gradients identical to unrolled BPTT whenever W_rec == 0 and the
  // feedback is symmetric. When false, accumulates the per-timestep
  // LS * psi * trace products exactly the way the quantized engine does.
  bool exact = true;
  // Binary hard-sigmoid gate on the error (the engine's convention) instead
  // of the exact activation derivative. Only meaningful with exact == false.
  bool chip_gate = false;
  // Evaluate the quantized 5-segment pseudo-derivative instead of the
  // continuous triangle (engine-mirror runs). Only with exact == false.
  const SteLut* lut = nullptr;
  double lambda = 0.0;     // trace regularization, per-step mode only
  double f_target = 0.0;
  const std::vector<double>* feedback = nullptr;  // [k * n_rec + j]; default w_out
  // When > 0, weight updates w -= eta * d are applied after every supervised
  // step, mirroring the engine's online control flow; gradients accumulate
  // regardless.
  double eta = 0.0;
};

// Per-step e-prop gradient accumulation in double precision; no
// quantization, no skipping, no stochastic rounding.
Grads float_eprop_grads(FloatNet net, const FloatTrial& trial,
                        const FloatEpropOptions& opts = {});

// Fully unrolled reverse-mode gradient with the continuous triangular
// pseudo-derivative in place of the spike nondifferentiability. The reset
// path is treated as constant in the backward pass.
Grads bptt_grads(const FloatNet& net, const FloatTrial& trial);

struct GradCompare {
  double cosine = 0.0;
  double sign_agreement = 0.0;
  double max_rel_err = 0.0;  // max |a-b| over the larger infinity norm
  bool undefined = false;    // a zero tensor makes the cosine undefined
};

GradCompare compare(const Grads& a, const Grads& b);

}  // namespace reckon
