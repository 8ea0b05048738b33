#include "reckon/oracle.hpp"

#include <cmath>

#include "reckon/errors.hpp"

namespace reckon {

namespace {

constexpr int kMaxOracleNeurons = 32;
constexpr int kMaxOracleSteps = 200;

double hard_sigmoid_f(double y) {
  const double s = 0.25 * y + 0.5;
  return s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
}

double triangle_psi(double a, double theta) {
  const double t = 1.0 - std::abs(a - theta) / theta;
  return t > 0.0 ? t : 0.0;
}

double lut_psi(const SteLut& lut, double a, double theta) {
  const double x = (a - theta) * 256.0;  // LUT bounds live on the Q16.8 grid
  if (x < lut.bounds[0]) return lut.values[0] / 16.0;
  if (x < lut.bounds[1]) return lut.values[1] / 16.0;
  if (x < lut.bounds[2]) return lut.values[2] / 16.0;
  if (x < lut.bounds[3]) return lut.values[3] / 16.0;
  return lut.values[4] / 16.0;
}

// Forward tape shared by both gradient routines.
struct Tape {
  std::vector<double> a;        // [t][j] pre-reset membrane
  std::vector<uint8_t> z;       // [t][j] spikes emitted at t
  std::vector<double> y;        // [t][k] readout after step t
  std::vector<double> exposed;  // [t][k]
};

void check_scale(const FloatNet& net, const FloatTrial& trial) {
  if (trial.n_steps > kMaxOracleSteps) {
    throw ContractViolation("oracle trials are capped at 200 steps");
  }
  if (trial.n_in != net.n_in || trial.n_out != net.n_out) {
    throw ContractViolation("trial does not match network shape");
  }
}

}  // namespace

FloatNet::FloatNet(int ni, int nr, int no) : n_in(ni), n_rec(nr), n_out(no) {
  if (nr < 1 || nr > kMaxOracleNeurons) {
    throw ContractViolation("oracle networks are capped at 32 neurons");
  }
  w_in.assign(static_cast<size_t>(nr) * ni, 0.0);
  w_rec.assign(static_cast<size_t>(nr) * nr, 0.0);
  w_out.assign(static_cast<size_t>(no) * nr, 0.0);
}

FloatNet FloatNet::mirror(const WeightMatrix& w_in, const WeightMatrix& w_rec,
                          const WeightMatrix& w_out, const LifParams& p) {
  FloatNet net(p.n_in, p.n_rec, p.n_out);
  net.alpha = p.alpha_q15[0] / 32768.0;
  net.alpha_out = p.alpha_out_q15 / 32768.0;
  net.theta = p.theta_raw[0] / 256.0;
  net.hard_sigmoid = p.hard_sigmoid;
  for (int j = 0; j < p.n_rec; ++j) {
    for (int i = 0; i < p.n_in; ++i) {
      net.w_in[static_cast<size_t>(j) * p.n_in + i] = w_in.get(j, i) / 128.0;
    }
    for (int i = 0; i < p.n_rec; ++i) {
      net.w_rec[static_cast<size_t>(j) * p.n_rec + i] = w_rec.get(j, i) / 128.0;
    }
  }
  for (int k = 0; k < p.n_out; ++k) {
    for (int j = 0; j < p.n_rec; ++j) {
      net.w_out[static_cast<size_t>(k) * p.n_rec + j] = w_out.get(k, j) / 128.0;
    }
  }
  return net;
}

void FloatNet::init_uniform(Xorshift32& rng, double w_max) {
  auto draw = [&rng, w_max]() {
    return (rng.next() / 4294967296.0 * 2.0 - 1.0) * w_max;
  };
  for (auto& w : w_in) w = draw();
  for (auto& w : w_rec) w = draw();
  for (auto& w : w_out) w = draw();
}

FloatTrial FloatTrial::from_trial(const SupervisedTrial& trial) {
  FloatTrial ft;
  ft.n_in = trial.stream.n_channels;
  ft.n_out = trial.stream.n_out;
  ft.n_steps = static_cast<int>(trial.stream.n_steps);
  ft.x.assign(static_cast<size_t>(ft.n_steps) * ft.n_in, 0);
  ft.mask.assign(ft.n_steps, 0);
  ft.target.assign(static_cast<size_t>(ft.n_steps) * ft.n_out, 0.0);
  // Events at t are consumed at t + 1.
  for (const Event& e : trial.stream.events) {
    if (e.timestep + 1 < static_cast<uint32_t>(ft.n_steps)) {
      ft.x[(static_cast<size_t>(e.timestep) + 1) * ft.n_in + e.channel] = 1;
    }
  }
  // Targets on the engine's Q16.8 grid so mirrored runs share the loss.
  for (const TargetPoint& tp : trial.targets) {
    ft.mask[tp.step] = 1;
    ft.target[static_cast<size_t>(tp.step) * ft.n_out + tp.k] =
        (int32_t{tp.value_q14} >> 6) / 256.0;
  }
  return ft;
}

namespace {

// One forward step; returns this step's recurrent map input (z delayed).
void forward_step(const FloatNet& net, const FloatTrial& trial, int t,
                  std::vector<double>& v, std::vector<double>& y,
                  const std::vector<uint8_t>& zrec, Tape* tape) {
  const int n = net.n_rec;
  const uint8_t* xt = &trial.x[static_cast<size_t>(t) * trial.n_in];
  for (int j = 0; j < n; ++j) {
    double acc = v[j];
    const double* wi = &net.w_in[static_cast<size_t>(j) * net.n_in];
    for (int i = 0; i < net.n_in; ++i) {
      if (xt[i]) acc += wi[i];
    }
    const double* wr = &net.w_rec[static_cast<size_t>(j) * n];
    for (int i = 0; i < n; ++i) {
      if (zrec[i]) acc += wr[i];
    }
    const bool spike = acc >= net.theta;
    if (tape) {
      tape->a[static_cast<size_t>(t) * n + j] = acc;
      tape->z[static_cast<size_t>(t) * n + j] = spike;
    }
    v[j] = net.alpha * (acc - (spike ? net.theta : 0.0));
  }
  for (int k = 0; k < net.n_out; ++k) {
    double acc = y[k];
    for (int i = 0; i < n; ++i) {
      if (zrec[i]) acc += net.w_out[static_cast<size_t>(k) * n + i];
    }
    y[k] = net.alpha_out * acc;
    if (tape) {
      tape->y[static_cast<size_t>(t) * net.n_out + k] = y[k];
      tape->exposed[static_cast<size_t>(t) * net.n_out + k] =
          net.hard_sigmoid ? hard_sigmoid_f(y[k]) : y[k];
    }
  }
}

}  // namespace

Grads float_eprop_grads(FloatNet net, const FloatTrial& trial,
                        const FloatEpropOptions& opts) {
  check_scale(net, trial);
  if (opts.exact &&
      (opts.chip_gate || opts.lut || opts.lambda != 0.0 || opts.eta > 0.0)) {
    throw ContractViolation(
        "exact mode defines neither the chip gate, the LUT, regularization, "
        "nor online application");
  }
  const int n = net.n_rec, ni = net.n_in, no = net.n_out;
  Grads g{std::vector<double>(net.w_in.size(), 0.0),
          std::vector<double>(net.w_rec.size(), 0.0),
          std::vector<double>(net.w_out.size(), 0.0)};

  std::vector<double> v(n, 0.0), y(no, 0.0);
  std::vector<uint8_t> zrec(n, 0), z(n, 0);
  std::vector<double> trace_in(ni, 0.0), trace_rec(n, 0.0);
  std::vector<double> a(n, 0.0), psi(n, 0.0), ls(n, 0.0), mu(no, 0.0);

  // Exact mode state: per-synapse readout-filtered eligibilities.
  std::vector<double> c_in, c_rec, cprev_in, cprev_rec, zbar;
  if (opts.exact) {
    c_in.assign(g.w_in.size(), 0.0);
    c_rec.assign(g.w_rec.size(), 0.0);
    cprev_in.assign(g.w_in.size(), 0.0);
    cprev_rec.assign(g.w_rec.size(), 0.0);
    zbar.assign(n, 0.0);
  }

  for (int t = 0; t < trial.n_steps; ++t) {
    const uint8_t* xt = &trial.x[static_cast<size_t>(t) * ni];

    // Forward, keeping the pre-reset membrane for the pseudo-derivative.
    for (int j = 0; j < n; ++j) {
      double acc = v[j];
      const double* wi = &net.w_in[static_cast<size_t>(j) * ni];
      for (int i = 0; i < ni; ++i) {
        if (xt[i]) acc += wi[i];
      }
      const double* wr = &net.w_rec[static_cast<size_t>(j) * n];
      for (int i = 0; i < n; ++i) {
        if (zrec[i]) acc += wr[i];
      }
      a[j] = acc;
      z[j] = acc >= net.theta;
      v[j] = net.alpha * (acc - (z[j] ? net.theta : 0.0));
      psi[j] = opts.lut ? lut_psi(*opts.lut, acc, net.theta)
                        : triangle_psi(acc, net.theta);
    }
    for (int k = 0; k < no; ++k) {
      double acc = y[k];
      for (int i = 0; i < n; ++i) {
        if (zrec[i]) acc += net.w_out[static_cast<size_t>(k) * n + i];
      }
      y[k] = net.alpha_out * acc;
    }

    // Traces decay, then accumulate the maps consumed this step.
    for (int i = 0; i < ni; ++i) trace_in[i] = net.alpha * trace_in[i] + xt[i];
    for (int j = 0; j < n; ++j) trace_rec[j] = net.alpha * trace_rec[j] + zrec[j];

    if (opts.exact) {
      // Filtered eligibilities lag the raw product by one step.
      for (size_t s = 0; s < c_in.size(); ++s) {
        c_in[s] = net.alpha_out * (c_in[s] + cprev_in[s]);
      }
      for (size_t s = 0; s < c_rec.size(); ++s) {
        c_rec[s] = net.alpha_out * (c_rec[s] + cprev_rec[s]);
      }
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < ni; ++i) {
          cprev_in[static_cast<size_t>(j) * ni + i] = psi[j] * trace_in[i];
        }
        for (int i = 0; i < n; ++i) {
          cprev_rec[static_cast<size_t>(j) * n + i] = psi[j] * trace_rec[i];
        }
      }
      for (int j = 0; j < n; ++j) zbar[j] = net.alpha_out * (zbar[j] + zrec[j]);
    }

    // Error terms.
    for (int k = 0; k < no; ++k) {
      if (!trial.mask[t]) {
        mu[k] = 0.0;
        continue;
      }
      const double exposed = net.hard_sigmoid ? hard_sigmoid_f(y[k]) : y[k];
      const double e = exposed - trial.target[static_cast<size_t>(t) * no + k];
      double gate = 1.0;
      if (net.hard_sigmoid) {
        const bool open = y[k] > -2.0 && y[k] < 2.0;
        gate = opts.chip_gate ? (open ? 1.0 : 0.0) : (open ? 0.25 : 0.0);
      }
      mu[k] = e * gate;
    }

    const std::vector<double>& fb = opts.feedback ? *opts.feedback : net.w_out;
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < no; ++k) {
        acc += fb[static_cast<size_t>(k) * n + j] * mu[k];
      }
      if (!opts.exact && opts.lambda != 0.0 && trial.mask[t]) {
        acc += opts.lambda * (trace_rec[j] - opts.f_target);
      }
      ls[j] = acc;
    }

    // Gradient accumulation (and optional online application).
    const bool supervised = trial.mask[t] != 0;
    if (supervised) {
      for (int k = 0; k < no; ++k) {
        if (mu[k] == 0.0 && opts.exact) continue;
        for (int j = 0; j < n; ++j) {
          const size_t s = static_cast<size_t>(k) * n + j;
          const double d = mu[k] * (opts.exact ? zbar[j] : trace_rec[j]);
          g.w_out[s] += d;
          if (opts.eta > 0.0) net.w_out[s] -= opts.eta * d;
        }
      }
      for (int j = 0; j < n; ++j) {
        if (opts.exact) {
          if (ls[j] == 0.0) continue;
          for (int i = 0; i < ni; ++i) {
            const size_t s = static_cast<size_t>(j) * ni + i;
            g.w_in[s] += ls[j] * c_in[s];
          }
          for (int i = 0; i < n; ++i) {
            const size_t s = static_cast<size_t>(j) * n + i;
            g.w_rec[s] += ls[j] * c_rec[s];
          }
        } else {
          const double post = ls[j] * psi[j];
          if (post == 0.0) continue;
          for (int i = 0; i < ni; ++i) {
            const size_t s = static_cast<size_t>(j) * ni + i;
            const double d = post * trace_in[i];
            g.w_in[s] += d;
            if (opts.eta > 0.0) net.w_in[s] -= opts.eta * d;
          }
          for (int i = 0; i < n; ++i) {
            const size_t s = static_cast<size_t>(j) * n + i;
            const double d = post * trace_rec[i];
            g.w_rec[s] += d;
            if (opts.eta > 0.0) net.w_rec[s] -= opts.eta * d;
          }
        }
      }
    }

    zrec = z;
  }
  return g;
}

Grads bptt_grads(const FloatNet& net, const FloatTrial& trial) {
  check_scale(net, trial);
  const int n = net.n_rec, ni = net.n_in, no = net.n_out;
  const int T = trial.n_steps;

  Tape tape;
  tape.a.assign(static_cast<size_t>(T) * n, 0.0);
  tape.z.assign(static_cast<size_t>(T) * n, 0);
  tape.y.assign(static_cast<size_t>(T) * no, 0.0);
  tape.exposed.assign(static_cast<size_t>(T) * no, 0.0);

  std::vector<double> v(n, 0.0), y(no, 0.0);
  std::vector<uint8_t> zrec(n, 0);
  for (int t = 0; t < T; ++t) {
    forward_step(net, trial, t, v, y, zrec, &tape);
    for (int j = 0; j < n; ++j) zrec[j] = tape.z[static_cast<size_t>(t) * n + j];
  }

  Grads g{std::vector<double>(net.w_in.size(), 0.0),
          std::vector<double>(net.w_rec.size(), 0.0),
          std::vector<double>(net.w_out.size(), 0.0)};

  std::vector<double> dv_next(n, 0.0), dy_next(no, 0.0);
  std::vector<double> dz_cur(n, 0.0), dz_prev(n, 0.0);
  std::vector<double> da(n, 0.0), dy(no, 0.0);

  for (int t = T - 1; t >= 0; --t) {
    const uint8_t* xt = &trial.x[static_cast<size_t>(t) * ni];
    const uint8_t* zr =
        t > 0 ? &tape.z[static_cast<size_t>(t - 1) * n] : nullptr;

    // Loss at t, through the exposed readout.
    for (int k = 0; k < no; ++k) {
      double d = dy_next[k];
      if (trial.mask[t]) {
        const size_t s = static_cast<size_t>(t) * no + k;
        const double e = tape.exposed[s] - trial.target[s];
        double gate = 1.0;
        if (net.hard_sigmoid) {
          gate = (tape.y[s] > -2.0 && tape.y[s] < 2.0) ? 0.25 : 0.0;
        }
        d += e * gate;
      }
      dy[k] = d;
    }

    // y(t) = alpha_out * (y(t-1) + W_out zrec(t)); zrec(t) = z(t-1).
    for (int k = 0; k < no; ++k) {
      dy_next[k] = net.alpha_out * dy[k];
      if (zr) {
        const double w = net.alpha_out * dy[k];
        for (int j = 0; j < n; ++j) {
          if (zr[j]) g.w_out[static_cast<size_t>(k) * n + j] += w;
        }
        for (int j = 0; j < n; ++j) {
          dz_prev[j] += net.alpha_out * net.w_out[static_cast<size_t>(k) * n + j] * dy[k];
        }
      }
    }

    // v(t) = alpha * (a(t) - theta z(t)) with the reset path detached;
    // z(t) = H(a(t) - theta) via the triangular surrogate.
    for (int j = 0; j < n; ++j) {
      const double aj = tape.a[static_cast<size_t>(t) * n + j];
      da[j] = dz_cur[j] * triangle_psi(aj, net.theta) + net.alpha * dv_next[j];
    }

    // a(t) = v(t-1) + W_in x(t) + W_rec zrec(t).
    for (int j = 0; j < n; ++j) {
      dv_next[j] = da[j];
      if (da[j] == 0.0) continue;
      for (int i = 0; i < ni; ++i) {
        if (xt[i]) g.w_in[static_cast<size_t>(j) * ni + i] += da[j];
      }
      if (zr) {
        for (int i = 0; i < n; ++i) {
          if (zr[i]) g.w_rec[static_cast<size_t>(j) * n + i] += da[j];
        }
      }
    }
    if (zr) {
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
          acc += net.w_rec[static_cast<size_t>(j) * n + i] * da[j];
        }
        dz_prev[i] += acc;
      }
    }

    dz_cur.swap(dz_prev);
    for (auto& d : dz_prev) d = 0.0;
  }
  return g;
}

GradCompare compare(const Grads& a, const Grads& b) {
  if (a.w_in.size() != b.w_in.size() || a.w_rec.size() != b.w_rec.size() ||
      a.w_out.size() != b.w_out.size()) {
    throw ContractViolation("compare: gradient shapes differ");
  }
  GradCompare r;
  double dot = 0.0, na = 0.0, nb = 0.0, max_a = 0.0, max_b = 0.0, max_d = 0.0;
  uint64_t sign_total = 0, sign_match = 0;
  auto scan = [&](const std::vector<double>& va, const std::vector<double>& vb) {
    for (size_t i = 0; i < va.size(); ++i) {
      const double x = va[i], y = vb[i];
      dot += x * y;
      na += x * x;
      nb += y * y;
      max_a = std::max(max_a, std::abs(x));
      max_b = std::max(max_b, std::abs(y));
      max_d = std::max(max_d, std::abs(x - y));
      if (std::abs(x) > 1e-12 && std::abs(y) > 1e-12) {
        ++sign_total;
        if ((x > 0) == (y > 0)) ++sign_match;
      }
    }
  };
  scan(a.w_in, b.w_in);
  scan(a.w_rec, b.w_rec);
  scan(a.w_out, b.w_out);

  if (na == 0.0 || nb == 0.0) {
    r.undefined = true;
  } else {
    r.cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  }
  r.sign_agreement =
      sign_total ? static_cast<double>(sign_match) / sign_total : 1.0;
  const double norm = std::max(max_a, max_b);
  r.max_rel_err = norm > 0.0 ? max_d / norm : 0.0;
  return r;
}

}  // namespace reckon
