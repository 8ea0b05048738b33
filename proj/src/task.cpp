#include "reckon/task.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "reckon/errors.hpp"
#include "reckon/prng.hpp"

namespace reckon {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'V', '1'};
constexpr char kTargetMagic[4] = {'T', 'G', 'T', '1'};

template <class T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
}

template <class T>
T get_le(const uint8_t* p) {
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<U>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void EventStream::validate() const {
  uint32_t prev = 0;
  for (size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.timestep >= n_steps) {
      throw IoError("event timestep out of range");
    }
    if (e.channel >= n_channels) {
      throw IoError("event channel out of range");
    }
    if (e.timestep < prev) {
      throw IoError("events not sorted by timestep");
    }
    prev = e.timestep;
  }
}

void NavTrialParams::validate() const {
  if (n_cues < 1 || n_cues % 2 == 0) {
    throw ConfigError("n_cues must be odd and positive (majority label)");
  }
  if (cue_steps < 1 || gap_steps < 0 || delay_steps < 0 || recall_steps < 1) {
    throw ConfigError("invalid navigation phase layout");
  }
  if (channels_per_group < 1 || n_channels() > 256) {
    throw ConfigError("channel groups must fit the 8-bit address space");
  }
  if (cue_rate < 0 || cue_rate > 1 || noise_rate < 0 || noise_rate > 1) {
    throw ConfigError("spike rates must be probabilities");
  }
  if (n_out < 2 || n_out > 16) {
    throw ConfigError("navigation needs at least two outputs");
  }
}

SupervisedTrial gen_navigation_trial(const NavTrialParams& p, uint32_t seed) {
  p.validate();
  Xorshift32 rng(seed);

  // Cue sides first: 0 = left, 1 = right. Majority is the label.
  std::vector<int> sides(p.n_cues);
  int left = 0;
  for (auto& s : sides) {
    s = static_cast<int>(rng.next() & 1u);
    left += (s == 0);
  }
  const int label = left > p.n_cues / 2 ? 0 : 1;

  const uint64_t cue_thr = bernoulli_threshold(p.cue_rate);
  const uint64_t noise_thr = bernoulli_threshold(p.noise_rate);
  const int cpg = p.channels_per_group;
  const int cue_period = p.cue_steps + p.gap_steps;
  const int cues_end = p.n_cues * cue_period;
  const int recall_start = p.recall_start();
  const int n_steps = p.n_steps();

  SupervisedTrial trial;
  trial.label = label;
  trial.stream.n_channels = static_cast<uint16_t>(p.n_channels());
  trial.stream.n_out = static_cast<uint16_t>(p.n_out);
  trial.stream.n_steps = static_cast<uint32_t>(n_steps);
  trial.stream.dt_us = p.dt_us;

  for (int t = 0; t < n_steps; ++t) {
    // Active cue group at t, if any.
    int cue_group = -1;
    if (t < cues_end && (t % cue_period) < p.cue_steps) {
      cue_group = sides[t / cue_period];  // 0 -> left group, 1 -> right group
    }
    const bool in_recall = t >= recall_start;
    // Channels are visited in ascending order; silent groups draw nothing,
    // so the stream stays a pure function of (params, seed).
    for (int c = 0; c < 4 * cpg; ++c) {
      const int group = c / cpg;
      uint64_t thr = 0;
      if (group == cue_group) {
        thr = cue_thr;
      } else if (group == 2 && in_recall) {
        thr = cue_thr;
      } else if (group == 3) {
        thr = noise_thr;
      }
      if (thr && rng.bernoulli(thr)) {
        trial.stream.events.push_back(
            {static_cast<uint32_t>(t), static_cast<uint16_t>(c)});
      }
    }
  }

  // One-hot targets over the recall window, Q1.14.
  for (int t = recall_start; t < n_steps; ++t) {
    for (int k = 0; k < p.n_out; ++k) {
      trial.targets.push_back({static_cast<uint32_t>(t),
                               static_cast<uint8_t>(k),
                               static_cast<int16_t>(k == label ? 16384 : 0)});
    }
  }
  return trial;
}

SparsityMap bin_events(const EventStream& stream, uint32_t t) {
  SparsityMap map(stream.n_channels);
  auto lo = std::lower_bound(
      stream.events.begin(), stream.events.end(), t,
      [](const Event& e, uint32_t v) { return e.timestep < v; });
  for (; lo != stream.events.end() && lo->timestep == t; ++lo) {
    map.set(lo->channel);
  }
  return map;
}

void EventCursor::advance_into(uint32_t t, SparsityMap& map) {
  const auto& ev = s_->events;
  while (pos_ < ev.size() && ev[pos_].timestep < t) ++pos_;
  while (pos_ < ev.size() && ev[pos_].timestep == t) {
    map.set(ev[pos_].channel);
    ++pos_;
  }
}

void store_trial(const SupervisedTrial& trial, const std::string& path) {
  std::vector<uint8_t> out;
  out.reserve(16 + trial.stream.events.size() * 6 + 4 + trial.targets.size() * 7);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_le<uint16_t>(out, trial.stream.n_channels);
  put_le<uint16_t>(out, trial.stream.n_out);
  put_le<uint32_t>(out, trial.stream.n_steps);
  put_le<uint32_t>(out, trial.stream.dt_us);
  for (const Event& e : trial.stream.events) {
    put_le<uint32_t>(out, e.timestep);
    put_le<uint16_t>(out, e.channel);
  }
  if (!trial.targets.empty()) {
    out.insert(out.end(), kTargetMagic, kTargetMagic + 4);
    for (const TargetPoint& tp : trial.targets) {
      put_le<uint32_t>(out, tp.step);
      out.push_back(tp.k);
      put_le<int16_t>(out, tp.value_q14);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write: " + path);
}

void store_events(const EventStream& stream, const std::string& path) {
  store_trial(SupervisedTrial{stream, {}, -1}, path);
}

SupervisedTrial load_trial(const std::string& path, uint32_t rebin_dt_us) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());

  if (buf.size() < 16) throw ParseError(0, "truncated header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw ParseError(0, "bad magic, expected AEV1");
  }
  SupervisedTrial trial;
  EventStream& s = trial.stream;
  s.n_channels = get_le<uint16_t>(&buf[4]);
  s.n_out = get_le<uint16_t>(&buf[6]);
  s.n_steps = get_le<uint32_t>(&buf[8]);
  s.dt_us = get_le<uint32_t>(&buf[12]);

  size_t pos = 16;
  uint32_t prev = 0;
  bool have_targets = false;
  while (pos < buf.size()) {
    if (buf.size() - pos >= 4 && std::memcmp(&buf[pos], kTargetMagic, 4) == 0) {
      have_targets = true;
      pos += 4;
      break;
    }
    if (buf.size() - pos < 6) {
      throw ParseError(pos, "truncated event record");
    }
    Event e{get_le<uint32_t>(&buf[pos]), get_le<uint16_t>(&buf[pos + 4])};
    if (e.timestep >= s.n_steps) {
      throw ParseError(pos, "event timestep >= n_steps");
    }
    if (e.channel >= s.n_channels) {
      throw ParseError(pos + 4, "event channel >= n_channels");
    }
    if (e.timestep < prev) {
      throw ParseError(pos, "events not sorted by timestep");
    }
    prev = e.timestep;
    s.events.push_back(e);
    pos += 6;
  }
  if (have_targets) {
    uint32_t prev_t = 0;
    while (pos < buf.size()) {
      if (buf.size() - pos < 7) {
        throw ParseError(pos, "truncated target record");
      }
      TargetPoint tp{get_le<uint32_t>(&buf[pos]), buf[pos + 4],
                     get_le<int16_t>(&buf[pos + 5])};
      if (tp.step >= s.n_steps) throw ParseError(pos, "target step >= n_steps");
      if (tp.k >= s.n_out) throw ParseError(pos + 4, "target index >= n_out");
      if (tp.step < prev_t) throw ParseError(pos, "targets not sorted by step");
      prev_t = tp.step;
      trial.targets.push_back(tp);
      pos += 7;
    }
  }

  if (rebin_dt_us > 0 && rebin_dt_us != s.dt_us) {
    // Import-time rebinning: interpret stored steps at the file's dt and
    // bin onto the requested grid.
    const uint64_t src = s.dt_us, dst = rebin_dt_us;
    for (Event& e : s.events) {
      e.timestep = static_cast<uint32_t>(uint64_t{e.timestep} * src / dst);
    }
    for (TargetPoint& tp : trial.targets) {
      tp.step = static_cast<uint32_t>(uint64_t{tp.step} * src / dst);
    }
    s.n_steps = static_cast<uint32_t>((uint64_t{s.n_steps} * src + dst - 1) / dst);
    s.dt_us = rebin_dt_us;
  }
  trial.label = label_from_targets(trial);
  return trial;
}

EventStream load_events(const std::string& path, uint32_t rebin_dt_us) {
  return load_trial(path, rebin_dt_us).stream;
}

DenseTargets DenseTargets::build(const SupervisedTrial& trial) {
  DenseTargets d;
  d.n_out = trial.stream.n_out;
  d.mask.assign(trial.stream.n_steps, 0);
  d.target_q8.assign(static_cast<size_t>(trial.stream.n_steps) * d.n_out, 0);
  for (const TargetPoint& tp : trial.targets) {
    d.mask[tp.step] = 1;
    // Q1.14 -> Q16.8, truncating toward -inf.
    d.target_q8[static_cast<size_t>(tp.step) * d.n_out + tp.k] =
        int32_t{tp.value_q14} >> 6;
  }
  return d;
}

bool error_at_step(std::span<const int32_t> exposed_q8,
                   const DenseTargets& targets, uint32_t t,
                   std::span<int32_t> e_out) {
  if (!targets.supervised(t)) {
    for (auto& e : e_out) e = 0;
    return false;
  }
  const int32_t* y_star = &targets.target_q8[static_cast<size_t>(t) * targets.n_out];
  for (int k = 0; k < targets.n_out; ++k) {
    e_out[k] = exposed_q8[k] - y_star[k];
  }
  return true;
}

int decide(std::span<const int64_t> sums) {
  if (sums.empty()) throw ContractViolation("decide: empty readout window");
  int best = 0;
  for (int k = 1; k < static_cast<int>(sums.size()); ++k) {
    if (sums[k] > sums[best]) best = k;  // ties keep the lowest index
  }
  return best;
}

DecisionAccumulator::DecisionAccumulator(int n_out, int window_steps,
                                         double window_fraction)
    : sums_(n_out, 0) {
  if (window_fraction <= 0.0 || window_fraction > 1.0) {
    throw ConfigError("decision window fraction must be in (0, 1]");
  }
  cut_ = static_cast<int>(window_steps * window_fraction + 0.5);
  if (cut_ < 1) cut_ = 1;
}

void DecisionAccumulator::add(std::span<const int32_t> exposed_q8) {
  if (steps_seen_ >= cut_) {
    ++steps_seen_;
    return;
  }
  for (size_t k = 0; k < sums_.size(); ++k) sums_[k] += exposed_q8[k];
  ++steps_seen_;
}

int DecisionAccumulator::decision() const {
  if (steps_seen_ == 0) throw ContractViolation("decide: empty readout window");
  return decide(sums_);
}

int label_from_targets(const SupervisedTrial& trial) {
  if (trial.targets.empty()) return -1;
  std::vector<int64_t> sums(trial.stream.n_out, 0);
  for (const TargetPoint& tp : trial.targets) {
    sums[tp.k] += tp.value_q14;
  }
  return decide(sums);
}

}  // namespace reckon
