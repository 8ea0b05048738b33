#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reckon/sparsity_map.hpp"

namespace reckon {

struct Event {
  uint32_t timestep;
  uint16_t channel;
  friend bool operator==(const Event&, const Event&) = default;
};

// Timestamped address events plus stream geometry; the task-agnostic input
// representation. Events are sorted by timestep (stable).
struct EventStream {
  uint16_t n_channels = 0;
  uint16_t n_out = 0;
  uint32_t n_steps = 0;
  uint32_t dt_us = 1000;
  std::vector<Event> events;

  void validate() const;  // throws ParseError-style invariants as IoError
  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// Masked per-step target sample: y*[k] = value at `step`. Values are Q1.14
// on disk and in this struct.
struct TargetPoint {
  uint32_t step;
  uint8_t k;
  int16_t value_q14;
  friend bool operator==(const TargetPoint&, const TargetPoint&) = default;
};

struct SupervisedTrial {
  EventStream stream;
  std::vector<TargetPoint> targets;  // sorted by step; defines the mask
  int label = -1;                    // decision class, -1 when untargeted

  friend bool operator==(const SupervisedTrial&, const SupervisedTrial&) = default;
};

// Delayed-cue navigation benchmark: n_cues cues are presented left or right,
// the majority side is the label, and after a long delay the recall channels
// fire while the targets are defined. Four channel groups of
// `channels_per_group` each: left, right, recall, noise.
struct NavTrialParams {
  int n_cues = 7;
  int cue_steps = 100;
  int gap_steps = 50;
  int delay_steps = 1050;
  int recall_steps = 150;
  int channels_per_group = 10;
  double cue_rate = 0.04;    // spike probability per active channel per step
  double noise_rate = 0.01;  // noise-group probability, whole trial
  uint32_t dt_us = 1000;
  int n_out = 2;

  int n_channels() const { return 4 * channels_per_group; }
  int n_steps() const {
    return n_cues * (cue_steps + gap_steps) + delay_steps + recall_steps;
  }
  int recall_start() const { return n_steps() - recall_steps; }
  void validate() const;  // throws ConfigError
};

// Deterministic in (params, seed). Draw order: cue sides first, then one
// Bernoulli per (step, channel) over channels active at that step.
SupervisedTrial gen_navigation_trial(const NavTrialParams& params, uint32_t seed);

// Map bit i is set iff >= 1 event fired on channel i at step t.
SparsityMap bin_events(const EventStream& stream, uint32_t t);

// Incremental binning for a forward pass; assumes ascending t calls.
class EventCursor {
 public:
  explicit EventCursor(const EventStream& s) : s_(&s) {}
  // OR all events with timestep == t into map.
  void advance_into(uint32_t t, SparsityMap& map);

 private:
  const EventStream* s_;
  size_t pos_ = 0;
};

// AEV container. Little-endian; 16-byte header
//   "AEV1" | n_channels u16 | n_out u16 | n_steps u32 | dt_us u32
// followed by {timestep u32, channel u16} event records sorted by timestep,
// then an optional target section: "TGT1" followed by
// {step u32, k u8, value i16 (Q1.14)} records.
EventStream load_events(const std::string& path, uint32_t rebin_dt_us = 0);
SupervisedTrial load_trial(const std::string& path, uint32_t rebin_dt_us = 0);
void store_events(const EventStream& stream, const std::string& path);
void store_trial(const SupervisedTrial& trial, const std::string& path);

// Dense per-step view of the sparse target list.
struct DenseTargets {
  int n_out = 0;
  std::vector<uint8_t> mask;       // [t]
  std::vector<int32_t> target_q8;  // [t * n_out + k], Q16.8

  static DenseTargets build(const SupervisedTrial& trial);
  bool supervised(uint32_t t) const { return mask[t] != 0; }
};

// e_k = y_k - y*_k on supervised steps; zeros (and `false`) elsewhere.
bool error_at_step(std::span<const int32_t> exposed_q8,
                   const DenseTargets& targets, uint32_t t,
                   std::span<int32_t> e_out);

// argmax over per-output means of the readout across the first
// `window_fraction` of the recall window; ties resolve to the lowest index.
// `sums` are per-output running sums over the truncated window.
int decide(std::span<const int64_t> sums);

// Streaming decision helper: feed exposed readouts for each supervised step,
// query the decision at any window truncation.
class DecisionAccumulator {
 public:
  DecisionAccumulator(int n_out, int window_steps, double window_fraction);
  void add(std::span<const int32_t> exposed_q8);
  int decision() const;          // at the configured truncation
  int steps_seen() const { return steps_seen_; }
  int cut_steps() const { return cut_; }

 private:
  std::vector<int64_t> sums_;
  int cut_;
  int steps_seen_ = 0;
};

// Derives the decision label encoded in the target section (argmax of
// per-output mean target over masked steps); -1 when no targets.
int label_from_targets(const SupervisedTrial& trial);

}  // namespace reckon
