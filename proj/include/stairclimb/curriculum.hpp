#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace stairclimb {

enum class StepEvent { Running, GoalReached, Fell, OutOfBounds, Timeout };

inline const char* to_string(StepEvent e) {
  switch (e) {
    case StepEvent::Running: return "running";
    case StepEvent::GoalReached: return "goal_reached";
    case StepEvent::Fell: return "fell";
    case StepEvent::OutOfBounds: return "out_of_bounds";
    case StepEvent::Timeout: return "timeout";
  }
  return "unknown";
}

inline bool is_terminal(StepEvent e) { return e != StepEvent::Running; }

inline constexpr int kCurriculumLevels = 10;

/// Promote on success, demote (clamped at 1) on any failure, and send an
/// agent that clears the top level to a uniformly random level.
inline int curriculum_update(int level, StepEvent outcome, Rng& rng) {
  if (level < 1 || level > kCurriculumLevels) throw std::out_of_range("curriculum level out of range");
  switch (outcome) {
    case StepEvent::Running:
      throw std::invalid_argument("curriculum update needs a terminal outcome");
    case StepEvent::GoalReached:
      if (level < kCurriculumLevels) return level + 1;
      return std::uniform_int_distribution<int>(1, kCurriculumLevels)(rng);
    case StepEvent::Fell:
    case StepEvent::OutOfBounds:
    case StepEvent::Timeout:
      return level > 1 ? level - 1 : 1;
  }
  return level;
}

class CurriculumState {
 public:
  CurriculumState(int agents, std::uint64_t seed, int start_level = 1, bool enabled = true)
      : enabled_(enabled) {
    if (agents < 0) throw std::invalid_argument("negative agent count");
    if (start_level < 1 || start_level > kCurriculumLevels) {
      throw std::out_of_range("start level out of range");
    }
    levels_.assign(static_cast<std::size_t>(agents), start_level);
    counts_.fill(0);
    counts_[start_level - 1] = agents;
    rngs_.reserve(levels_.size());
    for (int i = 0; i < agents; ++i) rngs_.push_back(make_stream(seed, kCurriculumStream, i));
  }

  int level(int agent) const { return levels_.at(static_cast<std::size_t>(agent)); }
  int agents() const { return static_cast<int>(levels_.size()); }
  bool enabled() const { return enabled_; }

  /// Applies the rule for one finished episode; returns the agent's new level.
  int on_episode_end(int agent, StepEvent outcome) {
    auto& lvl = levels_.at(static_cast<std::size_t>(agent));
    if (!is_terminal(outcome)) throw std::invalid_argument("episode end needs a terminal outcome");
    if (!enabled_) return lvl;
    const int next = curriculum_update(lvl, outcome, rngs_[static_cast<std::size_t>(agent)]);
    --counts_[lvl - 1];
    ++counts_[next - 1];
    lvl = next;
    return next;
  }

  const std::array<int, kCurriculumLevels>& level_histogram() const { return counts_; }

  double mean_level() const {
    if (levels_.empty()) return 0.0;
    double sum = 0.0;
    for (int l : levels_) sum += l;
    return sum / static_cast<double>(levels_.size());
  }

 private:
  static constexpr std::uint64_t kCurriculumStream = 0xC0FFEEULL;
  bool enabled_;
  std::vector<int> levels_;
  std::array<int, kCurriculumLevels> counts_{};
  std::vector<Rng> rngs_;
};

}  // namespace stairclimb
