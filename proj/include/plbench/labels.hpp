#pragma once

#include <string>
#include <vector>

namespace plbench {

/// Class id in the source label space [0, |Y_s|), or kUnknown.
using Label = int;
inline constexpr Label kUnknown = -1;

/// Per-sample true labels of a stream (kUnknown for target-private samples).
using GroundTruth = std::vector<Label>;

inline std::string label_to_string(Label l) {
  return l == kUnknown ? std::string("unknown") : std::to_string(l);
}

}  // namespace plbench
