#pragma once

#include <cstdint>
#include <vector>

#include "driveline/traj.hpp"

namespace driveline {

inline constexpr int kTokensPerTrajectory = 2 * kHorizon;  // 128

// Uniform per-channel quantizer ranges. Cells are half-open with centers at
// lo + (k + 0.5) * (hi - lo) / bins.
struct QuantizerSpec {
  double a_lo = -10.0;
  double a_hi = 10.0;
  double kappa_lo = -0.2;
  double kappa_hi = 0.2;
  int bins = 256;
};

// 128 tokens, interleaved a-first: (a^1, kappa^1, a^2, kappa^2, ...).
struct ActionTokenSeq {
  std::vector<int> tokens;
};

struct QuantizeResult {
  ActionTokenSeq seq;
  int saturated = 0;  // values clamped into [lo, hi] before binning
};

void validate(const QuantizerSpec& spec, const char* context);

QuantizeResult quantize(const ControlSequence& controls,
                        const QuantizerSpec& spec);

ControlSequence dequantize(const ActionTokenSeq& tokens,
                           const QuantizerSpec& spec, double dt = kDt);

// Scalar helpers shared by the trajectory path and the flow sampler.
int quantize_value(double x, double lo, double hi, int bins);
double dequantize_token(int token, double lo, double hi, int bins);

}  // namespace driveline
