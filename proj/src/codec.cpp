#include "driveline/codec.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "driveline/errors.hpp"
#include "driveline/util.hpp"

namespace driveline {

void validate(const QuantizerSpec& spec, const char* context) {
  if (!(spec.a_lo < spec.a_hi) || !(spec.kappa_lo < spec.kappa_hi)) {
    throw ValidationError(context, "quantizer range must satisfy lo < hi");
  }
  if (spec.bins < 2) {
    throw ValidationError(context, "quantizer needs at least 2 bins");
  }
}

int quantize_value(double x, double lo, double hi, int bins) {
  const double w = (hi - lo) / bins;
  const double clamped = clamp(x, lo, hi);
  int k = static_cast<int>(std::floor((clamped - lo) / w));
  if (k < 0) k = 0;
  if (k >= bins) k = bins - 1;
  return k;
}

double dequantize_token(int token, double lo, double hi, int bins) {
  return lo + (token + 0.5) * (hi - lo) / bins;
}

QuantizeResult quantize(const ControlSequence& controls,
                        const QuantizerSpec& spec) {
  validate(spec, "quantize");
  const double inf = std::numeric_limits<double>::infinity();
  validate(controls, inf, inf, "quantize");

  QuantizeResult out;
  out.seq.tokens.reserve(kTokensPerTrajectory);
  for (const Control& u : controls.controls) {
    if (u.a < spec.a_lo || u.a > spec.a_hi) ++out.saturated;
    if (u.kappa < spec.kappa_lo || u.kappa > spec.kappa_hi) ++out.saturated;
    out.seq.tokens.push_back(
        quantize_value(u.a, spec.a_lo, spec.a_hi, spec.bins));
    out.seq.tokens.push_back(
        quantize_value(u.kappa, spec.kappa_lo, spec.kappa_hi, spec.bins));
  }
  return out;
}

ControlSequence dequantize(const ActionTokenSeq& tokens,
                           const QuantizerSpec& spec, double dt) {
  validate(spec, "dequantize");
  if (static_cast<int>(tokens.tokens.size()) != kTokensPerTrajectory) {
    throw ValidationError(
        "dequantize", "token sequence must have " +
                          std::to_string(kTokensPerTrajectory) +
                          " tokens, got " + std::to_string(tokens.tokens.size()));
  }
  for (size_t i = 0; i < tokens.tokens.size(); ++i) {
    if (tokens.tokens[i] < 0 || tokens.tokens[i] >= spec.bins) {
      throw ValidationError("dequantize",
                            "token out of range at index " + std::to_string(i));
    }
  }
  ControlSequence out;
  out.dt = dt;
  out.controls.resize(kHorizon);
  for (int i = 0; i < kHorizon; ++i) {
    out.controls[i].a = dequantize_token(tokens.tokens[2 * i], spec.a_lo,
                                         spec.a_hi, spec.bins);
    out.controls[i].kappa = dequantize_token(
        tokens.tokens[2 * i + 1], spec.kappa_lo, spec.kappa_hi, spec.bins);
  }
  return out;
}

}  // namespace driveline
