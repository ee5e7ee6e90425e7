#pragma once

#include <stdexcept>
#include <string>

namespace driveline {

// Bad inputs: shape mismatches, out-of-range values, non-finite data.
// CLI maps this family to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string context, const std::string& message)
      : std::runtime_error(message), context_(std::move(context)) {}
  const std::string& context() const { return context_; }

 private:
  std::string context_;
};

// Judge endpoint unreachable or timed out. Retriable; CLI exit code 3.
class TransportError : public std::runtime_error {
 public:
  TransportError(std::string context, const std::string& message)
      : std::runtime_error(message), context_(std::move(context)) {}
  const std::string& context() const { return context_; }

 private:
  std::string context_;
};

// Judge reached but its response does not follow the wire format.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string context, const std::string& message)
      : std::runtime_error(message), context_(std::move(context)) {}
  const std::string& context() const { return context_; }

 private:
  std::string context_;
};

// Denoising produced a non-finite state; carries the offending step.
class SamplingError : public ValidationError {
 public:
  SamplingError(int step, const std::string& message)
      : ValidationError("euler_sample step " + std::to_string(step), message),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace driveline
