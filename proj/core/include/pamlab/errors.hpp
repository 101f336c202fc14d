#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pamlab {

struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A quadrature or series did not reach the requested tolerance.
struct ToleranceNotMet : std::runtime_error {
  ToleranceNotMet(const std::string& what, double estimate)
      : std::runtime_error(what), achieved(estimate) {}
  double achieved;
};

struct TruncationInsufficient : std::runtime_error {
  TruncationInsufficient(const std::string& what, int kmax)
      : std::runtime_error(what), required_kmax(kmax) {}
  int required_kmax;
};

struct BlowUp : std::runtime_error {
  BlowUp(const std::string& what, std::size_t step_index, std::uint64_t path_seed)
      : std::runtime_error(what), step(step_index), seed(path_seed) {}
  std::size_t step;
  std::uint64_t seed;
};

struct Nonconvergence : std::runtime_error {
  Nonconvergence(const std::string& what, double last_ratio)
      : std::runtime_error(what), ratio(last_ratio) {}
  double ratio;
};

// A fitted rate is not supported by the data (e.g. a non-monotone curve).
struct UnreliableFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DalangViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalConsistency : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace pamlab
