#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "eam/mdp.hpp"

namespace eam {

/// Value model consulted by the planners: (instruction, state, action,
/// actions taken so far) -> success probability. Implementations must be
/// safe for concurrent const calls.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual double evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                          std::span<const std::string> history) const = 0;
};

/// Exact Q^{π_u} at the queried depth (remaining = H - history.size()).
class ExactOracleQ : public QFunction {
 public:
  explicit ExactOracleQ(const KgMdp& m) : values_(m) {}
  double evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                  std::span<const std::string> history) const override;
  const ExactValues& values() const noexcept { return values_; }

 private:
  ExactValues values_;
};

enum class BiasMode {
  random,       // uniform in [-eps, eps], fixed per (state, action, depth)
  adversarial,  // -eps on the exact argmax action, +eps on the others
};

/// Exact oracle plus a bounded bias, clamped to [0, 1].
class NoisyOracleQ : public QFunction {
 public:
  NoisyOracleQ(const KgMdp& m, double eps, BiasMode mode, std::uint64_t seed)
      : oracle_(m), eps_(eps), mode_(mode), seed_(seed) {}
  double evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                  std::span<const std::string> history) const override;

 private:
  ExactOracleQ oracle_;
  double eps_;
  BiasMode mode_;
  std::uint64_t seed_;
};

/// Adapter for ad-hoc value functions in tests and bindings.
class LambdaQ : public QFunction {
 public:
  using Fn = std::function<double(const std::string& state, const std::string& action, std::size_t depth)>;
  explicit LambdaQ(Fn fn) : fn_(std::move(fn)) {}
  double evaluate(const KgMdp&, const std::string& state, const std::string& action,
                  std::span<const std::string> history) const override {
    return fn_(state, action, history.size());
  }

 private:
  Fn fn_;
};

}  // namespace eam
