#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace lmrmt {

/// Positive function L on [0, inf) with L(a h) / L(h) -> 1 as h -> inf.
class SlowlyVarying {
 public:
  enum class Kind { constant, log_growth, log_decay, custom };

  /// L(h) = c.
  static SlowlyVarying constant(double c = 1.0);
  /// L(h) = ln(e + h).
  static SlowlyVarying log_growth();
  /// L(h) = 1 / ln(e + h).
  static SlowlyVarying log_decay();
  /// Arbitrary evaluator; trusted as-is (see `slow_variation_defect`).
  static SlowlyVarying custom(std::function<double(double)> evaluator, std::string label = "custom");

  double operator()(double h) const;

  Kind kind() const noexcept { return kind_; }
  double c() const noexcept { return c_; }
  const std::string& label() const noexcept { return label_; }

  nlohmann::json to_json() const;
  /// Custom kinds cannot be reconstructed from JSON.
  static SlowlyVarying from_json(const nlohmann::json& j);

 private:
  SlowlyVarying(Kind kind, double c, std::function<double(double)> eval, std::string label);

  Kind kind_;
  double c_;
  std::function<double(double)> eval_;
  std::string label_;
};

std::string to_string(SlowlyVarying::Kind kind);

/// |L(scale * h) / L(h) - 1|; opt-in diagnostic for slow variation.
double slow_variation_defect(const SlowlyVarying& L, double h, double scale);

}  // namespace lmrmt
