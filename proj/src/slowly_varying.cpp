#include "lmrmt/slowly_varying.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "lmrmt/errors.hpp"

namespace lmrmt {

SlowlyVarying::SlowlyVarying(Kind kind, double c, std::function<double(double)> eval, std::string label)
    : kind_(kind), c_(c), eval_(std::move(eval)), label_(std::move(label)) {}

SlowlyVarying SlowlyVarying::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InvalidArgument("constant slowly varying function needs c > 0");
  }
  return SlowlyVarying(Kind::constant, c, nullptr, "constant");
}

SlowlyVarying SlowlyVarying::log_growth() { return SlowlyVarying(Kind::log_growth, 0.0, nullptr, "log_growth"); }

SlowlyVarying SlowlyVarying::log_decay() { return SlowlyVarying(Kind::log_decay, 0.0, nullptr, "log_decay"); }

SlowlyVarying SlowlyVarying::custom(std::function<double(double)> evaluator, std::string label) {
  if (!evaluator) throw InvalidArgument("custom slowly varying function needs an evaluator");
  return SlowlyVarying(Kind::custom, 0.0, std::move(evaluator), std::move(label));
}

double SlowlyVarying::operator()(double h) const {
  switch (kind_) {
    case Kind::constant:
      return c_;
    case Kind::log_growth:
      return std::log(std::numbers::e + h);
    case Kind::log_decay:
      return 1.0 / std::log(std::numbers::e + h);
    case Kind::custom:
      return eval_(h);
  }
  return 0.0;
}

std::string to_string(SlowlyVarying::Kind kind) {
  switch (kind) {
    case SlowlyVarying::Kind::constant:
      return "constant";
    case SlowlyVarying::Kind::log_growth:
      return "log_growth";
    case SlowlyVarying::Kind::log_decay:
      return "log_decay";
    case SlowlyVarying::Kind::custom:
      return "custom";
  }
  return "unknown";
}

nlohmann::json SlowlyVarying::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  if (kind_ == Kind::constant) j["c"] = c_;
  if (kind_ == Kind::custom) j["label"] = label_;
  return j;
}

SlowlyVarying SlowlyVarying::from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", std::string("constant"));
  if (kind == "constant") return constant(j.value("c", 1.0));
  if (kind == "log_growth") return log_growth();
  if (kind == "log_decay") return log_decay();
  throw InvalidArgument("unknown slowly varying kind '" + kind + "' (expected constant, log_growth or log_decay)");
}

double slow_variation_defect(const SlowlyVarying& L, double h, double scale) {
  return std::abs(L(scale * h) / L(h) - 1.0);
}

}  // namespace lmrmt
