#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/geometry.hpp"

namespace zoomrds {

namespace potential_rules {

struct Null {};

struct ConstantPerSymbol {
  std::vector<double> values;
};

struct Coordinate {};

// Tent-shaped bump: height * max(0, 1 - d(x, center) / radius).
struct Bump {
  double center;
  double radius;
  double height = 1.0;
  PhaseSpace phase = PhaseSpace::interval;
};

struct Custom {
  std::string name;
  std::function<double(int, double)> fn;
};

}  // namespace potential_rules

// phi(symbol, x) = scale * rule(symbol, x) + offset.
class Potential {
 public:
  using Rule = std::variant<potential_rules::Null, potential_rules::ConstantPerSymbol,
                            potential_rules::Coordinate, potential_rules::Bump,
                            potential_rules::Custom>;

  Potential() = default;
  explicit Potential(Rule rule, double scale = 1.0, double offset = 0.0)
      : rule_(std::move(rule)), scale_(scale), offset_(offset) {
    if (auto b = std::get_if<potential_rules::Bump>(&rule_); b && !(b->radius > 0.0))
      throw DomainError("bump radius must be positive");
    if (auto c = std::get_if<potential_rules::Custom>(&rule_); c && !c->fn)
      throw DomainError("custom potential needs a callable");
  }

  static Potential null() { return Potential{potential_rules::Null{}}; }
  static Potential constant(double c) { return Potential{potential_rules::Null{}, 1.0, c}; }
  static Potential per_symbol(std::vector<double> values) {
    return Potential{potential_rules::ConstantPerSymbol{std::move(values)}};
  }
  static Potential coordinate(double scale = 1.0) {
    return Potential{potential_rules::Coordinate{}, scale};
  }
  static Potential bump(double center, double radius, double height = 1.0,
                        PhaseSpace phase = PhaseSpace::interval) {
    return Potential{potential_rules::Bump{center, radius, height, phase}};
  }

  double operator()(int symbol, double x) const {
    return scale_ * rule_value(symbol, x) + offset_;
  }

  Potential shifted(double c) const {
    Potential p = *this;
    p.offset_ += c;
    return p;
  }
  Potential scaled(double k) const {
    Potential p = *this;
    p.scale_ *= k;
    p.offset_ *= k;
    return p;
  }

  const Rule& rule() const { return rule_; }
  double scale() const { return scale_; }
  double offset() const { return offset_; }

  // True when phi(s, x) does not vary with x.
  bool point_independent() const {
    return std::holds_alternative<potential_rules::Null>(rule_) ||
           std::holds_alternative<potential_rules::ConstantPerSymbol>(rule_) || scale_ == 0.0;
  }

  // sup_x |phi(s, x)| on a 4097-point grid; exact for the built-in rules.
  double sup_norm(int symbol) const {
    double m = 0.0;
    for (int k = 0; k <= 4096; ++k) m = std::max(m, std::abs((*this)(symbol, k / 4096.0)));
    if (auto b = std::get_if<potential_rules::Bump>(&rule_))
      m = std::max(m, std::abs((*this)(symbol, b->center)));
    return m;
  }

  std::string describe() const {
    std::string base = std::visit(
        [](const auto& r) -> std::string {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, potential_rules::Null>) return "null";
          else if constexpr (std::is_same_v<R, potential_rules::ConstantPerSymbol>) return "constant-per-symbol";
          else if constexpr (std::is_same_v<R, potential_rules::Coordinate>) return "coordinate";
          else if constexpr (std::is_same_v<R, potential_rules::Bump>) return "fixed-point-bump";
          else return "custom:" + r.name;
        },
        rule_);
    return base;
  }

 private:
  double rule_value(int symbol, double x) const {
    return std::visit(
        [&](const auto& r) -> double {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, potential_rules::Null>) {
            return 0.0;
          } else if constexpr (std::is_same_v<R, potential_rules::ConstantPerSymbol>) {
            if (symbol < 0 || static_cast<std::size_t>(symbol) >= r.values.size())
              throw DomainError("potential has no value for symbol " + std::to_string(symbol));
            return r.values[static_cast<std::size_t>(symbol)];
          } else if constexpr (std::is_same_v<R, potential_rules::Coordinate>) {
            return x;
          } else if constexpr (std::is_same_v<R, potential_rules::Bump>) {
            const double d = distance(r.phase, x, r.center);
            return d >= r.radius ? 0.0 : r.height * (1.0 - d / r.radius);
          } else {
            return r.fn(symbol, x);
          }
        },
        rule_);
  }

  Rule rule_ = potential_rules::Null{};
  double scale_ = 1.0;
  double offset_ = 0.0;
};

}  // namespace zoomrds
