#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomrds/catalog.hpp"
#include "zoomrds/contraction.hpp"
#include "zoomrds/errors.hpp"
#include "zoomrds/geometry.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/system.hpp"
#include "zoomrds/zooming.hpp"

namespace zoomrds::config {

using Json = nlohmann::json;

// Thin accessor over a JSON object that knows its path and rejects unknown keys.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }
  const Json& raw() const { return *j_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

  Node child(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + ": missing section '" + key + "'");
    return Node((*j_)[key], path_ + "." + key);
  }
  std::optional<Node> optional_child(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  template <class T>
  T get(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    return convert<T>((*j_)[key], path_ + "." + key);
  }
  template <class T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }
  template <class T>
  std::optional<T> maybe(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get<T>(key);
  }

  std::vector<Node> list(const std::string& key) const {
    std::vector<Node> out;
    if (!has(key)) return out;
    const Json& arr = (*j_)[key];
    if (!arr.is_array()) throw ConfigError(path_ + "." + key + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.emplace_back(arr[i], path_ + "." + key + "[" + std::to_string(i) + "]");
    return out;
  }

 private:
  template <class T>
  static T convert(const Json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  const Json* j_;
  std::string path_;
};

inline Json load(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file);
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file + ": " + e.what());
  }
}

// 64-bit FNV-1a over the canonical (sorted-key, compact) dump.
inline std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline PhaseSpace parse_phase(const std::string& s, const std::string& where) {
  if (s == "circle") return PhaseSpace::circle;
  if (s == "interval") return PhaseSpace::interval;
  throw ConfigError(where + ": phase must be 'circle' or 'interval'");
}

inline FiberMap parse_fiber(const Node& n) {
  const auto type = n.get<std::string>("type");
  if (type == "doubling") {
    n.allow({"type"});
    return FiberMap::doubling();
  }
  if (type == "linear") {
    n.allow({"type", "degree"});
    return FiberMap::linear(n.get<int>("degree"));
  }
  if (type == "tent") {
    n.allow({"type", "slope"});
    return FiberMap::tent(n.get<double>("slope", 2.0));
  }
  if (type == "quadratic") {
    n.allow({"type", "a", "coupling", "shift"});
    return FiberMap::quadratic(n.get<double>("a"), n.get<double>("coupling", 0.0), n.get<double>("shift", 0.0));
  }
  if (type == "neutral") {
    n.allow({"type", "branches"});
    return FiberMap::neutral(n.get<int>("branches", 1));
  }
  if (type == "split-attractor") {
    n.allow({"type"});
    return catalog::split_attractor_map();
  }
  if (type == "piecewise") {
    n.allow({"type", "pieces", "critical", "name"});
    std::vector<Piece> pieces;
    for (const Node& p : n.list("pieces")) {
      p.allow({"lo", "hi", "shape", "slope", "intercept", "amplitude"});
      Piece piece;
      piece.lo = p.get<double>("lo");
      piece.hi = p.get<double>("hi");
      const auto shape = p.get<std::string>("shape", "affine");
      if (shape == "affine") piece.shape = Piece::Shape::affine;
      else if (shape == "quadratic") piece.shape = Piece::Shape::quadratic;
      else if (shape == "neutral") piece.shape = Piece::Shape::neutral;
      else throw ConfigError(p.path() + ": unknown piece shape '" + shape + "'");
      piece.slope = p.get<double>("slope", 0.0);
      piece.intercept = p.get<double>("intercept", 0.0);
      piece.amplitude = p.get<double>("amplitude", 0.0);
      pieces.push_back(piece);
    }
    return FiberMap::piecewise(std::move(pieces), n.get<std::vector<double>>("critical", {}),
                               n.get<std::string>("name", "piecewise"));
  }
  throw ConfigError(n.path() + ": unknown fiber type '" + type + "'");
}

// Either {"catalog": name, ...parameters} or an explicit base + fibers.
inline RandomSystem parse_system(const Node& n) {
  if (n.has("catalog")) {
    const auto name = n.get<std::string>("catalog");
    if (name == "doubling") {
      n.allow({"catalog", "phase"});
      return catalog::doubling(parse_phase(n.get<std::string>("phase", "circle"), n.path()));
    }
    if (name == "linear") {
      n.allow({"catalog", "degree", "phase"});
      return catalog::linear(n.get<int>("degree"), parse_phase(n.get<std::string>("phase", "circle"), n.path()));
    }
    if (name == "random-doubling-tripling") {
      n.allow({"catalog", "p", "phase"});
      return catalog::random_doubling_tripling(n.get<double>("p", 0.5),
                                               parse_phase(n.get<std::string>("phase", "circle"), n.path()));
    }
    if (name == "quadratic") {
      n.allow({"catalog", "a"});
      return catalog::quadratic(n.get<double>("a", 2.0));
    }
    if (name == "coupled-quadratic") {
      n.allow({"catalog", "a", "coupling", "shifts", "probabilities"});
      return catalog::coupled_quadratic(n.get<double>("a"), n.get<double>("coupling"),
                                        n.get<std::vector<double>>("shifts"),
                                        n.get<std::vector<double>>("probabilities"));
    }
    if (name == "tent") {
      n.allow({"catalog", "slope"});
      return catalog::tent(n.get<double>("slope", 2.0));
    }
    if (name == "split-attractor") {
      n.allow({"catalog"});
      return catalog::split_attractor();
    }
    if (name == "neutral-product") {
      n.allow({"catalog", "p"});
      return catalog::neutral_product(n.get<double>("p", 0.5));
    }
    throw ConfigError(n.path() + ": unknown catalog system '" + name + "'");
  }
  n.allow({"phase", "probabilities", "word", "fibers"});
  BaseProcess base{n.get<std::vector<double>>("probabilities"), n.get<std::vector<int>>("word", {})};
  std::vector<FiberMap> fibers;
  for (const Node& f : n.list("fibers")) fibers.push_back(parse_fiber(f));
  return RandomSystem(std::move(base), std::move(fibers), parse_phase(n.get<std::string>("phase"), n.path()));
}

inline ZoomingContraction parse_contraction(const Node& n) {
  const auto kind = n.get<std::string>("kind");
  const int horizon = n.get<int>("horizon", 1000);
  if (kind == "exponential") {
    n.allow({"kind", "rate", "horizon", "label"});
    return ZoomingContraction::exponential(n.get<double>("rate"), horizon);
  }
  if (kind == "lipschitz") {
    n.allow({"kind", "rule", "exponent", "offset", "ratio", "horizon", "label"});
    const auto rule = n.get<std::string>("rule", "power");
    if (rule == "power") return ZoomingContraction::power_law(n.get<double>("exponent"), n.get<double>("offset", 1.0), horizon);
    if (rule == "geometric") return ZoomingContraction::geometric(n.get<double>("ratio"), horizon);
    throw ConfigError(n.path() + ": lipschitz rule must be 'power' or 'geometric'");
  }
  if (kind == "root-decay") {
    n.allow({"kind", "scale", "horizon", "label"});
    return ZoomingContraction::root_decay(n.get<double>("scale", 1.0), horizon);
  }
  throw ConfigError(n.path() + ": unknown contraction kind '" + kind + "'");
}

inline Potential parse_potential(const Node& n, PhaseSpace phase) {
  const auto kind = n.get<std::string>("kind");
  Potential p;
  if (kind == "null") {
    n.allow({"kind", "shift", "scale"});
    p = Potential::null();
  } else if (kind == "constant") {
    n.allow({"kind", "value", "shift", "scale"});
    p = Potential::constant(n.get<double>("value"));
  } else if (kind == "per-symbol") {
    n.allow({"kind", "values", "shift", "scale"});
    p = Potential::per_symbol(n.get<std::vector<double>>("values"));
  } else if (kind == "coordinate") {
    n.allow({"kind", "shift", "scale"});
    p = Potential::coordinate();
  } else if (kind == "bump") {
    n.allow({"kind", "center", "radius", "height", "shift", "scale"});
    p = Potential::bump(n.get<double>("center"), n.get<double>("radius"), n.get<double>("height", 1.0), phase);
  } else {
    throw ConfigError(n.path() + ": unknown potential kind '" + kind + "'");
  }
  return p.scaled(n.get<double>("scale", 1.0)).shifted(n.get<double>("shift", 0.0));
}

inline ZoomingConfig parse_zooming_config(const std::optional<Node>& n, const ZoomingContraction& contraction) {
  ZoomingConfig cfg;
  cfg.contraction = contraction;
  if (!n) return cfg;
  cfg.delta = n->get<double>("delta", cfg.delta);
  cfg.grid = n->get<int>("grid", cfg.grid);
  cfg.pliss_margin = n->maybe<double>("pliss_margin");
  cfg.certify = n->get<bool>("certify", cfg.certify);
  return cfg;
}

}  // namespace zoomrds::config
