#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zoomrds/config.hpp"
#include "zoomrds/contraction.hpp"
#include "zoomrds/equilibrium.hpp"
#include "zoomrds/io.hpp"
#include "zoomrds/measures.hpp"
#include "zoomrds/potentials.hpp"
#include "zoomrds/pressure.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/system.hpp"
#include "zoomrds/ulam.hpp"
#include "zoomrds/zooming.hpp"

namespace zoomrds::cli {

using config::Json;
using config::Node;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kStrictWarning = 3, kPreconditionFailure = 4 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"axioms",  "simulate",    "zooming",       "pressure",
                                              "entropy", "equilibrium", "potential-gap", "verify-vp"};
  return names;
}

struct Options {
  std::string command;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::size_t workers = 1;
  bool timestamp = true;
};

// Fixed task indices for seed derivation; each command draws from its own block.
namespace task {
inline constexpr std::uint64_t axioms = 1;
inline constexpr std::uint64_t orbits = 1000;
inline constexpr std::uint64_t ensemble = 2000;
inline constexpr std::uint64_t expansivity = 3000;
inline constexpr std::uint64_t pressure = 4000;
inline constexpr std::uint64_t caratheodory = 5000;
inline constexpr std::uint64_t entropy = 6000;
inline constexpr std::uint64_t cocycle = 7000;
inline constexpr std::uint64_t equilibrium = 8000;
inline constexpr std::uint64_t candidates = 9000;
inline constexpr std::uint64_t flags = 10000;
inline constexpr std::uint64_t gap = 11000;
}  // namespace task

class Run {
 public:
  Run(const Json& cfg, const Options& opt)
      : cfg_(cfg), root_(cfg_, "config"), opt_(opt), out_(opt.out) {
    root_.allow({"name", "description", "seed", "system", "contraction", "potential", "axioms", "simulate", "zooming",
                 "pressure", "entropy", "equilibrium", "potential_gap", "verify_vp"});
    seed_ = opt.seed ? *opt.seed : root_.get<std::uint64_t>("seed", 0);
    if (root_.has("system")) sys_.emplace(config::parse_system(root_.child("system")));
    contraction_.emplace(root_.has("contraction") ? config::parse_contraction(root_.child("contraction"))
                                                  : ZoomingContraction::exponential(std::log(2.0)));
    potential_ = root_.has("potential") ? config::parse_potential(root_.child("potential"), phase())
                                        : Potential::null();
  }

  Json execute(const std::string& command) {
    if (command == "axioms") return axioms();
    if (command == "simulate") return simulate();
    if (command == "zooming") return zooming();
    if (command == "pressure") return pressure();
    if (command == "entropy") return entropy();
    if (command == "equilibrium") return equilibrium();
    if (command == "potential-gap") return potential_gap();
    if (command == "verify-vp") return verify_vp();
    throw ConfigError("unknown command '" + command + "'");
  }

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool precondition_failed() const { return precondition_failed_; }

 private:
  const RandomSystem& sys() const {
    if (!sys_) throw ConfigError("config: this command needs a 'system' section");
    return *sys_;
  }
  PhaseSpace phase() const { return sys_ ? sys_->phase() : PhaseSpace::interval; }
  std::uint64_t seed_for(std::uint64_t index) const { return derive_seed(seed_, index); }
  std::size_t workers() const { return opt_.workers; }

  void warn(const std::string& w) {
    if (std::find(warnings_.begin(), warnings_.end(), w) == warnings_.end()) warnings_.push_back(w);
  }
  void warn_all(const std::vector<std::string>& ws, const std::string& prefix) {
    for (const auto& w : ws) warn(prefix + ": " + w);
  }

  void write_csv(const std::string& name, const io::Csv& csv) { csv.write(out_ / name); }
  void write_json(const std::string& name, const Json& j) { io::write_json(out_ / name, j); }

  ZoomingConfig zooming_config() const {
    return config::parse_zooming_config(root_.optional_child("zooming"), *contraction_);
  }

  // ----- shared parsing -----

  PressureSettings pressure_settings(const Node& n) const {
    PressureSettings s;
    s.eps = n.get<std::vector<double>>("eps", s.eps);
    s.n = n.get<std::vector<int>>("n", s.n);
    s.words = n.get<std::size_t>("words", s.words);
    s.grid = n.get<std::size_t>("grid", s.grid);
    s.workers = workers();
    s.validate();
    return s;
  }

  CaratheodorySettings caratheodory_settings(const Node& n) const {
    n.allow({"eps", "n_min", "n_cap", "points", "words", "min_points_per_ball", "word_length", "classifier"});
    CaratheodorySettings cs;
    cs.eps = n.get<double>("eps", cs.eps);
    cs.n_min = n.get<int>("n_min", cs.n_min);
    cs.n_cap = n.get<int>("n_cap", cs.n_cap);
    cs.points = n.get<std::size_t>("points", cs.points);
    cs.words = n.get<std::size_t>("words", cs.words);
    cs.min_points_per_ball = n.get<double>("min_points_per_ball", cs.min_points_per_ball);
    cs.word_length = n.get<std::size_t>("word_length", cs.word_length);
    cs.workers = workers();
    return cs;
  }

  Classifier classifier(const std::optional<Node>& n) const {
    if (!n) return full_set();
    const auto kind = n->get<std::string>("kind");
    if (kind == "full") {
      n->allow({"kind"});
      return full_set();
    }
    if (kind == "empty") {
      n->allow({"kind"});
      return empty_set();
    }
    if (kind == "interval") {
      n->allow({"kind", "lo", "hi"});
      const double lo = n->get<double>("lo"), hi = n->get<double>("hi");
      return [lo, hi](double x, std::span<const int>) { return x >= lo && x < hi; };
    }
    if (kind == "zooming") {
      n->allow({"kind", "threshold"});
      return zooming_classifier(sys(), zooming_config(), n->get<double>("threshold", 0.05));
    }
    throw ConfigError(n->path() + ": unknown classifier kind '" + kind + "'");
  }

  EntropySettings entropy_settings(const std::optional<Node>& n) const {
    EntropySettings es;
    es.workers = workers();
    if (!n) return es;
    es.cells = n->get<int>("cells", es.cells);
    es.depth = n->get<int>("depth", es.depth);
    es.samples = n->get<std::size_t>("samples", es.samples);
    return es;
  }

  struct EquilibriumSettings {
    int cells = 256;
    int samples_per_cell = 64;
    std::size_t words = 200;
    int length = 500;
    int lookahead = 64;
    bool compare_half = true;
  };

  EquilibriumSettings equilibrium_settings() const {
    EquilibriumSettings s;
    const auto n = root_.optional_child("equilibrium");
    if (!n) return s;
    n->allow({"cells", "samples_per_cell", "words", "length", "lookahead", "compare_half"});
    s.cells = n->get<int>("cells", s.cells);
    s.samples_per_cell = n->get<int>("samples_per_cell", s.samples_per_cell);
    s.words = n->get<std::size_t>("words", s.words);
    s.length = n->get<int>("length", s.length);
    s.lookahead = n->get<int>("lookahead", s.lookahead);
    s.compare_half = n->get<bool>("compare_half", s.compare_half);
    return s;
  }

  std::shared_ptr<const UlamModel> model(int cells) {
    auto it = models_.find(cells);
    if (it == models_.end())
      it = models_.emplace(cells, std::make_shared<const UlamModel>(
                                      build_ulam(sys(), cells, equilibrium_settings().samples_per_cell)))
               .first;
    return it->second;
  }

  bool deterministic() const { return sys().alphabet() == 1 || !sys().base().explicit_word.empty(); }

  static std::optional<ZoomingFlag> parse_flag(const Node& n) {
    if (!n.has("flag")) return std::nullopt;
    const auto f = n.get<std::string>("flag");
    if (f == "zooming-like") return ZoomingFlag::zooming_like;
    if (f == "non-zooming-like") return ZoomingFlag::non_zooming_like;
    if (f == "unknown") return ZoomingFlag::unknown;
    throw ConfigError(n.path() + ": flag must be zooming-like, non-zooming-like or unknown");
  }

  // Candidates without an explicit flag are flagged automatically when `auto_flag` is given.
  std::vector<MeasureCandidate> candidates(const std::vector<Node>& specs, const Potential& phi,
                                           std::uint64_t block, const FlagSettings* auto_flag = nullptr) {
    std::vector<MeasureCandidate> out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const Node& n = specs[i];
      const auto kind = n.get<std::string>("kind");
      std::vector<MeasureCandidate> made;
      if (kind == "dirac") {
        n.allow({"kind", "x0", "symbol", "label", "flag"});
        made.push_back(make_dirac(sys(), n.get<double>("x0"), n.maybe<int>("symbol")));
      } else if (kind == "periodic") {
        n.allow({"kind", "x0", "cycle", "label", "flag"});
        if (!deterministic()) throw ConfigError(n.path() + ": periodic candidates need a deterministic base");
        made.push_back(make_periodic(sys(), n.get<std::vector<int>>("cycle"), n.get<double>("x0")));
      } else if (kind == "linear-periodic") {
        n.allow({"kind", "degree", "count", "label", "flag"});
        if (!deterministic()) throw ConfigError(n.path() + ": periodic candidates need a deterministic base");
        for (const auto& [x0, p] : linear_periodic_orbits(n.get<int>("degree"), n.get<std::size_t>("count", 5)))
          made.push_back(make_periodic(sys(), std::vector<int>(static_cast<std::size_t>(p), 0), x0));
      } else if (kind == "empirical") {
        n.allow({"kind", "x0", "length", "burn_in", "refresh", "label", "flag"});
        const auto length = n.get<std::size_t>("length", 10000);
        const auto word = sample_word(sys().base(), length, seed_for(block + i), 0);
        const IterateOptions opt{n.get<bool>("refresh", true) ? kRoundoffRefresh : 0.0, seed_for(block + i)};
        made.push_back(make_empirical(sys(), iterate(sys(), n.get<double>("x0"), word, nullptr, opt),
                                      n.get<std::size_t>("burn_in", 100)));
      } else if (kind == "ulam-equilibrium") {
        n.allow({"kind", "cells", "label", "flag"});
        const auto s = equilibrium_settings();
        auto res = equilibrium_candidate(model(n.get<int>("cells", s.cells)), sys().base(), phi, s.words,
                                         s.lookahead, seed_for(block + i), workers());
        warn_all(res.warnings, "candidate " + res.candidate.label);
        made.push_back(std::move(res.candidate));
      } else if (kind == "ulam-stationary") {
        n.allow({"kind", "cells", "restrict", "label", "flag"});
        auto m = model(n.get<int>("cells", equilibrium_settings().cells));
        auto c = make_ulam(m, stationary_weights(*m));
        if (n.has("restrict")) {
          const auto r = n.get<std::vector<double>>("restrict");
          if (r.size() != 2) throw ConfigError(n.path() + ".restrict: expected [lo, hi]");
          c = restrict_candidate(c, [r](double x) { return x >= r[0] && x < r[1]; },
                                 "[" + io::text(r[0]) + "," + io::text(r[1]) + ")");
        }
        made.push_back(std::move(c));
      } else {
        throw ConfigError(n.path() + ": unknown candidate kind '" + kind + "'");
      }
      const auto flag = parse_flag(n);
      for (std::size_t k = 0; k < made.size(); ++k) {
        if (n.has("label")) made[k].label = n.get<std::string>("label") + (made.size() > 1 ? "#" + std::to_string(k) : "");
        if (flag) made[k].flag = *flag;
        else if (auto_flag) made[k].flag = flag_candidate(sys(), made[k], *auto_flag, seed_for(task::flags + block + out.size()));
        out.push_back(std::move(made[k]));
      }
    }
    return out;
  }

  // ----- commands -----

  Json axioms() {
    Json families = Json::array();
    const auto n = root_.optional_child("axioms");
    int samples = 10000;
    AxiomSettings settings;
    std::vector<std::pair<std::string, ZoomingContraction>> list;
    if (n) {
      n->allow({"samples", "families", "composition_slack", "r_max", "r_grid", "tail_bound"});
      samples = n->get<int>("samples", samples);
      settings.composition_slack = n->get<double>("composition_slack", settings.composition_slack);
      settings.r_max = n->get<double>("r_max", settings.r_max);
      settings.r_grid = n->get<int>("r_grid", settings.r_grid);
      settings.tail_bound = n->get<double>("tail_bound", settings.tail_bound);
      const auto specs = n->list("families");
      for (std::size_t i = 0; i < specs.size(); ++i)
        list.emplace_back(specs[i].get<std::string>("label", "family-" + std::to_string(i)),
                          config::parse_contraction(specs[i]));
    }
    if (list.empty()) list.emplace_back("contraction", *contraction_);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto report = check_axioms(list[i].second, samples, seed_for(task::axioms + i), settings);
      Json j = io::to_json(report);
      j["label"] = list[i].first;
      families.push_back(j);
      if (!report.all_passed()) {
        precondition_failed_ = true;
        for (const auto& a : report.axioms)
          if (!a.passed) warn(list[i].first + ": axiom '" + a.name + "' fails: " + a.counterexample);
      }
    }
    return {{"families", families}, {"samples", samples}};
  }

  Json simulate() {
    const Node n = root_.child("simulate");
    n.allow({"x0", "length", "refresh", "word"});
    const auto xs = n.get<std::vector<double>>("x0");
    const auto length = n.get<std::size_t>("length", 200);
    const auto fixed = n.get<std::vector<int>>("word", {});
    Json orbits = Json::array();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::vector<int> word(length);
      if (fixed.empty())
        word = sample_word(sys().base(), length, seed_for(task::orbits + i), 0);
      else
        for (std::size_t t = 0; t < length; ++t) word[t] = fixed[t % fixed.size()];  // repeated periodically
      const IterateOptions opt{n.get<bool>("refresh", false) ? kRoundoffRefresh : 0.0, seed_for(task::orbits + i)};
      const auto rec = iterate(sys(), xs[i], word, &potential_, opt);
      const std::string file = "orbit_" + std::to_string(i) + ".csv";
      write_csv(file, io::orbit_csv(rec));
      int absent = 0;
      for (const auto& d : rec.log_derivs) absent += d ? 0 : 1;
      orbits.push_back({{"x0", io::num(xs[i])},
                        {"length", rec.length()},
                        {"final", io::num(rec.points.back())},
                        {"birkhoff_average", io::num(rec.birkhoff.back() / static_cast<double>(rec.length()))},
                        {"critical_hits", absent},
                        {"file", file}});
    }
    return {{"orbits", orbits}, {"potential", potential_.describe()}};
  }

  Json zooming() {
    const Node n = root_.child("zooming");
    n.allow({"delta", "grid", "pliss_margin", "certify", "orbits", "ensemble", "expansivity", "slow_approach"});
    const ZoomingConfig cfg = zooming_config();
    cfg.validate(sys().phase());
    Json out = {{"delta", io::num(cfg.delta)}, {"grid", cfg.grid}, {"pliss_margin", io::num(
        cfg.contraction.is_exponential() ? cfg.margin() : std::nan(""))}};
    if (const auto o = n.optional_child("orbits")) {
      o->allow({"x0", "length", "refresh"});
      const auto xs = o->get<std::vector<double>>("x0");
      const auto length = o->get<std::size_t>("length", 200);
      Json reports = Json::array();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto word = sample_word(sys().base(), length, seed_for(task::orbits + i), 0);
        const IterateOptions opt{o->get<bool>("refresh", true) ? kRoundoffRefresh : 0.0, seed_for(task::orbits + i)};
        const auto rec = iterate(sys(), xs[i], word, nullptr, opt);
        Json r = io::to_json(detect_times(sys(), rec, cfg));
        r["x0"] = io::num(xs[i]);
        reports.push_back(r);
      }
      out["orbits"] = reports;
    }
    if (const auto e = n.optional_child("ensemble")) {
      e->allow({"points", "length", "threshold", "verify_pliss"});
      EnsembleSettings es;
      es.points = e->get<std::size_t>("points", es.points);
      es.length = e->get<std::size_t>("length", es.length);
      es.threshold = e->get<double>("threshold", es.threshold);
      es.verify_pliss = e->get<bool>("verify_pliss", es.verify_pliss);
      es.workers = workers();
      const auto entries = classify_ensemble(sys(), cfg, es, seed_for(task::ensemble));
      io::Csv csv({"point", "frequency", "classification"});
      std::size_t zooming = 0;
      int checked = 0, failures = 0;
      double worst = 0.0;
      for (const auto& en : entries) {
        csv.row(en.x0, en.frequency, to_string(en.flag));
        zooming += en.flag == ZoomingFlag::zooming_like ? 1 : 0;
        checked += en.pliss_checked;
        failures += en.pliss_failures;
        worst = std::max(worst, en.pliss_worst_ratio);
      }
      write_csv("ensemble.csv", csv);
      if (failures > 0) warn("zooming: " + std::to_string(failures) + " detected times failed Pliss-margin verification");
      out["ensemble"] = {{"points", entries.size()},
                         {"zooming_like", zooming},
                         {"zooming_fraction", io::num(static_cast<double>(zooming) / entries.size())},
                         {"threshold", io::num(es.threshold)},
                         {"pliss_checked", checked},
                         {"pliss_failures", failures},
                         {"pliss_worst_ratio", io::num(worst)},
                         {"file", "ensemble.csv"}};
    }
    if (const auto x = n.optional_child("expansivity")) {
      x->allow({"pairs", "epsilon", "horizon", "max_distance"});
      const double eps = x->get<double>("epsilon", 0.1);
      if (eps > cfg.delta)
        throw PreconditionError("expansivity epsilon " + io::text(eps) + " exceeds the zooming delta " + io::text(cfg.delta));
      const auto rep = expansivity_check(sys(), x->get<std::size_t>("pairs", 1000), eps, x->get<int>("horizon", 200),
                                         seed_for(task::expansivity), x->get<double>("max_distance", 1.0 / 1024),
                                         workers());
      io::Csv csv({"pair", "first_separation"});
      for (std::size_t i = 0; i < rep.first_times.size(); ++i) csv.row(i, rep.first_times[i]);
      write_csv("expansivity.csv", csv);
      if (rep.separated + rep.degenerate < rep.pairs)
        warn("expansivity: " + std::to_string(rep.pairs - rep.separated - rep.degenerate) +
             " pairs did not separate within the horizon");
      out["expansivity"] = io::to_json(rep);
    }
    if (const auto s = n.optional_child("slow_approach")) {
      s->allow({"delta", "x0", "length"});
      const double delta = s->get<double>("delta", cfg.delta);
      const auto xs = s->get<std::vector<double>>("x0");
      const auto length = s->get<std::size_t>("length", 1000);
      const auto critical = sys().critical_points();
      Json stats = Json::array();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto word = sample_word(sys().base(), length, seed_for(task::orbits + 500 + i), 0);
        const auto rec = iterate(sys(), xs[i], word, nullptr, IterateOptions{kRoundoffRefresh, seed_for(task::orbits + 500 + i)});
        stats.push_back({{"x0", io::num(xs[i])},
                         {"statistic", io::num(slow_approach_statistic(rec, critical, delta, sys().phase()))}});
      }
      out["slow_approach"] = {{"delta", io::num(delta)}, {"orbits", stats}};
    }
    return out;
  }

  Json pressure() {
    const Node n = root_.child("pressure");
    n.allow({"eps", "n", "words", "grid", "separated", "caratheodory"});
    Json out = {{"potential", potential_.describe()}};
    if (n.get<bool>("separated", true)) {
      const auto est = pressure_estimate(sys(), potential_, pressure_settings(n), seed_for(task::pressure));
      warn_all(est.warnings, "pressure");
      io::Csv table({"n", "eps", "mean", "standard_error", "mean_selected"});
      for (const auto& c : est.table) table.row(c.n, c.eps, c.mean, c.standard_error, c.mean_selected);
      write_csv("pressure_table.csv", table);
      io::Csv words({"word", "slope"});
      for (std::size_t k = 0; k < est.per_word.size(); ++k) words.row(k, est.per_word[k]);
      write_csv("pressure_words.csv", words);
      out["separated"] = io::to_json(est);
    }
    if (const auto c = n.optional_child("caratheodory")) {
      const auto cs = caratheodory_settings(*c);
      const auto est = caratheodory_pressure(sys(), potential_, classifier(c->optional_child("classifier")), cs,
                                             seed_for(task::caratheodory));
      warn_all(est.warnings, "caratheodory");
      out["caratheodory"] = io::to_json(est);
    }
    return out;
  }

  Json entropy() {
    const Node n = root_.child("entropy");
    n.allow({"cells", "depth", "samples", "candidates"});
    const auto es = entropy_settings(n);
    validate_partition(es.cells, zooming_config().delta);
    const auto cands = candidates(n.list("candidates"), potential_, task::candidates);
    if (cands.empty()) throw ConfigError(n.path() + ": no candidates");
    Json list = Json::array();
    io::Csv table({"candidate", "depth", "block_entropy", "standard_error"});
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto& m = cands[i];
      const int cells = m.kind == MeasureCandidate::Kind::ulam ? m.model->cells : es.cells;
      const auto est = entropy_estimate(m, sys(), cells, es.depth, es.samples, seed_for(task::entropy + i), workers());
      for (std::size_t d = 0; d < est.depth_entropy.size(); ++d)
        table.row(m.label, static_cast<int>(d + 1), est.depth_entropy[d], est.depth_error[d]);
      Json j = io::to_json(est);
      j["candidate"] = io::to_json(m);
      j["integral"] = io::num(birkhoff_integral(m, potential_));
      j["cells"] = cells;
      list.push_back(j);
    }
    write_csv("entropy_table.csv", table);
    return {{"candidates", list}, {"potential", potential_.describe()}};
  }

  Json equilibrium() {
    const auto s = equilibrium_settings();
    auto m = model(s.cells);
    for (std::size_t sym = 0; sym < m->alphabet(); ++sym)
      if (!m->degenerate_rows[sym].empty())
        warn("ulam: symbol " + std::to_string(sym) + " has " + std::to_string(m->degenerate_rows[sym].size()) +
             " degenerate rows");
    const auto co = cocycle_pressure(*m, sys().base(), potential_, s.words, s.length, seed_for(task::cocycle), workers());
    auto eq = equilibrium_candidate(m, sys().base(), potential_, s.words, s.lookahead, seed_for(task::equilibrium),
                                    workers());
    warn_all(eq.warnings, "equilibrium");
    io::Csv weights({"cell", "center", "weight"});
    for (int i = 0; i < m->cells; ++i) weights.row(i, m->center(i), eq.candidate.weights[i]);
    write_csv("equilibrium_weights.csv", weights);
    write_json("ulam_model.json", io::to_json(*m));
    Json out = {{"cells", s.cells},
                {"cocycle", io::to_json(co)},
                {"candidate", io::to_json(eq.candidate)},
                {"convergence_tv", io::num(eq.convergence_tv)},
                {"stationarity_defect", io::num(stationarity_defect(*m, eq.candidate.weights))},
                {"potential", potential_.describe()}};
    if (s.compare_half && s.cells >= 4) {
      auto half = model(s.cells / 2);
      const auto co_half =
          cocycle_pressure(*half, sys().base(), potential_, s.words, s.length, seed_for(task::cocycle), workers());
      const auto eq_half = equilibrium_candidate(half, sys().base(), potential_, s.words, s.lookahead,
                                                 seed_for(task::equilibrium), workers());
      const auto coarse = cell_weights(eq.candidate, s.cells / 2);
      out["half_resolution"] = {{"cells", s.cells / 2},
                                {"cocycle", io::num(co_half.value)},
                                {"cocycle_difference", io::num(co.value - co_half.value)},
                                {"weights_tv", io::num(total_variation(coarse, eq_half.candidate.weights))}};
    }
    return out;
  }

  Json potential_gap() {
    const Node n = root_.child("potential_gap");
    n.allow({"fixed_point", "zooming_family", "non_zooming_family", "flags", "entropy", "hyperbolicity"});
    FlagSettings fs;
    fs.zooming = zooming_config();
    if (const auto f = n.optional_child("flags")) {
      f->allow({"threshold", "length", "points", "agreement"});
      fs.threshold = f->get<double>("threshold", fs.threshold);
      fs.length = f->get<std::size_t>("length", fs.length);
      fs.points = f->get<std::size_t>("points", fs.points);
      fs.agreement = f->get<double>("agreement", fs.agreement);
    }
    const auto es = entropy_settings(n.optional_child("entropy"));
    const auto zooming = candidates(n.list("zooming_family"), potential_, task::candidates, &fs);
    const auto non_zooming = candidates(n.list("non_zooming_family"), potential_, task::candidates + 500, &fs);

    std::vector<std::pair<std::string, Potential>> potentials{{"configured", potential_}};
    Json out = Json::object();
    if (const auto f = n.optional_child("fixed_point")) {
      f->allow({"x0", "rho", "h_top", "symbol"});
      const auto fp = construct_fixed_point_potential(sys(), f->get<double>("x0"), f->get<double>("rho"),
                                                      f->get<double>("h_top"), non_zooming, f->maybe<int>("symbol"));
      out["fixed_point"] = {{"k", io::num(fp.k)},
                            {"gap", io::num(fp.gap)},
                            {"family_sup", io::num(fp.family_sup)},
                            {"h_top", io::num(fp.h_top)}};
      potentials.emplace_back("fixed_point", fp.potential);
    }
    Json gaps = Json::object();
    for (std::size_t p = 0; p < potentials.size(); ++p) {
      const auto& [name, phi] = potentials[p];
      const auto rep = zooming_gap(zooming, non_zooming, entropy_plus_integral(sys(), phi, es, seed_for(task::gap)));
      warn_all(rep.warnings, "zooming gap (" + name + ")");
      Json g = {{"zooming_gap", io::to_json(rep)}, {"potential", phi.describe()}};
      if (const auto h = n.optional_child("hyperbolicity")) {
        const auto cs = caratheodory_settings(*h);
        const auto hyp = hyperbolicity_gap(sys(), phi, classifier(h->optional_child("classifier")), cs,
                                           seed_for(task::caratheodory));
        warn_all(hyp.notes, "hyperbolicity (" + name + ")");
        g["hyperbolicity"] = io::to_json(hyp);
      }
      gaps[name] = g;
    }
    out["potentials"] = gaps;
    Json fam = Json::array();
    for (const auto* list : {&zooming, &non_zooming})
      for (const auto& m : *list) fam.push_back({{"label", m.label}, {"flag", to_string(m.flag)}});
    out["candidates"] = fam;
    return out;
  }

  Json verify_vp() {
    const Node n = root_.child("verify_vp");
    n.allow({"tol", "gap_tolerance", "pressure", "candidates", "entropy"});
    const double tol = n.get<double>("tol", 0.05), gap_tol = n.get<double>("gap_tolerance", 0.07);
    const auto source = n.get<std::string>("pressure", "cocycle");
    double pressure_value = 0.0;
    Json reference;
    if (source == "cocycle") {
      const auto s = equilibrium_settings();
      const auto co = cocycle_pressure(*model(s.cells), sys().base(), potential_, s.words, s.length,
                                       seed_for(task::cocycle), workers());
      pressure_value = co.value;
      reference = io::to_json(co);
    } else if (source == "separated") {
      const auto est = pressure_estimate(sys(), potential_, pressure_settings(root_.child("pressure")),
                                         seed_for(task::pressure));
      warn_all(est.warnings, "pressure");
      pressure_value = est.value;
      reference = io::to_json(est);
    } else {
      throw ConfigError(n.path() + ".pressure: expected 'cocycle' or 'separated'");
    }
    const auto cands = candidates(n.list("candidates"), potential_, task::candidates);
    if (cands.empty()) throw ConfigError(n.path() + ": no candidates");
    const auto rep = variational_check(sys(), potential_, cands, pressure_value, tol, gap_tol,
                                       entropy_settings(n.optional_child("entropy")), seed_for(task::entropy));
    if (!rep.passed) warn("verify-vp: verdict fail");
    Json out = io::to_json(rep);
    out["gap_tolerance"] = io::num(gap_tol);
    out["pressure_source"] = source;
    out["reference"] = reference;
    return out;
  }

  Json cfg_;
  Node root_;
  Options opt_;
  std::filesystem::path out_;
  std::uint64_t seed_ = 0;
  std::optional<RandomSystem> sys_;
  std::optional<ZoomingContraction> contraction_;
  Potential potential_;
  std::map<int, std::shared_ptr<const UlamModel>> models_;
  std::vector<std::string> warnings_;
  bool precondition_failed_ = false;
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Runs one command and writes <out>/results.json. Errors go to `err`.
inline int run(const Options& opt, std::ostream& err = std::cerr) {
  Json cfg;
  std::unique_ptr<Run> r;
  try {
    cfg = config::load(opt.config);
    if (std::find(commands().begin(), commands().end(), opt.command) == commands().end())
      throw ConfigError("unknown command '" + opt.command + "'");
    std::filesystem::create_directories(opt.out);
    r = std::make_unique<Run>(cfg, opt);
  } catch (const PreconditionError& e) {
    err << "precondition failure: " << e.what() << "\n";
    return kPreconditionFailure;
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }

  Json results;
  int code = kOk;
  std::string status = "ok";
  try {
    results = r->execute(opt.command);
  } catch (const PreconditionError& e) {
    err << "precondition failure: " << e.what() << "\n";
    results = {{"error", e.what()}};
    code = kPreconditionFailure;
    status = "precondition-failure";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const HorizonError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ResolutionError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  if (code == kOk && r->precondition_failed()) {
    code = kPreconditionFailure;
    status = "precondition-failure";
  }
  if (code == kOk && !r->warnings().empty()) {
    status = "warnings";
    if (opt.strict) code = kStrictWarning;
  }
  for (const auto& w : r->warnings()) err << "warning: " << w << "\n";

  Json doc = {{"command", opt.command},
              {"config_hash", config::config_hash(cfg)},
              {"name", cfg.value("name", "")},
              {"seed", r->seed()},
              {"seed_rule", kSeedRule},
              {"status", status},
              {"exit_code", code},
              {"strict", opt.strict},
              {"warnings", r->warnings()},
              {"results", results}};
  if (opt.timestamp) doc["timestamp"] = utc_timestamp();
  try {
    io::write_json(std::filesystem::path(opt.out) / "results.json", doc);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return code;
}

}  // namespace zoomrds::cli
