#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomrds/contraction.hpp"
#include "zoomrds/equilibrium.hpp"
#include "zoomrds/errors.hpp"
#include "zoomrds/measures.hpp"
#include "zoomrds/potentials.hpp"
#include "zoomrds/pressure.hpp"
#include "zoomrds/system.hpp"
#include "zoomrds/ulam.hpp"
#include "zoomrds/zooming.hpp"

namespace zoomrds::io {

using Json = nlohmann::json;

// Non-finite values become the strings "inf", "-inf", "nan".
inline Json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// Shortest round-trip text.
inline std::string text(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}
inline std::string text(long long x) { return std::to_string(x); }
inline std::string text(int x) { return std::to_string(x); }
inline std::string text(std::size_t x) { return std::to_string(x); }
inline std::string text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... T>
  void row(const T&... cells) {
    if (sizeof...(T) != header_.size()) throw Error("CSV row width does not match header");
    std::vector<std::string> r;
    (r.push_back(text(cells)), ...);
    rows_.push_back(std::move(r));
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// step, symbol, x, log_deriv, birkhoff_sum; the final row carries x_n only.
inline Csv orbit_csv(const OrbitRecord& r) {
  Csv csv({"step", "symbol", "x", "log_deriv", "birkhoff_sum"});
  for (std::size_t i = 0; i <= r.length(); ++i) {
    const bool last = i == r.length();
    const std::string symbol = last ? "" : std::to_string(r.word[i]);
    const std::string ld = last || !r.log_derivs[i] ? "" : text(*r.log_derivs[i]);
    const std::string bs = r.birkhoff.empty() ? "" : text(r.birkhoff[i]);
    csv.row(i, symbol, r.points[i], ld, bs);
  }
  return csv;
}

inline Json to_json(const AxiomReport& r) {
  Json axioms = Json::array();
  for (const auto& a : r.axioms)
    axioms.push_back({{"name", a.name}, {"passed", a.passed}, {"counterexample", a.counterexample},
                      {"observed", num(a.observed)}});
  return {{"axioms", axioms}, {"passed", r.all_passed()}};
}

inline Json to_json(const ZoomingReport& r) {
  Json pre = Json::array();
  for (const auto& [a, b] : r.preballs) pre.push_back({num(a), num(b)});
  return {{"length", r.length},         {"times", r.times},
          {"preballs", pre},            {"frequency", num(r.frequency)},
          {"frequency_half", num(r.frequency_half)}, {"method", r.method},
          {"near_misses", r.near_misses}, {"candidates", r.candidates},
          {"uncertified", r.uncertified}};
}

inline Json to_json(const ExpansivityReport& r) {
  return {{"pairs", r.pairs},         {"degenerate", r.degenerate}, {"separated", r.separated},
          {"fraction", num(r.fraction)}, {"max_time", r.max_time}};
}

inline Json to_json(const PressureEstimate& e) {
  Json table = Json::array();
  for (const auto& c : e.table)
    table.push_back({{"n", c.n},
                     {"eps", num(c.eps)},
                     {"mean", num(c.mean)},
                     {"standard_error", num(c.standard_error)},
                     {"mean_selected", num(c.mean_selected)}});
  return {{"value", num(e.value)},        {"standard_error", num(e.standard_error)},
          {"n_used", e.n_used},           {"eps_used", num(e.eps_used)},
          {"samples", e.samples},         {"table", table},
          {"per_word", nums(e.per_word)}, {"warnings", e.warnings}};
}

inline Json to_json(const CaratheodoryEstimate& e) {
  return {{"value", num(e.value)},         {"standard_error", num(e.standard_error)},
          {"per_word", nums(e.per_word)},  {"level_hi", e.level_hi},
          {"in_points", e.in_points},      {"empty", e.empty},
          {"estimate", true},              {"warnings", e.warnings}};
}

inline Json to_json(const CocycleEstimate& e) {
  return {{"value", num(e.value)},
          {"standard_error", num(e.standard_error)},
          {"per_word", nums(e.per_word)},
          {"length", e.length},
          {"warmup", e.warmup}};
}

inline Json to_json(const EntropyEstimate& e) {
  return {{"value", num(e.value)},
          {"depth_entropy", nums(e.depth_entropy)},
          {"depth_error", nums(e.depth_error)},
          {"samples", e.samples}};
}

// Kind, parameters and weights; Ulam weights are listed per cell.
inline Json to_json(const MeasureCandidate& m) {
  Json j = {{"kind", to_string(m.kind)}, {"label", m.label}, {"flag", to_string(m.flag)}};
  switch (m.kind) {
    case MeasureCandidate::Kind::dirac:
      j["x0"] = num(m.points[0]);
      if (m.symbol) j["symbol"] = *m.symbol;
      break;
    case MeasureCandidate::Kind::periodic:
      j["points"] = nums(m.points);
      j["cycle"] = m.word;
      break;
    case MeasureCandidate::Kind::empirical:
      j["x0"] = num(m.points[0]);
      j["length"] = m.word.size();
      j["burn_in"] = m.first;
      break;
    case MeasureCandidate::Kind::ulam:
      j["cells"] = m.model->cells;
      j["weights"] = nums(m.weights);
      j["lookahead"] = m.lookahead;
      if (m.potential) j["potential"] = m.potential->describe();
      break;
  }
  return j;
}

inline Json to_json(const VariationalReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"label", e.label},
                       {"kind", e.kind},
                       {"flag", to_string(e.flag)},
                       {"entropy", num(e.entropy)},
                       {"integral", num(e.integral)},
                       {"value", num(e.value)}});
  return {{"entries", entries},
          {"pressure", num(r.pressure)},
          {"tolerance", num(r.tolerance)},
          {"best", r.entries.empty() ? "" : r.entries[r.best].label},
          {"best_gap", num(r.best_gap)},
          {"max_excess", num(r.max_excess)},
          {"verdict", r.passed ? "pass" : "fail"}};
}

inline Json to_json(const GapReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"label", e.label},
                       {"family", e.zooming_family ? "zooming" : "non-zooming"},
                       {"flag", to_string(e.flag)},
                       {"value", num(e.value)}});
  return {{"gap", num(r.gap)},
          {"best_zooming", num(r.best_zooming)},
          {"best_non_zooming", num(r.best_non_zooming)},
          {"best_zooming_label", r.best_zooming_label},
          {"best_non_zooming_label", r.best_non_zooming_label},
          {"entries", entries},
          {"excluded", r.excluded},
          {"warnings", r.warnings}};
}

inline Json to_json(const HyperbolicityReport& r) {
  return {{"gap", num(r.gap)},
          {"pressure_in", num(r.pressure_in)},
          {"pressure_out", num(r.pressure_out)},
          {"pressure_full", num(r.pressure_full)},
          {"consistency", num(r.consistency)},
          {"notes", r.notes}};
}

// Dimensions and per-symbol sparse triplets (row, column, value) of A_s.
inline Json to_json(const UlamModel& m) {
  Json symbols = Json::array();
  for (std::size_t s = 0; s < m.alphabet(); ++s) {
    Json triplets = Json::array();
    const SparseMatrix& a = m.transition[s];
    for (int i = 0; i < a.rows; ++i)
      for (int k = a.start[i]; k < a.start[i + 1]; ++k) triplets.push_back({i, a.index[k], num(a.value[k])});
    symbols.push_back({{"symbol", s},
                       {"probability", num(m.probabilities[s])},
                       {"transition", triplets},
                       {"expansion", nums(m.expansion[s])},
                       {"degenerate_rows", m.degenerate_rows[s]}});
  }
  return {{"cells", m.cells}, {"phase", to_string(m.phase)}, {"symbols", symbols}};
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace zoomrds::io
