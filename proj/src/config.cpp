#include "chaoslab/config.hpp"

#include "chaoslab/artifacts.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace chaoslab {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid configuration";
  for (const auto& s : issues) out += "\n  " + s;
  return out;
}

// ---------------------------------------------------------------- TOML subset

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* current = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        current = header(root);
      } else {
        key_value(*current);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError({"line " + std::to_string(line_) + ": " + what});
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (true) {
      skip_ws();
      skip_comment();
      if (!eof() && peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  // whitespace, comments and newlines (inside arrays / inline tables)
  void skip_all() {
    while (true) {
      skip_ws();
      skip_comment();
      if (!eof() && peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
    get();
  }

  std::string bare_or_quoted_key() {
    skip_ws();
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
      k += s_[pos_++];
    if (k.empty()) fail("expected a key");
    return k;
  }
  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{bare_or_quoted_key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      parts.push_back(bare_or_quoted_key());
      skip_ws();
    }
    return parts;
  }

  json* header(json& root) {
    ++pos_;
    const bool array = peek() == '[';
    if (array) ++pos_;
    const auto parts = dotted_key();
    if (peek() != ']') fail("expected ']'");
    ++pos_;
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      ++pos_;
    }
    json* node = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array() && !child.empty() && child.back().is_object()) {
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("key '" + parts[i] + "' is not a table");
      }
    }
    json& leaf = (*node)[parts.back()];
    if (array) {
      if (leaf.is_null()) leaf = json::array();
      if (!leaf.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      leaf.push_back(json::object());
      return &leaf.back();
    }
    std::string joined;
    for (const auto& p : parts) joined += (joined.empty() ? "" : ".") + p;
    if (!defined_.insert(joined).second) fail("table [" + joined + "] defined twice");
    if (leaf.is_null()) leaf = json::object();
    if (!leaf.is_object()) fail("'" + parts.back() + "' is not a table");
    return &leaf;
  }

  void key_value(json& table) {
    const auto parts = dotted_key();
    skip_ws();
    if (peek() != '=') fail("expected '=' after key '" + parts.back() + "'");
    ++pos_;
    skip_ws();
    json value = parse_value();
    json* node = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) fail("key '" + parts[i] + "' is not a table");
      node = &child;
    }
    if (node->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*node)[parts.back()] = std::move(value);
  }

  std::string string_value() {
    const char quote = get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (eof()) fail("unterminated string");
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  json number_value() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                      peek() == '-' || peek() == '_'))
      tok += s_[pos_++];
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* first = clean.data();
    const char* last = clean.data() + clean.size();
    if (!clean.empty() && clean[0] == '+') ++first;
    if (is_float) {
      double v = 0.0;
      const auto r = std::from_chars(first, last, v);
      if (r.ec != std::errc() || r.ptr != last) fail("malformed number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    const auto r = std::from_chars(first, last, v);
    if (r.ec != std::errc() || r.ptr != last) fail("malformed value '" + tok + "'");
    return v;
  }

  json parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      skip_all();
      while (peek() != ']') {
        arr.push_back(parse_value());
        skip_all();
        if (peek() == ',') {
          ++pos_;
          skip_all();
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
      ++pos_;
      return arr;
    }
    if (c == '{') {
      ++pos_;
      json obj = json::object();
      skip_ws();
      while (peek() != '}') {
        key_value(obj);
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          skip_ws();
        } else if (peek() != '}') {
          fail("expected ',' or '}' in inline table");
        }
      }
      ++pos_;
      return obj;
    }
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == 'i')
      return number_value();
    fail("expected a value");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> defined_;
};

// ---------------------------------------------------------------- schema

const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"", {"study", "seed", "output", "workers", "kernel", "initial", "pde", "particles", "liouville", "chaos",
            "inequalities", "bench"}},
      {"kernel", {"dimension", "lambda0", "modes"}},
      {"kernel.modes", {"k", "A"}},
      {"initial", {"modes"}},
      {"initial.modes", {"k", "amplitude", "phase"}},
      {"pde", {"points", "dt", "horizon", "snapshots"}},
      {"particles", {"count", "replicas", "dt", "horizon", "snapshots", "method", "drift_factor", "compare_pde",
                     "pde_points", "pde_dt", "bins", "max_l1"}},
      {"liouville", {"particles", "points", "dt", "horizon", "snapshots", "pde_dt"}},
      {"chaos", {"ladder", "replicas", "horizon", "particle_dt", "pde_points", "pde_dt", "bins", "slope_low",
                 "slope_high", "control"}},
      {"inequalities", {"instances", "max_outcomes", "max_particles", "moment_ladder", "moment_samples",
                        "pde_points", "negative_control"}},
      {"bench", {"particles", "check_sizes", "check_states", "repeats", "min_speedup"}},
  };
  return s;
}

const std::map<StudyKind, std::pair<std::string, std::vector<std::string>>>& required_keys() {
  static const std::map<StudyKind, std::pair<std::string, std::vector<std::string>>> r = {
      {StudyKind::kPdeSolve, {"pde", {"points", "dt", "horizon"}}},
      {StudyKind::kParticlesRun, {"particles", {"count", "replicas", "dt", "horizon"}}},
      {StudyKind::kLiouvilleRun, {"liouville", {"particles", "points", "dt", "horizon"}}},
      {StudyKind::kChaosStudy, {"chaos", {"ladder", "replicas", "horizon"}}},
      {StudyKind::kVerifyInequalities, {"inequalities", {}}},
      {StudyKind::kBenchForces, {"bench", {"particles"}}},
  };
  return r;
}

class Reader {
 public:
  std::vector<std::string> issues;

  void check_keys(const json& table, const std::string& path) {
    const auto& allowed = schema().at(path);
    for (const auto& [key, value] : table.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
      std::string best;
      std::size_t best_d = std::numeric_limits<std::size_t>::max();
      for (const auto& a : allowed) {
        const auto dist = edit_distance(key, a);
        if (dist < best_d) {
          best_d = dist;
          best = a;
        }
      }
      issues.push_back(qualify(path, key) + ": unknown key (did you mean '" + best + "'?)");
    }
  }

  static std::string qualify(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const json* table(const json& parent, const std::string& key, const std::string& path) {
    if (!parent.contains(key)) return nullptr;
    const json& t = parent.at(key);
    if (!t.is_object()) {
      issues.push_back(qualify(path, key) + ": expected a table");
      return nullptr;
    }
    return &t;
  }

  template <class T>
  void get(const json* t, const std::string& path, const std::string& key, T& out) {
    if (!t || !t->contains(key)) return;
    read(t->at(key), qualify(path, key), out);
  }

  void read(const json& v, const std::string& where, double& out) {
    if (!v.is_number()) return type_issue(where, "number");
    out = v.get<double>();
  }
  void read(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer()) return type_issue(where, "integer");
    out = v.get<int>();
  }
  void read(const json& v, const std::string& where, std::size_t& out) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) return type_issue(where, "non-negative integer");
    out = v.get<std::size_t>();
  }
  void read(const json& v, const std::string& where, unsigned& out) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) return type_issue(where, "positive integer");
    out = v.get<unsigned>();
  }
  void read(const json& v, const std::string& where, bool& out) {
    if (!v.is_boolean()) return type_issue(where, "boolean");
    out = v.get<bool>();
  }
  void read(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string()) return type_issue(where, "string");
    out = v.get<std::string>();
  }
  template <class T>
  void read(const json& v, const std::string& where, std::vector<T>& out) {
    if (!v.is_array()) return type_issue(where, "array");
    std::vector<T> tmp(v.size());
    const std::size_t before = issues.size();
    for (std::size_t i = 0; i < v.size(); ++i) read(v[i], where + "[" + std::to_string(i) + "]", tmp[i]);
    if (issues.size() == before) out = std::move(tmp);
  }

  void type_issue(const std::string& where, const char* expected) {
    issues.push_back(where + ": expected " + std::string(expected));
  }
};

KernelSpec read_kernel(Reader& r, const json* t) {
  KernelSpec spec;
  if (!t) {
    r.issues.push_back("kernel: missing required table");
    return spec;
  }
  r.check_keys(*t, "kernel");
  for (const char* key : {"dimension", "lambda0"})
    if (!t->contains(key)) r.issues.push_back(std::string("kernel.") + key + ": missing required key");
  r.get(t, "kernel", "dimension", spec.dimension);
  r.get(t, "kernel", "lambda0", spec.base_level);
  const int d = spec.dimension;
  if (d < 1 || d > 3) {
    r.issues.push_back("kernel.dimension: must be 1, 2 or 3");
    return spec;
  }
  if (!t->contains("modes")) return spec;
  const json& modes = t->at("modes");
  if (!modes.is_array()) {
    r.issues.push_back("kernel.modes: expected an array of tables");
    return spec;
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const std::string where = "kernel.modes[" + std::to_string(m) + "]";
    if (!modes[m].is_object()) {
      r.issues.push_back(where + ": expected a table");
      continue;
    }
    r.check_keys(modes[m], "kernel.modes");
    std::vector<int> k;
    std::vector<double> a;
    for (const char* key : {"k", "A"})
      if (!modes[m].contains(key)) r.issues.push_back(where + "." + key + ": missing required key");
    r.get(&modes[m], where, "k", k);
    r.get(&modes[m], where, "A", a);
    if (k.size() != static_cast<std::size_t>(d)) {
      if (modes[m].contains("k")) r.issues.push_back(where + ".k: expected " + std::to_string(d) + " entries");
      continue;
    }
    if (a.size() != static_cast<std::size_t>(d * d)) {
      if (modes[m].contains("A"))
        r.issues.push_back(where + ".A: expected " + std::to_string(d * d) + " row-major entries");
      continue;
    }
    KernelMode mode;
    for (int i = 0; i < d; ++i) mode.wave[i] = k[i];
    mode.coeff = Mat(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) mode.coeff(i, j) = a[i * d + j];
    spec.modes.push_back(mode);
  }
  return spec;
}

InitialProfile read_initial(Reader& r, const json* t, int dimension) {
  InitialProfile p;
  p.dimension = dimension;
  if (!t) return p;
  r.check_keys(*t, "initial");
  if (!t->contains("modes")) return p;
  const json& modes = t->at("modes");
  if (!modes.is_array()) {
    r.issues.push_back("initial.modes: expected an array of tables");
    return p;
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const std::string where = "initial.modes[" + std::to_string(m) + "]";
    if (!modes[m].is_object()) {
      r.issues.push_back(where + ": expected a table");
      continue;
    }
    r.check_keys(modes[m], "initial.modes");
    for (const char* key : {"k", "amplitude"})
      if (!modes[m].contains(key)) r.issues.push_back(where + "." + key + ": missing required key");
    std::vector<int> k;
    CosineMode mode;
    r.get(&modes[m], where, "k", k);
    r.get(&modes[m], where, "amplitude", mode.amplitude);
    r.get(&modes[m], where, "phase", mode.phase);
    if (k.size() != static_cast<std::size_t>(dimension)) {
      if (modes[m].contains("k"))
        r.issues.push_back(where + ".k: expected " + std::to_string(dimension) + " entries");
      continue;
    }
    for (int i = 0; i < dimension; ++i) mode.wave[i] = k[i];
    p.modes.push_back(mode);
  }
  return p;
}

json kernel_json(const KernelSpec& spec) {
  json modes = json::array();
  for (const auto& m : spec.modes) {
    json k = json::array(), a = json::array();
    for (int i = 0; i < spec.dimension; ++i) k.push_back(m.wave[i]);
    for (int i = 0; i < spec.dimension; ++i)
      for (int j = 0; j < spec.dimension; ++j) a.push_back(m.coeff(i, j));
    modes.push_back({{"k", k}, {"A", a}});
  }
  return {{"dimension", spec.dimension}, {"lambda0", spec.base_level}, {"modes", modes}};
}

json initial_json(const InitialProfile& p) {
  json modes = json::array();
  for (const auto& m : p.modes) {
    json k = json::array();
    for (int i = 0; i < p.dimension; ++i) k.push_back(m.wave[i]);
    modes.push_back({{"k", k}, {"amplitude", m.amplitude}, {"phase", m.phase}});
  }
  return {{"modes", modes}};
}

json settings_json(const StudyConfig& c) {
  switch (c.kind) {
    case StudyKind::kPdeSolve:
      return {{"points", c.pde.points}, {"dt", c.pde.dt}, {"horizon", c.pde.horizon}, {"snapshots", c.pde.snapshots}};
    case StudyKind::kParticlesRun: {
      const auto& p = c.particles;
      return {{"count", p.count},
              {"replicas", p.replicas},
              {"dt", p.dt},
              {"horizon", p.horizon},
              {"snapshots", p.snapshots},
              {"method", p.method == ForceMethod::kNaive ? "naive" : "spectral"},
              {"drift_factor", p.drift_factor},
              {"compare_pde", p.compare_pde},
              {"pde_points", p.pde_points},
              {"pde_dt", p.pde_dt},
              {"bins", p.bins},
              {"max_l1", p.max_l1}};
    }
    case StudyKind::kLiouvilleRun: {
      const auto& l = c.liouville;
      return {{"particles", l.particles}, {"points", l.points}, {"dt", l.dt},
              {"horizon", l.horizon},     {"snapshots", l.snapshots}, {"pde_dt", l.pde_dt}};
    }
    case StudyKind::kChaosStudy: {
      const auto& s = c.chaos;
      return {{"ladder", s.ladder},         {"replicas", s.replicas},     {"horizon", s.horizon},
              {"particle_dt", s.particle_dt}, {"pde_points", s.pde_points}, {"pde_dt", s.pde_dt},
              {"bins", s.bins},             {"slope_low", s.slope_low},   {"slope_high", s.slope_high},
              {"control", s.control}};
    }
    case StudyKind::kVerifyInequalities: {
      const auto& s = c.inequalities;
      return {{"instances", s.instances},         {"max_outcomes", s.max_outcomes},
              {"max_particles", s.max_particles}, {"moment_ladder", s.moment_ladder},
              {"moment_samples", s.moment_samples}, {"pde_points", s.pde_points},
              {"negative_control", s.negative_control}};
    }
    case StudyKind::kBenchForces: {
      const auto& s = c.bench;
      return {{"particles", s.particles}, {"check_sizes", s.check_sizes}, {"check_states", s.check_states},
              {"repeats", s.repeats},     {"min_speedup", s.min_speedup}};
    }
  }
  return {};
}

std::string section_name(StudyKind kind) { return required_keys().at(kind).first; }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::kPdeSolve: return "pde-solve";
    case StudyKind::kParticlesRun: return "particles-run";
    case StudyKind::kLiouvilleRun: return "liouville-run";
    case StudyKind::kChaosStudy: return "chaos-study";
    case StudyKind::kVerifyInequalities: return "verify-inequalities";
    case StudyKind::kBenchForces: return "bench-forces";
  }
  return "unknown";
}

std::optional<StudyKind> study_kind_from(std::string_view name) {
  for (auto k : {StudyKind::kPdeSolve, StudyKind::kParticlesRun, StudyKind::kLiouvilleRun, StudyKind::kChaosStudy,
                 StudyKind::kVerifyInequalities, StudyKind::kBenchForces})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

StudyConfig config_from_json(const json& doc, std::optional<StudyKind> expected, const ConfigOverrides& overrides) {
  if (!doc.is_object()) throw ConfigError({"document: expected a table"});
  Reader r;
  StudyConfig c;
  r.check_keys(doc, "");

  std::string study;
  r.get(&doc, "", "study", study);
  std::optional<StudyKind> kind = expected;
  if (!study.empty()) {
    const auto named = study_kind_from(study);
    if (!named) {
      r.issues.push_back("study: unknown study kind '" + study + "'");
    } else if (expected && *named != *expected) {
      r.issues.push_back("study: file says '" + study + "' but the command is '" + to_string(*expected) + "'");
    } else {
      kind = named;
    }
  }
  if (!kind && study.empty()) r.issues.push_back("study: missing required key (or give a subcommand)");
  if (kind) c.kind = *kind;

  r.get(&doc, "", "seed", c.seed);
  std::string output;
  r.get(&doc, "", "output", output);
  if (!output.empty()) c.output = output;
  r.get(&doc, "", "workers", c.workers);

  c.kernel = read_kernel(r, r.table(doc, "kernel", ""));
  c.initial = read_initial(r, r.table(doc, "initial", ""), c.kernel.dimension);

  if (const json* t = r.table(doc, "pde", "")) {
    r.check_keys(*t, "pde");
    r.get(t, "pde", "points", c.pde.points);
    r.get(t, "pde", "dt", c.pde.dt);
    r.get(t, "pde", "horizon", c.pde.horizon);
    r.get(t, "pde", "snapshots", c.pde.snapshots);
  }
  if (const json* t = r.table(doc, "particles", "")) {
    auto& p = c.particles;
    r.check_keys(*t, "particles");
    r.get(t, "particles", "count", p.count);
    r.get(t, "particles", "replicas", p.replicas);
    r.get(t, "particles", "dt", p.dt);
    r.get(t, "particles", "horizon", p.horizon);
    r.get(t, "particles", "snapshots", p.snapshots);
    std::string method;
    r.get(t, "particles", "method", method);
    if (method == "naive") p.method = ForceMethod::kNaive;
    else if (!method.empty() && method != "spectral")
      r.issues.push_back("particles.method: expected \"naive\" or \"spectral\"");
    r.get(t, "particles", "drift_factor", p.drift_factor);
    r.get(t, "particles", "compare_pde", p.compare_pde);
    r.get(t, "particles", "pde_points", p.pde_points);
    r.get(t, "particles", "pde_dt", p.pde_dt);
    r.get(t, "particles", "bins", p.bins);
    r.get(t, "particles", "max_l1", p.max_l1);
  }
  if (const json* t = r.table(doc, "liouville", "")) {
    auto& l = c.liouville;
    r.check_keys(*t, "liouville");
    r.get(t, "liouville", "particles", l.particles);
    r.get(t, "liouville", "points", l.points);
    r.get(t, "liouville", "dt", l.dt);
    r.get(t, "liouville", "horizon", l.horizon);
    r.get(t, "liouville", "snapshots", l.snapshots);
    r.get(t, "liouville", "pde_dt", l.pde_dt);
  }
  if (const json* t = r.table(doc, "chaos", "")) {
    auto& s = c.chaos;
    r.check_keys(*t, "chaos");
    r.get(t, "chaos", "ladder", s.ladder);
    r.get(t, "chaos", "replicas", s.replicas);
    r.get(t, "chaos", "horizon", s.horizon);
    r.get(t, "chaos", "particle_dt", s.particle_dt);
    r.get(t, "chaos", "pde_points", s.pde_points);
    r.get(t, "chaos", "pde_dt", s.pde_dt);
    r.get(t, "chaos", "bins", s.bins);
    r.get(t, "chaos", "slope_low", s.slope_low);
    r.get(t, "chaos", "slope_high", s.slope_high);
    r.get(t, "chaos", "control", s.control);
  }
  if (const json* t = r.table(doc, "inequalities", "")) {
    auto& s = c.inequalities;
    r.check_keys(*t, "inequalities");
    r.get(t, "inequalities", "instances", s.instances);
    r.get(t, "inequalities", "max_outcomes", s.max_outcomes);
    r.get(t, "inequalities", "max_particles", s.max_particles);
    r.get(t, "inequalities", "moment_ladder", s.moment_ladder);
    r.get(t, "inequalities", "moment_samples", s.moment_samples);
    r.get(t, "inequalities", "pde_points", s.pde_points);
    r.get(t, "inequalities", "negative_control", s.negative_control);
  }
  if (const json* t = r.table(doc, "bench", "")) {
    auto& s = c.bench;
    r.check_keys(*t, "bench");
    r.get(t, "bench", "particles", s.particles);
    r.get(t, "bench", "check_sizes", s.check_sizes);
    r.get(t, "bench", "check_states", s.check_states);
    r.get(t, "bench", "repeats", s.repeats);
    r.get(t, "bench", "min_speedup", s.min_speedup);
  }

  if (kind) {
    const auto& [section, keys] = required_keys().at(*kind);
    const bool present = doc.contains(section) && doc.at(section).is_object();
    if (!present && !keys.empty()) r.issues.push_back(section + ": missing required table");
    for (const auto& key : keys)
      if (!present || !doc.at(section).contains(key))
        r.issues.push_back(section + "." + key + ": missing required key");
  }

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.output) c.output = *overrides.output;
  if (overrides.workers) c.workers = *overrides.workers;
  if (c.workers < 1) r.issues.push_back("workers: must be >= 1");

  if (!r.issues.empty()) throw ConfigError(r.issues);

  c.canonical = {{"schema_version", 1},
                 {"study", to_string(c.kind)},
                 {"seed", c.seed},
                 {"kernel", kernel_json(c.kernel)},
                 {"initial", initial_json(c.initial)},
                 {section_name(c.kind), settings_json(c)}};
  c.hash = sha256_hex(c.canonical.dump());
  dry_run(c);
  return c;
}

StudyConfig load_config(const std::filesystem::path& path, std::optional<StudyKind> expected,
                        const ConfigOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(parse_toml(buf.str()), expected, overrides);
}

void dry_run(const StudyConfig& c) {
  std::vector<std::string> issues;
  auto expect = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };
  std::optional<KernelField> kernel;
  try {
    kernel = build_kernel(c.kernel);
  } catch (const Error& e) {
    issues.push_back(std::string("kernel: ") + e.what());
  }
  try {
    validate_profile(c.initial);
  } catch (const Error& e) {
    issues.push_back(std::string("initial: ") + e.what());
  }
  const int d = c.kernel.dimension;
  const int maxwave = kernel ? kernel->max_wave_number() : 0;
  auto check_grid = [&](const std::string& where, int dim, int n) {
    try {
      make_grid(dim, n);
    } catch (const Error& e) {
      issues.push_back(where + ": " + e.what());
      return;
    }
    expect(n >= 4 * maxwave, where + ": grid too coarse for the kernel (need >= 4 x max wave number)");
  };
  auto positive = [&](double v, const std::string& where) { expect(v > 0.0 && std::isfinite(v), where + ": must be positive"); };
  auto nonneg = [&](double v, const std::string& where) { expect(v >= 0.0 && std::isfinite(v), where + ": must be >= 0"); };
  auto snapshots_ok = [&](const std::vector<double>& s, double horizon, const std::string& where) {
    for (double t : s) expect(t >= 0.0 && t <= horizon, where + ": snapshot times must lie in [0, horizon]");
    expect(std::is_sorted(s.begin(), s.end()), where + ": snapshot times must be sorted");
  };

  switch (c.kind) {
    case StudyKind::kPdeSolve:
      expect(d <= 2, "kernel.dimension: pde-solve supports d = 1, 2");
      check_grid("pde.points", std::min(d, 2), c.pde.points);
      positive(c.pde.dt, "pde.dt");
      nonneg(c.pde.horizon, "pde.horizon");
      snapshots_ok(c.pde.snapshots, c.pde.horizon, "pde.snapshots");
      break;
    case StudyKind::kParticlesRun: {
      const auto& p = c.particles;
      expect(d <= 2, "kernel.dimension: particle initial data needs d = 1, 2");
      expect(p.count >= 2, "particles.count: need at least 2 particles");
      expect(p.replicas >= 1, "particles.replicas: need at least 1 replica");
      positive(p.dt, "particles.dt");
      nonneg(p.horizon, "particles.horizon");
      snapshots_ok(p.snapshots, p.horizon, "particles.snapshots");
      check_grid("particles.pde_points", std::min(d, 2), p.pde_points);
      positive(p.pde_dt, "particles.pde_dt");
      expect(p.bins >= 4, "particles.bins: need at least 4 bins");
      break;
    }
    case StudyKind::kLiouvilleRun: {
      const auto& l = c.liouville;
      expect(d == 1, "kernel.dimension: liouville-run needs d = 1");
      expect(l.particles == 2 || l.particles == 3, "liouville.particles: must be 2 or 3");
      check_grid("liouville.points", 1, l.points);
      positive(l.dt, "liouville.dt");
      positive(l.pde_dt, "liouville.pde_dt");
      nonneg(l.horizon, "liouville.horizon");
      expect(l.snapshots >= 2, "liouville.snapshots: need at least 2");
      break;
    }
    case StudyKind::kChaosStudy: {
      const auto& s = c.chaos;
      expect(d == 1, "kernel.dimension: chaos-study needs d = 1");
      expect(s.ladder.size() >= 2, "chaos.ladder: need at least 2 particle counts");
      expect(std::is_sorted(s.ladder.begin(), s.ladder.end()) &&
                 std::adjacent_find(s.ladder.begin(), s.ladder.end()) == s.ladder.end(),
             "chaos.ladder: must be strictly increasing");
      expect(s.ladder.empty() || s.ladder.front() >= 2, "chaos.ladder: particle counts must be >= 2");
      expect(s.replicas >= 1, "chaos.replicas: need at least 1 replica");
      positive(s.horizon, "chaos.horizon");
      positive(s.particle_dt, "chaos.particle_dt");
      positive(s.pde_dt, "chaos.pde_dt");
      check_grid("chaos.pde_points", std::min(d, 2), s.pde_points);
      expect(s.bins >= 4, "chaos.bins: need at least 4 bins");
      expect(s.slope_low < s.slope_high, "chaos.slope_low: must be below slope_high");
      break;
    }
    case StudyKind::kVerifyInequalities: {
      const auto& s = c.inequalities;
      expect(d <= 2, "kernel.dimension: verify-inequalities supports d = 1, 2");
      expect(s.max_outcomes >= 2, "inequalities.max_outcomes: must be >= 2");
      expect(s.max_particles >= 1, "inequalities.max_particles: must be >= 1");
      expect(!s.moment_ladder.empty(), "inequalities.moment_ladder: must not be empty");
      for (auto n : s.moment_ladder) expect(n >= 1, "inequalities.moment_ladder: entries must be >= 1");
      expect(s.moment_samples >= 2, "inequalities.moment_samples: need at least 2");
      check_grid("inequalities.pde_points", std::min(d, 2), s.pde_points);
      break;
    }
    case StudyKind::kBenchForces: {
      const auto& s = c.bench;
      expect(s.particles >= 2, "bench.particles: need at least 2");
      for (auto n : s.check_sizes) expect(n >= 2, "bench.check_sizes: entries must be >= 2");
      expect(s.repeats >= 1, "bench.repeats: must be >= 1");
      positive(s.min_speedup, "bench.min_speedup");
      break;
    }
  }
  if (!issues.empty()) throw ConfigError(issues);
}

}  // namespace chaoslab
