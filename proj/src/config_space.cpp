#include "surrobench/config_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace surrobench {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::categorical:
      return "categorical";
    case ParamKind::integer:
      return "integer";
    case ParamKind::real:
      return "real";
  }
  return "?";
}

std::string format_value(const ParamValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::get<std::string>(v);
}

namespace {

double round_half_up(double x) { return std::floor(x + 0.5); }

double numeric_of(const ParamValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw DataError("expected a numeric value, got '" + std::get<std::string>(v) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSpec

bool ParameterSpec::contains(const ParamValue& v) const {
  switch (kind) {
    case ParamKind::categorical: {
      auto* s = std::get_if<std::string>(&v);
      return s && choice_index(*s).has_value();
    }
    case ParamKind::integer: {
      auto* i = std::get_if<std::int64_t>(&v);
      return i && static_cast<double>(*i) >= lower && static_cast<double>(*i) <= upper;
    }
    case ParamKind::real: {
      auto* d = std::get_if<double>(&v);
      return d && std::isfinite(*d) && *d >= lower && *d <= upper;
    }
  }
  return false;
}

std::optional<std::size_t> ParameterSpec::choice_index(std::string_view label) const {
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (choices[i] == label) return i;
  }
  return std::nullopt;
}

double ParameterSpec::to_unit(const ParamValue& v) const {
  const double x = numeric_of(v);
  if (log_scale) return (std::log(x) - std::log(lower)) / (std::log(upper) - std::log(lower));
  return (x - lower) / (upper - lower);
}

ParamValue ParameterSpec::from_unit(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  double x = log_scale ? std::exp(std::log(lower) + u * (std::log(upper) - std::log(lower)))
                       : lower + u * (upper - lower);
  if (kind == ParamKind::integer) {
    x = std::clamp(round_half_up(x), lower, upper);
    return static_cast<std::int64_t>(x);
  }
  return std::clamp(x, lower, upper);
}

ParamValue ParameterSpec::fallback_value() const {
  if (default_value) return *default_value;
  if (kind == ParamKind::categorical) return choices.front();
  return from_unit(0.5);
}

// ---------------------------------------------------------------------------
// Configuration

const ParamValue* Configuration::find(std::string_view name) const {
  auto it = values_.find(name);
  return it == values_.end() ? nullptr : &it->second;
}

const ParamValue& Configuration::at(std::string_view name) const {
  auto* v = find(name);
  if (!v) throw DataError("configuration has no value for '" + std::string(name) + "'");
  return *v;
}

void Configuration::erase(std::string_view name) {
  auto it = values_.find(name);
  if (it != values_.end()) values_.erase(it);
}

nlohmann::json Configuration::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, v] : values_) {
    std::visit([&](const auto& x) { j[name] = x; }, v);
  }
  return j;
}

// ---------------------------------------------------------------------------
// ConfigurationSpace

ConfigurationSpace::ConfigurationSpace(std::vector<ParameterSpec> params, std::vector<Condition> conditions)
    : params_(std::move(params)), conditions_(std::move(conditions)) {
  using Item = SpaceError::Item;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (p.name.empty()) throw SpaceError(Item::parameter, i, "empty parameter name");
    if (!index_.emplace(p.name, i).second) {
      throw SpaceError(Item::parameter, i, "duplicate parameter name '" + p.name + "'");
    }
    if (p.kind == ParamKind::categorical) {
      if (p.choices.empty()) throw SpaceError(Item::parameter, i, "categorical '" + p.name + "' has no values");
      std::set<std::string> seen;
      for (const auto& c : p.choices) {
        if (!seen.insert(c).second) {
          throw SpaceError(Item::parameter, i, "duplicate value '" + c + "' in '" + p.name + "'");
        }
      }
      if (p.log_scale) throw SpaceError(Item::parameter, i, "log scale on categorical '" + p.name + "'");
    } else {
      if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper)) {
        throw SpaceError(Item::parameter, i, "'" + p.name + "' needs finite bounds with lo < hi");
      }
      if (p.log_scale && !(p.lower > 0)) {
        throw SpaceError(Item::parameter, i, "log-scale '" + p.name + "' needs lo > 0");
      }
      if (p.kind == ParamKind::integer &&
          (std::floor(p.lower) != p.lower || std::floor(p.upper) != p.upper)) {
        throw SpaceError(Item::parameter, i, "integer '" + p.name + "' needs integral bounds");
      }
    }
    if (p.default_value && !p.contains(*p.default_value)) {
      throw SpaceError(Item::parameter, i,
                       "default '" + format_value(*p.default_value) + "' outside the domain of '" + p.name + "'");
    }
  }

  condition_of_.assign(params_.size(), std::nullopt);
  std::vector<std::vector<std::size_t>> children(params_.size());
  for (std::size_t c = 0; c < conditions_.size(); ++c) {
    const auto& cond = conditions_[c];
    auto child = index_of(cond.child);
    auto parent = index_of(cond.parent);
    if (!child) throw SpaceError(Item::condition, c, "condition references unknown parameter '" + cond.child + "'");
    if (!parent) throw SpaceError(Item::condition, c, "condition references unknown parameter '" + cond.parent + "'");
    if (*child == *parent) throw SpaceError(Item::condition, c, "parameter '" + cond.child + "' conditioned on itself");
    if (condition_of_[*child]) {
      throw SpaceError(Item::condition, c, "parameter '" + cond.child + "' has more than one condition");
    }
    if (cond.activating_values.empty()) throw SpaceError(Item::condition, c, "empty activating value set");
    for (const auto& v : cond.activating_values) {
      if (!params_[*parent].contains(v)) {
        throw SpaceError(Item::condition, c,
                         "value '" + format_value(v) + "' is outside the domain of '" + cond.parent + "'");
      }
    }
    condition_of_[*child] = c;
    children[*parent].push_back(*child);
  }

  // Kahn's algorithm; the smallest ready index goes first so the order is canonical.
  std::vector<std::size_t> indegree(params_.size(), 0);
  for (std::size_t i = 0; i < params_.size(); ++i) indegree[i] = condition_of_[i] ? 1 : 0;
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    topo_.push_back(i);
    for (std::size_t ch : children[i]) {
      if (--indegree[ch] == 0) ready.insert(ch);
    }
  }
  if (topo_.size() != params_.size()) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (indegree[i] > 0) {
        throw SpaceError(Item::condition, *condition_of_[i], "cyclic conditions involving '" + params_[i].name + "'");
      }
    }
  }
}

std::optional<std::size_t> ConfigurationSpace::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Condition* ConfigurationSpace::condition_for(std::size_t i) const {
  return condition_of_[i] ? &conditions_[*condition_of_[i]] : nullptr;
}

bool ConfigurationSpace::is_active(std::size_t i, const Configuration& config) const {
  const Condition* cond = condition_for(i);
  if (!cond) return true;
  const ParamValue* pv = config.find(cond->parent);
  if (!pv) return false;
  return std::find(cond->activating_values.begin(), cond->activating_values.end(), *pv) !=
         cond->activating_values.end();
}

void ConfigurationSpace::validate(const Configuration& config) const {
  for (const auto& [name, v] : config) {
    if (!index_of(name)) throw DataError("unknown parameter '" + name + "'");
  }
  for (std::size_t i : topo_) {
    const auto& p = params_[i];
    const ParamValue* v = config.find(p.name);
    if (is_active(i, config)) {
      if (!v) throw DataError("active parameter '" + p.name + "' is missing");
      if (!p.contains(*v)) {
        throw DataError("value '" + format_value(*v) + "' outside the domain of '" + p.name + "'");
      }
    } else if (v) {
      throw DataError("inactive parameter '" + p.name + "' must be absent");
    }
  }
}

bool ConfigurationSpace::is_valid(const Configuration& config) const {
  try {
    validate(config);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

Configuration ConfigurationSpace::default_configuration() const { return normalize_activity(Configuration{}); }

Configuration ConfigurationSpace::normalize_activity(Configuration config) const {
  for (std::size_t i : topo_) {
    const auto& p = params_[i];
    if (is_active(i, config)) {
      if (!config.contains(p.name)) config.set(p.name, p.fallback_value());
    } else {
      config.erase(p.name);
    }
  }
  return config;
}

std::size_t ConfigurationSpace::categorical_count() const {
  return static_cast<std::size_t>(std::count_if(params_.begin(), params_.end(), [](const ParameterSpec& p) {
    return p.kind == ParamKind::categorical;
  }));
}

Configuration ConfigurationSpace::from_json(const nlohmann::json& j) const {
  if (!j.is_object()) throw DataError("configuration must be a JSON object");
  Configuration config;
  for (const auto& [name, value] : j.items()) {
    auto idx = index_of(name);
    if (!idx) throw DataError("unknown parameter '" + name + "'");
    const auto& p = params_[*idx];
    switch (p.kind) {
      case ParamKind::categorical:
        if (value.is_string()) {
          config.set(name, value.get<std::string>());
        } else if (value.is_number_integer()) {
          config.set(name, std::to_string(value.get<std::int64_t>()));
        } else {
          throw DataError("categorical '" + name + "' expects a string");
        }
        break;
      case ParamKind::integer:
        if (value.is_number_integer()) {
          config.set(name, value.get<std::int64_t>());
        } else if (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>()) {
          config.set(name, static_cast<std::int64_t>(value.get<double>()));
        } else {
          throw DataError("integer '" + name + "' expects an integral number");
        }
        break;
      case ParamKind::real:
        if (!value.is_number()) throw DataError("real '" + name + "' expects a number");
        config.set(name, value.get<double>());
        break;
    }
  }
  validate(config);
  return config;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct Token {
  std::string text;
  std::size_t column;
  bool punct;
};

constexpr std::string_view kPunct = "{}[](),|";

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (kPunct.find(c) != std::string_view::npos) {
      out.push_back({std::string(1, c), i + 1, true});
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#' &&
           kPunct.find(line[i]) == std::string_view::npos) {
      ++i;
    }
    out.push_back({std::string(line.substr(start, i - start)), start + 1, false});
  }
  return out;
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, std::size_t line, std::size_t line_length)
      : tokens_(std::move(tokens)), line_(line), eol_column_(line_length + 1) {}

  bool at_end() const { return pos_ >= tokens_.size(); }
  bool peek_punct(char c) const { return !at_end() && tokens_[pos_].punct && tokens_[pos_].text[0] == c; }

  const Token& word(std::string_view what) {
    if (at_end() || tokens_[pos_].punct) fail("expected " + std::string(what));
    return tokens_[pos_++];
  }
  void punct(char c) {
    if (!peek_punct(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void end() {
    if (!at_end()) fail("unexpected '" + tokens_[pos_].text + "'");
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(line_, at_end() ? eol_column_ : tokens_[pos_].column, message);
  }
  [[noreturn]] void fail_at(const Token& tok, const std::string& message) const {
    throw ParseError(line_, tok.column, message);
  }

  std::vector<Token> braced_list() {
    punct('{');
    std::vector<Token> values;
    values.push_back(word("a value"));
    while (peek_punct(',')) {
      punct(',');
      values.push_back(word("a value"));
    }
    punct('}');
    return values;
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t eol_column_;
};

struct PendingCondition {
  std::string child;
  std::string parent;
  std::vector<Token> values;
  std::size_t line;
};

ParamValue parse_typed(const ParameterSpec& p, const Token& tok, const LineParser& lp) {
  switch (p.kind) {
    case ParamKind::categorical:
      return tok.text;
    case ParamKind::integer:
      if (auto v = parse_int(tok.text)) return *v;
      lp.fail_at(tok, "expected an integer, got '" + tok.text + "'");
    case ParamKind::real:
      if (auto v = parse_double(tok.text); v && std::isfinite(*v)) return *v;
      lp.fail_at(tok, "expected a number, got '" + tok.text + "'");
  }
  lp.fail_at(tok, "bad value");
}

}  // namespace

ConfigurationSpace parse_space(std::string_view text) {
  std::vector<ParameterSpec> params;
  std::vector<std::size_t> param_lines;
  std::vector<PendingCondition> pending;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = nl + 1;
    ++line_no;

    LineParser lp(tokenize(line), line_no, line.size());
    if (lp.at_end()) continue;
    const Token name = lp.word("a parameter name");

    if (lp.peek_punct('|')) {
      lp.punct('|');
      const Token parent = lp.word("a parent parameter name");
      const Token in = lp.word("'in'");
      if (in.text != "in") lp.fail_at(in, "expected 'in'");
      auto values = lp.braced_list();
      lp.end();
      pending.push_back({name.text, parent.text, std::move(values), line_no});
      continue;
    }

    const Token kind = lp.word("a parameter type");
    ParameterSpec p;
    p.name = name.text;
    std::optional<Token> default_tok;
    if (kind.text == "categorical") {
      p.kind = ParamKind::categorical;
      for (const auto& tok : lp.braced_list()) p.choices.push_back(tok.text);
      if (lp.peek_punct('[')) {
        lp.punct('[');
        default_tok = lp.word("a default value");
        lp.punct(']');
      }
    } else if (kind.text == "integer" || kind.text == "real") {
      p.kind = kind.text == "integer" ? ParamKind::integer : ParamKind::real;
      lp.punct('[');
      const Token lo = lp.word("a lower bound");
      lp.punct(',');
      const Token hi = lp.word("an upper bound");
      lp.punct(']');
      p.lower = numeric_of(parse_typed(p, lo, lp));
      p.upper = numeric_of(parse_typed(p, hi, lp));
      if (lp.peek_punct('[')) {
        lp.punct('[');
        default_tok = lp.word("a default value");
        lp.punct(']');
      }
      if (lp.peek_punct('(')) {
        lp.punct('(');
        const Token flag = lp.word("'log'");
        if (flag.text != "log") lp.fail_at(flag, "expected 'log'");
        lp.punct(')');
        p.log_scale = true;
      }
    } else {
      lp.fail_at(kind, "unknown parameter type '" + kind.text + "'");
    }
    lp.end();
    if (default_tok) p.default_value = parse_typed(p, *default_tok, lp);
    params.push_back(std::move(p));
    param_lines.push_back(line_no);
  }

  std::vector<Condition> conditions;
  for (const auto& pc : pending) {
    Condition c{pc.child, pc.parent, {}};
    auto parent = std::find_if(params.begin(), params.end(), [&](const ParameterSpec& p) { return p.name == pc.parent; });
    LineParser lp({}, pc.line, 0);
    for (const auto& tok : pc.values) {
      if (parent == params.end()) {
        c.activating_values.push_back(tok.text);
      } else {
        c.activating_values.push_back(parse_typed(*parent, tok, lp));
      }
    }
    conditions.push_back(std::move(c));
  }

  try {
    return ConfigurationSpace(std::move(params), std::move(conditions));
  } catch (const SpaceError& e) {
    const std::size_t line =
        e.item() == SpaceError::Item::parameter ? param_lines[e.index()] : pending[e.index()].line;
    throw ParseError(line, 1, e.what());
  }
}

std::string render_space(const ConfigurationSpace& space) {
  std::string out;
  auto bound = [](const ParameterSpec& p, double v) {
    return p.kind == ParamKind::integer ? std::to_string(static_cast<std::int64_t>(v)) : format_double(v);
  };
  for (const auto& p : space.parameters()) {
    out += p.name;
    out += ' ';
    out += to_string(p.kind);
    if (p.kind == ParamKind::categorical) {
      out += " {";
      for (std::size_t i = 0; i < p.choices.size(); ++i) {
        if (i) out += ',';
        out += p.choices[i];
      }
      out += '}';
    } else {
      out += " [" + bound(p, p.lower) + ", " + bound(p, p.upper) + "]";
    }
    if (p.default_value) out += " [" + format_value(*p.default_value) + "]";
    if (p.log_scale) out += " (log)";
    out += '\n';
  }
  for (const auto& c : space.conditions()) {
    out += c.child + " | " + c.parent + " in {";
    for (std::size_t i = 0; i < c.activating_values.size(); ++i) {
      if (i) out += ',';
      out += format_value(c.activating_values[i]);
    }
    out += "}\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling, imputation, encoding

Configuration sample_uniform(const ConfigurationSpace& space, Random& rand) {
  Configuration config;
  for (std::size_t i : space.topological_order()) {
    if (!space.is_active(i, config)) continue;
    const auto& p = space.parameter(i);
    switch (p.kind) {
      case ParamKind::categorical:
        config.set(p.name, p.choices[rand.index(p.choices.size())]);
        break;
      case ParamKind::integer:
        if (p.log_scale) {
          config.set(p.name, p.from_unit(rand.uniform()));
        } else {
          config.set(p.name, rand.integer(static_cast<std::int64_t>(p.lower), static_cast<std::int64_t>(p.upper)));
        }
        break;
      case ParamKind::real:
        config.set(p.name, p.from_unit(rand.uniform()));
        break;
    }
  }
  return config;
}

Configuration impute_inactive(const ConfigurationSpace& space, const Configuration& config) {
  Configuration out = config;
  for (const auto& p : space.parameters()) {
    if (!out.contains(p.name)) out.set(p.name, p.fallback_value());
  }
  return out;
}

namespace {

void check_feature_dim(std::span<const double> features, std::size_t feature_dim) {
  if (features.size() != feature_dim) {
    throw DataError("feature vector has length " + std::to_string(features.size()) + ", instance set declares " +
                    std::to_string(feature_dim));
  }
}

}  // namespace

std::vector<double> encode(const ConfigurationSpace& space, const Configuration& config,
                           std::span<const double> features, std::size_t feature_dim) {
  check_feature_dim(features, feature_dim);
  std::vector<double> out;
  out.reserve(space.size() + feature_dim);
  for (const auto& p : space.parameters()) {
    const ParamValue& v = config.at(p.name);
    if (p.kind == ParamKind::categorical) {
      auto idx = p.choice_index(std::get<std::string>(v));
      if (!idx) throw DataError("unknown category for '" + p.name + "'");
      out.push_back(static_cast<double>(*idx));
    } else {
      out.push_back(p.to_unit(v));
    }
  }
  out.insert(out.end(), features.begin(), features.end());
  return out;
}

std::vector<double> encode_one_hot(const ConfigurationSpace& space, const Configuration& config,
                                   std::span<const double> features, std::size_t feature_dim) {
  check_feature_dim(features, feature_dim);
  std::vector<double> out;
  for (const auto& p : space.parameters()) {
    const ParamValue& v = config.at(p.name);
    if (p.kind == ParamKind::categorical) {
      auto idx = p.choice_index(std::get<std::string>(v));
      if (!idx) throw DataError("unknown category for '" + p.name + "'");
      for (std::size_t k = 0; k < p.choices.size(); ++k) out.push_back(k == *idx ? 1.0 : 0.0);
    } else {
      out.push_back(p.to_unit(v));
    }
  }
  out.insert(out.end(), features.begin(), features.end());
  return out;
}

std::vector<std::uint32_t> column_cardinalities(const ConfigurationSpace& space, std::size_t feature_dim) {
  std::vector<std::uint32_t> out;
  for (const auto& p : space.parameters()) {
    out.push_back(p.kind == ParamKind::categorical ? static_cast<std::uint32_t>(p.choices.size()) : 0u);
  }
  out.resize(out.size() + feature_dim, 0u);
  return out;
}

// ---------------------------------------------------------------------------
// Neighbourhood

std::vector<Configuration> neighbors(const ConfigurationSpace& space, const Configuration& config, Random& rand,
                                     const NeighborOptions& opts) {
  std::vector<Configuration> out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.parameter(i);
    const ParamValue* current = config.find(p.name);
    if (!current) continue;
    if (p.kind == ParamKind::categorical) {
      for (const auto& choice : p.choices) {
        if (choice == std::get<std::string>(*current)) continue;
        Configuration n = config;
        n.set(p.name, choice);
        out.push_back(space.normalize_activity(std::move(n)));
      }
      continue;
    }
    const double u = p.to_unit(*current);
    for (std::size_t k = 0; k < opts.numeric_samples; ++k) {
      std::optional<ParamValue> next;
      for (int attempt = 0; attempt < 100 && !next; ++attempt) {
        const double step = opts.step_scale * rand.normal();
        for (double cand : {u + step, u - step}) {
          ParamValue v = p.from_unit(cand);
          if (v != *current) {
            next = v;
            break;
          }
        }
      }
      if (!next && p.kind == ParamKind::integer) {
        // Step too small to move off the current integer: take the adjacent value.
        const auto cur = std::get<std::int64_t>(*current);
        next = static_cast<double>(cur) < p.upper ? cur + 1 : cur - 1;
      }
      if (!next) continue;
      Configuration n = config;
      n.set(p.name, *next);
      out.push_back(space.normalize_activity(std::move(n)));
    }
  }
  return out;
}

}  // namespace surrobench
