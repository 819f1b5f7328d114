#include "bfqr/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "bfqr/errors.hpp"

namespace bfqr {

using nlohmann::json;

const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::kCqr, Method::kGcqr, Method::kLcqr, Method::kBfqr, Method::kBfqrHull};
  return m;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kCqr: return "CQR";
    case Method::kGcqr: return "GCQR";
    case Method::kLcqr: return "LCQR";
    case Method::kBfqr: return "BFQR";
    case Method::kBfqrHull: return "BFQR*";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string up;
  for (char c : name)
    if (!std::isspace(static_cast<unsigned char>(c))) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (Method m : all_methods())
    if (up == to_string(m)) return m;
  if (up == "BFQR-HULL" || up == "BFQRSTAR") return Method::kBfqrHull;
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    std::string tok = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) {
      Method m = parse_method(tok);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

namespace {

std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw ConfigError("bad seed '" + s + "'");
  return std::stoull(s);
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  std::size_t start = 0;
  while (start < t.size()) {
    std::size_t comma = t.find(',', start);
    std::string tok = t.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    auto dash = tok.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_u64(tok));
    } else {
      auto a = parse_u64(tok.substr(0, dash));
      auto b = parse_u64(tok.substr(dash + 1));
      if (b < a) throw ConfigError("descending seed range '" + tok + "'");
      if (b - a > 1000000) throw ConfigError("seed range too large");
      for (auto s = a; s <= b; ++s) out.push_back(s);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (bins < 1) throw ConfigError("bins must be at least 1");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (methods.empty()) throw ConfigError("method list is empty");
  if (dataset.kind == DatasetKind::kCsv) {
    if (dataset.path.empty()) throw ConfigError("csv dataset needs a path");
    if (dataset.schema.label.empty() || dataset.schema.group.empty())
      throw ConfigError("csv schema needs label and group columns");
  }
  if (metrics.gap_bins < 1) throw ConfigError("gap_bins must be at least 1");
  if (optimizer.options.epsilon && !(*optimizer.options.epsilon >= 0.0))
    throw ConfigError("epsilon must be non-negative");
  if (!(optimizer.options.step_floor > 0.0)) throw ConfigError("step_floor must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  split_sizes(1, split);  // rejects bad ratios
}

ExperimentConfig desk_preset() {
  ExperimentConfig c;
  c.dataset.n = 20000;
  c.seeds = parse_seeds("0-19");
  return c;
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string method_list(const std::vector<Method>& ms) {
  std::string s;
  for (Method m : ms) s += (s.empty() ? "" : ",") + std::string(to_string(m));
  return s;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, ExperimentConfig c) {
  reject_unknown(doc, "config",
                 {"preset", "dataset", "alpha", "bins", "methods", "seeds", "split", "model", "optimizer", "metrics",
                  "output", "threads"});
  if (doc.contains("preset")) {
    std::string p;
    read(doc, "preset", p);
    if (p != "desk") throw ConfigError("unknown preset '" + p + "'");
    auto d = desk_preset();
    c.dataset.n = d.dataset.n;
    c.seeds = d.seeds;
  }
  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    reject_unknown(d, "dataset", {"kind", "n", "noise", "abs_scale", "path", "features", "label", "group"});
    std::string kind = c.dataset.kind == DatasetKind::kCsv ? "csv" : "synthetic";
    read(d, "kind", kind);
    if (kind == "synthetic") c.dataset.kind = DatasetKind::kSynthetic;
    else if (kind == "csv") c.dataset.kind = DatasetKind::kCsv;
    else throw ConfigError("unknown dataset kind '" + kind + "'");
    read(d, "n", c.dataset.n);
    if (d.contains("noise")) {
      std::string noise;
      read(d, "noise", noise);
      if (noise == "normal") c.dataset.generator.noise = NoiseKind::kNormal;
      else if (noise == "uniform") c.dataset.generator.noise = NoiseKind::kUniform;
      else throw ConfigError("unknown noise '" + noise + "'");
    }
    read(d, "abs_scale", c.dataset.generator.abs_scale);
    read(d, "path", c.dataset.path);
    read(d, "features", c.dataset.schema.features);
    read(d, "label", c.dataset.schema.label);
    read(d, "group", c.dataset.schema.group);
  }
  read(doc, "alpha", c.alpha);
  read(doc, "bins", c.bins);
  if (doc.contains("methods")) {
    const auto& m = doc.at("methods");
    if (m.is_string()) {
      c.methods = parse_methods(m.get<std::string>());
    } else if (m.is_array()) {
      c.methods.clear();
      for (const auto& e : m) {
        if (!e.is_string()) throw ConfigError("methods must be strings");
        Method mm = parse_method(e.get<std::string>());
        if (std::find(c.methods.begin(), c.methods.end(), mm) == c.methods.end()) c.methods.push_back(mm);
      }
    } else {
      throw ConfigError("methods must be a string or an array");
    }
  }
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    if (s.is_string()) c.seeds = parse_seeds(s.get<std::string>());
    else if (s.is_array()) {
      c.seeds.clear();
      for (const auto& e : s) {
        if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<long long>() >= 0))
          throw ConfigError("seeds must be non-negative integers");
        c.seeds.push_back(e.get<std::uint64_t>());
      }
    } else if (s.is_number_unsigned()) {
      c.seeds = {s.get<std::uint64_t>()};
    } else {
      throw ConfigError("seeds must be a string, integer or array");
    }
  }
  if (doc.contains("split")) {
    std::vector<double> r;
    read(doc, "split", r);
    if (r.size() != 3) throw ConfigError("split needs three ratios");
    c.split = {r[0], r[1], r[2]};
  }
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, "model", {"learning_rate", "iterations", "batch_size", "lower_level", "upper_level", "group_feature"});
    read(m, "learning_rate", c.model.fit.learning_rate);
    read(m, "iterations", c.model.fit.iterations);
    read(m, "batch_size", c.model.fit.batch_size);
    read(m, "lower_level", c.model.levels.lower);
    read(m, "upper_level", c.model.levels.upper);
    read(m, "group_feature", c.model.group_feature);
  }
  if (doc.contains("optimizer")) {
    const auto& o = doc.at("optimizer");
    reject_unknown(o, "optimizer",
                   {"max_iterations", "epsilon", "optimize_on", "weighted_bins", "rank_overflow", "max_candidate_pairs",
                    "step_floor"});
    read(o, "max_iterations", c.optimizer.options.max_iterations);
    if (o.contains("epsilon")) {
      if (o.at("epsilon").is_null()) c.optimizer.options.epsilon.reset();
      else {
        double e = 0;
        read(o, "epsilon", e);
        c.optimizer.options.epsilon = e;
      }
    }
    if (o.contains("optimize_on")) {
      std::string on;
      read(o, "optimize_on", on);
      if (on == "test") c.optimizer.on = OptimizeOn::kTest;
      else if (on == "calibration") c.optimizer.on = OptimizeOn::kCalibration;
      else throw ConfigError("optimize_on must be 'test' or 'calibration'");
    }
    read(o, "weighted_bins", c.optimizer.weighted_bins);
    if (o.contains("rank_overflow")) {
      std::string r;
      read(o, "rank_overflow", r);
      if (r == "unbounded") c.optimizer.overflow = RankOverflow::kUnbounded;
      else if (r == "clamp") c.optimizer.overflow = RankOverflow::kClamp;
      else throw ConfigError("rank_overflow must be 'unbounded' or 'clamp'");
    }
    read(o, "max_candidate_pairs", c.optimizer.options.max_candidate_pairs);
    read(o, "step_floor", c.optimizer.options.step_floor);
  }
  if (doc.contains("metrics")) {
    const auto& m = doc.at("metrics");
    reject_unknown(m, "metrics", {"gap_bins", "t_repeats", "t_subsample"});
    read(m, "gap_bins", c.metrics.gap_bins);
    read(m, "t_repeats", c.metrics.t_repeats);
    read(m, "t_subsample", c.metrics.t_subsample);
  }
  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    reject_unknown(o, "output", {"dir", "traces", "model_cache"});
    read(o, "dir", c.output.dir);
    read(o, "traces", c.output.traces);
    read(o, "model_cache", c.output.model_cache);
  }
  read(doc, "threads", c.threads);
  return c;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open for reading");
  json doc;
  try {
    doc = json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(doc, std::move(base));
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json d;
  if (c.dataset.kind == DatasetKind::kSynthetic) {
    d["kind"] = "synthetic";
    d["n"] = c.dataset.n;
    d["noise"] = c.dataset.generator.noise == NoiseKind::kUniform ? "uniform" : "normal";
    d["abs_scale"] = c.dataset.generator.abs_scale;
  } else {
    d["kind"] = "csv";
    d["path"] = c.dataset.path;
    d["features"] = c.dataset.schema.features;
    d["label"] = c.dataset.schema.label;
    d["group"] = c.dataset.schema.group;
  }
  j["dataset"] = d;
  j["alpha"] = c.alpha;
  j["bins"] = c.bins;
  j["methods"] = method_list(c.methods);
  j["seeds"] = c.seeds;
  j["split"] = {c.split.train, c.split.calibration, c.split.test};
  j["model"] = {{"learning_rate", c.model.fit.learning_rate},
                {"iterations", c.model.fit.iterations},
                {"batch_size", c.model.fit.batch_size},
                {"lower_level", c.model.levels.lower},
                {"upper_level", c.model.levels.upper},
                {"group_feature", c.model.group_feature}};
  nlohmann::ordered_json o;
  o["max_iterations"] = c.optimizer.options.max_iterations;
  if (c.optimizer.options.epsilon) o["epsilon"] = *c.optimizer.options.epsilon;
  else o["epsilon"] = nullptr;
  o["optimize_on"] = c.optimizer.on == OptimizeOn::kTest ? "test" : "calibration";
  o["weighted_bins"] = c.optimizer.weighted_bins;
  o["rank_overflow"] = c.optimizer.overflow == RankOverflow::kUnbounded ? "unbounded" : "clamp";
  o["max_candidate_pairs"] = c.optimizer.options.max_candidate_pairs;
  o["step_floor"] = c.optimizer.options.step_floor;
  j["optimizer"] = o;
  j["metrics"] = {{"gap_bins", c.metrics.gap_bins}, {"t_repeats", c.metrics.t_repeats},
                  {"t_subsample", c.metrics.t_subsample}};
  j["output"] = {{"dir", c.output.dir}, {"traces", c.output.traces}, {"model_cache", c.output.model_cache}};
  j["threads"] = c.threads;
  return j;
}

}  // namespace bfqr
