#pragma once

// Strict JSON experiment configuration. Every object rejects keys it does not
// know; absent keys keep their defaults. Syntax errors carry line and column.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bicamo/pipeline.hpp"

namespace bicamo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using Json = nlohmann::json;

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < text.size() && k + 1 < byte; ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "must be an object");
  }

  // Call after every field has been read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(qualify(it.key()), "unknown key");
    }
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void real(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) fail(qualify(key), "must be a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) fail(qualify(key), "must be an integer");
      const auto x = v->get<long long>();
      if (x < -2147483647LL || x > 2147483647LL) fail(qualify(key), "is out of range");
      out = static_cast<int>(x);
    }
  }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(qualify(key), "must be a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) fail(qualify(key), "must be true or false");
      out = v->get<bool>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) fail(qualify(key), "must be a string");
      out = v->get<std::string>();
    }
  }
  const Json* object(const std::string& key) {
    const Json* v = find(key);
    if (v && !v->is_object()) fail(qualify(key), "must be an object");
    return v;
  }

  std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: '" + where + "' " + what);
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_object(ObjectReader& parent, const std::string& key, F&& body) {
  if (const Json* v = parent.object(key)) {
    ObjectReader r(*v, parent.qualify(key));
    body(r);
    r.finish();
  }
}

inline void read_data(ObjectReader& r, DataConfig& d) {
  std::string source = d.source == DataSource::Synthetic ? "synthetic" : "directory";
  r.text("source", source);
  if (source == "synthetic") {
    d.source = DataSource::Synthetic;
  } else if (source == "directory") {
    d.source = DataSource::Directory;
  } else {
    ObjectReader::fail(r.qualify("source"), "must be \"synthetic\" or \"directory\"");
  }
  SyntheticConfig& s = d.synthetic;
  r.integer("count", s.count);
  r.integer("height", s.height);
  r.integer("width", s.width);
  r.unsigned64("seed", s.seed);
  r.real("delta", s.delta);
  r.integer("octaves", s.octaves);
  r.real("texture_low", s.texture_low);
  r.real("texture_high", s.texture_high);
  std::string family = family_name(s.family);
  r.text("family", family);
  try {
    s.family = parse_family(family);
  } catch (const std::invalid_argument& e) {
    ObjectReader::fail(r.qualify("family"), e.what());
  }
  r.real("min_area", s.min_area);
  r.real("max_area", s.max_area);
  r.integer("holdout", d.holdout);
  r.text("train_root", d.train_root);
  r.text("test_root", d.test_root);
}

inline void read_model(ObjectReader& r, DenoiserConfig& m) {
  if (const Json* v = r.find("widths")) {
    if (!v->is_array()) ObjectReader::fail(r.qualify("widths"), "must be an array of integers");
    m.widths.clear();
    for (const auto& x : *v) {
      if (!x.is_number_integer()) ObjectReader::fail(r.qualify("widths"), "must be an array of integers");
      m.widths.push_back(x.get<int>());
    }
  }
  r.integer("time_embed_dim", m.time_embed_dim);
}

inline void read_trainer(ObjectReader& r, TrainerConfig& t) {
  r.real("learning_rate", t.learning_rate);
  r.integer("epochs", t.epochs);
  r.integer("batch_size", t.batch_size);
  r.integer("steps_per_epoch", t.steps_per_epoch);
  r.real("beta1", t.beta1);
  r.real("beta2", t.beta2);
  r.real("adam_eps", t.adam_eps);
  r.real("weight_decay", t.weight_decay);
  r.real("lr_floor", t.lr_floor);
}

inline void read_losses(ObjectReader& r, LossCoefficients& c) {
  r.real("lambda_gt_edge", c.lambda_gt_edge);
  r.real("lambda_ual", c.lambda_ual);
  r.real("lambda_rgb", c.lambda_rgb);
  r.real("gamma", c.gamma);
  r.real("alpha", c.alpha);
  r.integer("pool_k", c.pool_k);
  r.real("tau", c.tau);
  if (const Json* v = r.find("scales")) {
    const std::string where = r.qualify("scales");
    if (!v->is_array()) ObjectReader::fail(where, "must be an array of {scale, weight} objects");
    c.scales.clear();
    for (std::size_t k = 0; k < v->size(); ++k) {
      ObjectReader s((*v)[k], where + "[" + std::to_string(k) + "]");
      ScaleWeight sw{1.0, 1.0};
      s.real("scale", sw.scale);
      s.real("weight", sw.weight);
      s.finish();
      c.scales.push_back(sw);
    }
  }
}

inline void read_injection(ObjectReader& r, InjectionConfig& inj) {
  r.boolean("enabled", inj.enabled);
  r.real("lambda_inj", inj.lambda_inj);
  r.boolean("laplacian_prefilter", inj.laplacian_prefilter);
}

inline void read_edge(ObjectReader& r, EdgeOperator& op) {
  std::string name = op.name();
  r.text("operator", name);
  EdgeOperator parsed;
  try {
    parsed = EdgeOperator::parse(name);
  } catch (const std::invalid_argument& e) {
    ObjectReader::fail(r.qualify("operator"), e.what());
  }
  parsed.log_sigma = op.log_sigma;
  parsed.canny_sigma = op.canny_sigma;
  parsed.canny_low = op.canny_low;
  parsed.canny_high = op.canny_high;
  r.real("log_sigma", parsed.log_sigma);
  r.real("canny_sigma", parsed.canny_sigma);
  r.real("canny_low", parsed.canny_low);
  r.real("canny_high", parsed.canny_high);
  op = parsed;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const detail::Json::parse_error& e) {
    const auto [line, col] = detail::line_and_column(text, e.byte);
    std::string what = e.what();
    const auto colon = what.find(": ");
    if (colon != std::string::npos) what = what.substr(colon + 2);
    throw ConfigError("config: syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + what);
  }
  ExperimentConfig cfg;
  detail::ObjectReader top(j, "");
  top.text("name", cfg.name);
  top.unsigned64("seed", cfg.seed);
  top.integer("workers", cfg.workers);
  top.integer("probe_size", cfg.probe_size);
  detail::with_object(top, "data", [&](auto& r) { detail::read_data(r, cfg.data); });
  detail::with_object(top, "model", [&](auto& r) { detail::read_model(r, cfg.model); });
  detail::with_object(top, "trainer", [&](auto& r) { detail::read_trainer(r, cfg.trainer); });
  detail::with_object(top, "losses", [&](auto& r) { detail::read_losses(r, cfg.losses); });
  detail::with_object(top, "injection", [&](auto& r) { detail::read_injection(r, cfg.injection); });
  detail::with_object(top, "edge", [&](auto& r) { detail::read_edge(r, cfg.edge); });
  detail::with_object(top, "diffusion", [&](auto& r) {
    r.integer("steps", cfg.diffusion_steps);
    r.integer("sampling_steps", cfg.sampling_steps);
  });
  top.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Fully resolved configuration; parse_experiment_config(dump) reproduces cfg.
inline std::string dump_experiment_config(const ExperimentConfig& cfg) {
  using detail::Json;
  Json scales = Json::array();
  for (const auto& s : cfg.losses.scales) scales.push_back({{"scale", s.scale}, {"weight", s.weight}});
  const SyntheticConfig& s = cfg.data.synthetic;
  Json j = {
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"workers", cfg.workers},
      {"probe_size", cfg.probe_size},
      {"data",
       {{"source", cfg.data.source == DataSource::Synthetic ? "synthetic" : "directory"},
        {"count", s.count}, {"height", s.height}, {"width", s.width}, {"seed", s.seed},
        {"delta", s.delta}, {"octaves", s.octaves}, {"texture_low", s.texture_low},
        {"texture_high", s.texture_high}, {"family", family_name(s.family)},
        {"min_area", s.min_area}, {"max_area", s.max_area}, {"holdout", cfg.data.holdout},
        {"train_root", cfg.data.train_root}, {"test_root", cfg.data.test_root}}},
      {"model", {{"widths", cfg.model.widths}, {"time_embed_dim", cfg.model.time_embed_dim}}},
      {"trainer",
       {{"learning_rate", cfg.trainer.learning_rate}, {"epochs", cfg.trainer.epochs},
        {"batch_size", cfg.trainer.batch_size}, {"steps_per_epoch", cfg.trainer.steps_per_epoch},
        {"beta1", cfg.trainer.beta1}, {"beta2", cfg.trainer.beta2}, {"adam_eps", cfg.trainer.adam_eps},
        {"weight_decay", cfg.trainer.weight_decay}, {"lr_floor", cfg.trainer.lr_floor}}},
      {"losses",
       {{"lambda_gt_edge", cfg.losses.lambda_gt_edge}, {"lambda_ual", cfg.losses.lambda_ual},
        {"lambda_rgb", cfg.losses.lambda_rgb}, {"gamma", cfg.losses.gamma}, {"alpha", cfg.losses.alpha},
        {"pool_k", cfg.losses.pool_k}, {"tau", cfg.losses.tau}, {"scales", scales}}},
      {"injection",
       {{"enabled", cfg.injection.enabled}, {"lambda_inj", cfg.injection.lambda_inj},
        {"laplacian_prefilter", cfg.injection.laplacian_prefilter}}},
      {"edge",
       {{"operator", cfg.edge.name()}, {"log_sigma", cfg.edge.log_sigma},
        {"canny_sigma", cfg.edge.canny_sigma}, {"canny_low", cfg.edge.canny_low},
        {"canny_high", cfg.edge.canny_high}}},
      {"diffusion", {{"steps", cfg.diffusion_steps}, {"sampling_steps", cfg.sampling_steps}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace bicamo
