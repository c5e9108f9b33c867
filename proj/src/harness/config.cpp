#include "rodflow/harness/config.hpp"

#include "rodflow/dataset.hpp"
#include "rodflow/error.hpp"
#include "rodflow/mlp.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace rodflow::harness {

using nlohmann::ordered_json;

std::string_view flow_id_name(FlowId id) {
  switch (id) {
    case FlowId::Gd: return "gd";
    case FlowId::Gf: return "gf";
    case FlowId::Rf: return "rf";
    case FlowId::FoRf: return "fo_rf";
    case FlowId::Cf: return "cf";
  }
  return "unknown";
}

std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream) {
  // splitmix64 over (root, stream)
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (!(eta > 0.0)) bad("eta must be positive");
  if (warmup_steps < 2) bad("warmup_steps must be at least 2");
  if (compare_steps < 1) bad("compare_steps must be at least 1");
  if (flows.empty()) bad("flows must not be empty");
  if (eig_cadence < 1) bad("eig_cadence must be at least 1");
  if (k < 1 || k > 3) bad("k must lie in [1, 3]");
  if (k > dimension(loss)) bad("k exceeds the parameter dimension");
  if (static_cast<std::size_t>(init.size()) != dimension(loss)) bad("init has the wrong dimension");
  try {
    flow_config().validate();
  } catch (const Error& e) {
    bad(e.what());
  }
}

FlowConfig ExperimentConfig::flow_config() const {
  FlowConfig c;
  c.eta = eta;
  c.dt = dt;
  c.integrator = integrator;
  c.horizon = static_cast<double>(compare_steps);
  c.dense_threshold = dense_threshold;
  c.rank = rank;
  return c;
}

bool ExperimentConfig::has(FlowId id) const { return std::find(flows.begin(), flows.end(), id) != flows.end(); }

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& message) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) throw ConfigError(message);
  throw ConfigError(message, m.line + 1, m.column + 1);
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) fail_at(map, where + " must be a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail_at(kv.first, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& name) {
  if (!node.IsScalar()) fail_at(node, name + " must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, name + " has the wrong type");
  }
}

template <class T>
T optional_scalar(const YAML::Node& map, const std::string& key, T fallback) {
  const YAML::Node n = map[key];
  if (!n) return fallback;
  return scalar<T>(n, key);
}

template <class T>
T required_scalar(const YAML::Node& map, const std::string& key, const std::string& where) {
  const YAML::Node n = map[key];
  if (!n) fail_at(map, "missing key '" + key + "' in " + where);
  return scalar<T>(n, key);
}

Vec vector_of(const YAML::Node& node, const std::string& name) {
  if (!node.IsSequence() || node.size() == 0) fail_at(node, name + " must be a non-empty list of numbers");
  Vec v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar<double>(node[i], name);
  return v;
}

ordered_json to_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

struct ParsedLoss {
  LossSpec spec = Sqrt2D{};
  ordered_json echo;
  std::optional<MlpArchitecture> arch;
};

ParsedLoss parse_loss(const YAML::Node& node, std::uint64_t seed) {
  if (!node) throw ConfigError("missing 'loss' section");
  if (!node.IsMap()) fail_at(node, "loss must be a mapping");
  const std::string type = required_scalar<std::string>(node, "type", "loss");
  ParsedLoss out;
  out.echo["type"] = type;
  try {
    if (type == "linear") {
      check_keys(node, {"type", "b"}, "loss");
      if (!node["b"]) fail_at(node, "missing key 'b' in loss");
      const Vec b = vector_of(node["b"], "b");
      out.spec = LinearLoss(b);
      out.echo["b"] = to_json(b);
    } else if (type == "quadratic1d") {
      check_keys(node, {"type", "S"}, "loss");
      const double s = required_scalar<double>(node, "S", "loss");
      out.spec = Quadratic1D(s);
      out.echo["S"] = s;
    } else if (type == "quadratic") {
      check_keys(node, {"type", "H"}, "loss");
      const YAML::Node h = node["H"];
      if (!h || !h.IsSequence() || h.size() == 0) fail_at(h ? h : node, "H must be a square list of rows");
      const auto p = static_cast<Eigen::Index>(h.size());
      Mat m(p, p);
      ordered_json rows = ordered_json::array();
      for (Eigen::Index i = 0; i < p; ++i) {
        const Vec row = vector_of(h[static_cast<std::size_t>(i)], "H row");
        if (row.size() != p) fail_at(h[static_cast<std::size_t>(i)], "H must be square");
        m.row(i) = row.transpose();
        rows.push_back(to_json(row));
      }
      out.spec = QuadraticND(m);
      out.echo["H"] = rows;
    } else if (type == "quartic1d") {
      check_keys(node, {"type", "S", "Q"}, "loss");
      const double s = required_scalar<double>(node, "S", "loss");
      const double q = required_scalar<double>(node, "Q", "loss");
      out.spec = Quartic1D(s, q);
      out.echo["S"] = s;
      out.echo["Q"] = q;
    } else if (type == "sqrt2d") {
      check_keys(node, {"type"}, "loss");
      out.spec = Sqrt2D{};
    } else if (type == "mlp") {
      check_keys(node, {"type", "layers", "activation", "reduction", "data"}, "loss");
      MlpArchitecture arch;
      const YAML::Node layers = node["layers"];
      if (!layers || !layers.IsSequence() || layers.size() < 2) fail_at(layers ? layers : node, "layers must list at least two sizes");
      ordered_json lj = ordered_json::array();
      for (const auto& l : layers) {
        const int s = scalar<int>(l, "layer size");
        if (s <= 0) fail_at(l, "layer sizes must be positive");
        arch.layers.push_back(static_cast<std::size_t>(s));
        lj.push_back(s);
      }
      const std::string act = optional_scalar<std::string>(node, "activation", "silu");
      if (act == "silu") arch.activation = Activation::Silu;
      else if (act == "tanh") arch.activation = Activation::Tanh;
      else fail_at(node["activation"], "activation must be silu or tanh");
      const std::string red = optional_scalar<std::string>(node, "reduction", "mean");
      MseReduction reduction = MseReduction::Mean;
      if (red == "mean_over_samples") reduction = MseReduction::MeanOverSamples;
      else if (red != "mean") fail_at(node["reduction"], "reduction must be mean or mean_over_samples");

      const YAML::Node data = node["data"];
      ordered_json dj;
      std::shared_ptr<Dataset> dataset;
      const std::string kind = data ? required_scalar<std::string>(data, "kind", "loss.data") : "teacher";
      dj["kind"] = kind;
      if (kind == "teacher") {
        if (data) check_keys(data, {"kind", "samples", "hidden", "scale"}, "loss.data");
        TeacherConfig t;
        t.input_dim = arch.layers.front();
        t.output_dim = arch.layers.back();
        t.samples = static_cast<std::size_t>(data ? optional_scalar<int>(data, "samples", 32) : 32);
        t.hidden = static_cast<std::size_t>(data ? optional_scalar<int>(data, "hidden", 8) : 8);
        t.target_scale = data ? optional_scalar<double>(data, "scale", 1.0) : 1.0;
        t.seed = split_seed(seed, static_cast<std::uint64_t>(SeedStream::Data));
        dj["samples"] = t.samples;
        dj["hidden"] = t.hidden;
        dj["scale"] = t.target_scale;
        dataset = std::make_shared<Dataset>(make_teacher_dataset(t));
      } else if (kind == "csv") {
        check_keys(data, {"kind", "path", "target_columns"}, "loss.data");
        const std::string path = required_scalar<std::string>(data, "path", "loss.data");
        const int targets = optional_scalar<int>(data, "target_columns", static_cast<int>(arch.layers.back()));
        if (targets < 1) fail_at(data["target_columns"], "target_columns must be positive");
        dj["path"] = path;
        dj["target_columns"] = targets;
        dataset = std::make_shared<Dataset>(load_csv_dataset(path, static_cast<std::size_t>(targets)));
      } else {
        fail_at(data["kind"], "data kind must be teacher or csv");
      }
      out.spec = TinyMlp(std::make_shared<TinyMlpModel>(arch, dataset, reduction));
      out.arch = arch;
      out.echo["layers"] = lj;
      out.echo["activation"] = act;
      out.echo["reduction"] = red;
      out.echo["data"] = dj;
    } else {
      fail_at(node["type"], "unknown loss type '" + type + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail_at(node, std::string("invalid loss: ") + e.what());
  }
  return out;
}

FlowId parse_flow(const YAML::Node& node) {
  const std::string s = scalar<std::string>(node, "flow");
  if (s == "gd") return FlowId::Gd;
  if (s == "gf") return FlowId::Gf;
  if (s == "rf") return FlowId::Rf;
  if (s == "fo_rf") return FlowId::FoRf;
  if (s == "cf") return FlowId::Cf;
  fail_at(node, "unknown flow '" + s + "' (expected gd, gf, rf, fo_rf, cf)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("malformed document: " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping at top level");
  check_keys(root,
             {"loss", "init", "eta", "dt", "integrator", "warmup_steps", "compare_steps", "flows", "seed", "eig_cadence",
              "k", "output_dir", "rank", "dense_threshold", "warmup_auto_stop", "spectral_tol", "spectral_max_iter"},
             "config");

  ExperimentConfig c;
  c.seed = optional_scalar<std::uint64_t>(root, "seed", 0);
  ParsedLoss loss = parse_loss(root["loss"], c.seed);
  c.loss = loss.spec;

  c.eta = required_scalar<double>(root, "eta", "config");
  if (!(c.eta > 0.0)) fail_at(root["eta"], "eta must be positive");
  c.dt = optional_scalar<double>(root, "dt", 0.01);
  const std::string integ = optional_scalar<std::string>(root, "integrator", "rk4");
  if (integ == "rk4") c.integrator = Integrator::Rk4;
  else if (integ == "euler") c.integrator = Integrator::Euler;
  else fail_at(root["integrator"], "integrator must be rk4 or euler");
  c.warmup_steps = required_scalar<int>(root, "warmup_steps", "config");
  if (c.warmup_steps < 2) fail_at(root["warmup_steps"], "warmup_steps must be at least 2");
  c.compare_steps = required_scalar<int>(root, "compare_steps", "config");
  if (c.compare_steps < 1) fail_at(root["compare_steps"], "compare_steps must be at least 1");

  const YAML::Node flows = root["flows"];
  if (!flows) fail_at(root, "missing key 'flows' in config");
  if (!flows.IsSequence() || flows.size() == 0) fail_at(flows, "flows must be a non-empty list");
  for (const auto& f : flows) {
    const FlowId id = parse_flow(f);
    if (c.has(id)) fail_at(f, "flow listed twice");
    c.flows.push_back(id);
  }
  c.eig_cadence = optional_scalar<int>(root, "eig_cadence", 10);
  if (c.eig_cadence < 1) fail_at(root["eig_cadence"], "eig_cadence must be at least 1");
  const int k = optional_scalar<int>(root, "k", 1);
  if (k < 1 || k > 3) fail_at(root["k"], "k must lie in [1, 3]");
  c.k = static_cast<std::size_t>(k);
  c.output_dir = optional_scalar<std::string>(root, "output_dir", "out");
  const int rank = optional_scalar<int>(root, "rank", 3);
  if (rank < 1 || rank > 8) fail_at(root["rank"], "rank must lie in [1, 8]");
  c.rank = static_cast<std::size_t>(rank);
  const int dense = optional_scalar<int>(root, "dense_threshold", 64);
  if (dense < 0) fail_at(root["dense_threshold"], "dense_threshold must be non-negative");
  c.dense_threshold = static_cast<std::size_t>(dense);
  c.warmup_auto_stop = optional_scalar<bool>(root, "warmup_auto_stop", false);
  c.spectral_tol = optional_scalar<double>(root, "spectral_tol", 1e-8);
  if (!(c.spectral_tol > 0.0)) fail_at(root["spectral_tol"], "spectral_tol must be positive");
  c.spectral_max_iter = optional_scalar<int>(root, "spectral_max_iter", 10000);
  if (c.spectral_max_iter < 1) fail_at(root["spectral_max_iter"], "spectral_max_iter must be positive");

  const std::size_t p = dimension(c.loss);
  const YAML::Node init = root["init"];
  ordered_json init_echo;
  if (init && init.IsSequence()) {
    c.init = vector_of(init, "init");
    if (static_cast<std::size_t>(c.init.size()) != p)
      fail_at(init, "init has " + std::to_string(c.init.size()) + " entries, loss needs " + std::to_string(p));
    init_echo = to_json(c.init);
  } else if (init && init.IsMap()) {
    check_keys(init, {"scale"}, "init");
    if (!loss.arch) fail_at(init, "random init is only available for mlp losses");
    const double scale = optional_scalar<double>(init, "scale", 1.0);
    if (!(scale > 0.0)) fail_at(init["scale"], "init scale must be positive");
    c.init = mlp_init_weights(*loss.arch, split_seed(c.seed, static_cast<std::uint64_t>(SeedStream::Init)), scale);
    init_echo["scale"] = scale;
  } else if (!init && loss.arch) {
    c.init = mlp_init_weights(*loss.arch, split_seed(c.seed, static_cast<std::uint64_t>(SeedStream::Init)), 1.0);
    init_echo["scale"] = 1.0;
  } else {
    fail_at(init ? init : root, "init must be a list of weights (or {scale: s} for mlp)");
  }

  if (c.k > p) fail_at(root["k"] ? root["k"] : root, "k exceeds the parameter dimension");
  try {
    c.flow_config().validate();
  } catch (const Error& e) {
    fail_at(root["dt"] ? root["dt"] : root, e.what());
  }

  ordered_json& echo = c.echo;
  echo["loss"] = loss.echo;
  echo["init"] = init_echo;
  echo["eta"] = c.eta;
  echo["dt"] = c.dt;
  echo["integrator"] = integ;
  echo["warmup_steps"] = c.warmup_steps;
  echo["compare_steps"] = c.compare_steps;
  ordered_json fl = ordered_json::array();
  for (FlowId f : c.flows) fl.push_back(std::string(flow_id_name(f)));
  echo["flows"] = fl;
  echo["seed"] = c.seed;
  echo["eig_cadence"] = c.eig_cadence;
  echo["k"] = c.k;
  echo["output_dir"] = c.output_dir.string();
  echo["rank"] = c.rank;
  echo["dense_threshold"] = c.dense_threshold;
  echo["warmup_auto_stop"] = c.warmup_auto_stop;
  echo["spectral_tol"] = c.spectral_tol;
  echo["spectral_max_iter"] = c.spectral_max_iter;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rodflow::harness
