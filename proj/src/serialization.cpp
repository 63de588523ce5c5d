#include "dln/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dln/errors.hpp"

namespace dln {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "dln-model";
constexpr const char* kCircuitFormat = "dln-circuit";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v))
      throw FormatError(std::string("cannot store non-finite value in ") + what);
}

const char* granularity_name(DecayGranularity g) {
  return g == DecayGranularity::per_batch ? "per_batch" : "per_epoch";
}

DecayGranularity granularity_from(const std::string& s) {
  if (s == "per_batch")
    return DecayGranularity::per_batch;
  if (s == "per_epoch")
    return DecayGranularity::per_epoch;
  throw FormatError("unknown decay granularity '" + s + "'");
}

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::constant: return "constant";
    case NodeKind::threshold: return "threshold";
    case NodeKind::gate: return "gate";
  }
  return "?";
}

NodeKind node_kind_from(const std::string& s) {
  if (s == "constant")
    return NodeKind::constant;
  if (s == "threshold")
    return NodeKind::threshold;
  if (s == "gate")
    return NodeKind::gate;
  throw FormatError("unknown node kind '" + s + "'");
}

std::string wrap(const char* format, json payload) {
  json doc;
  doc["format"] = format;
  doc["version"] = std::to_string(kFormatMajor) + "." + std::to_string(kFormatMinor);
  doc["checksum"] = hex64(fnv1a64(payload.dump()));
  doc["payload"] = std::move(payload);
  return doc.dump(1) + "\n";
}

json unwrap(const char* format, const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format") || !doc.contains("version") ||
      !doc.contains("checksum") || !doc.contains("payload"))
    throw FormatError("document lacks format, version, checksum or payload");
  if (!doc["format"].is_string() || doc["format"] != format)
    throw FormatError(std::string("expected a ") + format + " document");
  if (!doc["version"].is_string())
    throw FormatError("version must be a string");
  const std::string version = doc["version"];
  int major = -1, minor = -1;
  if (std::sscanf(version.c_str(), "%d.%d", &major, &minor) != 2)
    throw FormatError("unreadable version '" + version + "'");
  if (major != kFormatMajor)
    throw VersionError("unsupported format version " + version + " (this build reads " +
                       std::to_string(kFormatMajor) + ".x)");
  const std::string expected = doc["checksum"].is_string() ? doc["checksum"].get<std::string>() : "";
  if (hex64(fnv1a64(doc["payload"].dump())) != expected)
    throw ChecksumError("checksum mismatch: document is corrupted");
  return doc["payload"];
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

json schema_to_json(const Schema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns) {
    json col{{"name", c.name}, {"kind", to_string(c.kind)}};
    switch (c.kind) {
      case ColumnKind::continuous:
        col["min"] = c.min;
        col["max"] = c.max;
        break;
      case ColumnKind::categorical:
        col["categories"] = c.categories;
        break;
      case ColumnKind::target:
        col["mean"] = c.target_mean;
        col["std"] = c.target_std;
        break;
    }
    cols.push_back(std::move(col));
  }
  return json{{"columns", std::move(cols)}};
}

Schema schema_from_json(const json& j) {
  Schema s;
  for (const auto& col : j.at("columns")) {
    ColumnSchema c;
    c.name = col.at("name").get<std::string>();
    c.kind = column_kind_from_string(col.at("kind").get<std::string>());
    switch (c.kind) {
      case ColumnKind::continuous:
        c.min = col.at("min").get<double>();
        c.max = col.at("max").get<double>();
        break;
      case ColumnKind::categorical:
        c.categories = col.at("categories").get<std::vector<std::string>>();
        break;
      case ColumnKind::target:
        c.target_mean = col.at("mean").get<double>();
        c.target_std = col.at("std").get<double>();
        break;
    }
    s.columns.push_back(std::move(c));
  }
  return s;
}

json config_to_json(const TrainConfig& c) {
  return json{{"tau_init", c.tau_init},
              {"gamma", c.gamma},
              {"tau_min", c.tau_min},
              {"tau_schedule", c.tau_schedule},
              {"decay", granularity_name(c.decay)},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"widths", c.widths},
              {"thresholds_per_feature", c.thresholds_per_feature},
              {"subspace_size", c.subspace_size},
              {"concat_inputs", c.concat_inputs},
              {"two_phase", c.two_phase},
              {"ste",
               {{"threshold", c.ste.threshold},
                {"gate_select", c.ste.gate_select},
                {"link_select", c.ste.link_select},
                {"sum_gate", c.ste.sum_gate}}},
              {"sum_threshold", c.sum_threshold},
              {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.tau_init = j.at("tau_init").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.tau_min = j.at("tau_min").get<double>();
  c.tau_schedule = j.at("tau_schedule").get<bool>();
  c.decay = granularity_from(j.at("decay").get<std::string>());
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.widths = j.at("widths").get<std::vector<std::size_t>>();
  c.thresholds_per_feature = j.at("thresholds_per_feature").get<int>();
  c.subspace_size = j.at("subspace_size").get<int>();
  c.concat_inputs = j.at("concat_inputs").get<bool>();
  c.two_phase = j.at("two_phase").get<bool>();
  const auto& ste = j.at("ste");
  c.ste.threshold = ste.at("threshold").get<bool>();
  c.ste.gate_select = ste.at("gate_select").get<bool>();
  c.ste.link_select = ste.at("link_select").get<bool>();
  c.ste.sum_gate = ste.at("sum_gate").get<bool>();
  c.sum_threshold = j.at("sum_threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json params_to_json(const NetworkParams& p) {
  require_finite(p.threshold.bias, "threshold biases");
  require_finite(p.threshold.slope, "threshold slopes");
  require_finite(p.sum.link_logits, "sum link logits");
  require_finite(p.sum.coefficients, "sum coefficients");
  json layers = json::array();
  for (const auto& l : p.logic) {
    require_finite(l.gate_logits, "gate logits");
    require_finite(l.link_a_logits, "link logits");
    require_finite(l.link_b_logits, "link logits");
    layers.push_back({{"in_dim", l.in_dim},
                      {"out_dim", l.out_dim},
                      {"gate_choices", l.gate_choices},
                      {"link_choices", l.link_choices},
                      {"gate_subset", l.gate_subset},
                      {"link_subset_a", l.link_subset_a},
                      {"link_subset_b", l.link_subset_b},
                      {"gate_logits", l.gate_logits},
                      {"link_a_logits", l.link_a_logits},
                      {"link_b_logits", l.link_b_logits}});
  }
  return json{{"n_features", p.n_features},
              {"concat_inputs", p.concat_inputs},
              {"threshold",
               {{"source_feature", p.threshold.source_feature},
                {"bias", p.threshold.bias},
                {"slope", p.threshold.slope}}},
              {"logic", std::move(layers)},
              {"sum",
               {{"link_logits", p.sum.link_logits},
                {"coefficients", p.sum.coefficients},
                {"threshold", p.sum.threshold}}}};
}

NetworkParams params_from_json(const json& j) {
  NetworkParams p;
  p.n_features = j.at("n_features").get<std::size_t>();
  p.concat_inputs = j.at("concat_inputs").get<bool>();
  const auto& t = j.at("threshold");
  p.threshold.source_feature = t.at("source_feature").get<std::vector<std::size_t>>();
  p.threshold.bias = t.at("bias").get<std::vector<double>>();
  p.threshold.slope = t.at("slope").get<std::vector<double>>();
  for (const auto& l : j.at("logic")) {
    LogicLayer layer;
    layer.in_dim = l.at("in_dim").get<std::size_t>();
    layer.out_dim = l.at("out_dim").get<std::size_t>();
    layer.gate_choices = l.at("gate_choices").get<std::size_t>();
    layer.link_choices = l.at("link_choices").get<std::size_t>();
    layer.gate_subset = l.at("gate_subset").get<std::vector<std::uint8_t>>();
    layer.link_subset_a = l.at("link_subset_a").get<std::vector<std::uint32_t>>();
    layer.link_subset_b = l.at("link_subset_b").get<std::vector<std::uint32_t>>();
    layer.gate_logits = l.at("gate_logits").get<std::vector<double>>();
    layer.link_a_logits = l.at("link_a_logits").get<std::vector<double>>();
    layer.link_b_logits = l.at("link_b_logits").get<std::vector<double>>();
    p.logic.push_back(std::move(layer));
  }
  const auto& s = j.at("sum");
  p.sum.link_logits = s.at("link_logits").get<std::vector<double>>();
  p.sum.coefficients = s.at("coefficients").get<std::vector<double>>();
  p.sum.threshold = s.at("threshold").get<double>();
  try {
    p.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent network: ") + e.what());
  }
  return p;
}

json circuit_to_json(const HardCircuit& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes) {
    json node{{"kind", node_kind_name(n.kind)}, {"layer", n.layer}};
    switch (n.kind) {
      case NodeKind::constant:
        node["value"] = n.value;
        break;
      case NodeKind::threshold:
        if (!std::isfinite(n.bias))
          throw FormatError("cannot store non-finite threshold bias");
        node["feature"] = n.feature;
        node["bias"] = n.bias;
        node["slope_sign"] = n.slope_sign;
        break;
      case NodeKind::gate:
        node["gate"] = n.gate;
        node["a"] = n.a;
        node["b"] = n.b;
        break;
    }
    nodes.push_back(std::move(node));
  }
  json links = json::array();
  for (const auto& l : c.links)
    links.push_back({{"node", l.node}, {"coefficient", l.coefficient}, {"index", l.index}});
  json j{{"n_features", c.n_features},
         {"nodes", std::move(nodes)},
         {"links", std::move(links)},
         {"target_mean", c.target_mean},
         {"target_std", c.target_std},
         {"meta",
          {{"widths", c.meta.widths},
           {"seed", c.meta.seed},
           {"config_digest", c.meta.config_digest},
           {"tau_final", c.meta.tau_final}}}};
  if (c.schema)
    j["schema"] = schema_to_json(*c.schema);
  return j;
}

HardCircuit circuit_from_json(const json& j) {
  HardCircuit c;
  c.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& node : j.at("nodes")) {
    CircuitNode n;
    n.kind = node_kind_from(node.at("kind").get<std::string>());
    n.layer = node.at("layer").get<int>();
    switch (n.kind) {
      case NodeKind::constant:
        n.value = node.at("value").get<bool>();
        break;
      case NodeKind::threshold:
        n.feature = node.at("feature").get<std::size_t>();
        n.bias = node.at("bias").get<double>();
        n.slope_sign = node.at("slope_sign").get<int>() >= 0 ? 1 : -1;
        break;
      case NodeKind::gate:
        n.gate = node.at("gate").get<int>();
        n.a = node.at("a").get<std::size_t>();
        n.b = node.at("b").get<std::size_t>();
        break;
    }
    c.nodes.push_back(n);
  }
  for (const auto& l : j.at("links"))
    c.links.push_back({l.at("node").get<std::size_t>(), l.at("coefficient").get<double>(),
                       l.at("index").get<std::size_t>()});
  c.target_mean = j.at("target_mean").get<double>();
  c.target_std = j.at("target_std").get<double>();
  const auto& m = j.at("meta");
  c.meta.widths = m.at("widths").get<std::vector<std::size_t>>();
  c.meta.seed = m.at("seed").get<std::uint64_t>();
  c.meta.config_digest = m.at("config_digest").get<std::string>();
  c.meta.tau_final = m.at("tau_final").get<double>();
  if (j.contains("schema"))
    c.schema = schema_from_json(j.at("schema"));
  try {
    c.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent circuit: ") + e.what());
  }
  return c;
}

std::string model_to_text(const Model& model) {
  json payload{{"schema", schema_to_json(model.schema)},
               {"params", params_to_json(model.params)},
               {"tau_final", model.tau_final},
               {"config", config_to_json(model.config)}};
  return wrap(kModelFormat, std::move(payload));
}

Model model_from_text(const std::string& text) {
  json payload = unwrap(kModelFormat, text);
  return guarded([&] {
    Model m;
    m.schema = schema_from_json(payload.at("schema"));
    m.params = params_from_json(payload.at("params"));
    m.tau_final = payload.at("tau_final").get<double>();
    m.config = config_from_json(payload.at("config"));
    if (m.schema.feature_count() != m.params.n_features)
      throw FormatError("schema and network disagree on the feature count");
    return m;
  });
}

std::string circuit_to_text(const HardCircuit& circuit) {
  return wrap(kCircuitFormat, circuit_to_json(circuit));
}

HardCircuit circuit_from_text(const std::string& text) {
  json payload = unwrap(kCircuitFormat, text);
  return guarded([&] { return circuit_from_json(payload); });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad())
    throw IoError("error reading '" + path.string() + "'");
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    if (!out)
      throw IoError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_text(model));
}

Model load_model(const std::filesystem::path& path) {
  return model_from_text(read_text_file(path));
}

void save_circuit(const HardCircuit& circuit, const std::filesystem::path& path) {
  write_text_file(path, circuit_to_text(circuit));
}

HardCircuit load_circuit(const std::filesystem::path& path) {
  return circuit_from_text(read_text_file(path));
}

}  // namespace dln
