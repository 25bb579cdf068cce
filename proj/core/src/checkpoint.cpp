#include <fstream>

#include "adagtcn/errors.hpp"
#include "adagtcn/model.hpp"
#include "config_json.hpp"

namespace adagtcn {

namespace detail {

namespace {

constexpr int kCheckpointVersion = 1;

template <typename T>
T get_or(const nlohmann::json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key \"" + key + "\": " + e.what());
  }
}

std::string layout_name(NodeLayout layout) {
  return layout == NodeLayout::kElectrodeBand ? "electrode_band" : "electrode";
}
NodeLayout layout_from(const std::string& name) {
  if (name == "electrode_band") return NodeLayout::kElectrodeBand;
  if (name == "electrode") return NodeLayout::kElectrode;
  throw ConfigError("unknown node_layout \"" + name + "\"");
}

std::string statistic_name(BandStatistic statistic) {
  return statistic == BandStatistic::kMeanMagnitude ? "mean_magnitude" : "mean_power";
}
BandStatistic statistic_from(const std::string& name) {
  if (name == "mean_magnitude") return BandStatistic::kMeanMagnitude;
  if (name == "mean_power") return BandStatistic::kMeanPower;
  throw ConfigError("unknown band_statistic \"" + name + "\"");
}

std::string head_mode_name(HeadMode mode) {
  return mode == HeadMode::kSingleLogistic ? "single_logistic" : "two_logit_softmax";
}
HeadMode head_mode_from(const std::string& name) {
  if (name == "single_logistic") return HeadMode::kSingleLogistic;
  if (name == "two_logit_softmax") return HeadMode::kTwoLogitSoftmax;
  throw ConfigError("unknown head_mode \"" + name + "\"");
}

std::string activation_name(GcnActivation activation) {
  return activation == GcnActivation::kRelu ? "relu" : "tanh";
}
GcnActivation activation_from(const std::string& name) {
  if (name == "relu") return GcnActivation::kRelu;
  if (name == "tanh") return GcnActivation::kTanh;
  throw ConfigError("unknown gcn_activation \"" + name + "\"");
}

}  // namespace

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys = {
      "p",           "max_length",   "node_layout",       "band_statistic",
      "embedding_dim", "k_partitions", "k_edges",         "omega_init",
      "lambda_init", "tau",          "gcn_channels",      "gcn_depth",
      "beta",        "selectors",    "gcn_activation",    "tcn_channels",
      "tcn_max_width", "dilation_schedule", "num_blocks", "head_widths",
      "head_mode",   "seed"};
  return keys;
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "learning_rate", "batch_size", "max_epochs",  "dropout",
      "repetitions",   "patience",   "adam_beta1",  "adam_beta2",
      "adam_eps",      "split_ratios", "parallel_repetitions"};
  return keys;
}

nlohmann::json model_config_to_json(const ModelConfig& config) {
  nlohmann::json doc;
  doc["p"] = config.num_rows;
  doc["max_length"] = config.max_length;
  doc["node_layout"] = layout_name(config.node_layout);
  doc["band_statistic"] = statistic_name(config.band_statistic);
  doc["embedding_dim"] = config.agl.embedding_dim;
  doc["k_partitions"] = config.agl.k_partitions;
  doc["k_edges"] = config.agl.k_edges;
  doc["omega_init"] = config.agl.omega_init;
  doc["lambda_init"] = config.agl.lambda_init;
  doc["tau"] = config.agl.tau;
  doc["gcn_channels"] = config.gcn_channels;
  doc["gcn_depth"] = config.gcn.depth;
  doc["beta"] = config.gcn.beta;
  doc["selectors"] = config.gcn.selectors;
  doc["gcn_activation"] = activation_name(config.gcn.activation);
  doc["tcn_channels"] = config.tcn_channels;
  doc["tcn_max_width"] = config.tcn.max_width;
  doc["dilation_schedule"] = config.dilation_schedule;
  doc["num_blocks"] = config.num_blocks;
  doc["head_widths"] = config.head_widths;
  doc["head_mode"] = head_mode_name(config.head_mode);
  doc["seed"] = config.seed;
  return doc;
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig config;
  config.num_rows = get_or<std::size_t>(doc, "p", config.num_rows);
  config.max_length = get_or<std::size_t>(doc, "max_length", config.max_length);
  if (doc.contains("node_layout")) {
    config.node_layout = layout_from(doc.at("node_layout").get<std::string>());
  }
  if (doc.contains("band_statistic")) {
    config.band_statistic = statistic_from(doc.at("band_statistic").get<std::string>());
  }
  config.agl.embedding_dim = get_or<std::size_t>(doc, "embedding_dim", config.agl.embedding_dim);
  config.agl.k_partitions = get_or<std::size_t>(doc, "k_partitions", config.agl.k_partitions);
  config.agl.k_edges = get_or<std::size_t>(doc, "k_edges", config.agl.k_edges);
  config.agl.omega_init = get_or<double>(doc, "omega_init", config.agl.omega_init);
  config.agl.lambda_init = get_or<double>(doc, "lambda_init", config.agl.lambda_init);
  config.agl.tau = get_or<double>(doc, "tau", config.agl.tau);
  config.gcn_channels = get_or<std::size_t>(doc, "gcn_channels", config.gcn_channels);
  config.gcn.depth = get_or<std::size_t>(doc, "gcn_depth", config.gcn.depth);
  config.gcn.beta = get_or<std::vector<double>>(doc, "beta", config.gcn.beta);
  config.gcn.selectors = get_or<std::vector<std::vector<std::uint8_t>>>(doc, "selectors",
                                                                        config.gcn.selectors);
  if (doc.contains("gcn_activation")) {
    config.gcn.activation = activation_from(doc.at("gcn_activation").get<std::string>());
  }
  config.tcn_channels = get_or<std::size_t>(doc, "tcn_channels", config.tcn_channels);
  config.tcn.max_width = get_or<std::size_t>(doc, "tcn_max_width", config.tcn.max_width);
  config.tcn.out_channels = config.tcn_channels;
  config.dilation_schedule =
      get_or<std::vector<std::size_t>>(doc, "dilation_schedule", config.dilation_schedule);
  config.num_blocks = get_or<std::size_t>(doc, "num_blocks", config.num_blocks);
  config.head_widths = get_or<std::vector<std::size_t>>(doc, "head_widths", config.head_widths);
  if (doc.contains("head_mode")) {
    config.head_mode = head_mode_from(doc.at("head_mode").get<std::string>());
  }
  config.seed = get_or<std::uint64_t>(doc, "seed", config.seed);
  return config;
}

nlohmann::json train_config_to_json(const TrainConfig& config) {
  nlohmann::json doc;
  doc["learning_rate"] = config.learning_rate;
  doc["batch_size"] = config.batch_size;
  doc["max_epochs"] = config.max_epochs;
  doc["dropout"] = config.dropout;
  doc["repetitions"] = config.repetitions;
  doc["patience"] = config.patience;
  doc["adam_beta1"] = config.adam_beta1;
  doc["adam_beta2"] = config.adam_beta2;
  doc["adam_eps"] = config.adam_eps;
  doc["split_ratios"] = config.split_ratios;
  doc["parallel_repetitions"] = config.parallel_repetitions;
  return doc;
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig config;
  config.learning_rate = get_or<double>(doc, "learning_rate", config.learning_rate);
  config.batch_size = get_or<std::size_t>(doc, "batch_size", config.batch_size);
  config.max_epochs = get_or<std::size_t>(doc, "max_epochs", config.max_epochs);
  config.dropout = get_or<double>(doc, "dropout", config.dropout);
  config.repetitions = get_or<std::size_t>(doc, "repetitions", config.repetitions);
  config.patience = get_or<std::size_t>(doc, "patience", config.patience);
  config.adam_beta1 = get_or<double>(doc, "adam_beta1", config.adam_beta1);
  config.adam_beta2 = get_or<double>(doc, "adam_beta2", config.adam_beta2);
  config.adam_eps = get_or<double>(doc, "adam_eps", config.adam_eps);
  if (doc.contains("split_ratios")) {
    const auto ratios = doc.at("split_ratios").get<std::vector<std::size_t>>();
    if (ratios.size() != 3) throw ConfigError("split_ratios must have 3 entries");
    config.split_ratios = {ratios[0], ratios[1], ratios[2]};
  }
  config.parallel_repetitions =
      get_or<bool>(doc, "parallel_repetitions", config.parallel_repetitions);
  if (config.dropout < 0.0 || config.dropout > 0.8) {
    throw ConfigError("dropout must lie in [0, 0.8]");
  }
  return config;
}

FlatConfig flat_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    const auto& mk = model_config_keys();
    const auto& tk = train_config_keys();
    if (std::find(mk.begin(), mk.end(), key) == mk.end() &&
        std::find(tk.begin(), tk.end(), key) == tk.end()) {
      throw ConfigError("unknown config key \"" + key + "\"");
    }
  }
  FlatConfig config;
  config.model = model_config_from_json(doc);
  config.train = train_config_from_json(doc);
  return config;
}

nlohmann::json flat_config_to_json(const FlatConfig& config) {
  nlohmann::json doc = model_config_to_json(config.model);
  doc.update(train_config_to_json(config.train));
  return doc;
}

}  // namespace detail

void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["config"] = detail::model_config_to_json(model.config());
  doc["partition_assignment"] = model.agl().partition_of_node();
  nlohmann::json params = nlohmann::json::array();
  for (const ParamRef& ref : model.params().refs()) {
    nlohmann::json entry;
    entry["name"] = ref.name;
    entry["shape"] = ref.tensor->shape();
    entry["data"] = std::vector<double>(ref.tensor->data().begin(), ref.tensor->data().end());
    params.push_back(std::move(entry));
  }
  doc["params"] = std::move(params);
  std::ofstream file(path);
  if (!file) throw DataError("cannot open " + path + " for writing");
  file << doc.dump() << "\n";
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open checkpoint " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": checkpoint parse failure: " + e.what());
  }
  try {
    if (!doc.contains("version")) throw DataError(path + ": checkpoint missing version field");
    const int version = doc.at("version").get<int>();
    if (version != 1) {
      throw DataError(path + ": unknown checkpoint version " + std::to_string(version));
    }
    auto model = std::make_unique<Model>(detail::model_config_from_json(doc.at("config")));
    model->agl().set_partition_of_node(
        doc.at("partition_assignment").get<std::vector<std::size_t>>());

    const nlohmann::json& params = doc.at("params");
    if (params.size() != model->params().count()) {
      throw DataError(path + ": checkpoint has " + std::to_string(params.size()) +
                      " parameters, model expects " + std::to_string(model->params().count()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const nlohmann::json& entry = params[i];
      const ParamRef& ref = model->params().ref(static_cast<int>(i));
      if (entry.at("name").get<std::string>() != ref.name) {
        throw DataError(path + ": parameter " + std::to_string(i) + " named \"" +
                        entry.at("name").get<std::string>() + "\", expected \"" + ref.name +
                        "\"");
      }
      const Shape shape = entry.at("shape").get<Shape>();
      if (shape != ref.tensor->shape()) {
        throw DataError(path + ": parameter " + ref.name + " has shape " +
                        shape_string(shape) + ", expected " + ref.tensor->shape_str());
      }
      *ref.tensor = Tensor(shape, entry.at("data").get<std::vector<double>>());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace adagtcn
