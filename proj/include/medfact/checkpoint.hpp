#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfact/errors.hpp"
#include "medfact/training.hpp"

namespace medfact {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>(), cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols)
    throw FormatError("matrix entry has " + std::to_string(data.size()) + " values for shape " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate},
                   {"cluster_epoch_fraction", c.cluster_epoch_fraction},
                   {"ablation", to_string(c.ablation)},
                   {"seed", c.seed},
                   {"sample_cap", c.kernel.sample_cap},
                   {"patience", c.patience},
                   {"hidden", c.hidden},
                   {"embed", c.embed},
                   {"attention", c.attention},
                   {"normalize_adjacency", c.normalize_adjacency},
                   {"tied_channels", c.tied_channels}};
  j["k"] = c.k ? nlohmann::json(*c.k) : nlohmann::json(nullptr);
  j["sigma"] = c.kernel.sigma ? nlohmann::json(*c.kernel.sigma) : nlohmann::json(nullptr);
  return j;
}

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") base.epochs = v.get<std::size_t>();
      else if (key == "batch_size") base.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate") base.learning_rate = v.get<double>();
      else if (key == "cluster_epoch_fraction") base.cluster_epoch_fraction = v.get<double>();
      else if (key == "ablation") base.ablation = parse_ablation(v.get<std::string>());
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "sample_cap") base.kernel.sample_cap = v.get<std::size_t>();
      else if (key == "patience") base.patience = v.get<std::size_t>();
      else if (key == "hidden") base.hidden = v.get<std::size_t>();
      else if (key == "embed") base.embed = v.get<std::size_t>();
      else if (key == "attention") base.attention = v.get<std::size_t>();
      else if (key == "normalize_adjacency") base.normalize_adjacency = v.get<bool>();
      else if (key == "tied_channels") base.tied_channels = v.get<bool>();
      else if (key == "k") base.k = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
      else if (key == "sigma") base.kernel.sigma = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return base;
}

inline nlohmann::json to_json(const NormalizationStats& s) {
  return {{"dynamic_mean", s.dynamic_mean}, {"dynamic_std", s.dynamic_std},
          {"static_mean", s.static_mean},   {"static_std", s.static_std}};
}

inline NormalizationStats normalization_from_json(const nlohmann::json& j) {
  return {j.at("dynamic_mean").get<std::vector<double>>(), j.at("dynamic_std").get<std::vector<double>>(),
          j.at("static_mean").get<std::vector<double>>(), j.at("static_std").get<std::vector<double>>()};
}

inline nlohmann::json to_json(const ClusterAssignment& a) { return a.groups(); }

inline nlohmann::json to_json(const EpochRecord& e) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"val_auroc", opt(e.val_auroc)},
          {"val_auprc", opt(e.val_auprc)},
          {"val_min_p_se", opt(e.val_min_p_se)},
          {"regraphed", e.regraphed},
          {"sigma", e.sigma},
          {"assignment", to_json(e.assignment)},
          {"adjacency", to_json(e.graph.adjacency)}};
}

inline nlohmann::json history_to_json(const std::vector<EpochRecord>& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : h) arr.push_back(to_json(e));
  return arr;
}

/// Everything needed to reproduce predictions: config, names, training
/// normalization, parameters, the frozen R, assignment and adjacency.
inline nlohmann::json checkpoint_to_json(const TrainedModel& m) {
  nlohmann::json params = nlohmann::json::object();
  m.params.for_each([&](const std::string& name, const Matrix& x) { params[name] = to_json(x); });
  nlohmann::json j{{"format_version", kCheckpointVersion},
                   {"config", to_json(m.config)},
                   {"dims",
                    {{"features", m.dims.features},
                     {"statics", m.dims.statics},
                     {"hidden", m.dims.hidden},
                     {"embed", m.dims.embed},
                     {"attention", m.dims.attention}}},
                   {"dynamic_names", m.dynamic_names},
                   {"static_names", m.static_names},
                   {"best_epoch", m.best_epoch},
                   {"params", params},
                   {"correlation", {{"sigma", m.correlation.sigma}, {"r", to_json(m.correlation.r)}}},
                   {"assignment", to_json(m.assignment)},
                   {"adjacency", to_json(m.graph.adjacency)}};
  j["normalization"] = m.normalization ? to_json(*m.normalization) : nlohmann::json(nullptr);
  return j;
}

inline TrainedModel checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("unsupported checkpoint format_version " + std::to_string(version));
    TrainedModel m;
    m.config = config_from_json(j.at("config"));
    const auto& d = j.at("dims");
    m.dims = {d.at("features").get<std::size_t>(), d.at("statics").get<std::size_t>(), d.at("hidden").get<std::size_t>(),
              d.at("embed").get<std::size_t>(), d.at("attention").get<std::size_t>()};
    m.dynamic_names = j.at("dynamic_names").get<std::vector<std::string>>();
    m.static_names = j.at("static_names").get<std::vector<std::string>>();
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    m.params = init_model(m.dims, 0);
    const auto& params = j.at("params");
    m.params.for_each([&](const std::string& name, Matrix& x) {
      if (!params.contains(name)) throw FormatError("checkpoint is missing parameter '" + name + "'");
      Matrix loaded = matrix_from_json(params.at(name));
      if (loaded.rows() != x.rows() || loaded.cols() != x.cols())
        throw FormatError("checkpoint parameter '" + name + "' is " + loaded.shape() + ", expected " + x.shape());
      x = std::move(loaded);
    });
    m.correlation = {matrix_from_json(j.at("correlation").at("r")), j.at("correlation").at("sigma").get<double>()};
    m.assignment = ClusterAssignment(j.at("assignment").get<std::vector<std::vector<std::size_t>>>());
    m.assignment.validate(m.dims.features);
    m.graph = {matrix_from_json(j.at("adjacency"))};
    if (m.graph.adjacency.rows() != m.dims.features + 1 || m.graph.adjacency.cols() != m.dims.features + 1)
      throw FormatError("checkpoint adjacency is " + m.graph.adjacency.shape());
    if (!j.at("normalization").is_null()) m.normalization = normalization_from_json(j.at("normalization"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline void save_checkpoint(const TrainedModel& m, const std::filesystem::path& path) {
  write_json_file(path, checkpoint_to_json(m));
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

/// Normalizes a raw cohort with the checkpoint's training statistics after
/// checking the feature names match.
inline Cohort prepare_for(const TrainedModel& m, const Cohort& raw) {
  if (raw.dynamic_names != m.dynamic_names || raw.static_names != m.static_names)
    throw ValidationError("data columns do not match the checkpoint's feature names");
  if (!m.normalization) throw ValidationError("checkpoint carries no normalization statistics");
  return apply_normalization(raw, *m.normalization);
}

}  // namespace medfact
