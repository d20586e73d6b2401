#include "degfair/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

namespace degfair::io {

using nlohmann::json;

namespace {

json meta_to_json(const ModelMeta& m) {
  return json{{"feature_dim", m.feature_dim},
              {"num_classes", m.num_classes},
              {"split_seed", m.split_seed},
              {"split_ratios", m.split_ratios}};
}

ModelMeta meta_from_json(const json& j) {
  ModelMeta m;
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  m.num_classes = j.at("num_classes").get<std::size_t>();
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  m.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  return m;
}

std::string expect_prefix(std::istream& in, const std::string& prefix) {
  std::string line;
  if (!std::getline(in, line)) throw CorruptFileError("model file truncated before '" + prefix + "'");
  if (line.rfind(prefix + " ", 0) != 0) {
    throw CorruptFileError("model file: expected '" + prefix + "' line");
  }
  return line.substr(prefix.size() + 1);
}

}  // namespace

void save_model(const std::filesystem::path& path, const model::ModelParams& params,
                const train::TrainConfig& config, const ModelMeta& meta) {
  std::ofstream out(path);
  if (!out) throw CorruptFileError("cannot write model file " + path.string());
  out << "degfair-model " << kModelFormatVersion << '\n';
  out << "config " << train::to_json(config).dump() << '\n';
  out << "meta " << meta_to_json(meta).dump() << '\n';
  auto copy = params;
  char buf[40];
  for (const auto& ref : copy.named(config.model.base)) {
    const ad::Matrix& m = ref.tensor->value;
    out << "tensor " << ref.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", m(r, c));
        out << (c == 0 ? "" : " ") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw CorruptFileError("failed writing model file " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFileError("cannot open model file " + path.string());

  std::string header;
  if (!std::getline(in, header) || header.rfind("degfair-model ", 0) != 0) {
    throw CorruptFileError("not a degfair model file: " + path.string());
  }
  if (header != "degfair-model " + std::to_string(kModelFormatVersion)) {
    throw VersionMismatchError("unsupported model format '" + header.substr(14) + "' (expected " +
                               std::to_string(kModelFormatVersion) + ")");
  }

  SavedModel saved;
  try {
    train::apply_json(json::parse(expect_prefix(in, "config")), saved.config);
    saved.meta = meta_from_json(json::parse(expect_prefix(in, "meta")));
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("model file header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptFileError(std::string("model file config: ") + e.what());
  }

  // Build the expected layout, then fill it by name.
  std::mt19937_64 rng(0);
  const auto dims =
      model::layer_dims(saved.config.model, saved.meta.feature_dim, saved.meta.num_classes);
  saved.params = train::init_params(saved.config.model, dims, rng);
  std::map<std::string, ad::Tensor*> slots;
  for (const auto& ref : saved.params.named(saved.config.model.base)) slots[ref.name] = ref.tensor;

  std::string line;
  while (true) {
    if (!std::getline(in, line)) throw CorruptFileError("model file truncated (missing 'end')");
    if (line == "end") break;
    std::istringstream head(line);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "tensor") {
      throw CorruptFileError("model file: malformed tensor header '" + line + "'");
    }
    auto it = slots.find(name);
    if (it == slots.end()) throw CorruptFileError("model file: unexpected tensor " + name);
    ad::Matrix& m = it->second->value;
    if (m.rows() != rows || m.cols() != cols) {
      throw CorruptFileError("model file: tensor " + name + " has the wrong shape");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw CorruptFileError("model file truncated inside " + name);
      const char* p = line.c_str();
      for (std::size_t c = 0; c < cols; ++c) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p) throw CorruptFileError("model file: bad value in tensor " + name);
        m(r, c) = v;
        p = end;
      }
      while (*p == ' ') ++p;
      if (*p != '\0') throw CorruptFileError("model file: extra values in tensor " + name);
    }
    slots.erase(it);
  }
  if (!slots.empty()) {
    throw CorruptFileError("model file is missing tensor " + slots.begin()->first);
  }
  return saved;
}

}  // namespace degfair::io
