#include "ocl/checkpoint.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ocl/errors.hpp"

namespace ocl {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) {
    throw ParseError(fmt::format("weight '{}' has {} values for shape {}x{}", name, data.size(),
                                 rows, cols));
  }
  return Matrix(rows, cols, std::move(data));
}

void put_network(json& weights, const Mlp& net) {
  for (const auto& layer : net.layers()) {
    weights[layer.weight.name] = matrix_json(layer.weight.value);
    weights[layer.bias.name] = matrix_json(layer.bias.value);
  }
}

Mlp take_network(const json& weights, const std::string& prefix, std::size_t layers) {
  std::vector<DenseLayer> out;
  for (std::size_t i = 1; i <= layers; ++i) {
    const std::string base = fmt::format("{}.layer{}", prefix, i);
    const std::string w = base + ".weight";
    const std::string b = base + ".bias";
    if (!weights.contains(w) || !weights.contains(b)) {
      throw ParseError(fmt::format("checkpoint is missing weights for '{}'", base));
    }
    out.push_back(DenseLayer{Parameter{w, matrix_from(weights.at(w), w), true},
                             Parameter{b, matrix_from(weights.at(b), b), false}});
  }
  return Mlp(std::move(out));
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint, const Manifest& manifest) {
  json j;
  j["version"] = kCheckpointVersion;
  j["manifest_sha"] = manifest.fingerprint();
  const auto& h = checkpoint.hparams;
  j["hparams"] = json{{"tau", h.tau},
                      {"hidden_width", h.hidden_width},
                      {"embedding_dim", h.embedding_dim},
                      {"seed", h.seed},
                      {"loss_mode", h.loss_mode},
                      {"use_mc", h.use_mc},
                      {"lambda_rev", h.lambda_rev},
                      {"num_rois", manifest.num_rois}};
  json weights = json::object();
  put_network(weights, checkpoint.encoder.network());
  put_network(weights, checkpoint.decoder.network());
  put_network(weights, checkpoint.classifier.network());
  j["weights"] = std::move(weights);

  json stats = json::object();
  const auto& ns = checkpoint.encoder.stats;
  if (ns.modalities() != manifest.num_modalities()) {
    throw DimensionError("normalization statistics do not cover every manifest modality");
  }
  for (std::size_t t = 0; t < ns.modalities(); ++t) {
    stats[manifest.modalities[t]] = json{{"mean", ns.mean[t]}, {"std", ns.stddev[t]}};
  }
  j["norm_stats"] = std::move(stats);
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text, const Manifest& manifest) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("checkpoint is not valid JSON: {}", e.what()));
  }
  try {
    if (!j.is_object() || !j.contains("version")) throw ParseError("checkpoint has no version");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw VersionError(fmt::format("checkpoint version {} is not supported (expected {})",
                                     version, kCheckpointVersion));
    }
    const auto sha = j.at("manifest_sha").get<std::string>();
    if (sha != manifest.fingerprint()) {
      throw FingerprintError(
          fmt::format("checkpoint was trained for manifest {} but the current manifest is {}",
                      sha, manifest.fingerprint()));
    }

    Checkpoint c;
    c.manifest_sha = sha;
    const auto& h = j.at("hparams");
    c.hparams.tau = h.at("tau").get<double>();
    c.hparams.hidden_width = h.at("hidden_width").get<std::size_t>();
    c.hparams.embedding_dim = h.at("embedding_dim").get<std::size_t>();
    c.hparams.seed = h.at("seed").get<std::uint64_t>();
    c.hparams.loss_mode = h.at("loss_mode").get<std::string>();
    c.hparams.use_mc = h.at("use_mc").get<bool>();
    c.hparams.lambda_rev = h.at("lambda_rev").get<double>();

    NormStats stats;
    const auto& ns = j.at("norm_stats");
    for (const auto& name : manifest.modalities) {
      if (!ns.contains(name)) {
        throw ParseError(fmt::format("checkpoint has no normalization stats for '{}'", name));
      }
      stats.mean.push_back(ns.at(name).at("mean").get<std::vector<double>>());
      stats.stddev.push_back(ns.at(name).at("std").get<std::vector<double>>());
      if (stats.mean.back().size() != manifest.num_rois ||
          stats.stddev.back().size() != manifest.num_rois) {
        throw ParseError(fmt::format("normalization stats for '{}' have the wrong length", name));
      }
    }

    const auto& weights = j.at("weights");
    c.encoder = Encoder(take_network(weights, "encoder", 2), std::move(stats));
    c.decoder = Decoder(take_network(weights, "decoder", 2), manifest.num_modalities());
    c.classifier = DomainClassifier(take_network(weights, "domain_classifier", 2));
    if (c.decoder.output_dim() != manifest.num_rois ||
        c.decoder.network().inputs() != c.encoder.embedding_dim() + manifest.num_modalities() ||
        c.classifier.modalities() != manifest.num_modalities()) {
      throw ParseError("checkpoint network shapes do not match the manifest");
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  } catch (const DimensionError& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const Manifest& manifest,
                     const std::filesystem::path& path) {
  const std::string text = checkpoint_to_json(checkpoint, manifest);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    out << text;
    if (!out) throw Error(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Manifest& manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str(), manifest);
}

}  // namespace ocl
