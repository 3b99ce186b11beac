#include "ocl/cohort.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "ocl/errors.hpp"
#include "ocl/io.hpp"

namespace ocl {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line_no, std::size_t column) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError(fmt::format("line {}: column {} is not a finite number: '{}'", line_no,
                                 column + 1, field));
  }
  return value;
}

}  // namespace

void Manifest::validate() const {
  if (modalities.size() < 2) throw ConfigError("manifest needs at least 2 modalities");
  if (labels.size() < 2) throw ConfigError("manifest needs at least 2 labels");
  if (num_rois < 1) throw ConfigError("manifest needs at least 1 ROI");
  if (std::set<std::string>(modalities.begin(), modalities.end()).size() != modalities.size()) {
    throw ConfigError("manifest modality names must be unique");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw ConfigError("manifest label names must be unique");
  }
}

std::size_t Manifest::modality_index(std::string_view name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i] == name) return i;
  }
  throw ParseError(fmt::format("unknown modality '{}'", name));
}

std::size_t Manifest::label_index(std::string_view name) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == name) return i;
  }
  throw ParseError(fmt::format("unknown label '{}'", name));
}

std::string Manifest::to_json() const {
  json j;
  j["modalities"] = modalities;
  j["num_rois"] = num_rois;
  j["labels"] = labels;
  return j.dump(2) + "\n";
}

std::string Manifest::fingerprint() const {
  json j;
  j["modalities"] = modalities;
  j["num_rois"] = num_rois;
  j["labels"] = labels;
  return sha256_hex(j.dump());
}

Manifest Manifest::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("manifest is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ParseError("manifest must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "modalities" && key != "num_rois" && key != "labels") {
      throw ParseError(fmt::format("unknown manifest key '{}'", key));
    }
  }
  Manifest m;
  try {
    m.modalities = j.at("modalities").get<std::vector<std::string>>();
    m.num_rois = j.at("num_rois").get<std::size_t>();
    m.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed manifest: {}", e.what()));
  }
  m.validate();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return Manifest::from_json(read_file(path));
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_file(path, manifest.to_json());
}

std::size_t Subject::observed_count() const {
  std::size_t n = 0;
  for (const auto& f : features) n += f.has_value() ? 1 : 0;
  return n;
}

void Cohort::validate() const {
  manifest.validate();
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (!ids.insert(s.id).second) throw ParseError(fmt::format("duplicate subject '{}'", s.id));
    if (s.label >= manifest.num_labels()) {
      throw LabelError(fmt::format("subject '{}' has label index {}", s.id, s.label));
    }
    if (s.features.size() != manifest.num_modalities()) {
      throw DimensionError(fmt::format("subject '{}' has {} modality slots", s.id,
                                       s.features.size()));
    }
    if (s.observed_count() == 0) {
      throw CoverageError(fmt::format("subject '{}' has no observed modality", s.id));
    }
    for (const auto& f : s.features) {
      if (!f) continue;
      if (f->size() != manifest.num_rois) {
        throw DimensionError(fmt::format("subject '{}' has a feature vector of length {}",
                                         s.id, f->size()));
      }
      for (double v : *f) {
        if (!std::isfinite(v)) throw NumericError(fmt::format("subject '{}' has non-finite features", s.id));
      }
    }
  }
}

std::size_t Cohort::missing_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.features.size() - s.observed_count();
  return n;
}

std::size_t Cohort::observed_count(std::size_t modality) const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.has(modality) ? 1 : 0;
  return n;
}

std::vector<std::size_t> Cohort::complete_case_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].complete()) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> Cohort::find(std::string_view subject_id) const {
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].id == subject_id) return i;
  }
  return std::nullopt;
}

Cohort parse_cohort(std::string_view text, const Manifest& manifest) {
  manifest.validate();
  Cohort cohort;
  cohort.manifest = manifest;
  std::unordered_map<std::string, std::size_t> index;

  const std::size_t expected_columns = 3 + manifest.num_rois;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (!header_seen) {
      header_seen = true;
      bool ok = fields.size() == expected_columns && fields[0] == "subject_id" &&
                fields[1] == "label" && fields[2] == "modality";
      for (std::size_t q = 0; ok && q < manifest.num_rois; ++q) {
        ok = fields[3 + q] == fmt::format("q_{}", q);
      }
      if (!ok) {
        throw ParseError(fmt::format(
            "line 1: header does not match manifest (expected subject_id,label,modality,q_0..q_{})",
            manifest.num_rois - 1));
      }
      continue;
    }
    if (fields.size() != expected_columns) {
      throw ParseError(fmt::format("line {}: expected {} columns, found {}", line_no,
                                   expected_columns, fields.size()));
    }
    std::size_t label = 0;
    std::size_t modality = 0;
    try {
      label = manifest.label_index(fields[1]);
      modality = manifest.modality_index(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("line {}: {}", line_no, e.what()));
    }
    if (fields[0].empty()) throw ParseError(fmt::format("line {}: empty subject_id", line_no));
    std::vector<double> values(manifest.num_rois);
    for (std::size_t q = 0; q < manifest.num_rois; ++q) {
      values[q] = parse_number(fields[3 + q], line_no, 3 + q);
    }

    const std::string id(fields[0]);
    auto [it, inserted] = index.try_emplace(id, cohort.subjects.size());
    if (inserted) {
      Subject s;
      s.id = id;
      s.label = label;
      s.features.resize(manifest.num_modalities());
      cohort.subjects.push_back(std::move(s));
    }
    Subject& subject = cohort.subjects[it->second];
    if (subject.label != label) {
      throw ParseError(fmt::format("line {}: subject '{}' has conflicting labels", line_no, id));
    }
    if (subject.features[modality]) {
      throw ParseError(fmt::format("line {}: duplicate row for subject '{}' modality '{}'",
                                   line_no, id, fields[2]));
    }
    subject.features[modality] = std::move(values);
  }
  if (!header_seen) throw ParseError("features file is empty");
  return cohort;
}

Cohort load_cohort(const std::filesystem::path& features_path, const Manifest& manifest) {
  return parse_cohort(read_file(features_path), manifest);
}

Cohort load_cohort(const std::filesystem::path& features_path,
                   const std::filesystem::path& manifest_path) {
  return load_cohort(features_path, load_manifest(manifest_path));
}

std::string format_number(double value) { return fmt::format("{}", value); }

std::string format_cohort(const Cohort& cohort) {
  const Manifest& m = cohort.manifest;
  std::string out = "subject_id,label,modality";
  for (std::size_t q = 0; q < m.num_rois; ++q) out += fmt::format(",q_{}", q);
  out += '\n';
  for (const auto& s : cohort.subjects) {
    for (std::size_t t = 0; t < s.features.size(); ++t) {
      if (!s.features[t]) continue;
      out += s.id;
      out += ',';
      out += m.labels.at(s.label);
      out += ',';
      out += m.modalities.at(t);
      for (double v : *s.features[t]) {
        out += ',';
        out += format_number(v);
      }
      out += '\n';
    }
  }
  return out;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  write_file(path, format_cohort(cohort));
}

NormStats standardization_stats(const Cohort& cohort,
                                std::span<const std::size_t> train_subjects) {
  const std::size_t s_count = cohort.manifest.num_modalities();
  const std::size_t q_count = cohort.manifest.num_rois;
  NormStats stats;
  stats.mean.assign(s_count, std::vector<double>(q_count, 0.0));
  stats.stddev.assign(s_count, std::vector<double>(q_count, 0.0));
  for (std::size_t t = 0; t < s_count; ++t) {
    std::size_t n = 0;
    for (std::size_t k : train_subjects) {
      const auto& f = cohort.subjects.at(k).features[t];
      if (!f) continue;
      ++n;
      for (std::size_t q = 0; q < q_count; ++q) stats.mean[t][q] += (*f)[q];
    }
    if (n < 2) {
      throw CoverageError(fmt::format("modality '{}' has {} training observations (need >= 2)",
                                      cohort.manifest.modalities[t], n));
    }
    for (double& v : stats.mean[t]) v /= static_cast<double>(n);
    for (std::size_t k : train_subjects) {
      const auto& f = cohort.subjects[k].features[t];
      if (!f) continue;
      for (std::size_t q = 0; q < q_count; ++q) {
        const double d = (*f)[q] - stats.mean[t][q];
        stats.stddev[t][q] += d * d;
      }
    }
    for (double& v : stats.stddev[t]) {
      v = std::max(std::sqrt(v / static_cast<double>(n - 1)), kStdFloor);
    }
  }
  return stats;
}

}  // namespace ocl
